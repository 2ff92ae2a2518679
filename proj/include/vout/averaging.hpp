#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "demod.hpp"
#include "plant.hpp"
#include "scenario.hpp"
#include "signal.hpp"
#include "sim_core.hpp"

namespace vout {

/// The injected closed loop and its averaged counterpart (no injection, exact
/// h and L_g h fed), started from the same state on the same grid.
struct PairedRun {
    Trajectory injected;
    Trajectory averaged;
    double epsilon = 0.0;
    PeriodicSignal signal;
    Plant plant;
    double transient = 0.0;  // leading interval excluded from sup-norms
    // Sup-norm differences between the averaged run at h and at h/2, per
    // residual kind: the integration/round-off floor of the comparison.
    std::array<double, 4> floor{};
};

enum ResidualKind : std::size_t { x_raw = 0, x_corrected = 1, eta = 2, y_corrected = 3 };

inline const char* residual_name(std::size_t kind) {
    static constexpr const char* names[] = {"sup_x_raw", "sup_x_corrected", "sup_eta", "sup_y_corrected"};
    return names[kind];
}

namespace detail {

inline double max_abs_diff(std::span<const double> a, std::span<const double> b, std::size_t off,
                           std::size_t len) {
    double m = 0.0;
    for (std::size_t i = off; i < off + len; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace detail

/// Pointwise residuals at sample k:
///   |x - xbar|, |x - xbar - eps g(xbar) S(t/eps)|, |eta - etabar|,
///   |y - h(xbar) - eps L_g h(xbar) S(t/eps)|   (max-norm over components).
inline std::array<double, 4> residuals_at(const PairedRun& pr, std::size_t k) {
    const auto z = pr.injected.state(k);
    const auto zb = pr.averaged.state(k);
    const auto x = z.subspan(layout::x, 3);
    const auto xb = zb.subspan(layout::x, 3);
    const double S = eval_S(pr.signal, pr.injected.times()[k] / pr.epsilon);

    std::array<double, 3> gx{};
    pr.plant.g(xb, gx);
    std::array<double, 4> r{};
    r[x_raw] = detail::max_abs_diff(z, zb, layout::x, 3);
    for (std::size_t i = 0; i < 3; ++i)
        r[x_corrected] = std::max(r[x_corrected], std::abs(x[i] - xb[i] - pr.epsilon * gx[i] * S));
    r[eta] = detail::max_abs_diff(z, zb, layout::eta, 4);
    r[y_corrected] =
        std::abs(output(pr.plant, x) - output(pr.plant, xb) - pr.epsilon * virtual_output(pr.plant, xb) * S);
    return r;
}

/// Builds a paired run from `sc`. The injected run keeps the scenario's
/// feedback source (demodulated feeds are rejected: the comparison needs the
/// exact-feed hypotheses); the averaged run has zero amplitude.
inline PairedRun make_paired_run(Scenario sc, const Plant& plant = example_plant(),
                                 bool with_floor = true) {
    if (sc.feedback == Feedback::demod_yv)
        throw std::invalid_argument("paired run: injected loop must use an exact feed");
    sc.noise.reset();
    PairedRun pr;
    pr.epsilon = sc.epsilon;
    pr.signal = sc.signal;
    pr.plant = plant;
    pr.transient = sc.n_periods * sc.epsilon;
    pr.injected = simulate_closed_loop(sc, plant);

    Scenario avg = sc;
    avg.signal.amplitude = 0.0;
    avg.feedback = Feedback::ideal_lgh;
    pr.averaged = simulate_closed_loop(avg, plant);

    if (with_floor) {
        Scenario fine = avg;
        fine.h_step = 0.5 * avg.h_step;
        const Trajectory ref = simulate_closed_loop(fine, plant);
        for (std::size_t k = 0; k < pr.averaged.size(); ++k) {
            if (pr.averaged.times()[k] < pr.transient) continue;
            const auto a = pr.averaged.state(k);
            const auto b = ref.state(2 * k);
            const double dx = detail::max_abs_diff(a, b, layout::x, 3);
            pr.floor[x_raw] = std::max(pr.floor[x_raw], dx);
            pr.floor[x_corrected] = std::max(pr.floor[x_corrected], dx);
            pr.floor[eta] = std::max(pr.floor[eta], detail::max_abs_diff(a, b, layout::eta, 4));
            pr.floor[y_corrected] =
                std::max(pr.floor[y_corrected],
                         std::abs(output(plant, a.subspan(0, 3)) - output(plant, b.subspan(0, 3))));
        }
    }
    return pr;
}

struct RippleResidual {
    double sup_x_raw = 0.0;
    double sup_x_corrected = 0.0;
    double sup_eta = 0.0;
    double sup_y_corrected = 0.0;

    std::array<double, 4> as_array() const { return {sup_x_raw, sup_x_corrected, sup_eta, sup_y_corrected}; }
};

/// Sup over the grid (after the transient) of the four residuals.
inline RippleResidual ripple_residual(const PairedRun& pr) {
    std::array<double, 4> m{};
    for (std::size_t k = 0; k < pr.injected.size(); ++k) {
        if (pr.injected.times()[k] < pr.transient) continue;
        const auto r = residuals_at(pr, k);
        for (std::size_t i = 0; i < 4; ++i) m[i] = std::max(m[i], r[i]);
    }
    return {m[0], m[1], m[2], m[3]};
}

/// Least-squares slope of log(error) against log(epsilon).
struct OrderFit {
    std::vector<double> epsilons;
    std::vector<double> errors;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double r_squared = std::numeric_limits<double>::quiet_NaN();
    bool usable = true;
    std::string note;

    bool slope_within(double target, double tol) const {
        return usable && std::isfinite(slope) && std::abs(slope - target) <= tol;
    }
};

/// Fits the convergence order. `floor` is the error level below which data
/// carries no information; any error at or below 10x the floor marks the fit
/// unusable (the slope is still reported).
inline OrderFit fit_order(std::vector<double> epsilons, std::vector<double> errors, double floor = 0.0) {
    if (epsilons.size() != errors.size()) throw std::invalid_argument("fit_order: size mismatch");
    if (epsilons.size() < 3) throw std::invalid_argument("fit_order: need at least 3 levels");
    for (std::size_t i = 1; i < epsilons.size(); ++i)
        if (!(epsilons[i] < epsilons[i - 1]))
            throw std::invalid_argument("fit_order: epsilons must be strictly decreasing");

    OrderFit fit;
    fit.epsilons = std::move(epsilons);
    fit.errors = std::move(errors);
    const std::size_t n = fit.errors.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(fit.errors[i] > 0.0) || !std::isfinite(fit.errors[i])) {
            fit.usable = false;
            fit.note = "non-positive or non-finite error";
            return fit;
        }
        if (fit.errors[i] <= 10.0 * floor) {
            fit.usable = false;
            fit.note = "error within 10x of the numerical floor";
        }
        lx[i] = std::log(fit.epsilons[i]);
        ly[i] = std::log(fit.errors[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

struct HorizonBound {
    bool diverged = false;
    double ratio = 0.0;  // worst of the per-residual ratios
    std::array<double, 4> ratios{};
    std::array<double, 4> first{};
    std::array<double, 4> last{};
};

/// Compares each residual's sup over the last `window_fraction` of the
/// horizon with its sup over the first `window_fraction` after the transient.
/// A residual whose two windows both sit within 10x its numerical floor
/// counts as ratio 1. Reports divergence instead of a ratio when states blow
/// up or a ratio exceeds 1e3.
inline HorizonBound long_horizon_bound(const PairedRun& pr, double window_fraction = 0.1) {
    if (!(window_fraction > 0.0 && window_fraction <= 0.5))
        throw std::invalid_argument("long_horizon_bound: window_fraction must be in (0, 0.5]");
    const auto& t = pr.injected.times();
    const double t_end = t.back();
    const double span = window_fraction * (t_end - t.front());
    const double first_end = pr.transient + span;
    const double last_start = t_end - span;

    HorizonBound hb;
    for (std::size_t k = 0; k < pr.injected.size(); ++k) {
        for (double v : pr.injected.state(k))
            if (!std::isfinite(v) || std::abs(v) > 1e8) hb.diverged = true;
        if (t[k] < pr.transient) continue;
        const bool in_first = t[k] <= first_end;
        const bool in_last = t[k] >= last_start;
        if (!in_first && !in_last) continue;
        const auto r = residuals_at(pr, k);
        for (std::size_t i = 0; i < 4; ++i) {
            if (!std::isfinite(r[i])) hb.diverged = true;
            if (in_first) hb.first[i] = std::max(hb.first[i], r[i]);
            if (in_last) hb.last[i] = std::max(hb.last[i], r[i]);
        }
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const double fl = 10.0 * pr.floor[i];
        if (hb.first[i] <= fl && hb.last[i] <= fl) {
            hb.ratios[i] = 1.0;
        } else if (hb.first[i] == 0.0) {
            hb.ratios[i] = std::numeric_limits<double>::infinity();
        } else {
            hb.ratios[i] = hb.last[i] / hb.first[i];
        }
        hb.ratio = std::max(hb.ratio, hb.ratios[i]);
    }
    if (!(hb.ratio <= 1e3)) hb.diverged = true;
    return hb;
}

/// Sup errors of the two demodulated estimates on a synthetic measurement
/// y = ybar(t) + eps yv(t) S(t/eps), after the warm-up.
struct EstimatorErrors {
    double ybar_vs_delayed = 0.0;  // |ybar_hat(t) - ybar(t - n eps/2)|
    double yv = 0.0;               // |yv_hat(t) - yv(t)|, delayed-residual estimator
    double yv_simple = 0.0;        // |simple estimate - yv(t)|
};

template <class Ybar, class Yv>
EstimatorErrors estimator_errors(const DemodConfig& cfg, double duration, Ybar&& ybar, Yv&& yv) {
    DemodState demod(cfg);
    const TimeGrid grid{0.0, duration, cfg.sample_step};
    const double delay = demod.ybar_delay();
    EstimatorErrors e;
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        const double t = grid.time(k);
        const double y = ybar(t) + cfg.epsilon * yv(t) * eval_S(cfg.signal, t / cfg.epsilon);
        const auto out = demod.push_sample(t, y);
        if (!out.yv_valid) continue;
        e.ybar_vs_delayed = std::max(e.ybar_vs_delayed, std::abs(out.ybar_hat - ybar(t - delay)));
        e.yv = std::max(e.yv, std::abs(out.yv_hat - yv(t)));
        e.yv_simple = std::max(e.yv_simple, std::abs(*demod.estimate_yv_simple() - yv(t)));
    }
    return e;
}

}  // namespace vout
