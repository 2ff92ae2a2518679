#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "control.hpp"
#include "demod.hpp"
#include "noise.hpp"
#include "plant.hpp"
#include "signal.hpp"
#include "sim_core.hpp"

namespace vout {

/// What the observer receives as its virtual measurement.
enum class Feedback {
    demod_yv,   // demodulated estimate from the measured output
    true_x1,    // the (unavailable) state x1
    ideal_lgh,  // analytic L_g h of the current plant state
};

inline std::string to_string(Feedback f) {
    switch (f) {
        case Feedback::demod_yv: return "demod_yv";
        case Feedback::true_x1: return "true_x1";
        case Feedback::ideal_lgh: return "ideal_lgh";
    }
    return "?";
}

inline Feedback parse_feedback(const std::string& s) {
    if (s == "demod_yv") return Feedback::demod_yv;
    if (s == "true_x1") return Feedback::true_x1;
    if (s == "ideal_lgh") return Feedback::ideal_lgh;
    throw std::invalid_argument("unknown feedback source '" + s + "'");
}

struct DisturbanceStep {
    double time = 0.0;
    double value = 0.0;
};

/// x1_ref = initial + slope * max(0, t - start_time), then a first-order
/// unity-gain low-pass with time constant 1 / (2 pi bandwidth). A zero
/// bandwidth disables the filter.
struct Reference {
    double initial = 0.0;
    double start_time = 14.0;
    double slope = 1.0;
    double filter_bandwidth_hz = 1.0;

    double raw(double t) const { return initial + (t > start_time ? slope * (t - start_time) : 0.0); }
    double time_constant() const { return 1.0 / (2.0 * std::numbers::pi * filter_bandwidth_hz); }
};

/// Field-level configuration error.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& field, const std::string& msg)
        : std::invalid_argument(field + ": " + msg), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct Scenario {
    double epsilon = 1e-3;
    PeriodicSignal signal = PeriodicSignal::square(1.0);
    int n_periods = 10;
    double h_step = 1e-5;
    double t_end = 20.0;
    std::vector<DisturbanceStep> disturbance{{2.0, -2.0}};
    Reference reference;
    std::optional<NoiseSpec> noise;
    Feedback feedback = Feedback::demod_yv;
    ControllerObserver gains = example_controller_observer();
    std::size_t stride = 1;  // CSV decimation only

    DemodConfig demod_config() const { return {epsilon, n_periods, h_step, signal}; }

    double disturbance_at(double t) const {
        double d = 0.0;
        for (const auto& s : disturbance)
            if (s.time <= t) d = s.value;
        return d;
    }

    /// Checks every invariant up front; throws ConfigError naming the field.
    void validate() const {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon", "must be > 0");
        if (!std::isfinite(signal.amplitude)) throw ConfigError("signal.amplitude", "must be finite");
        if (n_periods < 1) throw ConfigError("n_periods", "must be >= 1");
        if (!(h_step > 0.0) || !std::isfinite(h_step)) throw ConfigError("h_step", "must be > 0");
        if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end", "must be > 0");
        if (detail::exact_ratio(t_end, h_step) <= 0)
            throw ConfigError("t_end", "must be an integer multiple of h_step");
        if (detail::exact_ratio(epsilon / 4.0, h_step) <= 0)
            throw ConfigError("h_step", "must divide epsilon/4 exactly");
        for (const auto& s : disturbance) {
            if (!(s.time >= 0.0) || !std::isfinite(s.time))
                throw ConfigError("disturbance", "step time must be >= 0");
            if (!std::isfinite(s.value)) throw ConfigError("disturbance", "value must be finite");
            if (detail::exact_ratio(s.time, h_step) < 0)
                throw ConfigError("disturbance", "step time must lie on the integration grid");
        }
        if (!(reference.start_time >= 0.0) || !std::isfinite(reference.start_time))
            throw ConfigError("reference.start_time", "must be >= 0");
        if (detail::exact_ratio(reference.start_time, h_step) < 0)
            throw ConfigError("reference.start_time", "must lie on the integration grid");
        if (!(reference.filter_bandwidth_hz >= 0.0))
            throw ConfigError("reference.filter_bandwidth_hz", "must be >= 0");
        if (!std::isfinite(reference.slope)) throw ConfigError("reference.slope", "must be finite");
        if (noise) {
            if (!(noise->sample_time > 0.0)) throw ConfigError("noise.sample_time", "must be > 0");
            if (detail::exact_ratio(noise->sample_time, h_step) <= 0)
                throw ConfigError("noise.sample_time", "must be an integer multiple of h_step");
            if (!(noise->power >= 0.0)) throw ConfigError("noise.power", "must be >= 0");
        }
        if (stride < 1) throw ConfigError("output.stride", "must be >= 1");
    }
};

/// State layout of the closed loop: plant (3), compensator (4), reference filter (1).
namespace layout {
inline constexpr std::size_t x = 0;
inline constexpr std::size_t eta = 3;
inline constexpr std::size_t ref = 7;
inline constexpr std::size_t dim = 8;
}  // namespace layout

/// Simulates the example closed loop with injection
///   u = -K eta + k x1_ref + s(t/eps),  eta' = M eta + N x1_ref + L y_v,fed.
///
/// Sampled quantities hold over each step [t_k, t_k+1): the disturbance and
/// the square wave are latched at the step midpoint (they switch only on
/// step boundaries), and the demodulator consumes y(t_k) and emits its
/// estimate for the step. Until the demodulator is warm the observer
/// innovation is held at zero.
///
/// Probe columns: u, u_base, y, y_meas, ybar_hat, yv_hat, yv_valid, x1_ref, d.
inline Trajectory simulate_closed_loop(const Scenario& sc, const Plant& plant = example_plant()) {
    sc.validate();
    const TimeGrid grid{0.0, sc.t_end, sc.h_step};
    const InjectedControlLaw law{sc.signal, sc.epsilon};
    const std::vector<double> noise =
        sc.noise ? generate_noise(*sc.noise, grid) : std::vector<double>(grid.steps() + 1, 0.0);
    const bool filtered = sc.reference.filter_bandwidth_hz > 0.0;
    const double tau = filtered ? sc.reference.time_constant() : 1.0;

    DemodState demod(sc.demod_config());
    struct Latched {
        double d = 0.0;
        double s = 0.0;
        double y_meas = 0.0;
        DemodOutput est;
    } latched;

    auto reference_of = [&](double t, std::span<const double> z) {
        return filtered ? z[layout::ref] : sc.reference.raw(t);
    };
    auto feed_of = [&](std::span<const double> z) {
        switch (sc.feedback) {
            case Feedback::demod_yv:
                return latched.est.yv_valid ? latched.est.yv_hat : z[layout::eta];
            case Feedback::true_x1: return z[layout::x];
            case Feedback::ideal_lgh: return virtual_output(plant, z.subspan(layout::x, 3));
        }
        return 0.0;
    };

    std::vector<double> gx(3), fx(3);
    auto rhs = [&](double t, std::span<const double> z, std::span<double> dz) {
        const double r = reference_of(t, z);
        dz[layout::ref] = filtered ? (sc.reference.raw(t) - z[layout::ref]) / tau : 0.0;
        const auto comp = compensator_step(sc.gains, z.subspan(layout::eta, 4), feed_of(z), r);
        const double u = comp.u + latched.s;
        const auto x = z.subspan(layout::x, 3);
        plant.f(x, latched.d, fx);
        plant.g(x, gx);
        for (std::size_t i = 0; i < 3; ++i) dz[layout::x + i] = fx[i] + gx[i] * u;
        for (std::size_t i = 0; i < 4; ++i) dz[layout::eta + i] = comp.eta_dot[i];
    };

    auto before_sample = [&](std::size_t k, double t, std::span<const double> z) {
        const double mid = t + 0.5 * sc.h_step;
        latched.d = sc.disturbance_at(mid);
        latched.s = injected_control(law, mid, 0.0);
        latched.y_meas = output(plant, z.subspan(layout::x, 3)) + noise[k];
        latched.est = demod.push_sample(t, latched.y_meas);
    };

    const std::vector<Probe> probes{
        {"u_base", [&](double t, std::span<const double> z) {
             return compensator_step(sc.gains, z.subspan(layout::eta, 4), feed_of(z), reference_of(t, z)).u;
         }},
        {"u", [&](double t, std::span<const double> z) {
             return compensator_step(sc.gains, z.subspan(layout::eta, 4), feed_of(z), reference_of(t, z)).u +
                    latched.s;
         }},
        {"y", [&](double, std::span<const double> z) { return output(plant, z.subspan(layout::x, 3)); }},
        {"y_meas", [&](double, std::span<const double>) { return latched.y_meas; }},
        {"ybar_hat", [&](double, std::span<const double>) { return latched.est.ybar_hat; }},
        {"yv_hat", [&](double, std::span<const double>) { return latched.est.yv_hat; }},
        {"yv_valid", [&](double, std::span<const double>) { return latched.est.yv_valid ? 1.0 : 0.0; }},
        {"x1_ref", [&](double t, std::span<const double> z) { return reference_of(t, z); }},
        {"d", [&](double, std::span<const double>) { return latched.d; }},
    };

    StateVector z0(layout::dim, 0.0);
    z0[layout::ref] = sc.reference.raw(0.0);
    return simulate(rhs, grid, std::move(z0), std::span<const Probe>(probes), before_sample);
}

}  // namespace vout
