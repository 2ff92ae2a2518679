#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "averaging.hpp"
#include "config.hpp"
#include "noise.hpp"
#include "scenario.hpp"

namespace vout {

using Column = std::pair<std::string, std::vector<double>>;
using Metrics = std::map<std::string, double>;

struct RunResult {
    std::vector<Column> columns;
    Metrics metrics;

    const std::vector<double>& column(const std::string& name) const {
        for (const auto& c : columns)
            if (c.first == name) return c.second;
        throw std::out_of_range("RunResult: no column '" + name + "'");
    }
    std::size_t rows() const { return columns.empty() ? 0 : columns.front().second.size(); }
};

/// Event times the summary metrics are measured against.
struct MetricWindows {
    double disturbance_time = std::numeric_limits<double>::quiet_NaN();
    double disturbance_step = 0.0;  // |jump| of the first non-trivial step
    double ramp_start = 0.0;
    double t_end = 0.0;

    static MetricWindows from(const Scenario& sc) {
        MetricWindows w;
        w.t_end = sc.t_end;
        w.ramp_start = sc.reference.start_time;
        double prev = 0.0;
        for (const auto& s : sc.disturbance) {
            if (s.value != prev) {
                w.disturbance_time = s.time;
                w.disturbance_step = std::abs(s.value - prev);
                break;
            }
            prev = s.value;
        }
        return w;
    }
};

/// Summary block, computed only from the t, x1 and x1_ref columns.
///
/// settling_time: last time in the disturbance segment at which
/// |x1 - x1_ref| exceeds 2% of the disturbance step, measured from the step.
/// ramp_error_mid / ramp_error_late: sup tracking error over the two last
/// fifths of the ramp segment.
inline Metrics compute_metrics(const std::vector<double>& t, const std::vector<double>& x1,
                               const std::vector<double>& ref, const MetricWindows& w) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Metrics m;
    const double seg_end = w.ramp_start > w.disturbance_time ? w.ramp_start : w.t_end;
    const double band = 0.02 * w.disturbance_step;
    const double ramp_len = w.t_end - w.ramp_start;
    const double late_start = w.t_end - 0.2 * ramp_len;
    const double mid_start = w.t_end - 0.4 * ramp_len;

    double last_out = nan, sup_dist = 0.0, sup_ramp = 0.0, mid = 0.0, late = 0.0, sup_x1 = 0.0;
    bool has_dist = std::isfinite(w.disturbance_time);
    if (has_dist) last_out = w.disturbance_time;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double e = std::abs(x1[k] - ref[k]);
        sup_x1 = std::max(sup_x1, std::abs(x1[k]));
        if (has_dist && t[k] >= w.disturbance_time && t[k] < seg_end) {
            sup_dist = std::max(sup_dist, e);
            if (!(e <= band)) last_out = t[k];
        }
        if (ramp_len > 0.0 && t[k] >= w.ramp_start) {
            sup_ramp = std::max(sup_ramp, e);
            if (t[k] >= late_start) late = std::max(late, e);
            else if (t[k] >= mid_start) mid = std::max(mid, e);
        }
    }
    m["settling_time"] = has_dist ? last_out - w.disturbance_time : nan;
    m["sup_error_disturbance"] = has_dist ? sup_dist : nan;
    m["sup_error_ramp"] = ramp_len > 0.0 ? sup_ramp : nan;
    m["ramp_error_mid"] = ramp_len > 0.0 ? mid : nan;
    m["ramp_error_late"] = ramp_len > 0.0 ? late : nan;
    m["sup_abs_x1"] = sup_x1;
    m["final_error"] = t.empty() ? nan : std::abs(x1.back() - ref.back());
    return m;
}

inline const std::vector<std::string>& run_columns() {
    static const std::vector<std::string> names{"t",      "x1",     "x2",    "x3",    "u",     "y",
                                                "y_meas", "ybar_hat", "yv_hat", "x1_ref", "d",
                                                "xhat1",  "xhat2",  "xhat3", "dhat"};
    return names;
}

/// Full closed-loop run of a scenario with its summary metrics.
inline RunResult run_scenario(const Scenario& sc) {
    const Trajectory traj = simulate_closed_loop(sc);
    RunResult res;
    res.columns.emplace_back("t", traj.times());
    res.columns.emplace_back("x1", traj.component(layout::x + 0));
    res.columns.emplace_back("x2", traj.component(layout::x + 1));
    res.columns.emplace_back("x3", traj.component(layout::x + 2));
    for (const char* name : {"u", "y", "y_meas", "ybar_hat", "yv_hat", "x1_ref", "d"})
        res.columns.emplace_back(name, traj.column(name));
    res.columns.emplace_back("xhat1", traj.component(layout::eta + 0));
    res.columns.emplace_back("xhat2", traj.component(layout::eta + 1));
    res.columns.emplace_back("xhat3", traj.component(layout::eta + 2));
    res.columns.emplace_back("dhat", traj.component(layout::eta + 3));
    res.metrics = compute_metrics(res.column("t"), res.column("x1"), res.column("x1_ref"),
                                  MetricWindows::from(sc));
    return res;
}

namespace detail {

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Writes one header row and every `stride`-th sample, 17 significant digits.
inline void emit_csv(const std::vector<Column>& columns, const std::string& path, std::size_t stride = 1) {
    if (stride < 1) throw std::invalid_argument("emit_csv: stride must be >= 1");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j].first;
    out << '\n';
    const std::size_t rows = columns.empty() ? 0 : columns.front().second.size();
    for (std::size_t k = 0; k < rows; k += stride) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            out << (j ? "," : "") << detail::format_number(columns[j].second[k]);
        out << '\n';
    }
    if (!out) throw std::runtime_error("error while writing '" + path + "'");
}

inline void emit_csv(const RunResult& res, const std::string& path, std::size_t stride = 1) {
    emit_csv(res.columns, path, stride);
}

inline std::vector<Column> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::string line;
    std::vector<Column> cols;
    if (!std::getline(in, line)) return cols;
    for (const auto& name : detail::split(line, ",")) cols.emplace_back(name, std::vector<double>{});
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split(line, ",");
        if (cells.size() != cols.size()) throw std::runtime_error("ragged CSV row in '" + path + "'");
        for (std::size_t j = 0; j < cells.size(); ++j) cols[j].second.push_back(std::strtod(cells[j].c_str(), nullptr));
    }
    return cols;
}

/// Sidecar in the same `key = value` format as configs.
inline void write_metrics(const Metrics& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    for (const auto& [k, v] : m) out << k << " = " << detail::format_number(v) << '\n';
}

// ---------------------------------------------------------------------------
// Order study

struct OrderStudyRow {
    double epsilon = 0.0;
    RippleResidual residual;
    std::array<double, 4> floor{};
    double horizon_ratio = 0.0;
    bool horizon_diverged = false;
    EstimatorErrors estimator;
};

struct OrderStudy {
    std::vector<OrderStudyRow> rows;           // sorted by decreasing epsilon
    std::vector<std::pair<std::string, OrderFit>> fits;

    const OrderFit& fit(const std::string& name) const {
        for (const auto& f : fits)
            if (f.first == name) return f.second;
        throw std::out_of_range("OrderStudy: no fit '" + name + "'");
    }
};

/// Scenario rescaled to another injection period, keeping eps / h fixed.
inline Scenario with_epsilon(const Scenario& base, double eps) {
    Scenario sc = base;
    sc.h_step = base.h_step * (eps / base.epsilon);
    sc.epsilon = eps;
    return sc;
}

inline EstimatorErrors synthetic_estimator_errors(const DemodConfig& cfg, double duration) {
    return estimator_errors(cfg, duration, [](double t) { return std::sin(t); },
                            [](double t) { return std::cos(0.7 * t); });
}

/// Paired-run residuals and synthetic estimator errors for every epsilon,
/// with log-log slopes. Members run concurrently on up to `workers` threads;
/// the result is ordered by decreasing epsilon regardless.
inline OrderStudy run_order_study(const Scenario& base, std::vector<double> epsilons, unsigned workers = 0) {
    if (epsilons.size() < 3) throw ConfigError("sweep.epsilons", "need at least 3 values");
    std::set<double> unique(epsilons.begin(), epsilons.end());
    if (unique.size() != epsilons.size()) throw ConfigError("sweep.epsilons", "duplicate epsilon");
    std::sort(epsilons.begin(), epsilons.end(), std::greater<>());
    Scenario exact = base;
    if (exact.feedback == Feedback::demod_yv) exact.feedback = Feedback::ideal_lgh;
    for (double eps : epsilons) {
        if (!(eps > 0.0)) throw ConfigError("sweep.epsilons", "entries must be > 0");
        try {
            with_epsilon(exact, eps).validate();
        } catch (const ConfigError& e) {
            throw ConfigError("sweep.epsilons", "epsilon " + detail::format_number(eps) + ": " + e.what());
        }
    }
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());

    auto member = [&](double eps) {
        const Scenario sc = with_epsilon(exact, eps);
        OrderStudyRow row;
        row.epsilon = eps;
        const PairedRun pr = make_paired_run(sc);
        row.residual = ripple_residual(pr);
        row.floor = pr.floor;
        const HorizonBound hb = long_horizon_bound(pr);
        row.horizon_ratio = hb.ratio;
        row.horizon_diverged = hb.diverged;
        row.estimator = synthetic_estimator_errors(sc.demod_config(), sc.t_end);
        return row;
    };

    OrderStudy study;
    for (std::size_t i = 0; i < epsilons.size(); i += workers) {
        std::vector<std::future<OrderStudyRow>> batch;
        for (std::size_t j = i; j < std::min(epsilons.size(), i + workers); ++j)
            batch.push_back(std::async(std::launch::async, member, epsilons[j]));
        for (auto& f : batch) study.rows.push_back(f.get());
    }

    auto collect = [&](auto get) {
        std::vector<double> v;
        for (const auto& r : study.rows) v.push_back(get(r));
        return v;
    };
    for (std::size_t kind = 0; kind < 4; ++kind) {
        double floor = 0.0;
        for (const auto& r : study.rows) floor = std::max(floor, r.floor[kind]);
        study.fits.emplace_back(residual_name(kind),
                                fit_order(epsilons, collect([&](const OrderStudyRow& r) {
                                              return r.residual.as_array()[kind];
                                          }),
                                          floor));
    }
    study.fits.emplace_back("ybar_error", fit_order(epsilons, collect([](const OrderStudyRow& r) {
                                                        return r.estimator.ybar_vs_delayed;
                                                    })));
    study.fits.emplace_back("yv_error", fit_order(epsilons, collect([](const OrderStudyRow& r) {
                                                      return r.estimator.yv;
                                                  })));
    return study;
}

/// Estimator errors across window lengths at a fixed epsilon; the fit is
/// against n (decreasing), so the slope is the order in n.
struct WindowStudy {
    std::vector<int> n_values;
    std::vector<EstimatorErrors> errors;
    OrderFit ybar_fit;
    OrderFit yv_fit;
};

inline WindowStudy run_window_study(const Scenario& base, std::vector<int> n_values) {
    std::sort(n_values.begin(), n_values.end(), std::greater<>());
    WindowStudy ws;
    ws.n_values = n_values;
    std::vector<double> ns, eb, ev;
    for (int n : n_values) {
        DemodConfig cfg = base.demod_config();
        cfg.n_periods = n;
        ws.errors.push_back(synthetic_estimator_errors(cfg, base.t_end));
        ns.push_back(n);
        eb.push_back(ws.errors.back().ybar_vs_delayed);
        ev.push_back(ws.errors.back().yv);
    }
    ws.ybar_fit = fit_order(ns, eb);
    ws.yv_fit = fit_order(ns, ev);
    return ws;
}

// ---------------------------------------------------------------------------
// Noise study

struct NoiseStudyRow {
    int n_periods = 0;
    double amplitude = 0.0;
    EstimatorNoise measured;
    double predicted_var_ybar = 0.0;
    double predicted_var_yv_simple = 0.0;
};

struct NoiseStudy {
    std::vector<NoiseStudyRow> rows;  // (n, A), (2n, A), (n, 2A)
    RunResult clean;
    RunResult noisy;
    double sup_x1_deviation = 0.0;  // sup |x1_noisy - x1_clean|
};

inline NoiseStudy run_noise_study(const Scenario& base, double duration) {
    if (!base.noise) throw ConfigError("noise.power", "noise study needs a noise specification");
    NoiseStudy ns;
    const std::vector<std::pair<int, double>> combos{{base.n_periods, base.signal.amplitude},
                                                     {2 * base.n_periods, base.signal.amplitude},
                                                     {base.n_periods, 2.0 * base.signal.amplitude}};
    for (const auto& [n, a] : combos) {
        DemodConfig cfg = base.demod_config();
        cfg.n_periods = n;
        cfg.signal.amplitude = a;
        NoiseStudyRow row;
        row.n_periods = n;
        row.amplitude = a;
        row.measured = measure_estimator_noise(cfg, *base.noise, duration);
        row.predicted_var_ybar = predicted_var_ybar(cfg, *base.noise);
        row.predicted_var_yv_simple = predicted_var_yv_simple(cfg, *base.noise);
        ns.rows.push_back(row);
    }
    Scenario clean = base;
    clean.noise.reset();
    ns.clean = run_scenario(clean);
    ns.noisy = run_scenario(base);
    const auto& a = ns.clean.column("x1");
    const auto& b = ns.noisy.column("x1");
    for (std::size_t k = 0; k < a.size(); ++k)
        ns.sup_x1_deviation = std::max(ns.sup_x1_deviation, std::abs(a[k] - b[k]));
    return ns;
}

}  // namespace vout
