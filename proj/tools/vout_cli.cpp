// Scenario runner: `vout run|sweep|noise <config> <outdir>`.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <vout/experiment.hpp>

namespace fs = std::filesystem;
using namespace vout;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

std::string num(double v) { return detail::format_number(v); }

void prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
}

int cmd_run(const Config& cfg, const std::string& out) {
    const RunResult res = run_scenario(cfg.scenario);
    emit_csv(res, out + "/run.csv", cfg.scenario.stride);
    write_metrics(res.metrics, out + "/run.metrics");
    for (const auto& [k, v] : res.metrics) std::cout << k << " = " << num(v) << '\n';
    return 0;
}

int cmd_sweep(const Config& cfg, const std::string& out) {
    const OrderStudy study = run_order_study(cfg.scenario, cfg.study.epsilons);
    const WindowStudy window = run_window_study(cfg.scenario, cfg.study.n_values);

    std::vector<Column> cols{{"epsilon", {}},        {"sup_x_raw", {}},  {"sup_x_corrected", {}},
                             {"sup_eta", {}},        {"sup_y_corrected", {}}, {"floor_eta", {}},
                             {"horizon_ratio", {}},  {"ybar_error", {}}, {"yv_error", {}},
                             {"yv_simple_error", {}}};
    for (const auto& r : study.rows) {
        const auto res = r.residual.as_array();
        const double vals[] = {r.epsilon, res[0], res[1], res[2], res[3], r.floor[eta],
                               r.horizon_diverged ? std::nan("") : r.horizon_ratio,
                               r.estimator.ybar_vs_delayed, r.estimator.yv, r.estimator.yv_simple};
        for (std::size_t j = 0; j < cols.size(); ++j) cols[j].second.push_back(vals[j]);
    }
    emit_csv(cols, out + "/sweep.csv");

    std::vector<Column> wcols{{"n_periods", {}}, {"ybar_error", {}}, {"yv_error", {}}, {"yv_simple_error", {}}};
    for (std::size_t i = 0; i < window.n_values.size(); ++i) {
        wcols[0].second.push_back(window.n_values[i]);
        wcols[1].second.push_back(window.errors[i].ybar_vs_delayed);
        wcols[2].second.push_back(window.errors[i].yv);
        wcols[3].second.push_back(window.errors[i].yv_simple);
    }
    emit_csv(wcols, out + "/window.csv");

    Metrics m;
    for (const auto& [name, fit] : study.fits) {
        m["slope_eps." + name] = fit.slope;
        m["usable_eps." + name] = fit.usable ? 1.0 : 0.0;
    }
    m["slope_n.ybar_error"] = window.ybar_fit.slope;
    m["slope_n.yv_error"] = window.yv_fit.slope;
    write_metrics(m, out + "/sweep.metrics");
    for (const auto& [k, v] : m) std::cout << k << " = " << num(v) << '\n';
    return 0;
}

int cmd_noise(const Config& cfg, const std::string& out) {
    const NoiseStudy ns = run_noise_study(cfg.scenario, cfg.study.noise_duration);
    std::vector<Column> cols{{"n_periods", {}},     {"amplitude", {}},         {"var_ybar", {}},
                             {"pred_var_ybar", {}}, {"var_yv", {}},            {"var_yv_simple", {}},
                             {"pred_var_yv_simple", {}}};
    for (const auto& r : ns.rows) {
        const double vals[] = {double(r.n_periods), r.amplitude, r.measured.var_ybar, r.predicted_var_ybar,
                               r.measured.var_yv, r.measured.var_yv_simple, r.predicted_var_yv_simple};
        for (std::size_t j = 0; j < cols.size(); ++j) cols[j].second.push_back(vals[j]);
    }
    emit_csv(cols, out + "/noise.csv");
    emit_csv(ns.noisy, out + "/noisy_run.csv", cfg.scenario.stride);
    Metrics m = ns.noisy.metrics;
    m["sup_x1_deviation_from_clean"] = ns.sup_x1_deviation;
    write_metrics(m, out + "/noise.metrics");
    for (const auto& [k, v] : m) std::cout << k << " = " << num(v) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-frequency injection virtual-output laboratory"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    auto add_verb = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "scenario config (key = value)")->required();
        sub->add_option("outdir", out_dir, "output directory")->required();
        return sub;
    };
    auto* run = add_verb("run", "simulate one scenario");
    auto* sweep = add_verb("sweep", "order-of-convergence study over epsilon and n");
    auto* noise = add_verb("noise", "estimator noise study and noisy closed loop");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        const Config cfg = load_config(config_path);
        prepare_dir(out_dir);
        if (run->parsed()) return cmd_run(cfg, out_dir);
        if (sweep->parsed()) return cmd_sweep(cfg, out_dir);
        if (noise->parsed()) return cmd_noise(cfg, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
