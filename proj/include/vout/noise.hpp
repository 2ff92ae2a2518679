#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "demod.hpp"
#include "signal.hpp"
#include "sim_core.hpp"

namespace vout {

/// Band-limited white noise: a zero-order-hold Gaussian sequence whose
/// per-sample variance is power / sample_time.
struct NoiseSpec {
    double sample_time = 2e-5;
    double power = 2e-11;
    std::uint64_t seed = 1;

    double sigma() const { return std::sqrt(power / sample_time); }
};

/// Noise at every sample of `grid`, held constant over each noise sample.
inline std::vector<double> generate_noise(const NoiseSpec& spec, const TimeGrid& grid) {
    if (!(spec.sample_time > 0.0)) throw std::invalid_argument("noise.sample_time: must be > 0");
    if (spec.power < 0.0) throw std::invalid_argument("noise.power: must be >= 0");
    const long long hold = detail::exact_ratio(spec.sample_time, grid.h_step);
    if (hold <= 0)
        throw std::invalid_argument("noise.sample_time: must be an integer multiple of the step");

    const std::size_t n = grid.steps() + 1;
    std::vector<double> out(n, 0.0);
    if (spec.power == 0.0) return out;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.sigma());
    double current = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k % static_cast<std::size_t>(hold) == 0) current = normal(rng);
        out[k] = current;
    }
    return out;
}

/// Magnitude of the n-period sliding-average transfer function, |sinc(n eps w / 2)|.
struct SlidingAverageResponse {
    int n = 10;
    double epsilon = 1e-3;
};

inline double sliding_average_gain(const SlidingAverageResponse& resp, double omega) {
    const double x = 0.5 * resp.n * resp.epsilon * omega;
    if (x == 0.0) return 1.0;
    return std::abs(std::sin(x) / x);
}

struct EstimatorNoise {
    double var_ybar = 0.0;       // mean estimator
    double var_yv = 0.0;         // delayed-residual virtual-output estimator
    double var_yv_simple = 0.0;  // simple heterodyne estimator
    std::size_t samples = 0;
};

namespace detail {

struct RunningVariance {
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;

    void add(double v) {
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

}  // namespace detail

/// Feeds pure noise through the demodulator and returns the empirical output variances.
inline EstimatorNoise measure_estimator_noise(const DemodConfig& config, const NoiseSpec& spec,
                                              double duration) {
    config.validate();
    const double window = config.n_periods * config.epsilon;
    if (duration < 1000.0 * window)
        throw std::invalid_argument("noise study: duration must be >= 1000 * n * epsilon");

    const TimeGrid grid{0.0, duration, config.sample_step};
    const auto nu = generate_noise(spec, grid);
    DemodState demod(config);
    detail::RunningVariance vb, vv, vs;
    for (std::size_t k = 0; k < nu.size(); ++k) {
        const auto out = demod.push_sample(grid.time(k), nu[k]);
        if (!out.yv_valid) continue;
        vb.add(out.ybar_hat);
        vv.add(out.yv_hat);
        vs.add(*demod.estimate_yv_simple());
    }
    return {vb.variance(), vv.variance(), vs.variance(), vb.n};
}

/// White noise through a boxcar of n*eps / sample_time independent samples.
inline double predicted_var_ybar(const DemodConfig& config, const NoiseSpec& spec) {
    const double s = spec.sigma();
    return s * s * spec.sample_time / (config.n_periods * config.epsilon);
}

/// S-modulated noise is white with PSD scaled by <S^2>; the estimator divides
/// by eps <S^2>, so the variance is var_ybar / (eps^2 <S^2>).
inline double predicted_var_yv_simple(const DemodConfig& config, const NoiseSpec& spec) {
    const double carrier = primitive_mean_square(config.signal);
    return predicted_var_ybar(config, spec) / (config.epsilon * config.epsilon * carrier);
}

/// Normalised autocorrelation of S(t_j / eps) nu_j taken at the noise-sample
/// instants, for lags 0..max_lag noise samples.
inline std::vector<double> modulated_noise_autocorrelation(const PeriodicSignal& sig, double epsilon,
                                                           const NoiseSpec& spec,
                                                           std::size_t n_samples,
                                                           std::size_t max_lag) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.sigma());
    std::vector<double> z(n_samples);
    for (std::size_t j = 0; j < n_samples; ++j) {
        const double t = static_cast<double>(j) * spec.sample_time;
        z[j] = eval_S(sig, t / epsilon) * normal(rng);
    }
    std::vector<double> r(max_lag + 1, 0.0);
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        double acc = 0.0;
        for (std::size_t j = 0; j + lag < n_samples; ++j) acc += z[j] * z[j + lag];
        r[lag] = acc / static_cast<double>(n_samples - lag);
    }
    const double r0 = r[0];
    if (r0 > 0.0)
        for (auto& v : r) v /= r0;
    return r;
}

}  // namespace vout
