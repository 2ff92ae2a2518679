#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vout {

enum class Shape { square, sine };

inline std::string to_string(Shape s) { return s == Shape::square ? "square" : "sine"; }

inline Shape parse_shape(const std::string& name) {
    if (name == "square") return Shape::square;
    if (name == "sine") return Shape::sine;
    throw std::invalid_argument("unknown signal shape '" + name + "'");
}

/// Unit-period zero-mean injection waveform s(sigma) = base(sigma + phase_shift).
///
/// Base square wave is +A on [0, 1/2) and -A on [1/2, 1); base sine is A sin(2 pi u).
/// The square default phase shift 1/4 makes the zero-mean primitive vanish at 0.
struct PeriodicSignal {
    Shape shape = Shape::square;
    double amplitude = 1.0;
    double phase_shift = 0.25;

    static PeriodicSignal square(double a) { return {Shape::square, a, 0.25}; }
    static PeriodicSignal sine(double a) { return {Shape::sine, a, 0.0}; }
};

namespace detail {

inline double wrap_unit(double u) { return u - std::floor(u); }

}  // namespace detail

/// s(sigma). Square switches use half-open intervals (right-limit at a switch).
inline double eval_s(const PeriodicSignal& sig, double sigma) {
    const double u = detail::wrap_unit(sigma + sig.phase_shift);
    switch (sig.shape) {
        case Shape::square: return u < 0.5 ? sig.amplitude : -sig.amplitude;
        case Shape::sine: return sig.amplitude * std::sin(2.0 * std::numbers::pi * u);
    }
    return 0.0;
}

/// Zero-mean primitive S(sigma), closed form per shape.
inline double eval_S(const PeriodicSignal& sig, double sigma) {
    const double u = detail::wrap_unit(sigma + sig.phase_shift);
    const double a = sig.amplitude;
    switch (sig.shape) {
        case Shape::square: return u < 0.5 ? a * (u - 0.25) : a * (0.75 - u);
        case Shape::sine: return -a * std::cos(2.0 * std::numbers::pi * u) / (2.0 * std::numbers::pi);
    }
    return 0.0;
}

/// Mean of s^2 over one period.
inline double mean_square(const PeriodicSignal& sig) {
    const double a2 = sig.amplitude * sig.amplitude;
    return sig.shape == Shape::square ? a2 : 0.5 * a2;
}

/// Mean of S^2 over one period (power of the ripple carrier seen on the output).
inline double primitive_mean_square(const PeriodicSignal& sig) {
    const double a2 = sig.amplitude * sig.amplitude;
    if (sig.shape == Shape::square) return a2 / 48.0;
    return a2 / (8.0 * std::numbers::pi * std::numbers::pi);
}

/// sup |S|.
inline double primitive_sup(const PeriodicSignal& sig) {
    const double a = std::abs(sig.amplitude);
    return sig.shape == Shape::square ? 0.25 * a : a / (2.0 * std::numbers::pi);
}

struct SignalMoments {
    std::function<double(double)> S;
    double s_sq_mean = 0.0;
    double S_sq_mean = 0.0;
    double S_sup = 0.0;
};

inline SignalMoments moments(const PeriodicSignal& sig) {
    return {[sig](double sigma) { return eval_S(sig, sigma); }, mean_square(sig),
            primitive_mean_square(sig), primitive_sup(sig)};
}

}  // namespace vout
