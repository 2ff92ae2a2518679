#pragma once

#include <array>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "signal.hpp"

namespace vout {

using Complex = std::complex<double>;

/// Monic characteristic polynomial prod (s - p_i), returned as the real
/// coefficients below the leading one, highest degree first:
/// s^n + c[0] s^(n-1) + ... + c[n-1].
/// Rejects pole sets that are not closed under conjugation.
inline std::vector<double> characteristic_polynomial(std::span<const Complex> poles) {
    const double tol = 1e-9;
    std::vector<bool> used(poles.size(), false);
    for (std::size_t i = 0; i < poles.size(); ++i) {
        if (used[i]) continue;
        const double scale = std::max(1.0, std::abs(poles[i]));
        if (std::abs(poles[i].imag()) <= tol * scale) {
            used[i] = true;
            continue;
        }
        bool found = false;
        for (std::size_t j = i + 1; j < poles.size(); ++j) {
            if (!used[j] && std::abs(poles[j] - std::conj(poles[i])) <= tol * scale) {
                used[i] = used[j] = true;
                found = true;
                break;
            }
        }
        if (!found) throw std::invalid_argument("pole set is not closed under conjugation");
    }

    std::vector<Complex> c{1.0};
    for (const auto& p : poles) {
        std::vector<Complex> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= p * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> out;
    for (std::size_t i = 1; i < c.size(); ++i) out.push_back(c[i].real());
    return out;
}

namespace detail {

inline void require_stable(std::span<const Complex> poles) {
    for (const auto& p : poles)
        if (!(p.real() < 0.0)) throw std::invalid_argument("pole not in the open left half-plane");
}

}  // namespace detail

/// State feedback on (x1, x2, x3, d) plus reference feed-forward.
struct ControllerGains {
    double k1 = 0.0, k2 = 0.0, k3 = 0.0;
    double kd = 1.0;
    double k_ref = 0.0;
};

/// Output-injection gains of the disturbance-augmented chain observer.
struct ObserverGains {
    double l1 = 0.0, l2 = 0.0, l3 = 0.0, ld = 0.0;
};

/// Gains for the integrator chain so that s^3 + k3 s^2 + k2 s + k1 has the
/// requested roots. kd = 1 cancels the estimated disturbance; k_ref = k1 gives
/// unit DC gain from the reference to x1.
inline ControllerGains controller_gains_from_polynomial(std::span<const double> c) {
    if (c.size() != 3) throw std::invalid_argument("controller polynomial must have degree 3");
    return {c[2], c[1], c[0], 1.0, c[2]};
}

inline ControllerGains place_controller_poles(const std::array<Complex, 3>& poles) {
    detail::require_stable(poles);
    return controller_gains_from_polynomial(characteristic_polynomial(poles));
}

/// Error dynamics s^4 + l1 s^3 + l2 s^2 + l3 s + ld.
inline ObserverGains place_observer_poles(const std::array<Complex, 4>& poles) {
    detail::require_stable(poles);
    const auto c = characteristic_polynomial(poles);
    return {c[0], c[1], c[2], c[3]};
}

struct ControllerObserver {
    ControllerGains k;
    ObserverGains l;
};

/// Pole sets used throughout the worked example.
inline std::array<Complex, 3> example_controller_poles() {
    return {Complex{-6.06, 0.0}, Complex{-3.03, 5.25}, Complex{-3.03, -5.25}};
}
inline std::array<Complex, 4> example_observer_poles() {
    return {Complex{-1.31, 0.0}, Complex{-0.80, 0.0}, Complex{-0.54, 0.63}, Complex{-0.54, -0.63}};
}

inline ControllerObserver example_controller_observer() {
    return {place_controller_poles(example_controller_poles()),
            place_observer_poles(example_observer_poles())};
}

struct CompensatorOutput {
    double u = 0.0;                   // base control  -K eta + k x1_ref
    std::array<double, 4> eta_dot{};  // (x1^, x2^, x3^, d^)'
};

/// Observer-based compensator  u = -K eta + k x1_ref,  eta' = M eta + N x1_ref + L y_v.
/// The observer is driven by the base control only; injected oscillations
/// never enter eta.
inline CompensatorOutput compensator_step(const ControllerObserver& co, std::span<const double> eta,
                                          double yv_fed, double x1_ref) {
    const auto& k = co.k;
    const auto& l = co.l;
    CompensatorOutput out;
    out.u = -k.k1 * eta[0] - k.k2 * eta[1] - k.k3 * eta[2] - k.kd * eta[3] + k.k_ref * x1_ref;
    const double innovation = yv_fed - eta[0];
    out.eta_dot[0] = eta[1] + l.l1 * innovation;
    out.eta_dot[1] = eta[2] + l.l2 * innovation;
    out.eta_dot[2] = out.u + eta[3] + l.l3 * innovation;
    out.eta_dot[3] = l.ld * innovation;
    return out;
}

/// Base law plus the fast oscillation s(t / epsilon).
struct InjectedControlLaw {
    PeriodicSignal signal;
    double epsilon = 1e-3;
};

inline double injected_control(const InjectedControlLaw& law, double t, double u_base) {
    if (!(law.epsilon > 0.0)) throw std::invalid_argument("injection period must be > 0");
    return u_base + eval_s(law.signal, t / law.epsilon);
}

}  // namespace vout
