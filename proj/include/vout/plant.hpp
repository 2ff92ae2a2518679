#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sim_core.hpp"

namespace vout {

/// Affine SISO plant  x' = f(x, d) + g(x) u,  y = h(x).
///
/// `d` is an exogenous scalar disturbance scheduled by the caller. When
/// `lgh_analytic` is empty, the virtual output falls back to finite differences.
struct Plant {
    std::size_t dim = 0;
    std::function<void(std::span<const double> x, double d, std::span<double> out)> f;
    std::function<void(std::span<const double> x, std::span<double> out)> g;
    std::function<double(std::span<const double> x)> h;
    std::optional<std::function<double(std::span<const double> x)>> lgh_analytic;
};

inline double output(const Plant& p, std::span<const double> x) { return p.h(x); }

/// L_g h(x) by central differences of h contracted with g(x). The step for
/// component i is 1e-6 * max(1, |x_i|).
inline double lie_derivative_fd(const Plant& p, std::span<const double> x) {
    std::vector<double> gx(p.dim);
    p.g(x, gx);
    std::vector<double> xp(x.begin(), x.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.dim; ++i) {
        if (gx[i] == 0.0) continue;
        const double step = 1e-6 * std::max(1.0, std::abs(x[i]));
        const double xi = xp[i];
        xp[i] = xi + step;
        const double hp = p.h(xp);
        xp[i] = xi - step;
        const double hm = p.h(xp);
        xp[i] = xi;
        acc += (hp - hm) / (2.0 * step) * gx[i];
    }
    return acc;
}

/// y_v = L_g h(x), analytic when supplied.
inline double virtual_output(const Plant& p, std::span<const double> x) {
    if (p.lgh_analytic) return (*p.lgh_analytic)(x);
    return lie_derivative_fd(p, x);
}

/// The third-order chain  x1' = x2, x2' = x3, x3' = u + d,  y = x2 + x1 x3.
/// Its virtual output is x1.
inline Plant example_plant() {
    Plant p;
    p.dim = 3;
    p.f = [](std::span<const double> x, double d, std::span<double> out) {
        out[0] = x[1];
        out[1] = x[2];
        out[2] = d;
    };
    p.g = [](std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = 1.0;
    };
    p.h = [](std::span<const double> x) { return x[1] + x[0] * x[2]; };
    p.lgh_analytic = [](std::span<const double> x) { return x[0]; };
    return p;
}

struct ObservabilityDefect {
    std::array<double, 3> dy_dx{};     // gradient of y
    std::array<double, 3> dydot_dx{};  // gradient of y'
    int rank = 0;                      // rank of the two rows
    int rank_with_e1 = 0;              // rank once e1 is appended
};

/// Output-derivative gradients of the example plant at the equilibrium
/// (x1_ref, 0, 0). Higher derivatives of y vanish there, so x1 is not
/// recoverable from y whenever rank_with_e1 > rank.
inline ObservabilityDefect observability_defect(double x1_ref) {
    ObservabilityDefect out;
    // y = x2 + x1 x3 ; y' = x3 + x2 x3 + x1 (u + d) with u + d = 0 at equilibrium.
    out.dy_dx = {0.0, 1.0, x1_ref};
    out.dydot_dx = {0.0, 0.0, 1.0};

    Eigen::Matrix<double, 3, 3> rows = Eigen::Matrix<double, 3, 3>::Zero();
    for (int j = 0; j < 3; ++j) {
        rows(0, j) = out.dy_dx[j];
        rows(1, j) = out.dydot_dx[j];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(rows.topRows(2));
    out.rank = static_cast<int>(lu.rank());
    rows(2, 0) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_e1(rows);
    out.rank_with_e1 = static_cast<int>(lu_e1.rank());
    return out;
}

}  // namespace vout
