#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vout {

using StateVector = std::vector<double>;

/// Raised when an integration produces a non-finite derivative or state.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double t, std::size_t component)
        : std::runtime_error(what), time_(t), component_(component) {}

    double time() const noexcept { return time_; }
    std::size_t component() const noexcept { return component_; }

private:
    double time_;
    std::size_t component_;
};

namespace detail {

// Returns round(x) when x is within a relative 1e-9 of an integer, -1 otherwise.
inline long long exact_ratio(double num, double den) {
    const double r = num / den;
    const double n = std::round(r);
    if (std::abs(r - n) > 1e-9 * std::max(1.0, std::abs(r))) return -1;
    return static_cast<long long>(n);
}

}  // namespace detail

/// Uniform integration grid. Sample k sits at t0 + k*h_step (no accumulated drift).
struct TimeGrid {
    double t0 = 0.0;
    double t_end = 0.0;
    double h_step = 0.0;

    std::size_t steps() const {
        if (!(h_step > 0.0)) throw std::invalid_argument("TimeGrid: h_step must be > 0");
        if (t_end < t0) throw std::invalid_argument("TimeGrid: t_end must be >= t0");
        const long long n = detail::exact_ratio(t_end - t0, h_step);
        if (n < 0)
            throw std::invalid_argument("TimeGrid: (t_end - t0) / h_step is not an integer");
        return static_cast<std::size_t>(n);
    }

    double time(std::size_t k) const { return t0 + static_cast<double>(k) * h_step; }

    /// True when h_step divides period/4, so quarter-period switches land on step boundaries.
    bool aligned_to(double period) const {
        return detail::exact_ratio(period / 4.0, h_step) > 0;
    }
};

/// Dense record of a run. States are stored flat, `dim` entries per sample.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::size_t dim, std::size_t capacity) : dim_(dim) {
        times_.reserve(capacity);
        states_.reserve(capacity * dim);
    }

    std::size_t size() const noexcept { return times_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<double>& times() const noexcept { return times_; }

    std::span<const double> state(std::size_t k) const {
        return {states_.data() + k * dim_, dim_};
    }
    double state(std::size_t k, std::size_t i) const { return states_[k * dim_ + i]; }

    /// One state component across all samples.
    std::vector<double> component(std::size_t i) const {
        std::vector<double> out(size());
        for (std::size_t k = 0; k < size(); ++k) out[k] = state(k, i);
        return out;
    }

    bool has_column(const std::string& name) const { return columns_.count(name) != 0; }
    const std::vector<double>& column(const std::string& name) const {
        auto it = columns_.find(name);
        if (it == columns_.end()) throw std::out_of_range("Trajectory: no column '" + name + "'");
        return it->second;
    }
    const std::map<std::string, std::vector<double>>& columns() const noexcept { return columns_; }

    // Conventional probe names for control input and measured output.
    const std::vector<double>& inputs() const { return column("u"); }
    const std::vector<double>& outputs() const { return column("y"); }

    void append(double t, std::span<const double> x) {
        times_.push_back(t);
        states_.insert(states_.end(), x.begin(), x.end());
    }
    std::vector<double>& column_mut(const std::string& name) { return columns_[name]; }

private:
    std::size_t dim_ = 0;
    std::vector<double> times_;
    std::vector<double> states_;
    std::map<std::string, std::vector<double>> columns_;
};

/// Named output evaluated at every grid sample.
struct Probe {
    std::string name;
    std::function<double(double t, std::span<const double> x)> eval;
};

namespace detail {

inline void check_finite(std::span<const double> v, double t, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            std::ostringstream msg;
            msg << "non-finite " << what << " at t=" << t << ", component " << i;
            throw NumericalError(msg.str(), t, i);
        }
    }
}

}  // namespace detail

/// Classical RK4 with preallocated stage buffers. The right-hand side has the
/// in-place form `rhs(t, x, dxdt)`.
class Rk4Stepper {
public:
    explicit Rk4Stepper(std::size_t dim) : k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

    template <class Rhs>
    void step(Rhs& rhs, double t, std::span<double> x, double h) {
        const std::size_t n = x.size();
        const double half = 0.5 * h;

        rhs(t, std::span<const double>(x), std::span<double>(k1_));
        detail::check_finite(k1_, t, "derivative");
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + half * k1_[i];
        rhs(t + half, std::span<const double>(tmp_), std::span<double>(k2_));
        detail::check_finite(k2_, t + half, "derivative");
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + half * k2_[i];
        rhs(t + half, std::span<const double>(tmp_), std::span<double>(k3_));
        detail::check_finite(k3_, t + half, "derivative");
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * k3_[i];
        rhs(t + h, std::span<const double>(tmp_), std::span<double>(k4_));
        detail::check_finite(k4_, t + h, "derivative");

        const double sixth = h / 6.0;
        for (std::size_t i = 0; i < n; ++i)
            x[i] += sixth * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

private:
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

/// Single RK4 step from (t, x) with step h.
template <class Rhs>
StateVector rk4_step(Rhs&& rhs, double t, const StateVector& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("rk4_step: h must be > 0");
    StateVector out = x;
    Rk4Stepper stepper(x.size());
    stepper.step(rhs, t, std::span<double>(out), h);
    return out;
}

struct NoHook {
    void operator()(std::size_t, double, std::span<const double>) const noexcept {}
};

/// Integrates `rhs` over `grid` from `x0`, recording every sample.
///
/// `before_sample(k, t_k, x_k)` runs once per sample before the probes are
/// evaluated and before the step leaving t_k is taken. Closed loops use it to
/// latch sampled quantities (measurements, piecewise-constant inputs) that
/// hold over [t_k, t_{k+1}).
template <class Rhs, class Hook = NoHook>
Trajectory simulate(Rhs&& rhs, const TimeGrid& grid, StateVector x0,
                    std::span<const Probe> probes = {}, Hook&& before_sample = Hook{}) {
    const std::size_t n_steps = grid.steps();
    const std::size_t dim = x0.size();
    Trajectory traj(dim, n_steps + 1);
    std::vector<std::vector<double>*> cols;
    for (const auto& p : probes) {
        auto& c = traj.column_mut(p.name);
        c.reserve(n_steps + 1);
        cols.push_back(&c);
    }

    Rk4Stepper stepper(dim);
    StateVector x = std::move(x0);
    for (std::size_t k = 0;; ++k) {
        const double t = grid.time(k);
        detail::check_finite(x, t, "state");
        before_sample(k, t, std::span<const double>(x));
        traj.append(t, x);
        for (std::size_t j = 0; j < probes.size(); ++j)
            cols[j]->push_back(probes[j].eval(t, std::span<const double>(x)));
        if (k == n_steps) break;
        stepper.step(rhs, t, std::span<double>(x), grid.h_step);
    }
    return traj;
}

}  // namespace vout
