#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "signal.hpp"
#include "sim_core.hpp"

namespace vout {

/// Fixed-capacity ring buffer; index 0 of `back(i)` is the newest element.
template <class T>
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity) : data_(capacity) {
        if (capacity == 0) throw std::invalid_argument("RingBuffer: capacity must be > 0");
    }

    void push(const T& v) {
        data_[head_] = v;
        head_ = (head_ + 1) % data_.size();
        if (size_ < data_.size()) ++size_;
    }

    const T& back(std::size_t lag) const {
        if (lag >= size_) throw std::out_of_range("RingBuffer: lag beyond stored samples");
        return data_[(head_ + data_.size() - 1 - lag) % data_.size()];
    }

    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return data_.size(); }

private:
    std::vector<T> data_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

struct DemodConfig {
    double epsilon = 1e-3;
    int n_periods = 10;
    double sample_step = 1e-5;
    PeriodicSignal signal = PeriodicSignal::square(1.0);

    /// Number of sample intervals in one window of n periods.
    std::size_t window() const {
        return static_cast<std::size_t>(std::llround(n_periods * epsilon / sample_step));
    }

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("demod.epsilon: must be > 0");
        if (n_periods < 1) throw std::invalid_argument("demod.n_periods: must be >= 1");
        if (!(sample_step > 0.0)) throw std::invalid_argument("demod.sample_step: must be > 0");
        if (detail::exact_ratio(epsilon / 4.0, sample_step) <= 0)
            throw std::invalid_argument("demod.sample_step: must divide epsilon/4 exactly");
    }
};

struct DemodOutput {
    double ybar_hat = 0.0;
    double yv_hat = 0.0;
    bool ybar_valid = false;
    bool yv_valid = false;
};

/// Running sums behind the three sliding means (N+1 samples each).
struct WindowSums {
    double y = 0.0;       // raw measurement
    double product = 0.0; // (y(tau - n eps/2) - ybar(tau)) * S((tau - n eps/2)/eps)
    double carrier = 0.0; // S^2(tau/eps)
    double ys = 0.0;      // y(tau) * S(tau/eps)
};

/// Streaming sliding-window heterodyne demodulator.
///
/// Every window integral is a trapezoidal mean over the last n*eps seconds
/// (N+1 samples). The carrier correlated against the measurement is the
/// zero-mean primitive S, which is the shape of the injection ripple on y.
///
/// Group delays: ybar_hat tracks ybar(t - n eps/2); yv_hat lags by n eps in
/// total (half in the delayed argument, half in the outer average).
class DemodState {
public:
    explicit DemodState(DemodConfig cfg)
        : cfg_(validated(cfg)),
          n_(cfg_.window()),
          half_(n_ / 2),
          raw_(3 * n_ / 2 + 1),
          product_(n_ + 1),
          carrier_(n_ + 1),
          ys_(n_ + 1) {}

    const DemodConfig& config() const noexcept { return cfg_; }
    std::size_t window() const noexcept { return n_; }
    std::size_t pushes() const noexcept { return count_; }
    std::size_t raw_capacity() const noexcept { return raw_.capacity(); }

    double ybar_delay() const noexcept { return 0.5 * cfg_.n_periods * cfg_.epsilon; }
    double yv_delay() const noexcept { return cfg_.n_periods * cfg_.epsilon; }
    double warmup() const noexcept { return 2.0 * cfg_.n_periods * cfg_.epsilon; }

    DemodOutput push_sample(double t, double y) {
        if (count_ == 0) {
            t_first_ = t;
        } else {
            const double expected = t_first_ + static_cast<double>(count_) * cfg_.sample_step;
            if (std::abs(t - expected) > 1e-6 * cfg_.sample_step)
                throw std::invalid_argument("demod: non-uniform sample timestamp");
        }
        const std::size_t k = count_++;
        const double tau = sample_time(k);

        evict(raw_, sums_.y, n_ + 1);
        raw_.push(y);
        sums_.y += y;

        const double S = eval_S(cfg_.signal, tau / cfg_.epsilon);
        evict(carrier_, sums_.carrier, n_ + 1);
        carrier_.push(S * S);
        sums_.carrier += S * S;
        evict(ys_, sums_.ys, n_ + 1);
        ys_.push(y * S);
        sums_.ys += y * S;

        DemodOutput out;
        if (k >= n_) {
            out.ybar_hat = trapezoid(raw_, sums_.y);
            out.ybar_valid = true;

            const double delayed_y = raw_.back(half_);
            const double delayed_S = eval_S(cfg_.signal, sample_time(k - half_) / cfg_.epsilon);
            const double p = (delayed_y - out.ybar_hat) * delayed_S;
            evict(product_, sums_.product, n_ + 1);
            product_.push(p);
            sums_.product += p;

            if (product_.size() == n_ + 1) {
                out.yv_hat = ratio(trapezoid(product_, sums_.product), trapezoid(carrier_, sums_.carrier));
                out.yv_valid = true;
            }
        }
        if (count_ % kRecomputeEvery == 0) sums_ = recomputed_sums();
        last_ = out;
        return out;
    }

    /// Last output of push_sample.
    const DemodOutput& last() const noexcept { return last_; }

    /// Simple heterodyne estimate (1/eps) <y S> / <S^2>, valid once a full window is stored.
    std::optional<double> estimate_yv_simple() const {
        if (count_ <= n_) return std::nullopt;
        return ratio(trapezoid(ys_, sums_.ys), trapezoid(carrier_, sums_.carrier));
    }

    const WindowSums& window_sums() const noexcept { return sums_; }

    /// Sums recomputed directly from the buffers.
    WindowSums recomputed_sums() const {
        WindowSums s;
        for (std::size_t i = 0; i < std::min(raw_.size(), n_ + 1); ++i) s.y += raw_.back(i);
        for (std::size_t i = 0; i < product_.size(); ++i) s.product += product_.back(i);
        for (std::size_t i = 0; i < carrier_.size(); ++i) s.carrier += carrier_.back(i);
        for (std::size_t i = 0; i < ys_.size(); ++i) s.ys += ys_.back(i);
        return s;
    }

private:
    static constexpr std::size_t kRecomputeEvery = 10000;

    static DemodConfig validated(const DemodConfig& c) {
        c.validate();
        return c;
    }

    double sample_time(std::size_t k) const {
        return t_first_ + static_cast<double>(k) * cfg_.sample_step;
    }

    // Drops the sample leaving a window of `span` samples before a push.
    static void evict(const RingBuffer<double>& buf, double& sum, std::size_t span) {
        if (buf.size() >= span) sum -= buf.back(span - 1);
    }

    // (1/eps) numerator / carrier power; a silent carrier carries no virtual output.
    double ratio(double numerator, double carrier) const {
        if (carrier <= 0.0) return 0.0;
        return numerator / (cfg_.epsilon * carrier);
    }

    double trapezoid(const RingBuffer<double>& buf, double sum) const {
        return (sum - 0.5 * (buf.back(0) + buf.back(n_))) / static_cast<double>(n_);
    }

    DemodConfig cfg_;
    std::size_t n_;
    std::size_t half_;
    RingBuffer<double> raw_;
    RingBuffer<double> product_;
    RingBuffer<double> carrier_;
    RingBuffer<double> ys_;
    WindowSums sums_;
    DemodOutput last_;
    std::size_t count_ = 0;
    double t_first_ = 0.0;
};

}  // namespace vout
