#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include <vout/averaging.hpp>
#include <vout/demod.hpp>

using namespace vout;

namespace {

DemodConfig base_config() { return {1e-3, 10, 1e-5, PeriodicSignal::square(1.0)}; }

// Feeds y(t) on the sample grid for `duration` and calls `check` on every valid output.
void feed(DemodState& d, double duration, const std::function<double(double)>& y,
          const std::function<void(double, const DemodOutput&)>& check) {
    const TimeGrid grid{0.0, duration, d.config().sample_step};
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        const double t = grid.time(k);
        const auto out = d.push_sample(t, y(t));
        if (out.yv_valid) check(t, out);
    }
}

}  // namespace

TEST(Demod, ConstantInput) {
    DemodState d(base_config());
    int checked = 0;
    feed(d, 0.1, [](double) { return 3.0; }, [&](double, const DemodOutput& o) {
        EXPECT_NEAR(o.ybar_hat, 3.0, 1e-12);
        EXPECT_NEAR(o.yv_hat, 0.0, 1e-9);
        EXPECT_NEAR(*d.estimate_yv_simple(), 0.0, 1e-9);
        ++checked;
    });
    EXPECT_GT(checked, 0);
}

TEST(Demod, PureRippleRecoversAmplitude) {
    for (const auto& sig : {PeriodicSignal::square(1.0), PeriodicSignal::sine(1.0), PeriodicSignal::square(2.0)}) {
        for (int n : {3, 10}) {
            DemodConfig cfg = base_config();
            cfg.signal = sig;
            cfg.n_periods = n;
            DemodState d(cfg);
            const double V = 2.5;
            feed(d, 0.1, [&](double t) { return cfg.epsilon * V * eval_S(sig, t / cfg.epsilon); },
                 [&](double, const DemodOutput& o) {
                     ASSERT_NEAR(o.yv_hat, V, 1e-9) << to_string(sig.shape) << " n=" << n;
                     ASSERT_NEAR(o.ybar_hat, 0.0, 1e-9);
                     ASSERT_NEAR(*d.estimate_yv_simple(), V, 1e-9);
                 });
        }
    }
}

TEST(Demod, RampIsDelayedByHalfAWindow) {
    DemodState d(base_config());
    EXPECT_DOUBLE_EQ(d.ybar_delay(), 0.005);
    feed(d, 0.1, [](double t) { return t; },
         [&](double t, const DemodOutput& o) { ASSERT_NEAR(o.ybar_hat, t - 0.005, 1e-12); });
}

TEST(Demod, WholePeriodMeanOfWaveformVanishes) {
    for (const auto& sig : {PeriodicSignal::square(1.0), PeriodicSignal::sine(1.0)}) {
        DemodConfig cfg = base_config();
        cfg.signal = sig;
        cfg.sample_step = 2.5e-5;
        DemodState d(cfg);
        feed(d, 0.1, [&](double t) { return eval_s(sig, t / cfg.epsilon); },
             [&](double, const DemodOutput& o) { ASSERT_LT(std::abs(o.ybar_hat), 1e-12); });
    }
}

TEST(Demod, SimpleEstimatorOnSlowMean) {
    // a constant mean is rejected; a drifting one leaks through the simple estimator
    const DemodConfig cfg = base_config();
    const auto e = estimator_errors(cfg, 0.5, [](double t) { return 4.0 * t; }, [](double) { return 1.0; });
    EXPECT_LT(e.yv, 1e-6);
    EXPECT_GT(e.yv_simple, 100.0 * e.yv);
}

TEST(Demod, DelayedResidualBeatsSimpleEstimator) {
    const DemodConfig cfg = base_config();
    const auto e = estimator_errors(cfg, 2.0, [](double t) { return std::sin(t); },
                                    [](double t) { return std::cos(0.7 * t); });
    EXPECT_LT(e.yv, e.yv_simple);
}

TEST(Demod, GroupDelaysAndWarmup) {
    DemodState d(base_config());
    EXPECT_DOUBLE_EQ(d.yv_delay(), 0.01);
    EXPECT_DOUBLE_EQ(d.warmup(), 0.02);
    EXPECT_EQ(d.window(), 1000u);
    EXPECT_EQ(d.raw_capacity(), 1501u);
    bool seen_valid = false;
    const TimeGrid grid{0.0, 0.03, 1e-5};
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        const double t = grid.time(k);
        const auto out = d.push_sample(t, 1.0);
        if (t < d.warmup() - 1e-12) ASSERT_FALSE(out.yv_valid) << t;
        if (t < d.window() * 1e-5 - 1e-12) ASSERT_FALSE(out.ybar_valid) << t;
        seen_valid = seen_valid || out.yv_valid;
    }
    EXPECT_TRUE(seen_valid);
    EXPECT_TRUE(d.last().yv_valid);
}

TEST(Demod, RejectsNonUniformTimestamps) {
    DemodState d(base_config());
    d.push_sample(0.0, 1.0);
    d.push_sample(1e-5, 1.0);
    EXPECT_THROW(d.push_sample(2.5e-5, 1.0), std::invalid_argument);
}

TEST(Demod, RejectsMisalignedConfig) {
    DemodConfig cfg = base_config();
    cfg.sample_step = 3e-5;
    EXPECT_THROW(DemodState{cfg}, std::invalid_argument);
    cfg = base_config();
    cfg.n_periods = 0;
    EXPECT_THROW(DemodState{cfg}, std::invalid_argument);
}

TEST(Demod, SilentCarrierGivesZeroVirtualOutput) {
    DemodConfig cfg = base_config();
    cfg.signal.amplitude = 0.0;
    DemodState d(cfg);
    feed(d, 0.05, [](double t) { return 1.0 + t; }, [](double, const DemodOutput& o) {
        ASSERT_EQ(o.yv_hat, 0.0);
    });
}

TEST(Demod, IncrementalSumsMatchRecomputation) {
    DemodConfig cfg = base_config();
    DemodState d(cfg);
    const std::size_t pushes = 1000000 + 1234;
    for (std::size_t k = 0; k < pushes; ++k) {
        const double t = k * cfg.sample_step;
        d.push_sample(t, 1.0 + std::sin(3.0 * t) + 1e-3 * eval_S(cfg.signal, t / cfg.epsilon));
    }
    const auto inc = d.window_sums();
    const auto ref = d.recomputed_sums();
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); };
    EXPECT_LT(rel(inc.y, ref.y), 1e-9);
    EXPECT_LT(rel(inc.carrier, ref.carrier), 1e-9);
    EXPECT_LT(rel(inc.ys, ref.ys), 1e-9);
    EXPECT_LT(std::abs(inc.product - ref.product), 1e-9 * std::max(1.0, std::abs(ref.product)));
}

TEST(RingBuffer, NewestFirst) {
    RingBuffer<int> rb(3);
    for (int i = 1; i <= 5; ++i) rb.push(i);
    EXPECT_EQ(rb.size(), 3u);
    EXPECT_EQ(rb.back(0), 5);
    EXPECT_EQ(rb.back(2), 3);
    EXPECT_THROW(rb.back(3), std::out_of_range);
    EXPECT_THROW(RingBuffer<int>(0), std::invalid_argument);
}

TEST(Demod, ConvergenceOrders) {
    // errors on a synthetic measurement with a smooth mean and virtual output
    auto errs = [](double eps, int n) {
        DemodConfig cfg{eps, n, eps / 100.0, PeriodicSignal::square(1.0)};
        return estimator_errors(cfg, 4.0, [](double t) { return std::sin(t); },
                                [](double t) { return std::cos(0.7 * t); });
    };
    std::vector<double> eps{4e-3, 2e-3, 1e-3}, eb, ev;
    for (double e : eps) {
        const auto r = errs(e, 10);
        eb.push_back(r.ybar_vs_delayed);
        ev.push_back(r.yv);
    }
    EXPECT_TRUE(fit_order(eps, eb).slope_within(2.0, 0.2)) << fit_order(eps, eb).slope;
    EXPECT_TRUE(fit_order(eps, ev).slope_within(1.0, 0.2)) << fit_order(eps, ev).slope;

    std::vector<double> ns{20, 10, 5}, nb, nv;
    for (double n : ns) {
        const auto r = errs(1e-3, static_cast<int>(n));
        nb.push_back(r.ybar_vs_delayed);
        nv.push_back(r.yv);
    }
    EXPECT_TRUE(fit_order(ns, nb).slope_within(2.0, 0.3)) << fit_order(ns, nb).slope;
    // the virtual-output error is dominated by its n*eps group delay, hence first order in n
    EXPECT_TRUE(fit_order(ns, nv).slope_within(1.0, 0.2)) << fit_order(ns, nv).slope;
}
