#include <random>

#include <gtest/gtest.h>

#include <vout/plant.hpp>

using namespace vout;

namespace {

double yv(const Plant& p, std::array<double, 3> x) { return virtual_output(p, x); }

}  // namespace

TEST(Plant, VirtualOutputIsX1) {
    const auto p = example_plant();
    EXPECT_EQ(yv(p, {2.0, 5.0, -1.0}), 2.0);
    EXPECT_EQ(yv(p, {-0.5, 0.0, 0.0}), -0.5);
}

TEST(Plant, OutputValues) {
    const auto p = example_plant();
    const std::array<double, 3> origin{0.0, 0.0, 0.0}, x{1.0, 2.0, 3.0};
    EXPECT_EQ(output(p, origin), 0.0);
    EXPECT_EQ(output(p, x), 5.0);
    for (double a : {-3.0, 0.5, 7.0}) {
        const std::array<double, 3> eq{a, 0.0, 0.0};
        EXPECT_EQ(output(p, eq), 0.0);
    }
}

TEST(Plant, EquilibriumFamilyIsInvariant) {
    const auto p = example_plant();
    for (double a : {-2.0, 0.0, 4.0}) {
        const std::array<double, 3> x{a, 0.0, 0.0};
        std::array<double, 3> fx{}, gx{};
        p.f(x, 0.0, fx);
        p.g(x, gx);
        for (int i = 0; i < 3; ++i) EXPECT_EQ(fx[i] + gx[i] * 0.0, 0.0);
    }
}

TEST(Plant, ZeroInputVectorGivesZeroVirtualOutput) {
    Plant p = example_plant();
    p.g = [](std::span<const double>, std::span<double> out) { out[0] = out[1] = out[2] = 0.0; };
    p.lgh_analytic.reset();
    EXPECT_EQ(yv(p, {1.0, 2.0, 3.0}), 0.0);
}

TEST(Plant, LinearOutputGivesInnerProduct) {
    Plant p = example_plant();
    p.h = [](std::span<const double> x) { return 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2]; };
    p.g = [](std::span<const double>, std::span<double> out) {
        out[0] = 1.0;
        out[1] = 4.0;
        out[2] = -2.0;
    };
    p.lgh_analytic.reset();
    EXPECT_NEAR(yv(p, {0.3, -7.0, 2.0}), 2.0 - 12.0 - 1.0, 1e-8);
}

TEST(Plant, FiniteDifferenceAgreesWithAnalytic) {
    const auto p = example_plant();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const std::array<double, 3> x{dist(rng), dist(rng), dist(rng)};
        const double fd = lie_derivative_fd(p, x);
        EXPECT_NEAR(fd, x[0], 1e-6 * std::max(1.0, std::abs(x[0])));
    }
}

TEST(Observability, DefectAtEquilibrium) {
    for (double a : {0.0, 1.0, -2.5}) {
        const auto d = observability_defect(a);
        EXPECT_EQ(d.dy_dx[0], 0.0);
        EXPECT_EQ(d.dy_dx[1], 1.0);
        EXPECT_EQ(d.dy_dx[2], a);
        EXPECT_EQ(d.dydot_dx[0], 0.0);
        EXPECT_EQ(d.dydot_dx[1], 0.0);
        EXPECT_EQ(d.dydot_dx[2], 1.0);
        EXPECT_EQ(d.rank, 2);
        EXPECT_EQ(d.rank_with_e1, 3);
    }
}
