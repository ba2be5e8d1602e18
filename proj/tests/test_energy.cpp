#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "pmelab/energy.hpp"

using namespace pmelab;
using std::numbers::pi;

namespace {

Field smooth_random(const DomainHandle& d, std::uint64_t seed, double amp = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double c[6];
    for (double& x : c) x = u(rng);
    const auto ext = d->extent();
    return Field::sample(d, [&](double x, double y) {
        const double X = x / ext[0], Y = d->dimension() == 1 ? 0.5 : y / ext[1];
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += c[k] * std::sin((k + 1) * pi * X) * std::sin(pi * Y + c[k + 3]);
        return amp * s;
    });
}

}  // namespace

TEST(Energy, ZeroAndEvenness) {
    const MediumParams p(2.0);
    auto d = Domain::rectangle(1.5, 1.0, 24, 16);
    const auto e0 = functional(Field(d), p);
    EXPECT_EQ(e0.total, 0.0);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Field f = smooth_random(d, s);
        const auto a = functional(f, p), b = functional(-f, p);
        EXPECT_EQ(a.total, b.total);
        EXPECT_EQ(a.total, a.dirichlet_half - a.potential);
    }
}

TEST(Energy, SmallAmplitudeIsNegative) {
    for (double m : {1.5, 2.0, 3.0}) {
        const MediumParams p(m);
        auto d = Domain::interval(1.0, 64);
        const Field f = smooth_random(d, 4, 50.0);
        double t = 1.0;
        while (functional(t * f, p).total >= 0.0) t *= 0.5;
        EXPECT_GT(t, 1e-30);
        EXPECT_LT(functional(t * f, p).total, 0.0);
    }
}

TEST(Energy, GradientMatchesFiniteDifferences) {
    const MediumParams p(2.0);
    for (auto d : {Domain::interval(1.0, 48), Domain::rectangle(1.2, 1.0, 20, 16)}) {
        for (double eps : {1e-2, 1e-1}) {
            const Field f = smooth_random(d, 21, 0.3), dir = smooth_random(d, 22);
            const Field g = functional_gradient(f, p, eps);
            const double analytic = inner(g, dir);
            auto fd = [&](double h) {
                return (regularized_functional(f + h * dir, p, eps) - regularized_functional(f + (-h) * dir, p, eps)) / (2 * h);
            };
            const double e1 = std::fabs(fd(1e-2) - analytic), e2 = std::fabs(fd(5e-3) - analytic);
            EXPECT_NEAR(e1 / e2, 4.0, 0.3);
            EXPECT_NEAR(fd(1e-4), analytic, 1e-6 * std::fabs(analytic) + 1e-12);
        }
    }
}

TEST(Energy, ResidualOfZeroAndRandom) {
    const MediumParams p(2.0);
    auto d = Domain::interval(1.0, 32);
    EXPECT_EQ(residual_norm(Field(d), p), 0.0);
    EXPECT_GT(residual_norm(smooth_random(d, 1), p), 0.0);
    EXPECT_EQ(functional_gradient(Field(d), p, 0.0).sup_norm(), 0.0);
}

TEST(DomainConstants, IntervalEigenvalueConverges) {
    const MediumParams p(2.0);
    double prev_err = 0.0;
    for (int n : {32, 64, 128}) {
        const auto c = compute_domain_constants(Domain::interval(1.0, n), p);
        const double h = 1.0 / n;
        EXPECT_NEAR(c.lambda1, 4.0 / (h * h) * std::pow(std::sin(pi * h / 2.0), 2), 1e-9 * c.lambda1);
        const double err = std::fabs(c.lambda1 - pi * pi);
        if (prev_err > 0.0) {
            EXPECT_NEAR(prev_err / err, 4.0, 0.05);
        }
        prev_err = err;
        EXPECT_NEAR(c.theta, 1.0 / 3.0, 1e-15);
        EXPECT_GT(c.lambda1_q, 0.0);
    }
}

TEST(DomainConstants, QuotientApproachesEigenvalueAsQToTwo) {
    // q = 1.99 means m = 1/(q-1).
    const MediumParams p(1.0 / 0.99);
    for (auto d : {Domain::interval(1.0, 64), Domain::rectangle(1.5, 1.0, 24, 16)}) {
        const auto c = compute_domain_constants(d, p);
        EXPECT_NEAR(c.lambda1_q / c.lambda1, 1.0, 0.02);
    }
}

TEST(DomainConstants, QuotientIsAMinimum) {
    const MediumParams p(2.0);
    auto d = Domain::rectangle(1.5, 1.0, 24, 16);
    const auto c = compute_domain_constants(d, p);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const Field f = smooth_random(d, s);
        EXPECT_GE(dirichlet_energy(f) / std::pow(lp_norm_pow(f, p.q()), 2.0 / p.q()), c.lambda1_q * (1 - 1e-10));
    }
}

TEST(Coercivity, HoldsOnRandomFields) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> amp(-6.0, 2.0);
    for (double m : {1.5, 2.0, 3.0}) {
        const MediumParams p(m);
        auto d = Domain::rectangle(1.5, 1.0, 24, 16);
        const auto c = compute_domain_constants(d, p);
        EXPECT_TRUE(coercivity_bound(Field(d), p, c).holds);
        EXPECT_LT(coercivity_bound(Field(d), p, c).lower_bound, 0.0);
        for (int i = 0; i < 1000; ++i) {
            const Field f = smooth_random(d, 1000 + i, std::pow(10.0, amp(rng)));
            ASSERT_TRUE(coercivity_bound(f, p, c).holds) << i;
        }
    }
}
