#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pmelab/nonlinearity.hpp"

using namespace pmelab;

TEST(MediumParams, DerivedExponents) {
    const MediumParams p(2.0);
    EXPECT_DOUBLE_EQ(p.alpha(), 1.0);
    EXPECT_DOUBLE_EQ(p.q(), 1.5);
    EXPECT_NEAR(p.theta(), 1.0 / 3.0, 1e-15);
    EXPECT_THROW(MediumParams(1.0), ContractViolation);
    EXPECT_THROW(MediumParams(0.5), ContractViolation);
    EXPECT_THROW(RegularizationParam(-1e-3), ContractViolation);
}

TEST(ScalarMaps, TrivialValues) {
    EXPECT_DOUBLE_EQ(phi(2.0, MediumParams(2.0)), 4.0);
    EXPECT_DOUBLE_EQ(phi(-3.0, MediumParams(2.0)), -9.0);
    EXPECT_DOUBLE_EQ(phi(0.0, MediumParams(3.7)), 0.0);
    EXPECT_DOUBLE_EQ(phi_inverse(4.0, MediumParams(2.0)), 2.0);
    EXPECT_NEAR(phi_inverse(-8.0, MediumParams(3.0)), -2.0, 1e-15);
    EXPECT_DOUBLE_EQ(phi_inverse(0.0, MediumParams(2.0)), 0.0);
    EXPECT_DOUBLE_EQ(g_map(4.0, MediumParams(3.0)), 16.0);
    EXPECT_DOUBLE_EQ(g_map(-1.0, MediumParams(2.5)), -1.0);
    EXPECT_DOUBLE_EQ(g_map(9.0, MediumParams(2.0)), 27.0);
    EXPECT_DOUBLE_EQ(f_delta(0.0, RegularizationParam(0.3), MediumParams(2.0)), 0.0);
    EXPECT_DOUBLE_EQ(f_delta(1.0, RegularizationParam(0.0), MediumParams(2.0)), 2.0 / 3.0);
}

TEST(ScalarMaps, NanPropagates) {
    const MediumParams p(2.0);
    EXPECT_TRUE(std::isnan(phi(NAN, p)));
    EXPECT_TRUE(std::isnan(phi_delta(NAN, RegularizationParam(0.1), p)));
    EXPECT_TRUE(std::isnan(psi_delta(NAN, RegularizationParam(0.1), p)));
}

TEST(PhiDelta, ClosedFormAtMEqualsTwo) {
    // 2 int_0^1 sqrt(1+t^2) dt = sqrt(2) + asinh(1).
    const double expected = std::sqrt(2.0) + std::asinh(1.0);
    EXPECT_NEAR(phi_delta(1.0, RegularizationParam(1.0), MediumParams(2.0)), expected, 1e-12 * expected);
    EXPECT_NEAR(phi_delta(-1.0, RegularizationParam(1.0), MediumParams(2.0)), -expected, 1e-12 * expected);
    // General s: s sqrt(d+s^2) + d asinh(s/sqrt(d)).
    for (double d : {1e-8, 1e-3, 0.5, 4.0}) {
        for (double s : {1e-6, 0.01, 0.7, 3.0, 40.0}) {
            const double ref = s * std::sqrt(d + s * s) + d * std::asinh(s / std::sqrt(d));
            EXPECT_NEAR(phi_delta(s, RegularizationParam(d), MediumParams(2.0)), ref, 1e-12 * ref) << d << " " << s;
        }
    }
}

TEST(PhiDelta, ReducesToPhiAtZeroDelta) {
    const MediumParams p(2.5);
    for (double s : {-3.0, -0.2, 0.0, 0.4, 5.0})
        EXPECT_DOUBLE_EQ(phi_delta(s, RegularizationParam(0.0), p), phi(s, p));
}

TEST(PhiDelta, DerivativeDominatesAndMonotoneLimit) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> us(-10.0, 10.0), um(1.05, 4.0), ud(-8.0, 0.0);
    for (int i = 0; i < 2000; ++i) {
        const MediumParams p(um(rng));
        const double s = us(rng), d = std::pow(10.0, ud(rng));
        EXPECT_GE(phi_delta_derivative(s, RegularizationParam(d), p), phi_derivative(s, p));
    }
    const MediumParams p(3.0);
    for (double s : {0.1, 1.0, 2.5}) {
        double prev = INFINITY;
        for (double d : {1.0, 0.1, 1e-2, 1e-3, 1e-4, 1e-6}) {
            const double v = phi_delta(s, RegularizationParam(d), p);
            EXPECT_LT(v, prev);
            EXPECT_GE(v, phi(s, p));
            prev = v;
        }
        EXPECT_NEAR(prev, phi(s, p), 1e-5);
    }
}

TEST(PsiDelta, RoundTrip) {
    const MediumParams p(2.5);
    const RegularizationParam d(0.5);
    EXPECT_DOUBLE_EQ(psi_delta(0.0, d, p), 0.0);
    EXPECT_NEAR(psi_delta(phi_delta(1.7, d, p), d, p), 1.7, 1e-10);
    for (double m : {1.3, 2.0, 3.0}) {
        const MediumParams pm(m);
        for (double dd : {0.0, 1e-8, 1e-2, 1.0}) {
            for (double s = -10.0; s <= 10.0; s += 0.37) {
                EXPECT_NEAR(psi_delta(phi_delta(s, RegularizationParam(dd), pm), RegularizationParam(dd), pm), s, 1e-10);
                EXPECT_NEAR(phi_inverse(phi(s, pm), pm), s, 1e-10);
            }
        }
    }
}

TEST(RegularizedPower, AgreesWithDirectEvaluation) {
    for (double m : {1.5, 2.0, 3.0, 4.5}) {
        const MediumParams p(m);
        for (double dd : {1e-8, 1e-3, 1.0}) {
            const RegularizedPower rp(p, RegularizationParam(dd));
            for (double s : {-20.0, -1.3, -1e-5, 0.0, 1e-9, 2e-4, 0.05, 0.9, 7.0}) {
                const double ref = phi_delta(s, RegularizationParam(dd), p);
                EXPECT_NEAR(rp.phi(s), ref, 1e-12 * (std::fabs(ref) + 1e-300)) << m << " " << dd << " " << s;
                EXPECT_NEAR(rp.psi(ref), s, 1e-10 * (1.0 + std::fabs(s)));
                EXPECT_DOUBLE_EQ(rp.dphi(s), phi_delta_derivative(s, RegularizationParam(dd), p));
            }
        }
    }
}

TEST(ScalarInequalities, PowerDifferenceBounds) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(-5.0, 5.0), ug(1.0001, 6.0);
    for (int i = 0; i < 100000; ++i) {
        const double a = ux(rng), b = ux(rng), g = ug(rng);
        ASSERT_TRUE(power_difference_bound_holds(a, b, g)) << a << " " << b << " " << g;
        ASSERT_TRUE(power_inverse_holder_holds(a, b, g)) << a << " " << b << " " << g;
    }
}

TEST(ScalarInequalities, PsiHolderAndFLipschitz) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ux(-5.0, 5.0), um(1.05, 4.0), ud(-8.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        const double a = ux(rng), b = ux(rng);
        const MediumParams p(um(rng));
        const RegularizationParam d(std::pow(10.0, ud(rng)));
        ASSERT_TRUE(psi_holder_holds(a, b, d, p)) << a << " " << b;
        ASSERT_TRUE(f_delta_lipschitz_holds(a, b, d, p)) << a << " " << b;
    }
}

TEST(FDelta, DominatesUnregularized) {
    const MediumParams p(2.0);
    for (double s = -3.0; s <= 3.0; s += 0.1)
        EXPECT_GE(f_delta(s, RegularizationParam(0.2), p), f_delta(s, RegularizationParam(0.0), p));
}
