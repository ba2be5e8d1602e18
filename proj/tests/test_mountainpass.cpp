#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pmelab/asymptotics.hpp"
#include "pmelab/mountainpass.hpp"

using namespace pmelab;

namespace {

constexpr double kPi = std::numbers::pi;

/// Random smooth field: a few sine modes with Gaussian coefficients.
Field random_smooth(const DomainHandle& d, std::mt19937_64& rng, double amp) {
    std::normal_distribution<double> n(0.0, 1.0);
    double c[4][3];
    for (auto& row : c)
        for (double& x : row) x = n(rng);
    const double lx = d->extent()[0], ly = d->extent()[1];
    return Field::sample(d, [&](double x, double y) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < (d->dimension() == 1 ? 1 : 3); ++j) {
                const double sy = d->dimension() == 1 ? 1.0 : std::sin((j + 1) * kPi * y / ly);
                s += c[i][j] * std::sin((i + 1) * kPi * x / lx) * sy;
            }
        }
        return amp * s;
    });
}

Field random_rough(const DomainHandle& d, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(d->size());
    for (double& x : v) x = amp * u(rng);
    return Field(d, std::move(v));
}

Field abs_field(const Field& f) {
    return f.map([](double x) { return std::fabs(x); });
}

}  // namespace

TEST(PathProfile, ConstantPathGivesConstantProfile) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 32);
    const Field f = Field::sample(d, [](double x, double) { return x * (1.0 - x); });
    const DiscretePath path({f, f, f, f});
    const auto prof = path_energy_profile(path, p);
    ASSERT_EQ(prof.size(), 4u);
    for (double e : prof) EXPECT_EQ(e, prof.front());
}

TEST(PathProfile, ConcatenationConcatenatesProfiles) {
    const MediumParams p(3.0);
    const auto d = Domain::interval(1.0, 32);
    const Field a = Field::sample(d, [](double x, double) { return std::sin(kPi * x); });
    const Field b = 0.5 * a, c = -a;
    const DiscretePath first({a, b}), second({b, 0.3 * a, c});
    const DiscretePath joined = first.concatenated(second);
    const auto pj = path_energy_profile(joined, p);
    const auto p1 = path_energy_profile(first, p), p2 = path_energy_profile(second, p);
    ASSERT_EQ(pj.size(), p1.size() + p2.size() - 1);
    EXPECT_EQ(pj[0], p1[0]);
    for (std::size_t k = 0; k < p2.size(); ++k) EXPECT_EQ(pj[k + 1], p2[k]);
}

TEST(PathProfile, EndpointsCannotBeMoved) {
    const auto d = Domain::interval(1.0, 16);
    const Field f(d);
    DiscretePath path({f, f, f});
    EXPECT_THROW(path.set_interior(0, f), ContractViolation);
    EXPECT_THROW(path.set_interior(2, f), ContractViolation);
    EXPECT_NO_THROW(path.set_interior(1, f));
}

TEST(HiddenConvexity, EqualEndpointsGiveConstantPath) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 32);
    const Field a = Field::sample(d, [](double x, double) { return std::sin(kPi * x); });
    const DiscretePath path = hidden_convexity_path(a, a, 10, p);
    for (const auto& n : path.nodes()) EXPECT_LE(sup_distance(n, a), 1e-15);
}

TEST(HiddenConvexity, EndpointsAreExact) {
    const MediumParams p(1.5);
    const auto d = Domain::interval(1.0, 32);
    const Field a = Field::sample(d, [](double x, double) { return std::sin(kPi * x); });
    const Field b = Field::sample(d, [](double x, double) { return x * x * (1.0 - x); });
    const DiscretePath path = hidden_convexity_path(a, b, 7, p);
    ASSERT_EQ(path.size(), 8u);
    EXPECT_EQ(sup_distance(path.front(), a), 0.0);
    EXPECT_EQ(sup_distance(path.back(), b), 0.0);
}

TEST(HiddenConvexity, RejectsNegativeEndpoints) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 16);
    const Field a = Field::sample(d, [](double x, double) { return std::sin(2 * kPi * x); });
    EXPECT_THROW(hidden_convexity_path(a, abs_field(a), 4, p), ContractViolation);
}

// Energy along the curve lies below the chord, for random nonnegative pairs
// in 1D and 2D, smooth and rough.
TEST(HiddenConvexity, EnergyBelowChordOnRandomPairs) {
    std::mt19937_64 rng(2024);
    const auto d1 = Domain::interval(1.0, 48);
    const auto d2 = Domain::rectangle(1.5, 1.0, 15, 10);
    const double ms[] = {1.5, 2.0, 3.0, 6.0};
    double worst = -INFINITY;
    for (int trial = 0; trial < 1000; ++trial) {
        const MediumParams p(ms[trial % 4]);
        const auto& d = trial % 3 == 0 ? d2 : d1;
        std::uniform_real_distribution<double> amp(0.01, 1.0);
        const Field a = abs_field(trial % 2 ? random_smooth(d, rng, amp(rng)) : random_rough(d, rng, amp(rng)));
        const Field b = abs_field(random_smooth(d, rng, amp(rng)));
        const int K = 8;
        const auto prof = path_energy_profile(hidden_convexity_path(a, b, K, p), p);
        for (int k = 0; k <= K; ++k) {
            const double t = static_cast<double>(k) / K;
            const double chord = (1.0 - t) * prof.front() + t * prof.back();
            worst = std::max(worst, prof[static_cast<std::size_t>(k)] - chord);
        }
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(NegativeSweep, NonnegativeFieldGivesConstantPath) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 32);
    const Field a = Field::sample(d, [](double x, double) { return std::sin(kPi * x); });
    const SweepResult s = negative_part_sweep(a, 6, p);
    for (const auto& n : s.path.nodes()) EXPECT_EQ(sup_distance(n, a), 0.0);
    EXPECT_TRUE(std::isinf(s.turning_point));
    EXPECT_EQ(s.cross_term, 0.0);
}

namespace {

// Positive bump on [0.1, 0.4], negative bump on [0.6, 0.9]: no stencil edge
// joins the supports.
Field separated_pair(const DomainHandle& d, double neg_height) {
    return Field::sample(d, [&](double x, double) {
        if (x > 0.1 && x < 0.4) return std::pow(std::sin(kPi * (x - 0.1) / 0.3), 2);
        if (x > 0.6 && x < 0.9) return -neg_height * std::pow(std::sin(kPi * (x - 0.6) / 0.3), 2);
        return 0.0;
    });
}

}  // namespace

TEST(NegativeSweep, SplitFormulaExactForSeparatedSupports) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 100);
    const SweepResult s = negative_part_sweep(separated_pair(d, 0.2), 20, p);
    EXPECT_EQ(s.cross_term, 0.0);
    EXPECT_LE(s.split_defect, 1e-14);
}

TEST(NegativeSweep, SplitDefectEqualsCrossTermForTouchingSupports) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 64);
    const Field f = Field::sample(d, [](double x, double) { return std::sin(3 * kPi * x) + 0.1; });
    const SweepResult s = negative_part_sweep(f, 10, p);
    EXPECT_GT(s.cross_term, 0.0);
    EXPECT_NEAR(s.split_defect, s.cross_term, 1e-12 * (1.0 + s.cross_term));
}

TEST(NegativeSweep, EnergyDecreasesBeforeTurningPoint) {
    for (double m : {1.5, 2.0, 3.0}) {
        const MediumParams p(m);
        const auto d = Domain::interval(1.0, 100);
        // t0 scales like 1/height: pick the height that puts t0 at 0.6.
        const double t_unit = negative_part_sweep(separated_pair(d, 1.0), 1, p).turning_point;
        const Field f = separated_pair(d, t_unit / 0.6);
        const SweepResult s = negative_part_sweep(f, 200, p);
        ASSERT_NEAR(s.turning_point, 0.6, 1e-9);
        const auto prof = path_energy_profile(s.path, p);
        const double tmax = std::min(s.turning_point, 1.0);
        int checked = 0;
        for (std::size_t k = 1; k < prof.size(); ++k) {
            const double t = static_cast<double>(k) / 200.0;
            if (t > tmax) break;
            EXPECT_LE(prof[k], prof[k - 1] + 1e-14 * std::fabs(prof[k - 1])) << "m=" << m << " t=" << t;
            ++checked;
        }
        EXPECT_GT(checked, 0);
    }
}

TEST(NegativeSweep, MaxEnergyBound) {
    std::mt19937_64 rng(7);
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 64);
    for (int trial = 0; trial < 50; ++trial) {
        const Field f = random_smooth(d, rng, 0.2);
        const SweepResult s = negative_part_sweep(f, 16, p);
        const auto prof = path_energy_profile(s.path, p);
        const double bound = std::max(functional(positive_part(f), p).total, functional(f, p).total);
        EXPECT_LE(*std::max_element(prof.begin(), prof.end()), bound + 1e-8 + s.cross_term);
    }
}

TEST(Connection, GroundStateToItselfIsConstant) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 64);
    const GroundState g = solve_ground_state(d, p);
    const ConnectionResult c = connect_to_ground_state(g.w, g.w, 8, p);
    for (const auto& n : c.path.nodes()) EXPECT_LE(sup_distance(n, g.w), 1e-14 * g.w.sup_norm());
    EXPECT_FALSE(c.flagged);
}

TEST(Connection, GroundStateToItsNegativeStaysBelowZero) {
    for (double m : {1.5, 2.0, 3.0}) {
        const MediumParams p(m);
        const auto d = Domain::interval(1.0, 64);
        const GroundState g = solve_ground_state(d, p);
        const ConnectionResult c = connect_to_ground_state(g.w, -g.w, 10, p);
        EXPECT_EQ(c.bound, 0.0);
        EXPECT_LE(c.max_energy, 1e-8);
        EXPECT_FALSE(c.flagged);
    }
}

TEST(Connection, GeneratedDatumSatisfiesBound) {
    for (double m : {1.5, 2.0, 3.0}) {
        const MediumParams p(m);
        const auto d = Domain::interval(1.0, 128);
        const LevelReport lv = compute_levels(d, p);
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const GeneratedDatum g = generate_admissible_datum(lv, p, seed);
            const ConnectionResult c = connect_to_ground_state(lv.w, g.phi, 12, p);
            EXPECT_EQ(c.cross_term, 0.0);
            EXPECT_LT(c.defect, 1e-8);
            EXPECT_FALSE(c.flagged);
        }
    }
}

TEST(Connection, RejectsSignChangingStart) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 16);
    const Field f = Field::sample(d, [](double x, double) { return std::sin(2 * kPi * x); });
    EXPECT_THROW(connect_to_ground_state(f, f, 4, p), ContractViolation);
}

TEST(StringMethod, OneDimensionalSaddleMatchesNodalLevel) {
    for (double m : {1.5, 2.0, 3.0}) {
        const MediumParams p(m);
        const auto d = Domain::interval(1.0, 128);
        const LevelReport lv = compute_levels(d, p);
        const StringResult s = string_method_lambda_star(lv.w, p);
        // Max energy never rose beyond the per-iteration allowance.
        for (std::size_t k = 1; k < s.max_energy_series.size(); ++k) {
            const double prev = s.max_energy_series[k - 1];
            EXPECT_LE(s.max_energy_series[k], prev + 1e-10 * (1.0 + std::fabs(prev)));
        }
        EXPECT_LT(s.saddle_energy, 0.0);
        EXPECT_GT(s.saddle_energy, lv.lambda1);
        EXPECT_GE(s.saddle_energy, lv.lambda2_est - 1e-8 * std::fabs(lv.lambda1));
        EXPECT_LE(std::fabs(s.saddle_energy - lv.lambda2_est), 1e-2 * std::fabs(lv.lambda2_est)) << "m=" << m;
        EXPECT_EQ(s.path.size(), 41u);
        EXPECT_EQ(sup_distance(s.path.front(), lv.w), 0.0);
        EXPECT_EQ(sup_distance(s.path.back(), -lv.w), 0.0);
    }
}

TEST(StringMethod, TwoDimensionalSaddleAboveNodalLevel) {
    const MediumParams p(2.0);
    const auto d = Domain::rectangle(1.5, 1.0, 24, 16);
    const LevelReport lv = compute_levels(d, p);
    const StringResult s = string_method_lambda_star(lv.w, p);
    EXPECT_LT(s.saddle_energy, 0.0);
    EXPECT_GT(s.saddle_energy, lv.lambda1);
    EXPECT_GE(s.saddle_energy, lv.lambda2_est - 1e-6 * std::fabs(lv.lambda1));
}

TEST(StringMethod, RejectsTooFewNodes) {
    const MediumParams p(2.0);
    const auto d = Domain::interval(1.0, 16);
    const GroundState g = solve_ground_state(d, p);
    StringControls c;
    c.nodes = 2;
    EXPECT_THROW(string_method_lambda_star(g.w, p, c), ContractViolation);
}
