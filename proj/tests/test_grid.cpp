#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pmelab/field_io.hpp"
#include "pmelab/grid.hpp"

using namespace pmelab;
using std::numbers::pi;

namespace {

Field random_field(const DomainHandle& d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(d->size());
    for (auto& x : v) x = u(rng);
    return Field(d, std::move(v));
}

double eigen_error(int cells) {
    const double L = 2.0;
    auto d = Domain::interval(L, cells);
    const Field f = Field::sample(d, [&](double x, double) { return std::sin(pi * x / L); });
    const Field lap = laplacian(f);
    const Field exact = -(pi / L) * (pi / L) * f;
    return sup_distance(lap, exact);
}

}  // namespace

TEST(Grid, DomainValidation) {
    EXPECT_THROW(Domain::interval(1.0, 4), ContractViolation);
    EXPECT_THROW(Domain::interval(-1.0, 32), ContractViolation);
    EXPECT_NO_THROW(Domain::interval(1.0, 9));
    // Two disjoint blocks on a 20x20 lattice.
    const int n = 19;
    std::vector<std::uint8_t> mask(n * n, 0);
    for (int j = 2; j < 17; ++j) {
        for (int i = 0; i < 19; ++i) {
            if (i < 9 || i > 10) mask[i + n * j] = 1;
        }
    }
    EXPECT_THROW(Domain::masked(1.0, 1.0, 20, 20, mask), ContractViolation);
    for (int j = 2; j < 17; ++j) mask[9 + n * j] = mask[10 + n * j] = 1;
    EXPECT_NO_THROW(Domain::masked(1.0, 1.0, 20, 20, mask));
}

TEST(Grid, DiskIsConnectedAndErodes) {
    auto d = Domain::disk(1.0, 40);
    EXPECT_FALSE(d->is_rectangular());
    auto e = d->eroded(2);
    EXPECT_LT(e->size(), d->size());
    EXPECT_TRUE(e->same_lattice(*d));
}

TEST(Grid, LaplacianOfZeroAndLinearity) {
    auto d = Domain::rectangle(1.5, 1.0, 24, 16);
    const Field z(d);
    EXPECT_EQ(laplacian(z).sup_norm(), 0.0);
    const Field f = random_field(d, 1), g = random_field(d, 2);
    const Field lhs = laplacian(2.5 * f + (-0.75) * g);
    const Field rhs = 2.5 * laplacian(f) + (-0.75) * laplacian(g);
    EXPECT_LE(sup_distance(lhs, rhs), 1e-12 * laplacian(f).sup_norm());
}

TEST(Grid, SineEigenfunctionSecondOrder) {
    const double e1 = eigen_error(32), e2 = eigen_error(64), e3 = eigen_error(128);
    EXPECT_NEAR(e1 / e2, 4.0, 0.05);
    EXPECT_NEAR(e2 / e3, 4.0, 0.05);
}

TEST(Grid, HatFunctionEnergy) {
    // Piecewise-linear hat with peak 1 at the midpoint of the unit interval:
    // two slopes of magnitude 2 over half-length each, so the integral is 4.
    for (int cells : {2 * 8, 2 * 33}) {
        auto d = Domain::interval(1.0, cells);
        const Field hat = Field::sample(d, [](double x, double) { return 1.0 - std::fabs(2.0 * x - 1.0); });
        EXPECT_NEAR(dirichlet_energy(hat), 4.0, 1e-12);
    }
    auto d = Domain::interval(1.0, 16);
    EXPECT_EQ(dirichlet_energy(Field(d)), 0.0);
}

TEST(Grid, SummationByParts) {
    for (auto d : {Domain::interval(1.0, 40), Domain::rectangle(1.5, 1.0, 30, 20), Domain::disk(1.0, 36)}) {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const Field f = random_field(d, s);
            const double D = dirichlet_energy(f);
            EXPECT_NEAR(D, -inner(laplacian(f), f), 1e-12 * D);
        }
    }
}

TEST(Grid, LpNormScalingAndConvergence) {
    auto d = Domain::rectangle(1.0, 1.0, 20, 20);
    const Field f = random_field(d, 3);
    for (double p : {0.5, 1.5, 2.0, 3.0})
        EXPECT_NEAR(lp_norm_pow(-2.0 * f, p), std::pow(2.0, p) * lp_norm_pow(f, p), 1e-12 * lp_norm_pow(f, p) * 8);
    auto one = Field::sample(d, [](double, double) { return 1.0; });
    EXPECT_NEAR(lp_norm_pow(one, 1.0), 19.0 * 19.0 / 400.0, 1e-14);

    // A smooth profile with nonzero end slopes: the node rule then has a
    // leading h^2 error term, so successive differences shrink by 4.
    auto bump = [](double x, double) { return x * (1.0 - x) * std::exp(x); };
    auto val = [&](int n) { return lp_norm_pow(Field::sample(Domain::interval(1.0, n), bump), 1.0); };
    const double a = val(40), b = val(80), c = val(160);
    EXPECT_NEAR((a - b) / (b - c), 4.0, 0.2);
}

TEST(Grid, SupDistanceAndParts) {
    auto d = Domain::interval(1.0, 32);
    const Field f = random_field(d, 5), g = random_field(d, 6);
    EXPECT_EQ(sup_distance(f, f), 0.0);
    EXPECT_NEAR(sup_distance(f, f.map([](double x) { return x + 0.3; })), 0.3, 1e-15);
    EXPECT_EQ(sup_distance(f, g), sup_distance(g, f));
    EXPECT_THROW(sup_distance(f, Field(Domain::interval(1.0, 33))), ContractViolation);
    EXPECT_EQ(sup_distance(positive_part(f) + negative_part(f), f), 0.0);
    EXPECT_EQ(sup_distance(negative_part_magnitude(f), -negative_part(f)), 0.0);
    const Field pos = f.map([](double x) { return std::fabs(x); });
    EXPECT_EQ(sup_distance(positive_part(pos), pos), 0.0);
    EXPECT_EQ(negative_part(pos).sup_norm(), 0.0);
    EXPECT_EQ(positive_part(-pos).sup_norm(), 0.0);
    EXPECT_EQ(sup_distance(negative_part(-pos), -pos), 0.0);
}

TEST(FieldIo, BinaryRoundTrip) {
    for (auto d : {Domain::interval(1.0, 40), Domain::rectangle(1.5, 1.0, 30, 20), Domain::disk(1.0, 36)}) {
        const Field f = random_field(d, 9);
        std::stringstream ss;
        write_field(ss, f);
        const Field g = read_field(ss);
        EXPECT_TRUE(g.domain() == f.domain());
        EXPECT_EQ(sup_distance(f, g), 0.0);
    }
    std::stringstream bad("XXXX");
    EXPECT_THROW(read_field(bad), ContractViolation);
}

TEST(FieldIo, CsvIncludesBoundary) {
    auto d = Domain::interval(1.0, 16);
    const std::string csv = field_csv_1d(Field(d));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 17);
}
