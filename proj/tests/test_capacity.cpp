#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "mft/capacity.hpp"

using namespace mft;

namespace {

// Independent closed-form oracle for the binomial cascade on [0,1]:
// tau(q) = -log2(p0^q + p1^q), exact at every level.
double binomialTau(double p0, double p1, double q) {
    return -std::log2(std::pow(p0, q) + std::pow(p1, q));
}

// d/dq of the oracle above.
double binomialTauDeriv(double p0, double p1, double q) {
    const double a = std::pow(p0, q), b = std::pow(p1, q);
    return -(a * std::log(p0) + b * std::log(p1)) / ((a + b) * std::log(2.0));
}

// Brute-force log2 sum over all level-j cubes via mass() queries only.
double bruteLog2PowerSum(const CapacityModel& m, int j, double q) {
    Log2SumExp acc;
    const std::int64_t nside = std::int64_t(1) << j;
    std::vector<std::int64_t> k(m.dim(), 0);
    for (;;) {
        const double mass = m.mass(DyadicCube(m.dim(), j, k));
        if (mass > 0.0) acc.add(q * std::log2(mass));
        int i = m.dim() - 1;
        while (i >= 0 && ++k[i] >= nside) {
            k[i] = 0;
            --i;
        }
        if (i < 0) break;
    }
    return acc.value();
}

std::shared_ptr<CascadeModel> binom(double p0, double p1) {
    return std::make_shared<CascadeModel>(1, std::vector<double>{p0, p1});
}

GibbsModel::Potential cosinePotential(double amp) {
    return [amp](std::span<const double> x) {
        double s = 0.0;
        for (const double xi : x) s += amp * std::cos(2.0 * std::acos(-1.0) * xi);
        return s;
    };
}

}  // namespace

TEST_CASE("cascade validation rejects malformed weights") {
    CHECK_THROWS_AS(CascadeModel(1, {0.3, 0.6}), std::invalid_argument);  // sum != 1
    CHECK_THROWS_AS(CascadeModel(1, {-0.1, 1.1}), std::invalid_argument);
    CHECK_THROWS_AS(CascadeModel(2, {0.5, 0.5}), std::invalid_argument);  // need 2^D
}

TEST_CASE("binomial cascade matches the closed-form tau oracle") {
    const auto m = binom(0.25, 0.75);
    std::vector<double> q_grid;
    for (double q = -4.0; q <= 4.0 + 1e-12; q += 0.25) q_grid.push_back(q);
    for (int j : {1, 4, 12}) {
        const ScalingTable t = scalingFunction(*m, q_grid, j);
        for (std::size_t i = 0; i < q_grid.size(); ++i)
            CHECK(t.tau[i] == doctest::Approx(binomialTau(0.25, 0.75, q_grid[i]))
                                  .epsilon(0.0)
                                  .scale(1.0)
                                  .epsilon(1e-10));
    }
    // the specific value tau(2) = -log2(0.0625 + 0.5625)
    const ScalingTable t = scalingFunction(*m, {2.0}, 12);
    CHECK(t.tau[0] == doctest::Approx(0.67807190511263773).epsilon(1e-10));
}

TEST_CASE("closed-form level sum equals brute-force enumeration") {
    // dual-route check: CascadeModel::log2PowerSum is closed-form; the
    // brute force only uses mass()
    const auto mu = binom(0.25, 0.75);
    const auto nu = binom(0.3, 0.7);
    for (double q : {-1.5, 0.5, 1.0, 2.0, 3.0}) {
        for (int j : {1, 3, 6}) {
            CHECK(mu->log2PowerSum(j, q) ==
                  doctest::Approx(bruteLog2PowerSum(*mu, j, q)).epsilon(1e-12));
        }
    }
    // product model factorization vs brute force on [0,1]^2
    ProductModel xi(mu, nu);
    for (double q : {-1.0, 0.7, 2.0}) {
        for (int j : {2, 4, 6}) {
            CHECK(xi.log2PowerSum(j, q) ==
                  doctest::Approx(bruteLog2PowerSum(xi, j, q)).epsilon(1e-12));
        }
    }
}

TEST_CASE("additivity of the scaling function for products") {
    const auto mu = binom(0.25, 0.75);
    const auto nu = binom(0.3, 0.7);
    ProductModel xi(mu, nu);
    std::vector<double> q_grid;
    for (double q = -5.0; q <= 5.0 + 1e-12; q += 0.5) q_grid.push_back(q);
    for (int j : {2, 8, 12}) {
        const ScalingTable txi = scalingFunction(xi, q_grid, j);
        const ScalingTable tmu = scalingFunction(*mu, q_grid, j);
        const ScalingTable tnu = scalingFunction(*nu, q_grid, j);
        for (std::size_t i = 0; i < q_grid.size(); ++i)
            CHECK(std::abs(txi.tau[i] - (tmu.tau[i] + tnu.tau[i])) <= 1e-10);
    }
}

TEST_CASE("power rule: tau of xi^s at t equals tau of xi at s t") {
    const auto nu = binom(0.3, 0.7);
    PowerModel pw(nu, 0.6);
    for (double t : {-2.0, 0.5, 1.0, 3.0})
        CHECK(scalingFunction(pw, {t}, 9).tau[0] ==
              doctest::Approx(scalingFunction(*nu, {0.6 * t}, 9).tau[0]).epsilon(1e-12));
    CHECK_THROWS_AS(PowerModel(nu, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(PowerModel(nu, -1.0), std::invalid_argument);
}

TEST_CASE("shift rule: xi^{(+s)} adds s q to tau and scales masses") {
    const auto nu = binom(0.3, 0.7);
    const auto sh = shiftedModel(nu, 0.75);
    for (double q : {-1.0, 1.0, 2.5})
        CHECK(scalingFunction(*sh, {q}, 8).tau[0] ==
              doctest::Approx(scalingFunction(*nu, {q}, 8).tau[0] + 0.75 * q)
                  .epsilon(1e-12));
    CHECK(sh->mass(DyadicCube(1, 4, {5})) ==
          doctest::Approx(nu->mass(DyadicCube(1, 4, {5})) * std::exp2(-4 * 0.75))
              .epsilon(1e-14));
    // negative shifts above the Holder bound s1 are rejected
    CHECK_NOTHROW(shiftedModel(nu, -0.2));
    CHECK_THROWS_AS(shiftedModel(nu, -2.0), std::invalid_argument);
}

TEST_CASE("conservation: unit-mass kinds sum to 1 at every level") {
    std::vector<ModelPtr> models = {
        binom(0.25, 0.75),
        CascadeModel::lebesgue(2),
        std::make_shared<GibbsModel>(1, cosinePotential(0.4)),
        auxiliaryModel(binom(0.3, 0.7), 1.5),
    };
    for (const auto& m : models) {
        for (int j : {1, 3, 6}) {
            if (j * m->dim() > 12) continue;
            CHECK(std::exp2(bruteLog2PowerSum(*m, j, 1.0)) ==
                  doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("monotone hierarchy: child mass never exceeds parent mass") {
    const auto g = std::make_shared<GibbsModel>(1, cosinePotential(0.7));
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int j = 1 + int(rng() % 7);
        const std::int64_t k = std::int64_t(rng() % (std::uint64_t(1) << j));
        DyadicCube c(1, j, {k});
        DyadicCube parent(1, j - 1, {k >> 1});
        CHECK(g->mass(c) <= g->mass(parent) + 1e-15);
    }
}

TEST_CASE("gibbs kind: constant potential reduces to Lebesgue") {
    GibbsModel g(1, [](std::span<const double>) { return 0.37; });
    for (int j : {1, 4, 8}) {
        CHECK(g.mass(DyadicCube(1, j, {std::int64_t(1) << (j - 1)})) ==
              doctest::Approx(std::exp2(-j)).epsilon(1e-12));
    }
}

TEST_CASE("gibbs kind: quasi-Bernoulli and doubling constants are finite") {
    GibbsModel g(1, cosinePotential(0.5));
    const CapacityDiagnostics d = diagnostics(g, 10);
    CHECK(d.doubling < 10.0);
    CHECK(d.quasi_bernoulli < 20.0);
    CHECK(d.s1 > 0.0);
    CHECK(d.s2 >= d.s1);
    CHECK_THROWS_AS(GibbsModel(1, cosinePotential(0.5), 4).mass(DyadicCube(1, 6, {0})),
                    std::out_of_range);
}

TEST_CASE("diagnostics: Lebesgue exponents are exactly 1") {
    const CapacityDiagnostics d = diagnostics(*CascadeModel::lebesgue(1), 10);
    CHECK(d.s1 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(d.s2 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(d.quasi_bernoulli == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("legendre duality on the grid") {
    const auto m = binom(0.3, 0.7);
    std::vector<double> q_grid;
    for (double q = -3.0; q <= 3.0 + 1e-12; q += 0.01) q_grid.push_back(q);
    ScalingTable t = scalingFunction(*m, q_grid, 10);
    for (double r : {-2.0, -0.5, 0.0, 1.0, 2.0}) {
        const double h = hOfR(t, r);
        const double lhs = legendreAt(t, h);
        const double rhs = r * h - interpolateOnGrid(t.q, t.tau, r);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6).scale(1.0));
    }
    // sentinels outside the derivative range and below -D
    CHECK(legendreAt(t, 10.0) == kNegInf);
    CHECK(legendreAt(t, 0.01) == kNegInf);
}

TEST_CASE("tau' and h^r match the closed-form binomial derivative") {
    const auto m = binom(0.3, 0.7);
    std::vector<double> q_grid;
    for (double q = -2.5; q <= 2.5 + 1e-12; q += 0.01) q_grid.push_back(q);
    const ScalingTable t = scalingFunction(*m, q_grid, 8);
    for (double r : {-1.0, 0.0, 0.5, 2.0})
        CHECK(hOfR(t, r) ==
              doctest::Approx(binomialTauDeriv(0.3, 0.7, r)).epsilon(1e-4));
    // h^0 specific value for (0.3, 0.7)
    CHECK(hOfR(t, 0.0) == doctest::Approx(1.1256717464455+0.0000000000000).epsilon(1e-4));
    // dim(nu_r) = r h^r - tau(r)
    CHECK(dimAux(t, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("auxiliary cascade: closed-form reweighting") {
    // (0.1, 0.9) at r=2 gives (0.01, 0.81)/0.82
    const auto aux = auxiliaryModel(binom(0.1, 0.9), 2.0);
    const auto cas = std::dynamic_pointer_cast<const CascadeModel>(aux);
    REQUIRE(cas);
    CHECK(cas->weights()[0] == doctest::Approx(0.01 / 0.82).epsilon(1e-14));
    CHECK(cas->weights()[1] == doctest::Approx(0.81 / 0.82).epsilon(1e-14));
    // r=0 flattens any cascade to the uniform measure
    const auto flat = auxiliaryModel(binom(0.25, 0.75), 0.0);
    for (int j : {1, 5, 9}) {
        const std::int64_t k = (std::int64_t(1) << j) - 1;
        CHECK(std::abs(flat->mass(DyadicCube(1, j, {k})) - std::exp2(-j)) <= 1e-12);
    }
}

TEST_CASE("auxiliary sandwich: nu_r(I) / (nu(I)^r 2^{j tau(r)}) stays bounded") {
    const auto nu = binom(0.3, 0.7);
    for (double r : {0.5, 1.5, 2.0}) {
        const auto aux = auxiliaryModel(nu, r);
        const double tau_r = binomialTau(0.3, 0.7, r);
        double lo = kPosInf, hi = 0.0;
        for (int j : {2, 6, 10, 12}) {
            for (int rep = 0; rep < 20; ++rep) {
                const std::int64_t k =
                    std::int64_t((0x9e3779b97f4a7c15ULL * std::uint64_t(rep * 31 + j)) %
                                 (std::uint64_t(1) << j));
                DyadicCube c(1, j, {k});
                const double ratio =
                    aux->mass(c) / (std::pow(nu->mass(c), r) * std::exp2(j * tau_r));
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
        }
        CHECK(hi / lo <= 2.0);  // exact cascades: equality, spread 1
        CHECK(hi / lo == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("gibbs auxiliary goes through the per-node renormalization path") {
    const auto g = std::make_shared<GibbsModel>(1, cosinePotential(0.4));
    const auto aux = auxiliaryModel(g, 1.5);
    CHECK(std::exp2(bruteLog2PowerSum(*aux, 5, 1.0)) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS_AS(auxiliaryModel(std::make_shared<PowerModel>(g, 2.0), 1.0),
                    std::invalid_argument);
}

TEST_CASE("sampling follows the measure and is deterministic") {
    const auto m = binom(0.1, 0.9);
    const auto x1 = samplePoint(*m, 14, 42);
    const auto x2 = samplePoint(*m, 14, 42);
    CHECK(x1 == x2);
    // heavily skewed cascade: most samples fall in high-mass cubes, so the
    // average first digit should be mostly 1
    int ones = 0;
    for (std::uint64_t s = 0; s < 100; ++s)
        if (samplePoint(*m, 10, s)[0] >= 0.5) ++ones;
    CHECK(ones > 70);
}

TEST_CASE("local dimension recovers path exponents of the cascade") {
    const auto m = binom(0.25, 0.75);
    // x = 0 follows the p0 branch forever: h = -log2 0.25 = 2
    const double x0[1] = {0.0};
    const LocalDimension d0 = localDimension(*m, x0, 4, 14);
    CHECK(d0.ls_slope == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(d0.min_slope == doctest::Approx(2.0).epsilon(1e-9));
    // x just below 1 follows the p1 branch: h = -log2 0.75
    const double x1[1] = {1.0 - std::ldexp(1.0, -20)};
    const LocalDimension d1 = localDimension(*m, x1, 4, 14);
    CHECK(d1.ls_slope == doctest::Approx(-std::log2(0.75)).epsilon(1e-9));
    // zero-mass path yields the +inf sentinel
    const auto degenerate = std::make_shared<CascadeModel>(1, std::vector<double>{0.0, 1.0});
    const LocalDimension dz = localDimension(*degenerate, x0, 2, 6);
    CHECK(std::isinf(dz.ls_slope));
}

TEST_CASE("level sets partition the cube range of exponents") {
    const auto m = binom(0.25, 0.75);
    const int j = 8;
    const auto all = levelSetCubes(*m, j, 0.0, 10.0);
    CHECK(all.size() == std::size_t(1) << j);
    // cubes at exact exponent h = 2 are those with all-zero digits: exactly 1
    const auto tight = levelSetCubes(*m, j, 1.999, 2.001);
    CHECK(tight.size() == 1);
    CHECK(tight[0].index[0] == 0);
}

TEST_CASE("good-set report finds a usable level for the binomial cascade") {
    const auto nu = binom(0.3, 0.7);
    const GoodSetReport rep = goodSetReport(nu, 0.0, 4, 2, 3, 4, 12);
    CHECK(rep.h_r == doctest::Approx(1.12567).epsilon(1e-3));
    CHECK(rep.dim_r == doctest::Approx(1.0).epsilon(1e-6));
    REQUIRE(!rep.levels.empty());
    CHECK(rep.estimated_J >= 4);
    // enlarged violator mass eventually decays below 1/n
    CHECK(rep.levels.back().violator_aux_mass_enlarged <= 0.25);
}

TEST_CASE("log-domain accumulator is exact against direct summation") {
    Log2SumExp acc;
    double direct = 0.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-40.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = unif(rng);
        acc.add(t);
        direct += std::exp2(t);
    }
    CHECK(acc.value() == doctest::Approx(std::log2(direct)).epsilon(1e-12));
    Log2SumExp empty;
    CHECK(empty.value() == kNegInf);
}
