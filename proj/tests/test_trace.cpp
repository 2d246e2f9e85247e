#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "mft/synthesis.hpp"
#include "mft/trace.hpp"
#include "mft/wavelet.hpp"

using namespace mft;

namespace {

// a fixed constant-offset schedule for index arithmetic tests (K = 3)
OffsetSchedule constantSchedule(int p, int J_max) {
    OffsetSchedule s;
    s.d_prime = 1;
    s.window = 1;
    s.pattern = {{p}};
    s.J_max = J_max;
    s.alpha = 0.0;
    s.grid_bits = 0;
    s.K = 3;
    return s;
}

const WaveletSpec& db2Spec() {
    static const WaveletSpec spec = buildSpec("db2", 12);
    return spec;
}

const OffsetSchedule& db2Schedule() {
    static const OffsetSchedule s = findOffsetSchedule(db2Spec(), 1, 20, 3, 12);
    return s;
}

}  // namespace

TEST_CASE("congruence-class index selects the covering support window") {
    const OffsetSchedule s1 = constantSchedule(1, 8);
    const double a = 0.7;
    const KIndex ki = kIndex(s1, std::span<const double>(&a, 1), 4);
    CHECK(ki.valid);
    CHECK(ki.k[0] == 10);  // 16*0.7 = 11.2; 1 + floor(10.2/3)*3 = 10
    CHECK(ki.k[0] % 3 == 1);
    // the support (k, k+3] covers 2^j a
    CHECK(16.0 * a - double(ki.k[0]) > 0.0);
    CHECK(16.0 * a - double(ki.k[0]) <= 3.0);

    const OffsetSchedule s0 = constantSchedule(0, 8);
    const double one = 1.0;
    const KIndex ke = kIndex(s0, std::span<const double>(&one, 1), 4);
    CHECK(ke.valid);
    CHECK(ke.k[0] == (16 / 3) * 3);  // 15

    // near the left edge the class index drops to <= 0 and is invalid
    const double tiny = 0.01;
    const KIndex kt = kIndex(s1, std::span<const double>(&tiny, 1), 4);
    CHECK_FALSE(kt.valid);

    CHECK_THROWS_AS(kIndex(s1, std::span<const double>(&a, 1), 9),
                    std::invalid_argument);
}

TEST_CASE("closed-form and tensor traces of the saturating field agree") {
    const auto mu = std::make_shared<CascadeModel>(1, std::vector<double>{0.25, 0.75});
    const auto nu = std::make_shared<CascadeModel>(1, std::vector<double>{0.3, 0.7});
    const auto xi = std::make_shared<ProductModel>(mu, nu);
    const WaveletSpec& spec = db2Spec();
    const OffsetSchedule& sched = db2Schedule();
    const int J = 8;

    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (const double q : {kPosInf, 2.0}) {
        const auto g = saturatingField(xi, q, J, sched);
        for (int trial = 0; trial < 6; ++trial) {
            const double a[1] = {unif(rng)};
            const TraceResult cf = saturatingTrace(mu, nu, spec, sched, q, a, J);
            const TraceResult tn = tensorTrace(*g, a, spec, 1);
            CHECK(cf.route == TraceRoute::closed_form);
            CHECK(tn.route == TraceRoute::tensor);
            // the saturating field has no all-scaling x-orientation content
            CHECK_FALSE(tn.hasDG());
            // the closed form zeroes levels without a valid class index;
            // compare from the first valid level on
            for (int j = cf.first_valid_level; j <= J; ++j) {
                const auto lhs = cf.field->levelData(j);
                const auto rhs = tn.field->levelData(j);
                REQUIRE(lhs.size() == rhs.size());
                for (std::size_t i = 0; i < lhs.size(); ++i)
                    CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-8).scale(1.0));
            }
        }
    }
}

TEST_CASE("closed-form trace zeroes levels without a valid class index") {
    const auto mu = CascadeModel::lebesgue(1);
    const auto nu = CascadeModel::lebesgue(1);
    const WaveletSpec& spec = db2Spec();
    const OffsetSchedule& sched = db2Schedule();
    const double a[1] = {0.04};  // 2^j a < 1 until j = 5: coarse levels invalid
    const TraceResult res = saturatingTrace(mu, nu, spec, sched, kPosInf, a, 10);
    CHECK(res.first_valid_level > 1);
    for (int j = 1; j < res.first_valid_level; ++j)
        for (const double v : res.field->levelData(j)) CHECK(v == 0.0);
}

TEST_CASE("tensor trace of a single coefficient is an explicit wavelet sample") {
    const WaveletSpec& spec = db2Spec();
    const double a[1] = {0.62};
    for (int j : {3, 5}) {
        DenseField f(2, 6);
        const std::int64_t kp = static_cast<std::int64_t>(std::floor(std::ldexp(a[0], j))) - 1;
        const std::int64_t k[2] = {2, kp};
        const double c = 0.8;
        const double t = std::ldexp(a[0], j) - double(kp);
        SUBCASE("a-axis wavelet feeds d^F") {
            f.at(j, k, 3u) = c;  // x wavelet + a wavelet
            const TraceResult res = tensorTrace(f, a, spec, 1);
            const std::int64_t kx[1] = {2};
            CHECK(res.field->coeff(j, kx, 1u) ==
                  doctest::Approx(c * spec.evalPsi(t)).epsilon(1e-12));
            CHECK_FALSE(res.hasDG());
        }
        SUBCASE("a-axis scaling feeds d^F through phi") {
            f.at(j, k, 1u) = c;  // x wavelet + a scaling
            const TraceResult res = tensorTrace(f, a, spec, 1);
            const std::int64_t kx[1] = {2};
            CHECK(res.field->coeff(j, kx, 1u) ==
                  doctest::Approx(c * spec.evalPhi(t)).epsilon(1e-12));
        }
        SUBCASE("all-scaling x-orientation feeds the d^G profile only") {
            f.at(j, k, 2u) = c;  // x scaling + a wavelet
            const TraceResult res = tensorTrace(f, a, spec, 1);
            for (int jj = 1; jj <= 6; ++jj)
                for (const double v : res.field->levelData(jj)) CHECK(v == 0.0);
            CHECK(res.hasDG());
            CHECK(res.dG_profile[std::size_t(j)][2] ==
                  doctest::Approx(c * spec.evalPsi(t)).epsilon(1e-12));
        }
    }
}

TEST_CASE("tensor trace is linear in the field") {
    const auto mu = std::make_shared<CascadeModel>(1, std::vector<double>{0.4, 0.6});
    const auto nu = std::make_shared<CascadeModel>(1, std::vector<double>{0.3, 0.7});
    const auto xi = std::make_shared<ProductModel>(mu, nu);
    const auto g = saturatingField(xi, kPosInf, 6, db2Schedule());
    const auto probes = probeFields(g, 1);
    const std::vector<double> betas = {0.7, -1.3};
    const SourcePtr f = combine(g, betas, probes);
    const double a[1] = {0.81};
    const TraceResult whole = tensorTrace(*f, a, db2Spec(), 1);
    const TraceResult tg = tensorTrace(*g, a, db2Spec(), 1);
    const TraceResult t0 = tensorTrace(*probes[0], a, db2Spec(), 1);
    const TraceResult t1 = tensorTrace(*probes[1], a, db2Spec(), 1);
    for (int j = 1; j <= 6; ++j) {
        const auto w = whole.field->levelData(j);
        const auto vg = tg.field->levelData(j);
        const auto v0 = t0.field->levelData(j);
        const auto v1 = t1.field->levelData(j);
        for (std::size_t i = 0; i < w.size(); ++i)
            CHECK(w[i] == doctest::Approx(vg[i] + 0.7 * v0[i] - 1.3 * v1[i])
                              .epsilon(1e-12)
                              .scale(1.0));
    }
}

TEST_CASE("grid oracle: series evaluation of simple fields") {
    const WaveletSpec& spec = db2Spec();
    const double a[1] = {0.62};

    DenseField zero(2, 4);
    const auto z = gridTrace(zero, a, 6, spec, 1);
    CHECK(z.size() == 64);
    for (const double v : z) CHECK(v == 0.0);

    DenseField f(2, 4);
    const int j = 3;
    const std::int64_t kp = 3;
    const std::int64_t k[2] = {2, kp};
    f.at(j, k, 3u) = 1.0;
    const double shift = spec.phiCentroid();
    const auto s = gridTrace(f, a, 6, spec, 1, shift);
    const double ta = std::ldexp(a[0], j) - double(kp);
    for (std::int64_t n = 0; n < 64; ++n) {
        const double x = std::ldexp(double(n) + shift, -6);
        const double expect = spec.evalPsi(ta) * spec.evalPsi(std::ldexp(x, j) - 2.0);
        CHECK(s[std::size_t(n)] == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("pyramid on grid samples recovers tensor-route coefficients") {
    const WaveletSpec spec = buildSpec("db4", 14);
    const auto mu = std::make_shared<CascadeModel>(1, std::vector<double>{0.25, 0.75});
    const auto nu = std::make_shared<CascadeModel>(1, std::vector<double>{0.3, 0.7});
    const auto xi = std::make_shared<ProductModel>(mu, nu);
    const OffsetSchedule sched = findOffsetSchedule(spec, 1, 12, 3, 12);
    const int J = 5, J_grid = 12;
    const auto g = saturatingField(xi, kPosInf, J, sched);
    const double a[1] = {0.58};

    const TraceResult tn = tensorTrace(*g, a, spec, 1);
    const auto samples = gridTrace(*g, a, J_grid, spec, 1);
    const auto rec = traceFromSamples(samples, spec, J);

    int levels_checked = 0;
    for (int j = 2; j <= J; ++j) {
        double scale = 0.0;
        for (const double v : tn.field->levelData(j)) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) continue;  // offset beyond the coarse grid: empty level
        ++levels_checked;
        // interior cubes only: the periodic pyramid wraps near the edges
        const std::int64_t nside = std::int64_t(1) << j;
        for (std::int64_t kk = spec.support; kk < nside - spec.support; ++kk) {
            const std::int64_t kx[1] = {kk};
            CHECK(rec->coeff(j, kx, 1u) ==
                  doctest::Approx(tn.field->coeff(j, kx, 1u))
                      .epsilon(1e-3)
                      .scale(scale));
        }
    }
    CHECK(levels_checked >= 2);
}

TEST_CASE("target-space index combines the auxiliary exponent and dimension") {
    const auto leb = CascadeModel::lebesgue(1);
    CHECK(gammaTarget(leb, 0.7, kPosInf) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(gammaTarget(leb, 0.0, 2.0) == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(gammaTarget(leb, 1.3, 1.0) == doctest::Approx(2.0).epsilon(1e-6));

    const auto nu = std::make_shared<CascadeModel>(1, std::vector<double>{0.3, 0.7});
    // r = 0: auxiliary measure is uniform, so the index is h^0 + 1/p
    CHECK(gammaTarget(nu, 0.0, kPosInf) == doctest::Approx(1.1256717).epsilon(1e-3));
    CHECK(gammaTarget(nu, 0.0, 1.0) == doctest::Approx(2.1256717).epsilon(1e-3));
    // r = 1: the auxiliary measure is nu itself; h^1 is its information
    // dimension and dim(nu_1) matches it
    const double h1 = -(0.3 * std::log2(0.3) + 0.7 * std::log2(0.7));
    CHECK(gammaTarget(nu, 1.0, kPosInf) == doctest::Approx(h1).epsilon(1e-3));
    CHECK(gammaTarget(nu, 1.0, 1.0) == doctest::Approx(2.0 * h1).epsilon(1e-3));
}

TEST_CASE("trace coefficient magnitudes are controlled by the environment") {
    const auto mu = std::make_shared<CascadeModel>(1, std::vector<double>{0.25, 0.75});
    const auto nu = std::make_shared<CascadeModel>(1, std::vector<double>{0.3, 0.7});
    const WaveletSpec& spec = db2Spec();
    const OffsetSchedule& sched = db2Schedule();
    double gmax = 0.0;
    for (int i = 0; i <= 4096; ++i)
        gmax = std::max(gmax, std::abs(spec.evalG(3.0 * double(i) / 4096.0)));
    const double a[1] = {0.77};
    const TraceResult res = saturatingTrace(mu, nu, spec, sched, 2.0, a, 8);
    for (int j = res.first_valid_level; j <= 8; ++j) {
        const KIndex ki = kIndex(sched, a, j);
        if (!ki.valid) continue;
        const double bound =
            std::pow(double(j), -1.0) * nu->mass(DyadicCube(1, j, ki.k)) * gmax;
        const std::int64_t nside = std::int64_t(1) << j;
        for (std::int64_t kk = 0; kk < nside; ++kk) {
            const std::int64_t kx[1] = {kk};
            const double mu_m = mu->mass(DyadicCube(1, j, {kk}));
            CHECK(std::abs(res.field->coeff(j, kx, 1u)) <= bound * mu_m + 1e-15);
        }
    }
}
