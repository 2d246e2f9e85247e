#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "mft/capacity.hpp"
#include "mft/dyadic.hpp"
#include "mft/synthesis.hpp"
#include "mft/wavelet.hpp"

// Restriction of D-dimensional coefficient fields to horizontal hyperplanes
// C_a = [0,1]^d x {a}. Three routes produce trace coefficients:
//   - closed form, valid for the saturating family only;
//   - tensor sums over the trace axes, valid for any field;
//   - grid evaluation of the wavelet series, the oracle for both.

namespace mft {

enum class TraceRoute { closed_form, tensor, grid };

struct TraceResult {
    std::vector<double> a;         // hyperplane location, entries in (0,1]
    double r = std::nan("");       // tag: which auxiliary sampler produced a
    std::shared_ptr<DenseField> field;  // d^F wavelet coefficients, dim d
    // d^G scaling-coefficient arrays (x-orientation all-scaling), per level;
    // empty when the route guarantees they vanish (saturating family)
    std::vector<std::vector<double>> dG_profile;
    TraceRoute route = TraceRoute::tensor;
    int first_valid_level = 1;  // closed-form route: levels below are zeroed

    bool hasDG() const {
        for (const auto& lvl : dG_profile)
            for (double v : lvl)
                if (v != 0.0) return true;
        return false;
    }
};

struct KIndex {
    std::vector<std::int64_t> k;  // size d', may be negative at small levels
    bool valid = false;           // all entries in (0, 2^j)
};

// The congruence-class index k_j(a): per trace axis,
// k = p_{j,i} + floor((2^j a_i - p_{j,i}) / K) * K — the unique index in the
// class p_j mod K whose (length-K) wavelet support covers 2^j a_i.
inline KIndex kIndex(const OffsetSchedule& sched, std::span<const double> a, int j) {
    if (static_cast<int>(a.size()) != sched.d_prime)
        throw std::invalid_argument("kIndex: a has wrong dimension");
    if (j < 1 || j > sched.J_max)
        throw std::invalid_argument("kIndex: level outside schedule");
    const auto p = sched.offsets(j);
    KIndex out;
    out.k.resize(a.size());
    out.valid = true;
    const double n = std::ldexp(1.0, j);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double pj = double(p[i]);
        out.k[i] = p[i] +
                   static_cast<std::int64_t>(std::floor((n * a[i] - pj) / double(sched.K))) *
                       sched.K;
        if (out.k[i] <= 0 || out.k[i] >= static_cast<std::int64_t>(n)) out.valid = false;
    }
    return out;
}

// Closed-form trace of the saturating field built from xi = mu x nu:
// e_lambda(a) = j^{-2/q} mu(lambda^d) nu(lambda^{d'}_{k_j(a)}) G_j^{d'}(a),
// identical for every x-orientation l != 0^d. Levels where k_j(a) is not a
// valid cube index are zeroed; first_valid_level records the cutoff.
inline TraceResult saturatingTrace(const ModelPtr& mu, const ModelPtr& nu,
                                   const WaveletSpec& spec, const OffsetSchedule& sched,
                                   double q, std::span<const double> a, int J) {
    if (sched.d_prime != nu->dim())
        throw std::invalid_argument("saturatingTrace: schedule built for wrong d'");
    if (J > sched.J_max)
        throw std::invalid_argument("saturatingTrace: schedule shorter than J");
    const int d = mu->dim();
    TraceResult res;
    res.a.assign(a.begin(), a.end());
    res.route = TraceRoute::closed_form;
    res.field = std::make_shared<DenseField>(d, J);
    res.first_valid_level = J + 1;

    for (int j = 1; j <= J; ++j) {
        const KIndex ki = kIndex(sched, a, j);
        if (!ki.valid) continue;
        if (res.first_valid_level > j) res.first_valid_level = j;
        const double g = evalGd(spec, sched, j, a);
        if (g == 0.0) continue;  // the whole level vanishes
        const double nu_mass = nu->mass(DyadicCube(nu->dim(), j, ki.k));
        const double fac = detail::levelFactor(j, q) * nu_mass * g;
        if (fac == 0.0) continue;
        const std::int64_t nside = std::int64_t(1) << j;
        const unsigned lmax = 1u << d;
        std::vector<std::int64_t> k(d, 0);
        for (;;) {
            const double e = fac * mu->mass(DyadicCube(d, j, k));
            if (e != 0.0)
                for (unsigned l = 1; l < lmax; ++l) res.field->at(j, k, l) = e;
            int i = d - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
    }
    return res;
}

// Tensor-route trace of a generic D-dimensional field. At each level,
//   d^F_{(j,k,l)}(a)   = sum over k', l' in {0,1}^{d'} of
//                        c_{(j,(k,k'),(l,l'))} prod_i psi-or-phi(2^j a_i - k'_i)
//   (x-orientation l != 0^d), while the all-scaling x-orientation collects
//   the d^G profile with l' restricted to nonzero masks.
// Compact support limits k' to a K-wide window around 2^j a per axis.
inline TraceResult tensorTrace(const CoefficientSource& f, std::span<const double> a,
                               const WaveletSpec& spec, int d) {
    const int D = f.dim();
    const int dp = D - d;
    if (dp < 1 || static_cast<int>(a.size()) != dp)
        throw std::invalid_argument("tensorTrace: dimension split mismatch");
    const int J = f.maxLevel();
    TraceResult res;
    res.a.assign(a.begin(), a.end());
    res.route = TraceRoute::tensor;
    res.field = std::make_shared<DenseField>(d, J);
    res.dG_profile.assign(std::size_t(J) + 1, {});

    const unsigned lx_max = 1u << d;
    const unsigned lp_max = 1u << dp;
    std::vector<std::int64_t> kD(D);

    for (int j = 1; j <= J; ++j) {
        const std::int64_t nside = std::int64_t(1) << j;
        auto& dG = res.dG_profile[static_cast<std::size_t>(j)];
        dG.assign(std::size_t(1) << (std::size_t(j) * std::size_t(d)), 0.0);

        // enumerate the trace-axis windows once per level
        struct Term {
            std::vector<std::int64_t> kp;
            unsigned lp;
            double weight;
        };
        std::vector<Term> terms;
        std::vector<std::int64_t> lo(dp), hi(dp);
        for (int i = 0; i < dp; ++i) {
            const double t = std::ldexp(a[i], j);
            lo[i] = std::max<std::int64_t>(
                0, static_cast<std::int64_t>(std::ceil(t)) - spec.support);
            hi[i] = std::min<std::int64_t>(nside - 1,
                                           static_cast<std::int64_t>(std::floor(t)));
        }
        for (unsigned lp = 0; lp < lp_max; ++lp) {
            std::vector<std::int64_t> kp(lo.begin(), lo.end());
            bool empty = false;
            for (int i = 0; i < dp; ++i)
                if (lo[i] > hi[i]) empty = true;
            if (empty) continue;
            for (;;) {
                double w = 1.0;
                for (int i = 0; i < dp; ++i) {
                    const double t = std::ldexp(a[i], j) - double(kp[i]);
                    w *= ((lp >> i) & 1u) ? spec.evalPsi(t) : spec.evalPhi(t);
                }
                if (w != 0.0) terms.push_back({kp, lp, w});
                int i = dp - 1;
                while (i >= 0 && ++kp[i] > hi[i]) {
                    kp[i] = lo[i];
                    --i;
                }
                if (i < 0) break;
            }
        }

        std::vector<std::int64_t> k(d, 0);
        for (;;) {
            for (int i = 0; i < d; ++i) kD[static_cast<std::size_t>(i)] = k[std::size_t(i)];
            for (const Term& t : terms) {
                for (int i = 0; i < dp; ++i) kD[static_cast<std::size_t>(d + i)] = t.kp[std::size_t(i)];
                const unsigned lhigh = t.lp << d;
                for (unsigned lx = 0; lx < lx_max; ++lx) {
                    const unsigned lD = lx | lhigh;
                    if (lD == 0) continue;  // no such orientation in the field
                    const double c = f.coeff(j, kD, lD);
                    if (c == 0.0) continue;
                    if (lx == 0)
                        dG[static_cast<std::size_t>(flatIndex(j, k))] += c * t.weight;
                    else
                        res.field->at(j, k, lx) += c * t.weight;
                }
            }
            int i = d - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
    }
    return res;
}

// Grid oracle: evaluates the wavelet series of f on the hyperplane at
// x_n = (n + shift) 2^{-J_grid} per retained axis. shift defaults to the
// scaling-function centroid so that an orthogonal pyramid on the samples
// recovers the trace coefficients on interior cubes.
inline std::vector<double> gridTrace(const CoefficientSource& f, std::span<const double> a,
                                     int J_grid, const WaveletSpec& spec, int d,
                                     double shift) {
    const int D = f.dim();
    const int dp = D - d;
    if (dp < 1 || static_cast<int>(a.size()) != dp)
        throw std::invalid_argument("gridTrace: dimension split mismatch");
    if (J_grid < f.maxLevel())
        throw std::invalid_argument("gridTrace: grid must be at least as fine as the field");

    const std::int64_t ng = std::int64_t(1) << (std::int64_t(J_grid) * d);
    const std::int64_t ng_side = std::int64_t(1) << J_grid;
    std::vector<double> samples(static_cast<std::size_t>(ng), 0.0);

    std::vector<double> aval(a.size());
    for (int j = 1; j <= f.maxLevel(); ++j) {
        f.forEachNonzero(j, [&](std::span<const std::int64_t> k, unsigned l, double c) {
            double w_a = 1.0;
            for (int i = 0; i < dp; ++i) {
                const double t = std::ldexp(a[i], j) - double(k[d + i]);
                w_a *= ((l >> (d + i)) & 1u) ? spec.evalPsi(t) : spec.evalPhi(t);
            }
            if (w_a == 0.0) return;
            const double cw = c * w_a;
            // per retained axis the factor is supported on
            // 2^j x - k_i in (0, K): an aligned window of grid points
            std::vector<std::int64_t> glo(d), ghi(d);
            for (int i = 0; i < d; ++i) {
                // (n + shift) 2^{-Jg} in (k_i 2^-j, (k_i+K) 2^-j)
                const double lo_n = std::ldexp(double(k[i]), J_grid - j) - shift;
                const double hi_n =
                    std::ldexp(double(k[i] + spec.support), J_grid - j) - shift;
                glo[i] = std::max<std::int64_t>(
                    0, static_cast<std::int64_t>(std::ceil(lo_n)));
                ghi[i] = std::min<std::int64_t>(
                    ng_side - 1, static_cast<std::int64_t>(std::floor(hi_n)));
                if (glo[i] > ghi[i]) return;
            }
            std::vector<std::int64_t> n(glo.begin(), glo.end());
            for (;;) {
                double w = cw;
                std::int64_t flat = 0;
                for (int i = 0; i < d; ++i) {
                    const double x = std::ldexp(double(n[i]) + shift, -J_grid);
                    const double t = std::ldexp(x, j) - double(k[i]);
                    w *= ((l >> i) & 1u) ? spec.evalPsi(t) : spec.evalPhi(t);
                    flat = (flat << J_grid) | n[i];
                }
                if (w != 0.0) samples[static_cast<std::size_t>(flat)] += w;
                int i = d - 1;
                while (i >= 0 && ++n[i] > ghi[i]) {
                    n[i] = glo[i];
                    --i;
                }
                if (i < 0) break;
            }
        });
    }
    return samples;
}

inline std::vector<double> gridTrace(const CoefficientSource& f, std::span<const double> a,
                                     int J_grid, const WaveletSpec& spec, int d) {
    return gridTrace(f, a, J_grid, spec, d, spec.phiCentroid());
}

// Recovers unnormalized trace coefficients (the d^F convention) from grid
// samples of a 1-D trace via the orthogonal periodic pyramid:
// d^F_{j,k} = 2^{(j - J_grid)/2} * (orthonormal detail at level j).
inline std::shared_ptr<DenseField> traceFromSamples(std::span<const double> samples,
                                                    const WaveletSpec& spec, int J) {
    int J_grid = 0;
    while ((std::size_t(1) << J_grid) < samples.size()) ++J_grid;
    if ((std::size_t(1) << J_grid) != samples.size())
        throw std::invalid_argument("traceFromSamples: length must be a power of two");
    const PeriodicDwt pyr = dwtPeriodic(samples, spec, J_grid - 1);
    auto out = std::make_shared<DenseField>(1, J);
    for (int j = 1; j <= J; ++j) {
        // detail[i] holds 2^{J_grid-1-i} coefficients: level j sits at
        // i = J_grid - 1 - j
        const auto& det = pyr.detail[static_cast<std::size_t>(J_grid - 1 - j)];
        const double scale = std::exp2(0.5 * double(j - J_grid));
        for (std::int64_t k = 0; k < (std::int64_t(1) << j); ++k) {
            const std::int64_t kk[1] = {k};
            out->at(j, kk, 1u) = scale * det[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

// Target-space index Gamma^p_{nu,r} = h^r_nu + dim(nu_r)/p, with the
// convention alpha/inf = 0.
inline double gammaTarget(const ModelPtr& nu, double r, double p, int j_eval = 12) {
    std::vector<double> q_grid;
    for (double q = r - 2.0; q <= r + 2.0 + 1e-12; q += 0.01) q_grid.push_back(q);
    const ScalingTable tab = scalingFunction(*nu, q_grid, j_eval);
    const double h = hOfR(tab, r);
    if (std::isinf(p)) return h;
    return h + dimAux(tab, r) / p;
}

}  // namespace mft
