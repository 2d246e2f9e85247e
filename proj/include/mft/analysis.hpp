#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mft/capacity.hpp"
#include "mft/dyadic.hpp"
#include "mft/synthesis.hpp"

// Wavelet leaders, pointwise Holder exponent estimation, empirical
// singularity spectra (leader-Legendre and leader-histogram), and predicted
// trace-spectrum curves for overlay comparison.

namespace mft {

// L_lambda = sup of |c_{lambda'}| over all lambda' at level >= j whose cube
// lies inside 3*lambda (same center, triple side, clipped to [0,1]^D).
struct LeaderField {
    int dim = 1;
    int max_level = 1;
    // leaders[j][flat cube index], levels 1..max_level (index 0 unused)
    std::vector<std::vector<double>> leaders;
    // subtree maxima M(lambda) = max(|c| over orientations, children M)
    std::vector<std::vector<double>> subtree_max;

    double at(int j, std::span<const std::int64_t> k) const {
        return leaders[static_cast<std::size_t>(j)]
                      [static_cast<std::size_t>(flatIndex(j, k))];
    }
};

inline LeaderField leaders(const CoefficientSource& f) {
    const int d = f.dim();
    const int J = f.maxLevel();
    LeaderField lf;
    lf.dim = d;
    lf.max_level = J;
    lf.leaders.resize(std::size_t(J) + 1);
    lf.subtree_max.resize(std::size_t(J) + 1);

    // bottom-up subtree maxima
    for (int j = J; j >= 1; --j) {
        auto& M = lf.subtree_max[static_cast<std::size_t>(j)];
        M.assign(std::size_t(1) << (std::size_t(j) * std::size_t(d)), 0.0);
        f.forEachNonzero(j, [&](std::span<const std::int64_t> k, unsigned, double c) {
            auto& slot = M[static_cast<std::size_t>(flatIndex(j, k))];
            slot = std::max(slot, std::abs(c));
        });
        if (j < J) {
            const auto& Mc = lf.subtree_max[static_cast<std::size_t>(j) + 1];
            const std::int64_t nside = std::int64_t(1) << j;
            std::vector<std::int64_t> k(d, 0);
            for (;;) {
                auto& slot = M[static_cast<std::size_t>(flatIndex(j, k))];
                for (const auto& ch : children(DyadicCube(d, j, k)))
                    slot = std::max(
                        slot, Mc[static_cast<std::size_t>(flatIndex(j + 1, ch.index))]);
                int i = d - 1;
                while (i >= 0 && ++k[i] >= nside) {
                    k[i] = 0;
                    --i;
                }
                if (i < 0) break;
            }
        }
    }
    // neighborhood maxima
    for (int j = 1; j <= J; ++j) {
        const auto& M = lf.subtree_max[static_cast<std::size_t>(j)];
        auto& L = lf.leaders[static_cast<std::size_t>(j)];
        L.assign(M.size(), 0.0);
        const std::int64_t nside = std::int64_t(1) << j;
        std::vector<std::int64_t> k(d, 0);
        for (;;) {
            double best = 0.0;
            for (const auto& nb : neighborhoodCubes(DyadicCube(d, j, k), 3))
                best = std::max(best,
                                M[static_cast<std::size_t>(flatIndex(j, nb.index))]);
            L[static_cast<std::size_t>(flatIndex(j, k))] = best;
            int i = d - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
    }
    return lf;
}

struct ExponentEstimate {
    double ls_slope = kPosInf;   // least-squares slope of log2 L vs -j
    double min_slope = kPosInf;  // min chord slope, liminf surrogate
    int levels_used = 0;
};

inline ExponentEstimate pointwiseExponent(const LeaderField& lf,
                                          std::span<const double> x, int j_min,
                                          int j_max) {
    if (j_min < 1 || j_max > lf.max_level || j_min > j_max)
        throw std::invalid_argument("pointwiseExponent: bad level window");
    std::vector<double> ts, ys;
    ExponentEstimate est;
    for (int j = j_min; j <= j_max; ++j) {
        const DyadicCube c = cubeContaining(x, j);
        const double L = lf.at(j, c.index);
        if (L <= 0.0) continue;
        const double y = std::log2(L);
        ts.push_back(-double(j));
        ys.push_back(y);
        est.min_slope = std::min(est.min_slope, y / -double(j));
    }
    est.levels_used = static_cast<int>(ts.size());
    if (ts.size() >= 2) est.ls_slope = lsSlope(ts, ys);
    else if (ts.size() == 1) est.ls_slope = est.min_slope;
    return est;
}

struct SpectrumEstimate {
    std::vector<double> h_grid;
    std::vector<double> sigma;  // -inf sentinel allowed
    std::string method;         // "leader-legendre" or "leader-histogram"
    int j_min = 1, j_max = 1;
    bool low_confidence = false;  // < 8 nonzero leaders at some fit level
    std::vector<double> q_grid, zeta;  // leader-legendre only
};

// Leader-Legendre method: zeta(q) = slope of log2(mean of L^q over nonzero
// leaders) vs -j on the fit window; sigma_hat(h) = d + inf_q (h q - zeta(q)).
inline SpectrumEstimate leaderSpectrum(const LeaderField& lf,
                                       std::span<const double> q_grid,
                                       std::span<const double> h_grid, int j_min,
                                       int j_max) {
    if (j_min < 1 || j_max > lf.max_level || j_min > j_max)
        throw std::invalid_argument("leaderSpectrum: bad level window");
    SpectrumEstimate est;
    est.method = "leader-legendre";
    est.j_min = j_min;
    est.j_max = j_max;
    est.h_grid.assign(h_grid.begin(), h_grid.end());
    est.q_grid.assign(q_grid.begin(), q_grid.end());

    std::vector<double> ts;
    // log2 of the per-level mean of L^q, via a log-domain accumulator
    std::vector<std::vector<double>> logS(q_grid.size());
    for (int j = j_min; j <= j_max; ++j) {
        const auto& L = lf.leaders[static_cast<std::size_t>(j)];
        std::vector<Log2SumExp> acc(q_grid.size());
        std::size_t nonzero = 0;
        for (const double v : L) {
            if (v <= 0.0) continue;
            ++nonzero;
            const double lg = std::log2(v);
            for (std::size_t qi = 0; qi < q_grid.size(); ++qi)
                acc[qi].add(q_grid[qi] * lg);
        }
        if (nonzero < 8) est.low_confidence = true;
        if (nonzero == 0) continue;
        ts.push_back(-double(j));
        for (std::size_t qi = 0; qi < q_grid.size(); ++qi)
            logS[qi].push_back(acc[qi].value() - std::log2(double(nonzero)));
    }
    est.zeta.assign(q_grid.size(), 0.0);
    if (ts.size() < 2) {
        est.low_confidence = true;
        est.sigma.assign(h_grid.size(), kNegInf);
        return est;
    }
    for (std::size_t qi = 0; qi < q_grid.size(); ++qi)
        est.zeta[qi] = lsSlope(ts, logS[qi]);

    est.sigma.resize(h_grid.size());
    for (std::size_t hi = 0; hi < h_grid.size(); ++hi) {
        double best = kPosInf;
        for (std::size_t qi = 0; qi < q_grid.size(); ++qi)
            best = std::min(best, h_grid[hi] * q_grid[qi] - est.zeta[qi]);
        est.sigma[hi] = double(lf.dim) + best;
    }
    return est;
}

// Large-deviation histogram method: sigma_hat(h) = slope of
// log2 #{lambda : L_lambda in 2^{-j(h +- delta)}} against j, with delta the
// h-grid half-step.
inline SpectrumEstimate histogramSpectrum(const LeaderField& lf,
                                          std::span<const double> h_grid, int j_min,
                                          int j_max) {
    if (j_min < 1 || j_max > lf.max_level || j_min > j_max)
        throw std::invalid_argument("histogramSpectrum: bad level window");
    if (h_grid.size() < 2)
        throw std::invalid_argument("histogramSpectrum: need at least two h values");
    SpectrumEstimate est;
    est.method = "leader-histogram";
    est.j_min = j_min;
    est.j_max = j_max;
    est.h_grid.assign(h_grid.begin(), h_grid.end());
    const double delta = 0.5 * (h_grid[1] - h_grid[0]);

    est.sigma.assign(h_grid.size(), kNegInf);
    for (std::size_t hi = 0; hi < h_grid.size(); ++hi) {
        std::vector<double> js, counts;
        for (int j = j_min; j <= j_max; ++j) {
            const auto& L = lf.leaders[static_cast<std::size_t>(j)];
            std::size_t n = 0;
            const double lo = -double(j) * (h_grid[hi] + delta);
            const double hi_b = -double(j) * (h_grid[hi] - delta);
            for (const double v : L) {
                if (v <= 0.0) continue;
                const double lg = std::log2(v);
                if (lg >= lo && lg <= hi_b) ++n;
            }
            if (n == 0) continue;
            js.push_back(double(j));
            counts.push_back(std::log2(double(n)));
        }
        if (js.size() >= 2) est.sigma[hi] = lsSlope(js, counts);
    }
    return est;
}

struct PredictedCurve {
    std::vector<double> h_grid;
    std::vector<double> sigma;  // -inf outside supp(sigma_mu) + shift
    double shift = 0.0;         // h_nu^r or h_nu^min
    double plateau_onset = 0.0; // h_mu^0 + shift; sigma = d beyond it
};

// sigma_mu(h - shift) for h <= h_mu^0 + shift, then the d-plateau.
// shift = h_nu^r when r is finite, h_nu^min (steepest tabulated slope) when
// use_min is set.
inline PredictedCurve predictedCurve(const CapacityModel& mu, const CapacityModel& nu,
                                     double r, bool use_min,
                                     std::span<const double> h_grid, int j_eval = 12) {
    std::vector<double> q_mu, q_nu;
    for (double q = -6.0; q <= 6.0 + 1e-12; q += 0.01) q_mu.push_back(q);
    if (use_min)
        for (double q = 0.0; q <= 30.0 + 1e-12; q += 0.05) q_nu.push_back(q);
    else
        for (double q = r - 2.0; q <= r + 2.0 + 1e-12; q += 0.01) q_nu.push_back(q);
    const ScalingTable tmu = scalingFunction(mu, q_mu, j_eval);
    const ScalingTable tnu = scalingFunction(nu, q_nu, j_eval);

    PredictedCurve out;
    out.h_grid.assign(h_grid.begin(), h_grid.end());
    if (use_min) {
        // h_nu^min = inf of tau' = slope at the large-q end of the table
        out.shift = tnu.deriv.back();
    } else {
        out.shift = hOfR(tnu, r);
    }
    out.plateau_onset = hOfR(tmu, 0.0) + out.shift;
    out.sigma.resize(h_grid.size());
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
        const double h = h_grid[i];
        if (h > out.plateau_onset) {
            out.sigma[i] = double(mu.dim());
        } else {
            out.sigma[i] = legendreAt(tmu, h - out.shift);
            if (out.sigma[i] < 0.0) out.sigma[i] = kNegInf;  // outside support
        }
    }
    return out;
}

}  // namespace mft
