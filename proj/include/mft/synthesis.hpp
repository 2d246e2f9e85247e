#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "mft/capacity.hpp"
#include "mft/dyadic.hpp"
#include "mft/wavelet.hpp"

// Coefficient fields: wavelet coefficient collections c_lambda indexed by
// (level, cube, orientation), with dense and implicit (on-demand)
// representations; construction of the saturating field, probe generators,
// random members, linear combinations, and inhomogeneous seminorms.
//
// Orientation convention: bitmask l in [0, 2^D); bit i set means the mother
// wavelet acts on axis i, clear means the scaling function. l = 0 carries no
// coefficient. Axes [0, d) are the retained (x) axes, axes [d, D) the trace
// (a) axes.

namespace mft {

inline std::int64_t flatIndex(int j, std::span<const std::int64_t> k) {
    std::int64_t f = 0;
    for (const auto ki : k) f = (f << j) | ki;
    return f;
}

class CoefficientSource {
public:
    virtual ~CoefficientSource() = default;

    int dim() const { return dim_; }
    int maxLevel() const { return max_level_; }
    double scalingCoefficient() const { return beta0_; }

    // c_lambda for lambda = (j, k, l); j in [1, maxLevel], l in [1, 2^D)
    virtual double coeff(int j, std::span<const std::int64_t> k, unsigned l) const = 0;

    using Visitor =
        std::function<void(std::span<const std::int64_t> k, unsigned l, double value)>;

    // Visits all potentially nonzero coefficients at level j. Default: full scan.
    virtual void forEachNonzero(int j, const Visitor& visit) const {
        const std::int64_t nside = std::int64_t(1) << j;
        const unsigned lmax = 1u << dim_;
        std::vector<std::int64_t> k(dim_, 0);
        for (;;) {
            for (unsigned l = 1; l < lmax; ++l) {
                const double v = coeff(j, k, l);
                if (v != 0.0) visit(k, l, v);
            }
            int i = dim_ - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
    }

protected:
    CoefficientSource(int d, int J, double beta0 = 0.0)
        : dim_(d), max_level_(J), beta0_(beta0) {
        if (d < 1 || J < 1) throw std::invalid_argument("CoefficientSource: bad shape");
    }
    double beta0_;

private:
    int dim_;
    int max_level_;
};

using SourcePtr = std::shared_ptr<const CoefficientSource>;

// Dense per-level storage; levels 1..J, orientation count 2^D - 1.
class DenseField : public CoefficientSource {
public:
    DenseField(int d, int J) : CoefficientSource(d, J), levels_(std::size_t(J) + 1) {
        for (int j = 1; j <= J; ++j) {
            const std::size_t cubes = std::size_t(1) << (std::size_t(j) * std::size_t(d));
            levels_[static_cast<std::size_t>(j)].assign(cubes * orientations(), 0.0);
        }
    }

    std::size_t orientations() const { return (std::size_t(1) << dim()) - 1; }

    double& at(int j, std::span<const std::int64_t> k, unsigned l) {
        return levels_[static_cast<std::size_t>(j)]
                      [static_cast<std::size_t>(flatIndex(j, k)) * orientations() + (l - 1)];
    }

    double coeff(int j, std::span<const std::int64_t> k, unsigned l) const override {
        if (j < 1 || j > maxLevel()) return 0.0;
        return levels_[static_cast<std::size_t>(j)]
                      [static_cast<std::size_t>(flatIndex(j, k)) * orientations() + (l - 1)];
    }

    void setScalingCoefficient(double b) { beta0_ = b; }

    std::span<const double> levelData(int j) const {
        return levels_[static_cast<std::size_t>(j)];
    }
    std::span<double> levelData(int j) { return levels_[static_cast<std::size_t>(j)]; }

private:
    std::vector<std::vector<double>> levels_;
};

namespace detail {

inline double levelFactor(int j, double q) {
    if (std::isinf(q)) return 1.0;  // convention 2/inf = 0
    return std::pow(double(j), -2.0 / q);
}

// splitmix64, used as a counter-based generator for reproducible fields
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

// The saturating field: g_lambda = j^{-2/q} xi(lambda) exactly when the
// x-orientations are not all scaling, the a-orientations are all mother
// wavelets, and k' lies on the congruence class p_j mod K_psi; 0 otherwise.
// Support is a 1/K^{d'} fraction per level, so this stays implicit.
class SaturatingField : public CoefficientSource {
public:
    SaturatingField(std::shared_ptr<const ProductModel> xi, double q, int J,
                    OffsetSchedule schedule)
        : CoefficientSource(xi->dim(), J),
          xi_(std::move(xi)),
          q_(q),
          sched_(std::move(schedule)) {
        d_ = xi_->left()->dim();
        dp_ = xi_->right()->dim();
        if (sched_.d_prime != dp_)
            throw std::invalid_argument("SaturatingField: schedule built for wrong d'");
        if (sched_.J_max < J)
            throw std::invalid_argument("SaturatingField: schedule shorter than J");
    }

    int d() const { return d_; }
    int dPrime() const { return dp_; }
    double q() const { return q_; }
    const OffsetSchedule& schedule() const { return sched_; }
    const std::shared_ptr<const ProductModel>& environment() const { return xi_; }

    bool onSupport(int j, std::span<const std::int64_t> k, unsigned l) const {
        const unsigned xmask = (1u << d_) - 1u;
        const unsigned amask = ((1u << dim()) - 1u) & ~xmask;
        if ((l & xmask) == 0u || (l & amask) != amask) return false;
        const auto p = sched_.offsets(j);
        for (int i = 0; i < dp_; ++i) {
            const std::int64_t r = k[d_ + i] % sched_.K;
            if (r != p[i] % sched_.K) return false;
        }
        return true;
    }

    double coeff(int j, std::span<const std::int64_t> k, unsigned l) const override {
        if (j < 1 || j > maxLevel() || !onSupport(j, k, l)) return 0.0;
        return detail::levelFactor(j, q_) * xi_->mass(DyadicCube(dim(), j, {k.begin(), k.end()}));
    }

    void forEachNonzero(int j, const Visitor& visit) const override {
        if (j < 1 || j > maxLevel()) return;
        const double fac = detail::levelFactor(j, q_);
        const std::int64_t nside = std::int64_t(1) << j;
        const auto p = sched_.offsets(j);

        // congruence-class indices per trace axis
        std::vector<std::vector<std::int64_t>> cls(dp_);
        for (int i = 0; i < dp_; ++i)
            for (std::int64_t kp = p[i] % sched_.K; kp < nside; kp += sched_.K)
                cls[i].push_back(kp);

        const unsigned xmask = (1u << d_) - 1u;
        const unsigned amask = ((1u << dim()) - 1u) & ~xmask;

        std::vector<std::int64_t> k(dim(), 0);
        std::vector<std::size_t> ci(dp_, 0);
        for (int i = 0; i < dp_; ++i) {
            if (cls[i].empty()) return;
            k[d_ + i] = cls[i][0];
        }
        for (;;) {
            const double mu = xi_->left()->mass(
                DyadicCube(d_, j, {k.begin(), k.begin() + d_}));
            const double nu = xi_->right()->mass(
                DyadicCube(dp_, j, {k.begin() + d_, k.end()}));
            const double v = fac * mu * nu;
            if (v != 0.0)
                for (unsigned lx = 1; lx <= xmask; ++lx) visit(k, lx | amask, v);
            // advance: x-axes fastest, then congruence classes
            int i = d_ - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i >= 0) continue;
            int a = dp_ - 1;
            while (a >= 0 && ++ci[a] >= cls[a].size()) {
                ci[a] = 0;
                k[d_ + a] = cls[a][0];
                --a;
            }
            if (a < 0) break;
            k[d_ + a] = cls[a][ci[a]];
        }
    }

private:
    std::shared_ptr<const ProductModel> xi_;
    double q_;
    OffsetSchedule sched_;
    int d_, dp_;
};

// Generic member of B^xi_{inf,q}: c_lambda = u_lambda j^{-2/q} xi(lambda)
// with u_lambda of uniform random sign and magnitude uniform in [1/2, 1],
// reproducible from the seed via a counter-based generator.
class RandomMemberField : public CoefficientSource {
public:
    RandomMemberField(ModelPtr xi, double q, int J, std::uint64_t seed)
        : CoefficientSource(xi->dim(), J), xi_(std::move(xi)), q_(q), seed_(seed) {}

    double coeff(int j, std::span<const std::int64_t> k, unsigned l) const override {
        if (j < 1 || j > maxLevel()) return 0.0;
        std::uint64_t h = detail::mix64(seed_ ^ detail::mix64(std::uint64_t(j)));
        h = detail::mix64(h ^ std::uint64_t(flatIndex(j, k)));
        h = detail::mix64(h ^ std::uint64_t(l));
        const double u = double(h >> 11) * 0x1.0p-53;  // [0,1)
        const double sign = (h & 1u) ? 1.0 : -1.0;
        const double mag = 0.5 + 0.5 * u;
        return sign * mag * detail::levelFactor(j, q_) *
               xi_->mass(DyadicCube(dim(), j, {k.begin(), k.end()}));
    }

private:
    ModelPtr xi_;
    double q_;
    std::uint64_t seed_;
};

// Keeps the base coefficients on a residue window of levels, zero elsewhere.
class LevelWindowField : public CoefficientSource {
public:
    LevelWindowField(SourcePtr base, int probe_index, int probe_count, int window)
        : CoefficientSource(base->dim(), base->maxLevel()),
          base_(std::move(base)),
          i_(probe_index),
          d1_(probe_count),
          N_(window) {}

    bool keepsLevel(int j) const {
        const int r = j % (d1_ * N_);
        return r >= (i_ - 1) * N_ && r < i_ * N_;
    }

    double coeff(int j, std::span<const std::int64_t> k, unsigned l) const override {
        return keepsLevel(j) ? base_->coeff(j, k, l) : 0.0;
    }

    void forEachNonzero(int j, const Visitor& visit) const override {
        if (keepsLevel(j)) base_->forEachNonzero(j, visit);
    }

private:
    SourcePtr base_;
    int i_, d1_, N_;
};

// Entrywise linear combination of sources.
class CombinedField : public CoefficientSource {
public:
    CombinedField(std::vector<std::pair<double, SourcePtr>> terms)
        : CoefficientSource(terms.at(0).second->dim(), maxOf(terms)),
          terms_(std::move(terms)) {
        for (const auto& [w, s] : terms_)
            if (s->dim() != dim())
                throw std::invalid_argument("CombinedField: dimension mismatch");
    }

    double coeff(int j, std::span<const std::int64_t> k, unsigned l) const override {
        double acc = 0.0;
        for (const auto& [w, s] : terms_) acc += w * s->coeff(j, k, l);
        return acc;
    }

private:
    static int maxOf(const std::vector<std::pair<double, SourcePtr>>& ts) {
        int J = 1;
        for (const auto& [w, s] : ts) J = std::max(J, s->maxLevel());
        return J;
    }
    std::vector<std::pair<double, SourcePtr>> terms_;
};

inline std::shared_ptr<SaturatingField> saturatingField(
    std::shared_ptr<const ProductModel> xi, double q, int J, OffsetSchedule schedule) {
    return std::make_shared<SaturatingField>(std::move(xi), q, J, std::move(schedule));
}

// Probe generators: d1 = p(d+1) level-windowed slices of the saturating
// field; their windows are disjoint and their sum restores the field on
// covered levels.
inline std::vector<SourcePtr> probeFields(const std::shared_ptr<SaturatingField>& g, int p) {
    const int d1 = p * (g->d() + 1);
    std::vector<SourcePtr> out;
    out.reserve(static_cast<std::size_t>(d1));
    for (int i = 1; i <= d1; ++i)
        out.push_back(std::make_shared<LevelWindowField>(g, i, d1, g->schedule().window));
    return out;
}

inline SourcePtr combine(const SourcePtr& f, std::span<const double> betas,
                         std::span<const SourcePtr> probes) {
    if (betas.size() != probes.size())
        throw std::invalid_argument("combine: betas/probes size mismatch");
    std::vector<std::pair<double, SourcePtr>> terms;
    terms.emplace_back(1.0, f);
    for (std::size_t i = 0; i < betas.size(); ++i) terms.emplace_back(betas[i], probes[i]);
    return std::make_shared<CombinedField>(std::move(terms));
}

// ---------------------------------------------------------------------------
// Inhomogeneous Besov seminorm profile.

struct SeminormProfile {
    double p = kPosInf, q = kPosInf;
    double shift = 0.0;  // epsilon of the xi^(-eps) environment
    std::vector<double> eps_j;  // index 0 unused; levels 1..J
    double aggregate = 0.0;     // l^q norm of (eps_j)
    bool membership_failure = false;  // some c != 0 where xi(lambda) = 0
};

// eps_j = l^p norm over lambda of c_lambda / xi^{(-eps)}(lambda);
// aggregate = l^q over levels. eps must stay below the estimated Holder
// bound s1 of the environment.
inline SeminormProfile seminorm(const CoefficientSource& f, const CapacityModel& env,
                                double p, double q, double eps = 0.0) {
    if (env.dim() != f.dim()) throw std::invalid_argument("seminorm: dimension mismatch");
    if (eps < 0.0) throw std::invalid_argument("seminorm: shift must be >= 0");
    if (eps > 0.0) {
        const double s1 = diagnostics(env, std::min(10, 20 / env.dim())).s1;
        if (eps >= s1)
            throw std::invalid_argument("seminorm: shift exceeds estimated s1 of environment");
    }
    SeminormProfile prof;
    prof.p = p;
    prof.q = q;
    prof.shift = eps;
    prof.eps_j.assign(std::size_t(f.maxLevel()) + 1, 0.0);

    for (int j = 1; j <= f.maxLevel(); ++j) {
        double sup = 0.0, sum_p = 0.0;
        f.forEachNonzero(j, [&](std::span<const std::int64_t> k, unsigned, double c) {
            const double xi = env.mass(DyadicCube(f.dim(), j, {k.begin(), k.end()}));
            if (xi <= 0.0) {
                if (c != 0.0) prof.membership_failure = true;
                return;
            }
            const double ratio = std::abs(c) / (xi * std::exp2(double(j) * eps));
            sup = std::max(sup, ratio);
            if (!std::isinf(p)) sum_p += std::pow(ratio, p);
        });
        prof.eps_j[static_cast<std::size_t>(j)] =
            std::isinf(p) ? sup : std::pow(sum_p, 1.0 / p);
    }
    if (std::isinf(q)) {
        for (int j = 1; j <= f.maxLevel(); ++j)
            prof.aggregate = std::max(prof.aggregate, prof.eps_j[std::size_t(j)]);
    } else {
        double s = 0.0;
        for (int j = 1; j <= f.maxLevel(); ++j)
            s += std::pow(prof.eps_j[std::size_t(j)], q);
        prof.aggregate = std::pow(s, 1.0 / q);
    }
    return prof;
}

}  // namespace mft
