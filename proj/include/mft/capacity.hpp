#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mft/dyadic.hpp"

// Capacities on the dyadic grid of [0,1]^D: multiplicative cascades, Gibbs
// approximations, power/shift transforms, products, auxiliary cascades, and
// their multifractal analysis (scaling functions, Legendre transforms,
// sampling, good-set diagnostics).

namespace mft {

// Stable accumulator for log2(sum_i 2^{t_i}).
class Log2SumExp {
public:
    void add(double t) {
        if (t == kNegInf) return;
        if (t > max_) {
            if (max_ != kNegInf) sum_ *= std::exp2(max_ - t);
            sum_ += 1.0;
            max_ = t;
        } else {
            sum_ += std::exp2(t - max_);
        }
    }
    double value() const {
        if (max_ == kNegInf) return kNegInf;
        return max_ + std::log2(sum_);
    }

private:
    double max_ = kNegInf;
    double sum_ = 0.0;
};

class CapacityModel;
using ModelPtr = std::shared_ptr<const CapacityModel>;

class CapacityModel {
public:
    virtual ~CapacityModel() = default;

    int dim() const { return dim_; }

    virtual double mass(const DyadicCube& c) const = 0;

    // log2 of sum over lambda in Lambda_j^D of mass(lambda)^q, with the
    // convention 0^q = 0 (zero-mass cubes are skipped).
    virtual double log2PowerSum(int j, double q) const = 0;

    // True for kinds normalized to mass([0,1]^D) = 1.
    virtual bool unitTotalMass() const { return false; }

    virtual std::string describe() const = 0;

protected:
    explicit CapacityModel(int d) : dim_(d) {
        if (d < 1) throw std::invalid_argument("CapacityModel: dim must be positive");
    }

private:
    int dim_;
};

// Kinds whose mass is defined by conditional splits along the dyadic tree:
// mass(child) = mass(parent) * fraction(child position).
class TreeModel : public CapacityModel {
public:
    // Fractions of the parent mass for the 2^D children in the order
    // produced by children(); entries sum to 1 (or all vanish).
    virtual void childFractions(const DyadicCube& parent, std::span<double> out) const = 0;

    double mass(const DyadicCube& c) const override {
        if (c.dim != dim()) throw std::invalid_argument("mass: dimension mismatch");
        double m = 1.0;
        std::vector<double> frac(std::size_t(1) << dim());
        DyadicCube prefix(dim(), 0, std::vector<std::int64_t>(dim(), 0));
        for (int lvl = 0; lvl < c.level; ++lvl) {
            childFractions(prefix, frac);
            std::size_t b = 0;
            std::vector<std::int64_t> k(dim());
            for (int i = 0; i < dim(); ++i) {
                const std::int64_t ki = c.index[i] >> (c.level - lvl - 1);
                b = (b << 1) | static_cast<std::size_t>(ki & 1);
                k[i] = ki;
            }
            m *= frac[b];
            if (m == 0.0) return 0.0;
            prefix = DyadicCube(dim(), lvl + 1, std::move(k));
        }
        return m;
    }

    double log2PowerSum(int j, double q) const override {
        Log2SumExp acc;
        std::vector<double> frac(std::size_t(1) << dim());
        descend(DyadicCube(dim(), 0, std::vector<std::int64_t>(dim(), 0)), 0.0, j, q, frac,
                acc);
        return acc.value();
    }

    bool unitTotalMass() const override { return true; }

protected:
    explicit TreeModel(int d) : CapacityModel(d) {}

private:
    void descend(const DyadicCube& c, double log2m, int j, double q,
                 std::vector<double>& frac, Log2SumExp& acc) const {
        if (c.level == j) {
            acc.add(q * log2m);
            return;
        }
        childFractions(c, frac);
        auto kids = children(c);
        std::vector<double> fcopy = frac;
        for (std::size_t b = 0; b < kids.size(); ++b) {
            if (fcopy[b] <= 0.0) continue;
            descend(kids[b], log2m + std::log2(fcopy[b]), j, q, frac, acc);
        }
    }
};

// Exact multiplicative cascade: one fixed weight vector reused at every node.
class CascadeModel : public TreeModel {
public:
    CascadeModel(int d, std::vector<double> weights) : TreeModel(d), w_(std::move(weights)) {
        const std::size_t n = std::size_t(1) << d;
        if (w_.size() != n)
            throw std::invalid_argument("CascadeModel: need 2^D child weights");
        double s = 0.0;
        for (double x : w_) {
            if (x < 0.0) throw std::invalid_argument("CascadeModel: negative weight");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw std::invalid_argument("CascadeModel: weights must sum to 1");
    }

    void childFractions(const DyadicCube&, std::span<double> out) const override {
        std::copy(w_.begin(), w_.end(), out.begin());
    }

    // Closed-form level sum: (sum_i w_i^q)^j, in log2.
    double log2PowerSum(int j, double q) const override {
        Log2SumExp one;
        for (double x : w_)
            if (x > 0.0) one.add(q * std::log2(x));
        return j * one.value();
    }

    const std::vector<double>& weights() const { return w_; }

    std::string describe() const override { return "cascade"; }

    static ModelPtr lebesgue(int d) {
        return std::make_shared<CascadeModel>(
            d, std::vector<double>(std::size_t(1) << d, 1.0 / double(std::size_t(1) << d)));
    }

private:
    std::vector<double> w_;
};

// Finite-depth Gibbs approximation for a periodic potential phi.
// Node weights u(lambda) = exp(S_j phi(center(lambda))) with S_j the Birkhoff
// sum under the doubling map; children are renormalized to sum to their
// parent so the result is a bona fide cascade at every depth.
class GibbsModel : public TreeModel {
public:
    using Potential = std::function<double(std::span<const double>)>;

    GibbsModel(int d, Potential phi, int max_depth = 24)
        : TreeModel(d), phi_(std::move(phi)), max_depth_(max_depth) {}

    void childFractions(const DyadicCube& parent, std::span<double> out) const override {
        if (parent.level + 1 > max_depth_)
            throw std::out_of_range("GibbsModel: beyond configured max depth");
        auto kids = children(parent);
        double mx = kNegInf;
        std::vector<double> logu(kids.size());
        for (std::size_t b = 0; b < kids.size(); ++b) {
            logu[b] = birkhoff(kids[b].center(), kids[b].level);
            mx = std::max(mx, logu[b]);
        }
        double s = 0.0;
        for (std::size_t b = 0; b < kids.size(); ++b) {
            out[b] = std::exp(logu[b] - mx);
            s += out[b];
        }
        for (std::size_t b = 0; b < kids.size(); ++b) out[b] /= s;
    }

    int maxDepth() const { return max_depth_; }

    std::string describe() const override { return "gibbs"; }

private:
    double birkhoff(std::vector<double> x, int j) const {
        double s = 0.0;
        for (int m = 0; m < j; ++m) {
            s += phi_(x);
            for (double& xi : x) {
                xi *= 2.0;
                xi -= std::floor(xi);
            }
        }
        return s;
    }

    Potential phi_;
    int max_depth_;
};

// Auxiliary cascade: child fractions proportional to base fractions^r,
// renormalized per node. Zero base fractions stay zero.
class AuxiliaryModel : public TreeModel {
public:
    AuxiliaryModel(std::shared_ptr<const TreeModel> base, double r)
        : TreeModel(base->dim()), base_(std::move(base)), r_(r) {}

    void childFractions(const DyadicCube& parent, std::span<double> out) const override {
        base_->childFractions(parent, out);
        double s = 0.0;
        for (double& x : out) {
            x = x > 0.0 ? std::pow(x, r_) : 0.0;
            s += x;
        }
        if (s <= 0.0)
            throw std::runtime_error("AuxiliaryModel: all child weights vanish after powering");
        for (double& x : out) x /= s;
    }

    double r() const { return r_; }

    std::string describe() const override {
        return "auxiliary(" + base_->describe() + ", r=" + std::to_string(r_) + ")";
    }

private:
    std::shared_ptr<const TreeModel> base_;
    double r_;
};

// xi^s(E) = xi(E)^s.
class PowerModel : public CapacityModel {
public:
    PowerModel(ModelPtr base, double s) : CapacityModel(base->dim()), base_(std::move(base)), s_(s) {
        if (s <= 0.0) throw std::invalid_argument("PowerModel: exponent must be positive");
    }

    double mass(const DyadicCube& c) const override { return std::pow(base_->mass(c), s_); }

    double log2PowerSum(int j, double q) const override {
        return base_->log2PowerSum(j, q * s_);
    }

    std::string describe() const override {
        return "power(" + base_->describe() + ", s=" + std::to_string(s_) + ")";
    }

private:
    ModelPtr base_;
    double s_;
};

// xi^{(+s)}(E) = xi(E) |E|^s and xi^{(-s)}(E) = xi(E) |E|^{-s}, with |E| the
// cube diameter in sup norm (2^-j). The negative shift is only meaningful
// below the base's Holder exponent s1; see shiftedModel().
class ShiftedModel : public CapacityModel {
public:
    ShiftedModel(ModelPtr base, double signed_s)
        : CapacityModel(base->dim()), base_(std::move(base)), s_(signed_s) {}

    double mass(const DyadicCube& c) const override {
        return base_->mass(c) * std::exp2(-double(c.level) * s_);
    }

    double log2PowerSum(int j, double q) const override {
        return base_->log2PowerSum(j, q) - double(j) * s_ * q;
    }

    double shift() const { return s_; }

    std::string describe() const override {
        return "shifted(" + base_->describe() + ", s=" + std::to_string(s_) + ")";
    }

private:
    ModelPtr base_;
    double s_;  // signed: +s or -s
};

// Product capacity xi(A x B) = mu(A) * nu(B) on [0,1]^{d+d'}.
class ProductModel : public CapacityModel {
public:
    ProductModel(ModelPtr left, ModelPtr right)
        : CapacityModel(left->dim() + right->dim()),
          left_(std::move(left)),
          right_(std::move(right)) {}

    double mass(const DyadicCube& c) const override {
        return left_->mass(c.project(0, left_->dim())) *
               right_->mass(c.project(left_->dim(), right_->dim()));
    }

    // The dyadic sum over Lambda_j^D factorizes exactly over the two blocks
    // of axes.
    double log2PowerSum(int j, double q) const override {
        return left_->log2PowerSum(j, q) + right_->log2PowerSum(j, q);
    }

    bool unitTotalMass() const override {
        return left_->unitTotalMass() && right_->unitTotalMass();
    }

    const ModelPtr& left() const { return left_; }
    const ModelPtr& right() const { return right_; }

    std::string describe() const override {
        return "product(" + left_->describe() + ", " + right_->describe() + ")";
    }

private:
    ModelPtr left_, right_;
};

// ---------------------------------------------------------------------------
// Scaling function, Legendre transform, derived exponents.

struct ScalingTable {
    std::vector<double> q;      // sorted grid
    std::vector<double> tau;    // tau(q) at finite level
    std::vector<double> deriv;  // central differences (one-sided at ends)
    int level_used = 0;
    int dim = 1;
    std::vector<double> h_grid;    // Legendre sample abscissae
    std::vector<double> tau_star;  // inf_q (hq - tau(q)), -inf sentinel

    double derivMin() const { return *std::min_element(deriv.begin(), deriv.end()); }
    double derivMax() const { return *std::max_element(deriv.begin(), deriv.end()); }
};

// tau(q) = (1/-j) log2 sum_lambda mass(lambda)^q at the given level.
inline ScalingTable scalingFunction(const CapacityModel& model, std::vector<double> q_grid,
                                    int j) {
    if (j < 1) throw std::invalid_argument("scalingFunction: level must be >= 1");
    if (q_grid.empty()) throw std::invalid_argument("scalingFunction: empty q grid");
    if (!std::is_sorted(q_grid.begin(), q_grid.end()))
        throw std::invalid_argument("scalingFunction: q grid must be sorted");
    ScalingTable t;
    t.q = std::move(q_grid);
    t.level_used = j;
    t.dim = model.dim();
    t.tau.resize(t.q.size());
    for (std::size_t i = 0; i < t.q.size(); ++i)
        t.tau[i] = model.log2PowerSum(j, t.q[i]) / double(-j);
    t.deriv.resize(t.q.size());
    const std::size_t n = t.q.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 == n ? i : i + 1;
        t.deriv[i] = (t.tau[hi] - t.tau[lo]) / (t.q[hi] - t.q[lo]);
    }
    return t;
}

// Samples tau*(h) = min over the q grid of (hq - tau(q)). Outside the
// derivative range, and below -D, the -inf sentinel is returned.
inline void legendreTransform(ScalingTable& t, std::vector<double> h_grid) {
    if (t.tau.empty()) throw std::invalid_argument("legendreTransform: table not populated");
    t.h_grid = std::move(h_grid);
    t.tau_star.resize(t.h_grid.size());
    const double hmin = t.derivMin();
    const double hmax = t.derivMax();
    const double tol = 1e-12;
    for (std::size_t m = 0; m < t.h_grid.size(); ++m) {
        const double h = t.h_grid[m];
        if (h < hmin - tol || h > hmax + tol) {
            t.tau_star[m] = kNegInf;
            continue;
        }
        double best = kPosInf;
        for (std::size_t i = 0; i < t.q.size(); ++i)
            best = std::min(best, h * t.q[i] - t.tau[i]);
        t.tau_star[m] = best < -double(t.dim) - tol ? kNegInf : best;
    }
}

// tau*(h) for a single h, same conventions as legendreTransform.
inline double legendreAt(const ScalingTable& t, double h) {
    const double tol = 1e-12;
    if (h < t.derivMin() - tol || h > t.derivMax() + tol) return kNegInf;
    double best = kPosInf;
    for (std::size_t i = 0; i < t.q.size(); ++i)
        best = std::min(best, h * t.q[i] - t.tau[i]);
    return best < -double(t.dim) - tol ? kNegInf : best;
}

inline double interpolateOnGrid(const std::vector<double>& x, const std::vector<double>& y,
                                double at) {
    if (at < x.front() - 1e-12 || at > x.back() + 1e-12)
        throw std::out_of_range("interpolateOnGrid: point outside grid range");
    const auto it = std::lower_bound(x.begin(), x.end(), at);
    std::size_t i = std::size_t(it - x.begin());
    if (i == 0) return y[0];
    if (i >= x.size()) return y.back();
    const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
    return (1.0 - t) * y[i - 1] + t * y[i];
}

// h^r = tau'(r) by central difference on the grid.
inline double hOfR(const ScalingTable& t, double r) { return interpolateOnGrid(t.q, t.deriv, r); }

// dim(nu_r) = r h^r - tau(r).
inline double dimAux(const ScalingTable& t, double r) {
    return r * hOfR(t, r) - interpolateOnGrid(t.q, t.tau, r);
}

// ---------------------------------------------------------------------------
// Auxiliary construction, sampling, local dimensions, level sets.

inline ModelPtr auxiliaryModel(const ModelPtr& base, double r) {
    if (auto cas = std::dynamic_pointer_cast<const CascadeModel>(base)) {
        std::vector<double> w = cas->weights();
        double s = 0.0;
        for (double& x : w) {
            x = x > 0.0 ? std::pow(x, r) : 0.0;
            s += x;
        }
        if (s <= 0.0)
            throw std::runtime_error("auxiliaryModel: all child weights vanish after powering");
        for (double& x : w) x /= s;
        return std::make_shared<CascadeModel>(base->dim(), std::move(w));
    }
    if (auto tree = std::dynamic_pointer_cast<const TreeModel>(base))
        return std::make_shared<AuxiliaryModel>(tree, r);
    throw std::invalid_argument("auxiliaryModel: base must be a cascade or gibbs kind");
}

// Descends J levels of the dyadic tree choosing children proportionally to
// their mass; returns the lower-left corner of the final cube.
inline std::vector<double> samplePoint(const CapacityModel& model, int J,
                                       std::uint64_t seed) {
    if (J < 1) throw std::invalid_argument("samplePoint: J must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    DyadicCube c(model.dim(), 0, std::vector<std::int64_t>(model.dim(), 0));
    double parent = model.mass(c);
    for (int lvl = 0; lvl < J; ++lvl) {
        if (parent <= 0.0) throw std::runtime_error("samplePoint: zero-mass parent");
        auto kids = children(c);
        const double u = unif(rng) * parent;
        double acc = 0.0;
        std::size_t pick = kids.size() - 1;
        double pick_mass = 0.0;
        for (std::size_t b = 0; b < kids.size(); ++b) {
            const double m = model.mass(kids[b]);
            acc += m;
            if (u < acc) {
                pick = b;
                pick_mass = m;
                break;
            }
            if (b + 1 == kids.size()) pick_mass = m;
        }
        c = kids[pick];
        parent = pick_mass;
    }
    return c.lowerCorner();
}

struct LocalDimension {
    double ls_slope;   // least-squares slope of log2 mass vs -j
    double min_slope;  // min over the window of log2 mass / -j
};

// Least-squares slope of y against t.
inline double lsSlope(std::span<const double> t, std::span<const double> y) {
    const double n = double(t.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
        stt += t[i] * t[i];
        sty += t[i] * y[i];
    }
    return (n * sty - st * sy) / (n * stt - st * st);
}

inline LocalDimension localDimension(const CapacityModel& model, std::span<const double> x,
                                     int j_min, int j_max) {
    if (j_min >= j_max) throw std::invalid_argument("localDimension: empty window");
    std::vector<double> t, y;
    double mn = kPosInf;
    for (int j = j_min; j <= j_max; ++j) {
        const double m = model.mass(cubeContaining(x, j));
        if (m <= 0.0) return {kPosInf, kPosInf};
        t.push_back(-double(j));
        y.push_back(std::log2(m));
        mn = std::min(mn, std::log2(m) / double(-j));
    }
    return {lsSlope(t, y), mn};
}

// Cubes at level j whose coarse-grained exponent log2(mass)/-j lies in [lo, hi].
inline std::vector<DyadicCube> levelSetCubes(const CapacityModel& model, int j, double lo,
                                             double hi) {
    if (j < 1) throw std::invalid_argument("levelSetCubes: level must be >= 1");
    std::vector<DyadicCube> out;
    const std::int64_t n = std::int64_t(1) << j;
    std::vector<std::int64_t> k(model.dim(), 0);
    for (;;) {
        DyadicCube c(model.dim(), j, k);
        const double m = model.mass(c);
        if (m > 0.0) {
            const double e = std::log2(m) / double(-j);
            if (e >= lo && e <= hi) out.push_back(c);
        }
        int i = model.dim() - 1;
        while (i >= 0 && ++k[i] >= n) {
            k[i] = 0;
            --i;
        }
        if (i < 0) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Good-set diagnostics: counts cubes whose nu / nu_r masses escape the
// 2^{-j(h^r +- 1/m)} and 2^{-j(dim(nu_r) +- 1/m)} sandwiches.

struct GoodSetLevel {
    int level;
    std::int64_t violating_cubes;
    double violator_aux_mass;           // nu_r-mass of violating cubes
    double violator_aux_mass_enlarged;  // nu_r-mass of their K-neighborhoods
};

struct GoodSetReport {
    int n = 0, m = 0;
    double r = 0.0;
    int K = 1;
    double h_r = 0.0;
    double dim_r = 0.0;
    std::vector<GoodSetLevel> levels;
    int estimated_J = -1;  // first level from which enlarged violator mass <= 1/n
};

inline GoodSetReport goodSetReport(const ModelPtr& base, double r, int n, int m, int K,
                                   int j_lo, int j_hi) {
    if (n < 1 || m < 1) throw std::invalid_argument("goodSetReport: n, m must be positive");
    GoodSetReport rep;
    rep.n = n;
    rep.m = m;
    rep.r = r;
    rep.K = K;

    std::vector<double> q;
    for (double x = r - 2.0; x <= r + 2.0 + 1e-9; x += 0.01) q.push_back(x);
    const ScalingTable table = scalingFunction(*base, std::move(q), 12);
    rep.h_r = hOfR(table, r);
    rep.dim_r = dimAux(table, r);

    const ModelPtr aux = auxiliaryModel(base, r);
    const double inv_m = 1.0 / double(m);

    for (int j = j_lo; j <= j_hi; ++j) {
        GoodSetLevel lv{j, 0, 0.0, 0.0};
        const std::int64_t cnt = std::int64_t(1) << (j * base->dim());
        std::vector<std::int64_t> k(base->dim(), 0);
        const std::int64_t nside = std::int64_t(1) << j;
        std::vector<char> bad(static_cast<std::size_t>(cnt), 0);
        std::int64_t flat = 0;
        for (;;) {
            DyadicCube c(base->dim(), j, k);
            const double mnu = base->mass(c);
            const double maux = aux->mass(c);
            const bool ok_nu = std::log2(std::max(mnu, 1e-300)) / double(-j) >= rep.h_r - inv_m &&
                               std::log2(std::max(mnu, 1e-300)) / double(-j) <= rep.h_r + inv_m;
            const bool ok_aux =
                std::log2(std::max(maux, 1e-300)) / double(-j) >= rep.dim_r - inv_m &&
                std::log2(std::max(maux, 1e-300)) / double(-j) <= rep.dim_r + inv_m;
            if (!(ok_nu && ok_aux)) {
                ++lv.violating_cubes;
                lv.violator_aux_mass += maux;
                bad[static_cast<std::size_t>(flat)] = 1;
            }
            ++flat;
            int i = base->dim() - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
        // nu_r-mass of cubes within the K-neighborhood of some violator
        std::vector<char> covered(static_cast<std::size_t>(cnt), 0);
        std::fill(k.begin(), k.end(), 0);
        flat = 0;
        for (;;) {
            if (bad[static_cast<std::size_t>(flat)]) {
                for (const auto& nb : neighborhoodCubes(DyadicCube(base->dim(), j, k),
                                                        2 * (K / 2) + 1)) {
                    std::int64_t f = 0;
                    for (int i = 0; i < base->dim(); ++i) f = (f << j) | nb.index[i];
                    covered[static_cast<std::size_t>(f)] = 1;
                }
            }
            ++flat;
            int i = base->dim() - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
        std::fill(k.begin(), k.end(), 0);
        flat = 0;
        for (;;) {
            if (covered[static_cast<std::size_t>(flat)])
                lv.violator_aux_mass_enlarged += aux->mass(DyadicCube(base->dim(), j, k));
            ++flat;
            int i = base->dim() - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
        rep.levels.push_back(lv);
    }
    for (const auto& lv : rep.levels) {
        if (lv.violator_aux_mass_enlarged <= 1.0 / double(n)) {
            rep.estimated_J = lv.level;
            break;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Structural diagnostics: doubling, quasi-Bernoulli and Holder constants.

struct CapacityDiagnostics {
    double doubling;         // max mass(3 lambda) / mass(lambda)
    double quasi_bernoulli;  // max ratio between concatenated and split masses
    double s1, s2;           // exponent range at the deepest scanned level
};

inline CapacityDiagnostics diagnostics(const CapacityModel& model, int j) {
    CapacityDiagnostics d{0.0, 1.0, kPosInf, 0.0};
    const int D = model.dim();
    for (int lvl = 1; lvl <= j; ++lvl) {
        if (lvl * D > 20) break;  // exhaustive scan cap
        const std::int64_t nside = std::int64_t(1) << lvl;
        std::vector<std::int64_t> k(D, 0);
        for (;;) {
            DyadicCube c(D, lvl, k);
            const double m = model.mass(c);
            if (m > 0.0) {
                double m3 = 0.0;
                for (const auto& nb : neighborhoodCubes(c, 3)) m3 += model.mass(nb);
                d.doubling = std::max(d.doubling, m3 / m);
                if (lvl == j || lvl * D > 20 - D) {
                    const double e = std::log2(m) / double(-lvl);
                    d.s1 = std::min(d.s1, e);
                    d.s2 = std::max(d.s2, e);
                }
            }
            int i = D - 1;
            while (i >= 0 && ++k[i] >= nside) {
                k[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
    }
    // quasi-Bernoulli: compare mass(concatenation) to mass(lambda1)*mass(lambda2)
    const int half = std::min(5, j / 2);
    for (int j1 = 1; j1 <= half; ++j1) {
        for (int j2 = 1; j2 <= half; ++j2) {
            if ((j1 + j2) * D > 20) continue;
            const std::int64_t n1 = std::int64_t(1) << (j1 * D);
            const std::int64_t n2 = std::int64_t(1) << (j2 * D);
            for (std::int64_t a = 0; a < n1; ++a) {
                std::vector<std::int64_t> k1(D);
                for (int i = 0; i < D; ++i)
                    k1[i] = (a >> (j1 * (D - 1 - i))) & ((std::int64_t(1) << j1) - 1);
                const double m1 = model.mass(DyadicCube(D, j1, k1));
                if (m1 <= 0.0) continue;
                for (std::int64_t b = 0; b < n2; ++b) {
                    std::vector<std::int64_t> k2(D), kc(D);
                    for (int i = 0; i < D; ++i) {
                        k2[i] = (b >> (j2 * (D - 1 - i))) & ((std::int64_t(1) << j2) - 1);
                        kc[i] = (k1[i] << j2) | k2[i];
                    }
                    const double m2 = model.mass(DyadicCube(D, j2, k2));
                    if (m2 <= 0.0) continue;
                    const double ratio = model.mass(DyadicCube(D, j1 + j2, kc)) / (m1 * m2);
                    if (ratio > 0.0)
                        d.quasi_bernoulli =
                            std::max({d.quasi_bernoulli, ratio, 1.0 / ratio});
                }
            }
        }
    }
    return d;
}

// Negative shifts are only accepted below the estimated Holder exponent s1.
inline ModelPtr shiftedModel(const ModelPtr& base, double signed_s) {
    if (signed_s < 0.0) {
        const double s1 = diagnostics(*base, std::min(10, 20 / base->dim())).s1;
        if (-signed_s >= s1)
            throw std::invalid_argument(
                "shiftedModel: negative shift exceeds the estimated Holder bound s1");
    }
    return std::make_shared<ShiftedModel>(base, signed_s);
}

}  // namespace mft
