#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Dyadic cube geometry on [0,1]^D. Cubes are half-open:
// lambda = prod_i [k_i 2^-j, (k_i+1) 2^-j), so every point of [0,1)^D
// lies in exactly one cube per level.

namespace mft {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();

struct DyadicCube {
    int dim = 1;
    int level = 0;
    std::vector<std::int64_t> index;  // size dim, each in [0, 2^level)

    DyadicCube() : index(1, 0) {}
    DyadicCube(int d, int j, std::vector<std::int64_t> k)
        : dim(d), level(j), index(std::move(k)) {
        if (dim < 1) throw std::invalid_argument("DyadicCube: dim must be positive");
        if (level < 0) throw std::invalid_argument("DyadicCube: level must be >= 0");
        if (static_cast<int>(index.size()) != dim)
            throw std::invalid_argument("DyadicCube: index size mismatch");
        const std::int64_t n = std::int64_t(1) << level;
        for (auto k : index)
            if (k < 0 || k >= n)
                throw std::invalid_argument("DyadicCube: index out of range");
    }

    double side() const { return std::ldexp(1.0, -level); }

    std::vector<double> lowerCorner() const {
        std::vector<double> x(dim);
        for (int i = 0; i < dim; ++i) x[i] = std::ldexp(double(index[i]), -level);
        return x;
    }

    std::vector<double> center() const {
        std::vector<double> x(dim);
        for (int i = 0; i < dim; ++i)
            x[i] = std::ldexp(double(index[i]) + 0.5, -level);
        return x;
    }

    bool contains(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim) return false;
        for (int i = 0; i < dim; ++i) {
            const double lo = std::ldexp(double(index[i]), -level);
            if (x[i] < lo || x[i] >= lo + side()) return false;
        }
        return true;
    }

    // Projection onto a contiguous axis range [axis_begin, axis_begin+sub_dim).
    DyadicCube project(int axis_begin, int sub_dim) const {
        std::vector<std::int64_t> k(index.begin() + axis_begin,
                                    index.begin() + axis_begin + sub_dim);
        return DyadicCube(sub_dim, level, std::move(k));
    }

    bool operator==(const DyadicCube& o) const {
        return dim == o.dim && level == o.level && index == o.index;
    }

    // Text form used in result files: "j:k1,k2,...,kD"
    std::string str() const {
        std::ostringstream os;
        os << level << ':';
        for (int i = 0; i < dim; ++i) {
            if (i) os << ',';
            os << index[i];
        }
        return os.str();
    }
};

// Level-j cube containing x. Coordinates must lie in [0,1); callers
// analyzing x=1 clamp to 1 - 2^-Jmax first.
inline DyadicCube cubeContaining(std::span<const double> x, int j) {
    if (j < 0) throw std::invalid_argument("cubeContaining: negative level");
    std::vector<std::int64_t> k(x.size());
    const double n = std::ldexp(1.0, j);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= 0.0 && x[i] < 1.0))
            throw std::domain_error("cubeContaining: coordinate outside [0,1)");
        k[i] = static_cast<std::int64_t>(std::floor(x[i] * n));
        if (k[i] >= static_cast<std::int64_t>(n)) k[i] = static_cast<std::int64_t>(n) - 1;
    }
    return DyadicCube(static_cast<int>(x.size()), j, std::move(k));
}

// The 2^D level-(j+1) cubes tiling c, ordered lexicographically by index.
inline std::vector<DyadicCube> children(const DyadicCube& c) {
    const int d = c.dim;
    const std::size_t n = std::size_t(1) << d;
    std::vector<DyadicCube> out;
    out.reserve(n);
    for (std::size_t b = 0; b < n; ++b) {
        std::vector<std::int64_t> k(d);
        // lexicographic order: first axis is the most significant digit
        for (int i = 0; i < d; ++i)
            k[i] = 2 * c.index[i] + ((b >> (d - 1 - i)) & 1);
        out.emplace_back(d, c.level + 1, std::move(k));
    }
    return out;
}

// All level-j cubes intersecting N*lambda (same center, N times the side),
// clipped to [0,1]^D. N odd; N=1 returns exactly {c}.
inline std::vector<DyadicCube> neighborhoodCubes(const DyadicCube& c, int N) {
    if (N < 1 || N % 2 == 0)
        throw std::invalid_argument("neighborhoodCubes: N must be odd and >= 1");
    const int r = (N - 1) / 2;
    const std::int64_t n = std::int64_t(1) << c.level;
    std::vector<std::pair<std::int64_t, std::int64_t>> range(c.dim);
    for (int i = 0; i < c.dim; ++i) {
        range[i].first = std::max<std::int64_t>(0, c.index[i] - r);
        range[i].second = std::min<std::int64_t>(n - 1, c.index[i] + r);
    }
    std::vector<DyadicCube> out;
    std::vector<std::int64_t> k(c.dim);
    for (int i = 0; i < c.dim; ++i) k[i] = range[i].first;
    for (;;) {
        out.emplace_back(c.dim, c.level, k);
        int i = c.dim - 1;
        while (i >= 0 && ++k[i] > range[i].second) {
            k[i] = range[i].first;
            --i;
        }
        if (i < 0) break;
    }
    return out;
}

struct CubeBox {
    DyadicCube base;
    int scale_factor = 3;  // N: same center, radius N*2^-(j+1) in sup norm

    std::vector<DyadicCube> cubes() const {
        return neighborhoodCubes(base, scale_factor);
    }
};

}  // namespace mft
