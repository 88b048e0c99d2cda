#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "parvi/types.hpp"

namespace parvi {

// Deterministic random source. All distributions are implemented here rather
// than with std::<distribution> types because the standard leaves their
// algorithms implementation-defined; this keeps output streams identical
// across compilers and platforms for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1], safe as a log argument.
    double uniform_pos() { return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53; }

    // Standard normal via Box-Muller, one spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    Mat normal_matrix(Index rows, Index cols) {
        Mat m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = normal();
        return m;
    }

    // Gamma(shape, scale) via Marsaglia-Tsang; shape < 1 handled by the
    // standard boost gamma(a+1) * u^(1/a).
    double gamma(double shape, double scale) {
        if (shape <= 0.0 || scale <= 0.0)
            throw InvalidParameterError("gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = uniform_pos();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    // First `count` entries of a Fisher-Yates pass over 0..n-1, i.e. a uniform
    // subset drawn without replacement (order is the draw order).
    std::vector<Index> sample_without_replacement(Index n, Index count) {
        if (count > n)
            throw InvalidParameterError("sample_without_replacement: count exceeds population");
        std::vector<Index> idx(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        for (Index i = 0; i < count; ++i) {
            const Index j = i + static_cast<Index>(gen_() % static_cast<std::uint64_t>(n - i));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        idx.resize(static_cast<std::size_t>(count));
        return idx;
    }

    void shuffle(std::vector<Index>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(gen_() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace parvi
