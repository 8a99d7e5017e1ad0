/*
 * Copyright 2026 The pcasim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Seeded synthetic datasets. Bit-for-bit reproducible across platforms:
// only mt19937_64 raw output is used, never the std distributions.

#pragma once

#include "error.hpp"
#include "matrix.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

namespace pcasim::synthetic {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller; the second variate is cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        while (u == 0.0) u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(2.0 * std::numbers::pi * v);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * v);
    }

    std::uint64_t bits() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// m x n data = F * L + noise * E with `rank` planted factors of decreasing
/// strength (scale / (i + 1)).
inline Matrix<double> planted_spike(std::size_t m, std::size_t n, std::size_t rank, double noise, std::uint64_t seed,
                                    double scale = 5.0)
{
    detail::require_input(m >= 1 && n >= 1 && rank <= n, "planted_spike: bad dimensions");
    Rng rng(seed);
    Matrix<double> loadings(rank, n, 0.0);
    for (auto& v : loadings.data()) v = rng.normal();
    Matrix<double> x(m, n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t r = 0; r < rank; ++r) {
            const double f = rng.normal() * scale / static_cast<double>(r + 1);
            for (std::size_t j = 0; j < n; ++j) x(i, j) += f * loadings(r, j);
        }
        for (std::size_t j = 0; j < n; ++j) x(i, j) += noise * rng.normal();
    }
    return x;
}

/// Symmetric n x n with entries uniform in [-1, 1].
inline Matrix<double> random_symmetric(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix<double> c(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) c(i, j) = c(j, i) = rng.uniform(-1.0, 1.0);
    return c;
}

/// Independent unit-variance Gaussian features.
inline Matrix<double> uncorrelated(std::size_t m, std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix<double> x(m, n, 0.0);
    for (auto& v : x.data()) v = rng.normal();
    return x;
}

/// Dense matrix of small dyadic rationals k / 2^shift with |k| <= range.
/// Sums of products of these are exact in double for modest sizes.
inline Matrix<double> dyadic(std::size_t rows, std::size_t cols, std::uint64_t seed, int range = 64, int shift = 4)
{
    Rng rng(seed);
    Matrix<double> x(rows, cols, 0.0);
    for (auto& v : x.data()) {
        const auto k = static_cast<long long>(rng.bits() % static_cast<std::uint64_t>(2 * range + 1)) - range;
        v = std::ldexp(static_cast<double>(k), -shift);
    }
    return x;
}

/// Wilkinson W+_n: tridiagonal, diagonal |(n-1)/2 - i|, off-diagonal 1.
/// Its largest eigenvalues come in nearly equal pairs.
inline Matrix<double> wilkinson(std::size_t n)
{
    Matrix<double> w(n, n, 0.0);
    const double h = (static_cast<double>(n) - 1.0) / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        w(i, i) = std::fabs(h - static_cast<double>(i));
        if (i + 1 < n) w(i, i + 1) = w(i + 1, i) = 1.0;
    }
    return w;
}

inline Matrix<double> generate(const std::string& kind, std::size_t m, std::size_t n, std::uint64_t seed,
                               std::size_t rank = 2, double noise = 0.01)
{
    if (kind == "planted") return planted_spike(m, n, rank, noise, seed);
    if (kind == "uncorrelated") return uncorrelated(m, n, seed);
    if (kind == "symmetric") {
        detail::require_input(m == n, "generate: symmetric needs rows == cols");
        return random_symmetric(n, seed);
    }
    if (kind == "wilkinson") {
        detail::require_input(m == n, "generate: wilkinson needs rows == cols");
        return wilkinson(n);
    }
    throw InputError("generate: unknown kind '" + kind + "' (planted, uncorrelated, symmetric, wilkinson)");
}

} // namespace pcasim::synthetic
