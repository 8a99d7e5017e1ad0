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

// Reference implementations used as ground truth by the tests.
//
// Deliberately plain textbook code. Only the Matrix container is shared
// with the simulator; no arithmetic helpers are.

#pragma once

#include "error.hpp"
#include "matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace pcasim::oracle {

inline Matrix<double> oracle_matmul(const Matrix<double>& a, const Matrix<double>& b)
{
    detail::require_input(a.cols() == b.rows(), "oracle_matmul: dimension mismatch");
    Matrix<double> c(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

/// Same product, inner index summed backwards. Used to bound reordering error.
inline Matrix<double> oracle_matmul_reversed(const Matrix<double>& a, const Matrix<double>& b)
{
    detail::require_input(a.cols() == b.rows(), "oracle_matmul: dimension mismatch");
    Matrix<double> c(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = a.cols(); k-- > 0;) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

struct EigenResult {
    std::vector<double> eigenvalues; // descending
    Matrix<double> vectors;          // columns
    std::vector<double> trace;       // off-diagonal norm after each sweep, [0] = input
    std::size_t sweeps = 0;
};

inline double off_norm(const Matrix<double>& a)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

/// Cyclic Jacobi (Rutishauser's stable tangent form).
inline EigenResult oracle_jacobi(const Matrix<double>& c, std::size_t max_sweeps = 100, double tol = 0.0)
{
    const std::size_t n = c.rows();
    detail::require_input(n > 0 && c.cols() == n, "oracle_jacobi: square matrix required");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            detail::require_input(std::fabs(c(i, j) - c(j, i)) <= 1e-9 * (1.0 + std::fabs(c(i, j))),
                                  "oracle_jacobi: matrix not symmetric");
    Matrix<double> a = c;
    Matrix<double> v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    EigenResult r;
    r.trace.push_back(off_norm(a));
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        if (r.trace.back() <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * cs;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = cs * akp - sn * akq;
                    a(k, q) = sn * akp + cs * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = cs * apk - sn * aqk;
                    a(q, k) = sn * apk + cs * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = cs * vkp - sn * vkq;
                    v(k, q) = sn * vkp + cs * vkq;
                }
            }
        ++r.sweeps;
        r.trace.push_back(off_norm(a));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    r.vectors = Matrix<double>(n, n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        r.eigenvalues.push_back(a(order[k], order[k]));
        double sign = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (v(i, order[k]) != 0.0) {
                sign = v(i, order[k]) < 0.0 ? -1.0 : 1.0;
                break;
            }
        for (std::size_t i = 0; i < n; ++i) r.vectors(i, k) = sign * v(i, order[k]);
    }
    return r;
}

struct PcaResult {
    std::vector<double> eigenvalues;
    Matrix<double> components; // N x k
    Matrix<double> projected;  // M x k
    Matrix<double> standardized;
};

/// Standardize (sample std, zero-variance columns left at zero), C = YᵀY,
/// cyclic Jacobi, project onto the top k eigenvectors.
inline PcaResult oracle_pca(const Matrix<double>& x, std::size_t k, bool standardize = true)
{
    const std::size_t m = x.rows(), n = x.cols();
    detail::require_input(m >= 2 && n >= 1, "oracle_pca: need at least 2 rows");
    detail::require_input(k >= 1 && k <= n, "oracle_pca: k out of range");
    PcaResult r;
    r.standardized = x;
    if (standardize)
        for (std::size_t j = 0; j < n; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) mean += x(i, j);
            mean /= static_cast<double>(m);
            double ss = 0.0;
            for (std::size_t i = 0; i < m; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
            const double sd = std::sqrt(ss / static_cast<double>(m - 1));
            for (std::size_t i = 0; i < m; ++i) r.standardized(i, j) = sd > 0.0 ? (x(i, j) - mean) / sd : 0.0;
        }
    Matrix<double> yt(n, m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) yt(j, i) = r.standardized(i, j);
    const EigenResult e = oracle_jacobi(oracle_matmul(yt, r.standardized), 100, 0.0);
    r.eigenvalues = e.eigenvalues;
    r.components = Matrix<double>(n, k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) r.components(i, j) = e.vectors(i, j);
    r.projected = oracle_matmul(r.standardized, r.components);
    return r;
}

} // namespace pcasim::oracle
