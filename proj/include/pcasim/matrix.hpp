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

#pragma once

#include "error.hpp"
#include "numerics.hpp"

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace pcasim {

inline double zero_like(double) { return 0.0; }
inline Fixed zero_like(const Fixed& f) { return Fixed::zero(f.format); }

/// Dense row-major matrix. The scalar type tags the datapath (double or Fixed).
template <class T>
class Matrix {
public:
    using value_type = T;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data))
    {
        detail::require_input(data_.size() == rows_ * cols_, "Matrix: data length != rows * cols");
    }

    static Matrix identity(std::size_t n, T zero, T one)
    {
        Matrix m(n, n, zero);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = one;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

template <class T>
Matrix<T> transpose_view(const Matrix<T>& m)
{
    Matrix<T> out(m.cols(), m.rows(), m.empty() ? T{} : zero_like(m(0, 0)));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

/// Converts a real matrix into a domain's scalar representation.
template <class Domain>
Matrix<typename Domain::value_type> to_domain(const Matrix<double>& m, const Domain& dom)
{
    Matrix<typename Domain::value_type> out(m.rows(), m.cols(), dom.zero());
    for (std::size_t i = 0; i < m.data().size(); ++i) out.data()[i] = dom.from_real(m.data()[i]);
    return out;
}

template <class Domain>
Matrix<double> to_real(const Matrix<typename Domain::value_type>& m, const Domain& dom)
{
    Matrix<double> out(m.rows(), m.cols(), 0.0);
    for (std::size_t i = 0; i < m.data().size(); ++i) out.data()[i] = dom.to_real(m.data()[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Tiles
// ---------------------------------------------------------------------------

/// One T x T block of a tiled operand. Entries outside the valid region are zero.
template <class T>
struct Tile {
    std::size_t t = 0;
    std::vector<T> values;
    std::size_t block_row = 0;
    std::size_t block_col = 0;
    std::size_t valid_rows = 0;
    std::size_t valid_cols = 0;

    Tile() = default;
    Tile(std::size_t dim, T zero) : t(dim), values(dim * dim, zero), valid_rows(dim), valid_cols(dim) {}

    T& at(std::size_t i, std::size_t j) { return values[i * t + j]; }
    const T& at(std::size_t i, std::size_t j) const { return values[i * t + j]; }

    friend bool operator==(const Tile&, const Tile&) = default;
};

template <class T>
struct TiledMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t t = 0;
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::vector<Tile<T>> tiles; // row-major over the tile grid

    Tile<T>& at(std::size_t br, std::size_t bc) { return tiles[br * grid_cols + bc]; }
    const Tile<T>& at(std::size_t br, std::size_t bc) const { return tiles[br * grid_cols + bc]; }
};

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

/// Extracts tile (br, bc) of `m`, zero padded at the boundary.
template <class T>
void extract_tile(const Matrix<T>& m, std::size_t t, std::size_t br, std::size_t bc, Tile<T>& out)
{
    const T zero = zero_like(m(0, 0));
    if (out.t != t) out = Tile<T>(t, zero);
    out.block_row = br;
    out.block_col = bc;
    const std::size_t r0 = br * t;
    const std::size_t c0 = bc * t;
    out.valid_rows = std::min(t, m.rows() - r0);
    out.valid_cols = std::min(t, m.cols() - c0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j)
            out.at(i, j) = (i < out.valid_rows && j < out.valid_cols) ? m(r0 + i, c0 + j) : zero;
}

template <class T>
TiledMatrix<T> tile(const Matrix<T>& m, std::size_t t)
{
    detail::require_input(t >= 1, "tile: tile size must be >= 1");
    detail::require_input(!m.empty(), "tile: empty matrix");
    TiledMatrix<T> out;
    out.rows = m.rows();
    out.cols = m.cols();
    out.t = t;
    out.grid_rows = ceil_div(m.rows(), t);
    out.grid_cols = ceil_div(m.cols(), t);
    out.tiles.resize(out.grid_rows * out.grid_cols);
    for (std::size_t br = 0; br < out.grid_rows; ++br)
        for (std::size_t bc = 0; bc < out.grid_cols; ++bc) extract_tile(m, t, br, bc, out.at(br, bc));
    return out;
}

/// Inverse of tile(): stitches the grid and crops the padding.
template <class T>
Matrix<T> reassemble(const TiledMatrix<T>& tm)
{
    detail::require_input(!tm.tiles.empty(), "reassemble: empty tile grid");
    Matrix<T> out(tm.rows, tm.cols, zero_like(tm.tiles.front().values.front()));
    for (std::size_t br = 0; br < tm.grid_rows; ++br)
        for (std::size_t bc = 0; bc < tm.grid_cols; ++bc) {
            const Tile<T>& tl = tm.at(br, bc);
            for (std::size_t i = 0; i < tl.valid_rows; ++i)
                for (std::size_t j = 0; j < tl.valid_cols; ++j) out(br * tm.t + i, bc * tm.t + j) = tl.at(i, j);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix Padding Units
// ---------------------------------------------------------------------------

/// Per-lane, time-ordered operand slots. Slot (lane, tau) is either a value or
/// a bubble; bubbles model the MPU's leading/trailing zero padding.
template <class T>
struct SkewedStream {
    std::size_t lanes = 0;
    std::size_t total_cycles = 0;
    std::vector<T> slots;            // lanes x total_cycles
    std::vector<unsigned char> live; // 1 where a real operand sits

    const T& value(std::size_t lane, std::size_t tau) const { return slots[lane * total_cycles + tau]; }
    bool is_live(std::size_t lane, std::size_t tau) const { return live[lane * total_cycles + tau] != 0; }

    /// Number of bubble slots before the first live operand of `lane`.
    std::size_t leading_bubbles(std::size_t lane) const
    {
        std::size_t n = 0;
        while (n < total_cycles && !is_live(lane, n)) ++n;
        return n;
    }
};

namespace detail {

template <class T>
void prepare_stream(SkewedStream<T>& s, std::size_t t, const T& zero)
{
    s.lanes = t;
    s.total_cycles = 2 * t - 1;
    s.slots.assign(t * s.total_cycles, zero);
    s.live.assign(t * s.total_cycles, 0);
}

} // namespace detail

/// LHS profile: lane i carries row i, delayed by i cycles.
template <class T>
void mpu_skew_lhs(const Tile<T>& tl, SkewedStream<T>& out)
{
    const std::size_t t = tl.t;
    detail::prepare_stream(out, t, zero_like(tl.values.front()));
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t k = 0; k < t; ++k) {
            out.slots[i * out.total_cycles + i + k] = tl.at(i, k);
            out.live[i * out.total_cycles + i + k] = 1;
        }
}

/// RHS profile: lane j carries column j, delayed by j cycles.
template <class T>
void mpu_skew_rhs(const Tile<T>& tl, SkewedStream<T>& out)
{
    const std::size_t t = tl.t;
    detail::prepare_stream(out, t, zero_like(tl.values.front()));
    for (std::size_t j = 0; j < t; ++j)
        for (std::size_t k = 0; k < t; ++k) {
            out.slots[j * out.total_cycles + j + k] = tl.at(k, j);
            out.live[j * out.total_cycles + j + k] = 1;
        }
}

template <class T>
SkewedStream<T> mpu_skew_lhs(const Tile<T>& tl)
{
    SkewedStream<T> s;
    mpu_skew_lhs(tl, s);
    return s;
}

template <class T>
SkewedStream<T> mpu_skew_rhs(const Tile<T>& tl)
{
    SkewedStream<T> s;
    mpu_skew_rhs(tl, s);
    return s;
}

} // namespace pcasim
