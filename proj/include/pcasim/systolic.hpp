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
#include "matrix.hpp"
#include "numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace pcasim {

/// Cycle-stepped T x T output-stationary MAC array.
///
/// Operand `a` enters PE(i, 0) from LHS lane i and shifts right one PE per
/// cycle; operand `b` enters PE(0, j) from RHS lane j and shifts down. With the
/// MPU stagger, A[i][k] and B[k][j] meet in PE(i, j) at cycle i + j + k, so a
/// tile product takes 3T - 2 cycles from first injection to last MAC.
template <class Domain>
class SystolicArray {
public:
    using T = typename Domain::value_type;

    SystolicArray(std::size_t t, Domain dom) : t_(t), dom_(std::move(dom))
    {
        detail::require_input(t >= 1, "SystolicArray: tile size must be >= 1");
        const std::size_t n = t * t;
        acc_.assign(n, dom_.zero());
        a_reg_.assign(n, dom_.zero());
        b_reg_.assign(n, dom_.zero());
        a_live_.assign(n, 0);
        b_live_.assign(n, 0);
        fires_.assign(n, 0);
    }

    std::size_t dim() const { return t_; }
    bool busy() const { return busy_; }
    std::uint64_t cycle() const { return cycle_; }

    static constexpr std::uint64_t cycles_per_tile(std::size_t t) { return 3 * t - 2; }

    /// Streams one skewed operand pair through the array and writes the
    /// product tile. Returns the number of cycles taken.
    std::uint64_t run_tile_product(const SkewedStream<T>& lhs, const SkewedStream<T>& rhs, Tile<T>& out)
    {
        detail::require_input(lhs.lanes == t_ && rhs.lanes == t_, "run_tile_product: lane count != array dimension");
        detail::require_input(lhs.total_cycles == rhs.total_cycles, "run_tile_product: stream length mismatch");
        detail::require(!busy_, "run_tile_product: array is busy");
        busy_ = true;

        const std::size_t t = t_;
        const T zero = dom_.zero();
        std::fill(acc_.begin(), acc_.end(), zero);
        std::fill(a_live_.begin(), a_live_.end(), 0);
        std::fill(b_live_.begin(), b_live_.end(), 0);

        const std::uint64_t n_cycles = cycles_per_tile(t);
        fires_per_cycle_.assign(n_cycles, 0);
        const std::size_t in_len = lhs.total_cycles;

        for (std::uint64_t c = 0; c < n_cycles; ++c) {
            // Walk bottom-right to top-left so each PE latches its neighbour's
            // value from the previous cycle.
            for (std::size_t ii = t; ii-- > 0;) {
                for (std::size_t jj = t; jj-- > 0;) {
                    const std::size_t k = ii * t + jj;
                    if (jj == 0) {
                        const bool live = c < in_len && lhs.is_live(ii, c);
                        a_live_[k] = live;
                        if (live) a_reg_[k] = lhs.value(ii, c);
                    } else {
                        a_live_[k] = a_live_[k - 1];
                        a_reg_[k] = a_reg_[k - 1];
                    }
                    if (ii == 0) {
                        const bool live = c < in_len && rhs.is_live(jj, c);
                        b_live_[k] = live;
                        if (live) b_reg_[k] = rhs.value(jj, c);
                    } else {
                        b_live_[k] = b_live_[k - t];
                        b_reg_[k] = b_reg_[k - t];
                    }
                    if (a_live_[k] && b_live_[k]) {
                        acc_[k] = dom_.add(acc_[k], dom_.mul(a_reg_[k], b_reg_[k]));
                        ++fires_[k];
                        ++fires_per_cycle_[c];
                    }
                }
            }
        }
        cycle_ += n_cycles;

        if (out.t != t) out = Tile<T>(t, zero);
        out.values = acc_;
        out.valid_rows = t;
        out.valid_cols = t;
        busy_ = false;
        return n_cycles;
    }

    struct TileProduct {
        Tile<T> product;
        std::uint64_t cycles = 0;
    };

    TileProduct run_tile_product(const SkewedStream<T>& lhs, const SkewedStream<T>& rhs)
    {
        TileProduct r;
        r.cycles = run_tile_product(lhs, rhs, r.product);
        return r;
    }

    /// Cumulative MAC count per PE (row-major).
    const std::vector<std::uint64_t>& fire_counts() const { return fires_; }
    /// Number of PEs that fired in each cycle of the most recent tile product.
    const std::vector<std::uint64_t>& fires_per_cycle() const { return fires_per_cycle_; }

private:
    std::size_t t_;
    Domain dom_;
    bool busy_ = false;
    std::uint64_t cycle_ = 0;
    std::vector<T> acc_;
    std::vector<T> a_reg_;
    std::vector<T> b_reg_;
    std::vector<unsigned char> a_live_;
    std::vector<unsigned char> b_live_;
    std::vector<std::uint64_t> fires_;
    std::vector<std::uint64_t> fires_per_cycle_;
};

/// Matrix accumulator paired with one systolic array; sums product tiles
/// across the tiles of a block stream.
template <class Domain>
class Accumulator {
public:
    using T = typename Domain::value_type;

    Accumulator(std::size_t t, Domain dom) : dom_(std::move(dom)), partial_(t, dom_.zero()) {}

    std::size_t dim() const { return partial_.t; }
    std::size_t passes_accumulated() const { return passes_; }
    const Tile<T>& partial() const { return partial_; }

    void accumulate(const Tile<T>& product)
    {
        detail::require_input(product.t == partial_.t, "accumulate: tile dimension mismatch");
        for (std::size_t i = 0; i < partial_.values.size(); ++i)
            partial_.values[i] = dom_.add(partial_.values[i], product.values[i]);
        ++passes_;
    }

    /// Returns the accumulated tile and resets. With `expected_passes`, a
    /// short accumulation is rejected.
    Tile<T> drain(std::optional<std::size_t> expected_passes = std::nullopt)
    {
        if (expected_passes && *expected_passes != passes_)
            throw ContractViolation("drain: incomplete accumulation (" + std::to_string(passes_) + " of " +
                                    std::to_string(*expected_passes) + " passes)");
        Tile<T> out = partial_;
        std::fill(partial_.values.begin(), partial_.values.end(), dom_.zero());
        passes_ = 0;
        return out;
    }

    /// Drain into an existing tile buffer.
    void drain_into(Tile<T>& out, std::size_t expected_passes)
    {
        if (expected_passes != passes_)
            throw ContractViolation("drain: incomplete accumulation (" + std::to_string(passes_) + " of " +
                                    std::to_string(expected_passes) + " passes)");
        out.t = partial_.t;
        out.values.swap(partial_.values);
        out.valid_rows = out.valid_cols = partial_.t;
        partial_.values.assign(out.t * out.t, dom_.zero());
        passes_ = 0;
    }

private:
    Domain dom_;
    Tile<T> partial_;
    std::size_t passes_ = 0;
};

} // namespace pcasim
