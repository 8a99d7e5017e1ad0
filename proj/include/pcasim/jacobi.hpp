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
#include "memory.hpp"
#include "numerics.hpp"
#include "scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace pcasim {

template <class T>
struct PivotRecord {
    T c_pq{};
    T c_pp{};
    T c_qq{};
    std::size_t p = 0;
    std::size_t q = 0;
};

/// Data Lookup Engine: scans drained output tiles for the largest
/// off-diagonal magnitude and latches the diagonal on the way past.
///
/// Tiles on the main block diagonal (block_row == block_col) carry the
/// global diagonal; those entries are latched and never compared. Equal
/// magnitudes resolve to the lexicographically smallest (p, q).
template <class Domain>
class DataLookupEngine {
public:
    using T = typename Domain::value_type;

    DataLookupEngine(std::size_t n, Domain dom) : dom_(std::move(dom)) { reset(n); }

    /// Clears the running maximum and the diagonal latch (global register reset).
    void reset(std::size_t n)
    {
        n_ = n;
        has_best_ = false;
        best_ = {};
        diag_.assign(n, dom_.zero());
        diag_seen_.assign(n, 0);
        target_value_.reset();
    }

    /// Also capture the element at (p, q) during the next stream (cyclic pivoting).
    void set_target(std::size_t p, std::size_t q)
    {
        target_ = {p, q};
        target_value_.reset();
    }

    void observe_tile(const Tile<T>& tl, std::size_t accumulator_index, std::size_t current_row_block)
    {
        (void)accumulator_index;
        (void)current_row_block;
        const std::size_t t = tl.t;
        detail::require_input(tl.block_row * t < n_ && tl.block_col * t < n_, "dle_observe_tile: origin out of range");
        const bool diagonal_tile = tl.block_row == tl.block_col;
        for (std::size_t i = 0; i < tl.valid_rows; ++i) {
            const std::size_t gi = tl.block_row * t + i;
            for (std::size_t j = 0; j < tl.valid_cols; ++j) {
                const std::size_t gj = tl.block_col * t + j;
                const T& v = tl.at(i, j);
                if (target_ && gi == target_->first && gj == target_->second) target_value_ = v;
                if (diagonal_tile && gi == gj) {
                    diag_[gi] = v;
                    diag_seen_[gi] = 1;
                    continue;
                }
                const std::size_t p = std::min(gi, gj);
                const std::size_t q = std::max(gi, gj);
                if (!has_best_ || dom_.abs_greater(v, best_.c_pq) ||
                    (!dom_.abs_greater(best_.c_pq, v) && std::pair(p, q) < std::pair(best_.p, best_.q))) {
                    best_.c_pq = v;
                    best_.p = p;
                    best_.q = q;
                    has_best_ = true;
                }
            }
        }
    }

    bool has_pivot() const { return has_best_; }

    PivotRecord<T> pivot() const
    {
        detail::require(has_best_, "DLE: no off-diagonal element observed");
        return with_diagonal(best_.p, best_.q, best_.c_pq);
    }

    /// Pivot record for a preselected plane (cyclic order).
    PivotRecord<T> targeted_pivot() const
    {
        detail::require(target_ && target_value_.has_value(), "DLE: targeted element not observed");
        return with_diagonal(target_->first, target_->second, *target_value_);
    }

    const std::vector<T>& diagonal_latch() const { return diag_; }
    bool diagonal_complete() const
    {
        return std::all_of(diag_seen_.begin(), diag_seen_.end(), [](unsigned char c) { return c != 0; });
    }

private:
    PivotRecord<T> with_diagonal(std::size_t p, std::size_t q, const T& c_pq) const
    {
        detail::require(diag_seen_[p] && diag_seen_[q], "DLE: diagonal entries for pivot not latched");
        PivotRecord<T> r;
        r.p = p;
        r.q = q;
        r.c_pq = c_pq;
        r.c_pp = diag_[p];
        r.c_qq = diag_[q];
        return r;
    }

    Domain dom_;
    std::size_t n_ = 0;
    bool has_best_ = false;
    PivotRecord<T> best_;
    std::vector<T> diag_;
    std::vector<unsigned char> diag_seen_;
    std::optional<std::pair<std::size_t, std::size_t>> target_;
    std::optional<T> target_value_;
};

/// Streams a matrix through the DLE tile by tile in pass order, as the
/// accumulators would drain it.
template <class Domain>
void stream_into_dle(DataLookupEngine<Domain>& dle, const Matrix<typename Domain::value_type>& c,
                     const EngineConfig& cfg, Tile<typename Domain::value_type>& scratch)
{
    const std::size_t g = ceil_div(c.rows(), cfg.t);
    for (std::size_t rb = 0; rb < g; ++rb)
        for (std::size_t cb = 0; cb < g; ++cb) {
            extract_tile(c, cfg.t, rb, cb, scratch);
            dle.observe_tile(scratch, cb % cfg.s, rb);
        }
}

template <class T>
struct RotationAngles {
    T theta{};
    T sin_theta{};
    T cos_theta{};
    bool skipped = false; // pivot already zero (or angle below one ULP): identity rotation
};

/// theta = atan(2 c_pq / (c_pp - c_qq)) / 2, then sin/cos of theta.
///
/// Fixed path: vectoring CORDIC, a one-bit arithmetic right shift, then
/// rotation-mode CORDIC. Double path: the same folding with libm.
template <class Domain>
RotationAngles<typename Domain::value_type> compute_rotation(const PivotRecord<typename Domain::value_type>& pv,
                                                             const Domain& dom)
{
    RotationAngles<typename Domain::value_type> r;
    r.theta = dom.zero();
    r.sin_theta = dom.zero();
    r.cos_theta = dom.one();
    if (dom.is_zero(pv.c_pq)) {
        r.skipped = true;
        return r;
    }
    if constexpr (Domain::is_fixed) {
        const Fixed y = dom.add(pv.c_pq, pv.c_pq);
        const Fixed x = dom.sub(pv.c_pp, pv.c_qq);
        const AtanResult a = cordic_atan(y, x, dom.cordic);
        r.theta = Fixed{a.angle.raw >> 1, a.angle.format};
        if (r.theta.raw == 0) {
            r.skipped = true;
            return r;
        }
        const SinCos sc = cordic_sincos(r.theta, dom.cordic);
        r.sin_theta = sc.sin;
        r.cos_theta = sc.cos;
    } else {
        double y = 2.0 * pv.c_pq;
        double x = pv.c_pp - pv.c_qq;
        if (std::isnan(y) || std::isnan(x)) throw NumericalError("compute_rotation: NaN pivot");
        if (x < 0.0 || (x == 0.0 && y < 0.0)) {
            x = -x;
            y = -y;
        }
        r.theta = 0.5 * std::atan2(y, x);
        r.sin_theta = std::sin(r.theta);
        r.cos_theta = std::cos(r.theta);
    }
    return r;
}

/// Identity with R_pp = R_qq = cos, R_pq = sin, R_qp = -sin.
template <class Domain>
Matrix<typename Domain::value_type> build_givens(std::size_t n, std::size_t p, std::size_t q,
                                                 const typename Domain::value_type& sin_v,
                                                 const typename Domain::value_type& cos_v, const Domain& dom)
{
    detail::require_input(p < q && q < n, "build_givens: need p < q < n");
    auto r = Matrix<typename Domain::value_type>::identity(n, dom.zero(), dom.one());
    r(p, p) = cos_v;
    r(q, q) = cos_v;
    r(p, q) = sin_v;
    r(q, p) = dom.neg(sin_v);
    return r;
}

/// Givens entries that annihilate c_pq under C' = RᵀCR for angle theta
/// from compute_rotation: the stored sine is sin(-theta).
template <class Domain>
GivensEntries<typename Domain::value_type> annihilating_entries(std::size_t p, std::size_t q,
                                                                const RotationAngles<typename Domain::value_type>& a,
                                                                const Domain& dom)
{
    GivensEntries<typename Domain::value_type> g;
    g.p = p;
    g.q = q;
    g.r_pp = a.cos_theta;
    g.r_qq = a.cos_theta;
    g.r_pq = dom.neg(a.sin_theta);
    g.r_qp = dom.neg(g.r_pq);
    return g;
}

/// E_off = sqrt(sum_{i != j} c_ij^2), always evaluated in double precision.
inline double off_diagonal_norm(const Matrix<double>& c)
{
    detail::require_input(c.rows() == c.cols(), "off_diagonal_norm: matrix must be square");
    double s = 0.0;
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j)
            if (i != j) s += c(i, j) * c(i, j);
    return std::sqrt(s);
}

inline double off_diagonal_norm(const Matrix<Fixed>& c)
{
    return off_diagonal_norm(to_real(c, FixedDomain(c.empty() ? QFormat{} : c(0, 0).format, 16)));
}

inline double max_off_diagonal(const Matrix<double>& c)
{
    double m = 0.0;
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j)
            if (i != j) m = std::max(m, std::fabs(c(i, j)));
    return m;
}

enum class PivotStrategy { MaxPivot, CyclicRowwise };

inline const char* to_string(PivotStrategy p) { return p == PivotStrategy::MaxPivot ? "max" : "cyclic"; }

struct JacobiConfig {
    std::size_t sweep_budget = 50;
    double epsilon = 0.0; // 0: budget only
    PivotStrategy pivot_strategy = PivotStrategy::MaxPivot;
    double symmetry_tolerance = 1e-9;               // relative to max |c_ij|
    std::uint64_t saturation_storm_threshold = 1;   // saturations per sweep that abort a fixed-path run
    double assumed_hit_rate = 0.9;                   // costing of fast-path rotations

    void validate() const
    {
        detail::require_input(sweep_budget >= 1, "JacobiConfig: sweep budget must be >= 1");
        detail::require_input(epsilon >= 0.0, "JacobiConfig: epsilon must be >= 0");
    }
};

struct SweepRecord {
    std::size_t sweep = 0;
    double e_off = 0.0;
    double e_off_relative = 0.0;
    double max_pivot_magnitude = 0.0;
    std::uint64_t rotations_so_far = 0;
};

template <class T>
struct JacobiResult {
    std::vector<double> eigenvalues; // descending
    Matrix<T> eigenvectors;          // columns match eigenvalues
    Matrix<T> diagonalized;          // final C, original ordering
    std::vector<double> e_off_trace; // index 0 is the input
    std::vector<SweepRecord> trace;
    std::size_t sweeps_executed = 0;
    std::uint64_t rotations_executed = 0;
    std::uint64_t rotation_slots = 0;
    std::uint64_t saturations = 0;
    PhaseCounters counters;
};

inline void write_convergence_csv(std::ostream& os, const std::vector<SweepRecord>& trace, bool header = true)
{
    if (header) os << "sweep,e_off,e_off_relative,max_pivot_magnitude,rotations_so_far\n";
    for (const auto& r : trace)
        os << r.sweep << ',' << r.e_off << ',' << r.e_off_relative << ',' << r.max_pivot_magnitude << ','
           << r.rotations_so_far << '\n';
}

namespace detail {

template <class Domain>
void check_symmetric(const Matrix<typename Domain::value_type>& c, const JacobiConfig& cfg, const Domain& dom)
{
    const std::size_t n = c.rows();
    double scale = 0.0;
    for (const auto& v : c.data()) {
        const double x = dom.to_real(v);
        if (std::isnan(x)) throw InputError("jacobi: input contains NaN");
        scale = std::max(scale, std::fabs(x));
    }
    double tol = cfg.symmetry_tolerance * std::max(scale, 1.0);
    if constexpr (Domain::is_fixed) tol += 4.0 * dom.format.ulp();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(dom.to_real(c(i, j)) - dom.to_real(c(j, i))) > tol)
                throw InputError("jacobi: input is not symmetric at (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ")");
}

/// Cyclic row-wise plane for rotation slot k of a sweep.
inline std::pair<std::size_t, std::size_t> cyclic_plane(std::size_t n, std::size_t slot)
{
    std::size_t p = 0;
    std::size_t row = n - 1;
    while (slot >= row) {
        slot -= row;
        ++p;
        --row;
    }
    return {p, p + 1 + slot};
}

} // namespace detail

/// Sorts eigenpairs by descending eigenvalue and makes the first nonzero
/// component of each eigenvector nonnegative.
template <class Domain>
void order_eigenpairs(std::vector<double>& values, Matrix<typename Domain::value_type>& vecs, const Domain& dom)
{
    const std::size_t n = values.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    Matrix<typename Domain::value_type> out(vecs.rows(), n, dom.zero());
    std::vector<double> vals(n);
    for (std::size_t k = 0; k < n; ++k) {
        vals[k] = values[idx[k]];
        bool flip = false;
        for (std::size_t i = 0; i < vecs.rows(); ++i) {
            const double x = dom.to_real(vecs(i, idx[k]));
            if (x != 0.0) {
                flip = x < 0.0;
                break;
            }
        }
        for (std::size_t i = 0; i < vecs.rows(); ++i)
            out(i, k) = flip ? dom.neg(vecs(i, idx[k])) : vecs(i, idx[k]);
    }
    values = std::move(vals);
    vecs = std::move(out);
}

/// The Jacobian Unit plus its use of the MM-Engine for rotations.
///
/// Each rotation slot: pivot from the DLE (or the cyclic schedule), angle
/// via compute_rotation, Givens entries committed to R and Rᵀ, then
/// M = RᵀC, C' = MR (streamed back through the DLE) and V' = VR on the
/// engine in Rotation mode. One sweep is N(N-1)/2 slots for either pivot
/// strategy; the budget counts sweeps.
template <class Domain>
JacobiResult<typename Domain::value_type> jacobi_eigendecomposition(const Matrix<typename Domain::value_type>& c0,
                                                                    const JacobiConfig& cfg,
                                                                    MatMulEngine<Domain>& engine,
                                                                    CacheHierarchy<typename Domain::value_type>& h)
{
    using T = typename Domain::value_type;
    cfg.validate();
    const Domain& dom = engine.domain();
    const EngineConfig& ecfg = engine.config();
    const std::size_t n = c0.rows();
    detail::require_input(n >= 1 && c0.cols() == n, "jacobi: matrix must be square and non-empty");
    detail::check_symmetric(c0, cfg, dom);

    JacobiResult<T> res;
    const std::uint64_t sat0 = dom.saturations();
    const std::size_t slots_per_sweep = n * (n - 1) / 2;

    Matrix<T> c = c0;
    h.set_mode(Mode::Rotation);
    Matrix<T> v = Matrix<T>::identity(n, dom.zero(), dom.one());

    // Full-path state: resident regions in the backing store.
    const bool full = !ecfg.givens_fast_path;
    OperandRef c_reg, m_reg, r_reg, rt_reg, v_reg, v_alt;
    Matrix<T> r_host, rt_host;
    if (full && n >= 2) {
        c_reg = engine.stage(h, c0);
        m_reg = engine.allocate(h, n, n);
        r_host = Matrix<T>::identity(n, dom.zero(), dom.one());
        rt_host = r_host;
        r_reg = engine.stage(h, r_host);
        rt_reg = engine.stage(h, rt_host);
        v_reg = engine.stage(h, v);
        v_alt = engine.allocate(h, n, n);
    }

    DataLookupEngine<Domain> dle(n, dom);
    Tile<T> scratch;
    const double e0 = off_diagonal_norm(to_real(c, dom));
    auto record = [&](std::size_t sweep) {
        const Matrix<double> cr = to_real(c, dom);
        SweepRecord s;
        s.sweep = sweep;
        s.e_off = off_diagonal_norm(cr);
        s.e_off_relative = e0 > 0.0 ? s.e_off / e0 : 0.0;
        s.max_pivot_magnitude = max_off_diagonal(cr);
        s.rotations_so_far = res.rotations_executed;
        res.e_off_trace.push_back(s.e_off);
        res.trace.push_back(s);
        return s.e_off;
    };
    record(0);

    // Geometry of the three rotation products, for fast-path costing.
    PhaseCounters per_rotation;
    if (!full && n >= 2)
        for (int k = 0; k < 3; ++k)
            per_rotation += estimate_matmul_counters(n, n, n, ecfg, h.lhs_cache().config(), cfg.assumed_hit_rate);

    std::size_t next_slot = 0; // cyclic position
    auto target_for = [&](std::size_t slot) { return detail::cyclic_plane(n, slot % slots_per_sweep); };
    if (n >= 2) {
        dle.reset(n);
        if (cfg.pivot_strategy == PivotStrategy::CyclicRowwise) {
            const auto [p, q] = target_for(0);
            dle.set_target(p, q);
        }
        stream_into_dle(dle, c, ecfg, scratch);
    }
    std::size_t last_p = 0, last_q = 0;

    bool frozen = n < 2 || e0 == 0.0; // nothing left that any further slot can change
    for (std::size_t sweep = 1; sweep <= cfg.sweep_budget; ++sweep) {
        const std::uint64_t sat_before = dom.saturations();
        std::size_t skipped_in_row = 0;
        const Matrix<T> c_sweep_start = c;
        for (std::size_t slot = 0; slot < slots_per_sweep && !frozen; ++slot, ++next_slot) {
            ++res.rotation_slots;
            const PivotRecord<T> pv =
                cfg.pivot_strategy == PivotStrategy::MaxPivot ? dle.pivot() : dle.targeted_pivot();
            const RotationAngles<T> ang = compute_rotation(pv, dom);

            std::pair<std::size_t, std::size_t> next_target{};
            if (cfg.pivot_strategy == PivotStrategy::CyclicRowwise) next_target = target_for(next_slot + 1);

            if (ang.skipped) {
                // C is unchanged; under max pivoting every later slot would pick
                // the same pivot again.
                if (cfg.pivot_strategy == PivotStrategy::MaxPivot) {
                    frozen = true;
                    break;
                }
                if (++skipped_in_row >= slots_per_sweep) {
                    frozen = true;
                    break;
                }
                dle.reset(n);
                dle.set_target(next_target.first, next_target.second);
                stream_into_dle(dle, c, ecfg, scratch);
                continue;
            }
            skipped_in_row = 0;
            const GivensEntries<T> g = annihilating_entries(pv.p, pv.q, ang, dom);
            const bool track_stall = cfg.pivot_strategy == PivotStrategy::MaxPivot;
            Matrix<T> c_before;
            if (track_stall) c_before = c;

            if (full) {
                // Givens controller: restore identity from the last rotation, write new plane.
                const std::size_t t = ecfg.t;
                std::vector<std::pair<std::size_t, std::size_t>> touched;
                auto set_plane = [&](std::size_t p, std::size_t q, const T& pp, const T& pq, const T& qp, const T& qq) {
                    r_host(p, p) = pp;
                    r_host(p, q) = pq;
                    r_host(q, p) = qp;
                    r_host(q, q) = qq;
                    rt_host(p, p) = pp;
                    rt_host(q, p) = pq;
                    rt_host(p, q) = qp;
                    rt_host(q, q) = qq;
                    for (std::size_t a : {p / t, q / t})
                        for (std::size_t b : {p / t, q / t}) touched.emplace_back(a, b);
                };
                if (res.rotations_executed > 0) set_plane(last_p, last_q, dom.one(), dom.zero(), dom.zero(), dom.one());
                set_plane(g.p, g.q, g.r_pp, g.r_pq, g.r_qp, g.r_qq);
                last_p = g.p;
                last_q = g.q;
                std::sort(touched.begin(), touched.end());
                touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
                for (const auto& [a, b] : touched) {
                    extract_tile(r_host, t, a, b, scratch);
                    h.preload(r_reg.address(a, b), scratch);
                    extract_tile(rt_host, t, a, b, scratch);
                    h.preload(rt_reg.address(a, b), scratch);
                }

                h.set_mode(Mode::Rotation);
                res.counters += engine.run(rt_reg, c_reg, m_reg, h).counters;
                dle.reset(n);
                if (cfg.pivot_strategy == PivotStrategy::CyclicRowwise)
                    dle.set_target(next_target.first, next_target.second);
                res.counters +=
                    engine
                        .run(m_reg, r_reg, c_reg, h,
                             [&](const Tile<T>& tl, std::size_t acc, std::size_t rb) { dle.observe_tile(tl, acc, rb); })
                        .counters;
                res.counters += engine.run(v_reg, r_reg, v_alt, h).counters;
                std::swap(v_reg, v_alt);
                c = engine.readback(h, c_reg);
            } else {
                apply_givens_sparse(c, v, g, dom);
                res.counters += per_rotation;
                dle.reset(n);
                if (cfg.pivot_strategy == PivotStrategy::CyclicRowwise)
                    dle.set_target(next_target.first, next_target.second);
                stream_into_dle(dle, c, ecfg, scratch);
            }
            ++res.rotations_executed;
            // Rounding can leave C bit-identical; the next pivot would then be
            // the same one, and repeating it only degrades V.
            if (track_stall && c == c_before) {
                frozen = true;
                break;
            }
        }
        // Same for a whole sweep: the schedule is periodic in the sweep.
        if (!frozen && c == c_sweep_start) frozen = true;

        const double e = record(sweep);
        res.sweeps_executed = sweep;
        if constexpr (Domain::is_fixed) {
            if (dom.saturations() - sat_before >= cfg.saturation_storm_threshold)
                throw NumericalError("jacobi: saturation storm in sweep " + std::to_string(sweep) + " (" +
                                     std::to_string(dom.saturations() - sat_before) +
                                     " events); widen the Q format");
        } else {
            if (std::isnan(e)) throw NumericalError("jacobi: NaN in sweep " + std::to_string(sweep));
        }
        if (cfg.epsilon > 0.0 && e < cfg.epsilon) break;
        if (e == 0.0) frozen = true;
    }

    if (full && n >= 2) v = engine.readback(h, v_reg);
    res.diagonalized = c;
    res.eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.eigenvalues[i] = dom.to_real(c(i, i));
    res.eigenvectors = v;
    order_eigenpairs(res.eigenvalues, res.eigenvectors, dom);
    res.saturations = dom.saturations() - sat0;
    return res;
}

} // namespace pcasim
