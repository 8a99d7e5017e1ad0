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
#include "systolic.hpp"
#include "thread_pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace pcasim {

/// How a pass is costed.
///  - WorstCaseSequential: operand fetch and systolic compute never overlap;
///    the S arrays step in lockstep, so a tile step costs the slowest of the
///    S+1 cache reads plus one tile product.
///  - OverlappedOptimistic: the next tile's fetch hides behind the current
///    tile product; only the excess fetch latency is exposed.
enum class CostingMode { WorstCaseSequential, OverlappedOptimistic };

inline const char* to_string(CostingMode c)
{
    return c == CostingMode::WorstCaseSequential ? "worst-case-sequential" : "overlapped-optimistic";
}

struct EngineConfig {
    std::size_t t = 4; // tile size T
    std::size_t s = 8; // parallelism index S
    CostingMode costing = CostingMode::WorstCaseSequential;
    bool givens_fast_path = false; // rotation updates touch only rows/cols p and q
    bool record_trace = true;
    std::size_t threads = 1;

    void validate() const
    {
        detail::require_input(t >= 2, "EngineConfig: tile size must be >= 2");
        detail::require_input(s >= 1, "EngineConfig: parallelism must be >= 1");
    }
};

struct GridDims {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

struct Pass {
    std::size_t row_block = 0;
    std::vector<std::size_t> column_blocks; // one per active array, <= S
    std::size_t tiles_per_block = 0;
};

struct PassPlan {
    std::size_t row_blocks = 0;
    std::size_t column_blocks = 0;
    std::size_t tiles_per_block = 0;
    std::size_t parallelism = 0;
    std::vector<Pass> passes;

    std::size_t pass_count() const { return passes.size(); }
};

/// Row-major block schedule: each row block is held while its column blocks
/// are consumed S at a time.
inline PassPlan plan_passes(GridDims lhs, GridDims rhs, const EngineConfig& cfg)
{
    cfg.validate();
    detail::require_input(lhs.cols == rhs.rows, "plan_passes: inner tile-grid dimensions disagree (" +
                                                    std::to_string(lhs.cols) + " vs " + std::to_string(rhs.rows) +
                                                    ")");
    detail::require_input(lhs.rows > 0 && rhs.cols > 0 && lhs.cols > 0, "plan_passes: empty grid");
    PassPlan plan;
    plan.row_blocks = lhs.rows;
    plan.column_blocks = rhs.cols;
    plan.tiles_per_block = lhs.cols;
    plan.parallelism = cfg.s;
    plan.passes.reserve(lhs.rows * ceil_div(rhs.cols, cfg.s));
    for (std::size_t rb = 0; rb < lhs.rows; ++rb)
        for (std::size_t c0 = 0; c0 < rhs.cols; c0 += cfg.s) {
            Pass p;
            p.row_block = rb;
            p.tiles_per_block = lhs.cols;
            for (std::size_t cb = c0; cb < std::min(rhs.cols, c0 + cfg.s); ++cb) p.column_blocks.push_back(cb);
            plan.passes.push_back(std::move(p));
        }
    return plan;
}

/// Cycle and access-step counters for one phase (or one matmul).
///
/// An access step is one lockstep fetch (the LHS broadcast plus the active
/// private RHS reads) or one drain (the active accumulators writing back).
/// A step is fast when every cache involved answered at hit latency.
struct PhaseCounters {
    std::uint64_t matmuls = 0;
    std::uint64_t passes = 0;
    std::uint64_t tile_steps = 0;
    std::uint64_t drain_steps = 0;
    std::uint64_t fast_steps = 0;
    std::uint64_t load_cycles = 0;
    std::uint64_t compute_cycles = 0;
    std::uint64_t active_array_tiles = 0; // tile products actually computed (gating)
    bool estimated = false;               // produced by the analytical model, not the simulator

    std::uint64_t access_steps() const { return tile_steps + drain_steps; }
    std::uint64_t total() const { return load_cycles + compute_cycles; }
    double measured_p() const
    {
        return access_steps() ? static_cast<double>(fast_steps) / static_cast<double>(access_steps()) : 1.0;
    }

    PhaseCounters& operator+=(const PhaseCounters& o)
    {
        matmuls += o.matmuls;
        passes += o.passes;
        tile_steps += o.tile_steps;
        drain_steps += o.drain_steps;
        fast_steps += o.fast_steps;
        load_cycles += o.load_cycles;
        compute_cycles += o.compute_cycles;
        active_array_tiles += o.active_array_tiles;
        estimated = estimated || o.estimated;
        return *this;
    }
};

struct PassTrace {
    std::size_t pass_id = 0;
    std::size_t row_block = 0;
    std::vector<std::size_t> column_blocks;
    std::uint64_t cycles = 0;
    std::uint64_t lhs_hits = 0;
    std::uint64_t lhs_misses = 0;
    std::uint64_t rhs_hits = 0;
    std::uint64_t rhs_misses = 0;
};

inline void write_pass_trace_csv(std::ostream& os, const std::vector<PassTrace>& trace, bool header = true)
{
    if (header) os << "pass_id,row_block,column_blocks,cycles,lhs_hits,lhs_misses,rhs_hits,rhs_misses\n";
    for (const auto& p : trace) {
        os << p.pass_id << ',' << p.row_block << ',';
        for (std::size_t i = 0; i < p.column_blocks.size(); ++i) os << (i ? ";" : "") << p.column_blocks[i];
        os << ',' << p.cycles << ',' << p.lhs_hits << ',' << p.lhs_misses << ',' << p.rhs_hits << ','
           << p.rhs_misses << '\n';
    }
}

template <class T>
struct MatMulResult {
    Matrix<T> product;
    std::uint64_t cycles = 0;
    PhaseCounters counters;
    std::vector<CacheStats> cache_stats; // lhs, then rhs0..rhsS-1, cumulative at completion
    std::vector<PassTrace> trace;
    std::size_t row_blocks = 0;
    std::size_t column_blocks = 0;
    std::size_t tiles_per_block = 0;
    std::size_t passes = 0;
};

/// A tiled operand resident in the backing store.
struct OperandRef {
    std::uint64_t base = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;

    std::uint64_t address(std::size_t br, std::size_t bc) const { return base + br * grid_cols + bc; }
    std::size_t tiles() const { return grid_rows * grid_cols; }
};

/// The MM-Engine: S systolic array / accumulator pairs fed through the cache
/// hierarchy under the block-streaming schedule.
template <class Domain>
class MatMulEngine {
public:
    using T = typename Domain::value_type;
    /// Called for every drained output tile: (tile, accumulator index, current row block).
    /// The tile carries its global block coordinates.
    using Observer = std::function<void(const Tile<T>&, std::size_t, std::size_t)>;

    MatMulEngine(EngineConfig cfg, Domain dom) : cfg_(cfg), dom_(std::move(dom)), pool_(std::make_unique<ThreadPool>(cfg.threads))
    {
        cfg_.validate();
        for (std::size_t s = 0; s < cfg_.s; ++s) {
            arrays_.emplace_back(cfg_.t, dom_);
            accs_.emplace_back(cfg_.t, dom_);
        }
    }

    const EngineConfig& config() const { return cfg_; }
    const Domain& domain() const { return dom_; }
    const SystolicArray<Domain>& array(std::size_t s) const { return arrays_.at(s); }

    OperandRef allocate(CacheHierarchy<T>& h, std::size_t rows, std::size_t cols) const
    {
        OperandRef r;
        r.rows = rows;
        r.cols = cols;
        r.grid_rows = ceil_div(rows, cfg_.t);
        r.grid_cols = ceil_div(cols, cfg_.t);
        r.base = h.allocate_region(r.tiles(), cfg_.t);
        return r;
    }

    /// Flattens `m` into the tile-per-row layout and loads it at reset time.
    OperandRef stage(CacheHierarchy<T>& h, const Matrix<T>& m) const
    {
        OperandRef r = allocate(h, m.rows(), m.cols());
        restage(h, r, m);
        return r;
    }

    void restage(CacheHierarchy<T>& h, const OperandRef& r, const Matrix<T>& m) const
    {
        detail::require_input(m.rows() == r.rows && m.cols() == r.cols, "restage: dimension mismatch");
        h.preload(r.base, tile(m, cfg_.t));
    }

    /// Host read of a resident operand straight from the backing store (uncosted).
    Matrix<T> readback(const CacheHierarchy<T>& h, const OperandRef& r) const
    {
        TiledMatrix<T> tm;
        tm.rows = r.rows;
        tm.cols = r.cols;
        tm.t = cfg_.t;
        tm.grid_rows = r.grid_rows;
        tm.grid_cols = r.grid_cols;
        tm.tiles.reserve(r.tiles());
        for (std::size_t i = 0; i < r.tiles(); ++i) {
            Tile<T> tl = h.backing().read(r.base + i);
            const std::size_t br = i / r.grid_cols;
            const std::size_t bc = i % r.grid_cols;
            tl.block_row = br;
            tl.block_col = bc;
            tl.valid_rows = std::min(cfg_.t, r.rows - br * cfg_.t);
            tl.valid_cols = std::min(cfg_.t, r.cols - bc * cfg_.t);
            tm.tiles.push_back(std::move(tl));
        }
        return reassemble(tm);
    }

    /// out = lhs x rhs over resident operands, in the hierarchy's current mode.
    MatMulResult<T> run(const OperandRef& lhs, const OperandRef& rhs, const OperandRef& out, CacheHierarchy<T>& h,
                        const Observer& observer = {}, bool collect_product = false)
    {
        detail::require_input(lhs.cols == rhs.rows, "run_matmul: lhs.cols (" + std::to_string(lhs.cols) +
                                                        ") != rhs.rows (" + std::to_string(rhs.rows) + ")");
        detail::require_input(out.rows == lhs.rows && out.cols == rhs.cols, "run_matmul: output region has wrong shape");
        detail::require_input(h.parallelism() == cfg_.s, "run_matmul: hierarchy has " + std::to_string(h.parallelism()) +
                                                             " private caches, engine has S=" + std::to_string(cfg_.s));
        auto overlaps = [](const OperandRef& a, const OperandRef& b) {
            return a.base < b.base + b.tiles() && b.base < a.base + a.tiles();
        };
        detail::require(!overlaps(out, lhs) && !overlaps(out, rhs), "run_matmul: output region aliases an operand");

        const PassPlan plan = plan_passes({lhs.grid_rows, lhs.grid_cols}, {rhs.grid_rows, rhs.grid_cols}, cfg_);
        const std::size_t t = cfg_.t;
        const std::size_t k_tiles = plan.tiles_per_block;
        const std::uint64_t hit = h.lhs_cache().config().hit_time;
        const std::uint64_t tile_cost = SystolicArray<Domain>::cycles_per_tile(t);

        MatMulResult<T> res;
        res.row_blocks = plan.row_blocks;
        res.column_blocks = plan.column_blocks;
        res.tiles_per_block = k_tiles;
        res.passes = plan.pass_count();
        res.counters.matmuls = 1;

        lhs_tiles_.resize(k_tiles);
        lhs_streams_.resize(k_tiles);
        rhs_tiles_.resize(cfg_.s);
        for (auto& v : rhs_tiles_) v.resize(k_tiles);
        rhs_streams_.resize(cfg_.s);
        products_.resize(cfg_.s);
        drained_.resize(cfg_.s);

        if (cfg_.record_trace) res.trace.reserve(plan.pass_count());

        for (std::size_t pid = 0; pid < plan.passes.size(); ++pid) {
            const Pass& pass = plan.passes[pid];
            const std::size_t active = pass.column_blocks.size();
            const CacheStats lhs0 = h.lhs_cache().stats();
            std::uint64_t rhs_h0 = 0, rhs_m0 = 0;
            for (std::size_t a = 0; a < active; ++a) {
                rhs_h0 += h.rhs_cache(a).stats().hits;
                rhs_m0 += h.rhs_cache(a).stats().misses;
            }
            std::uint64_t pass_cycles = 0;

            // Operand fetch, one lockstep step per tile of the block.
            for (std::size_t k = 0; k < k_tiles; ++k) {
                std::uint64_t step = h.read_tile(CacheSide::lhs(), lhs.address(pass.row_block, k), lhs_tiles_[k]);
                for (std::size_t a = 0; a < active; ++a) {
                    const std::uint64_t lat =
                        h.read_tile(CacheSide::rhs(a), rhs.address(k, pass.column_blocks[a]), rhs_tiles_[a][k]);
                    step = std::max(step, lat);
                }
                ++res.counters.tile_steps;
                if (step == hit) ++res.counters.fast_steps;
                std::uint64_t exposed = step;
                if (cfg_.costing == CostingMode::OverlappedOptimistic) exposed = step > tile_cost ? step - tile_cost : 0;
                res.counters.load_cycles += exposed;
                res.counters.compute_cycles += tile_cost;
                pass_cycles += exposed + tile_cost;
                mpu_skew_lhs(lhs_tiles_[k], lhs_streams_[k]);
            }

            // Systolic compute; arrays are independent within a pass.
            pool_->parallel_for(active, [&](std::size_t a) {
                auto& rs = rhs_streams_[a];
                for (std::size_t k = 0; k < k_tiles; ++k) {
                    mpu_skew_rhs(rhs_tiles_[a][k], rs);
                    arrays_[a].run_tile_product(lhs_streams_[k], rs, products_[a]);
                    accs_[a].accumulate(products_[a]);
                }
                accs_[a].drain_into(drained_[a], k_tiles);
            });
            res.counters.active_array_tiles += active * k_tiles;

            // Drain: forward to the Jacobi tap and write back to memory.
            std::uint64_t drain = 0;
            for (std::size_t a = 0; a < active; ++a) {
                Tile<T>& tl = drained_[a];
                tl.block_row = pass.row_block;
                tl.block_col = pass.column_blocks[a];
                tl.valid_rows = std::min(t, out.rows - tl.block_row * t);
                tl.valid_cols = std::min(t, out.cols - tl.block_col * t);
                if (observer) observer(tl, a, pass.row_block);
                drain = std::max(drain, h.write_tile(CacheSide::rhs(a), out.address(tl.block_row, tl.block_col), tl));
            }
            ++res.counters.drain_steps;
            if (drain == hit) ++res.counters.fast_steps;
            res.counters.load_cycles += drain;
            pass_cycles += drain;
            ++res.counters.passes;

            if (cfg_.record_trace) {
                PassTrace tr;
                tr.pass_id = pid;
                tr.row_block = pass.row_block;
                tr.column_blocks = pass.column_blocks;
                tr.cycles = pass_cycles;
                tr.lhs_hits = h.lhs_cache().stats().hits - lhs0.hits;
                tr.lhs_misses = h.lhs_cache().stats().misses - lhs0.misses;
                std::uint64_t rh = 0, rm = 0;
                for (std::size_t a = 0; a < active; ++a) {
                    rh += h.rhs_cache(a).stats().hits;
                    rm += h.rhs_cache(a).stats().misses;
                }
                tr.rhs_hits = rh - rhs_h0;
                tr.rhs_misses = rm - rhs_m0;
                res.trace.push_back(std::move(tr));
            }
        }

        res.cycles = res.counters.total();
        res.cache_stats.push_back(h.lhs_cache().stats());
        for (std::size_t s = 0; s < h.parallelism(); ++s) res.cache_stats.push_back(h.rhs_cache(s).stats());
        if (collect_product) res.product = readback(h, out);
        return res;
    }

    /// Stages both operands, runs the product in `mode`, and returns it.
    MatMulResult<T> run_matmul(const Matrix<T>& lhs, const Matrix<T>& rhs, CacheHierarchy<T>& h, Mode mode,
                               const Observer& observer = {})
    {
        detail::require_input(lhs.cols() == rhs.rows(), "run_matmul: lhs.cols (" + std::to_string(lhs.cols()) +
                                                             ") != rhs.rows (" + std::to_string(rhs.rows()) + ")");
        h.set_mode(mode);
        const OperandRef l = stage(h, lhs);
        const OperandRef r = stage(h, rhs);
        const OperandRef o = allocate(h, lhs.rows(), rhs.cols());
        return run(l, r, o, h, observer, true);
    }

private:
    EngineConfig cfg_;
    Domain dom_;
    std::unique_ptr<ThreadPool> pool_;
    std::vector<SystolicArray<Domain>> arrays_;
    std::vector<Accumulator<Domain>> accs_;
    std::vector<Tile<T>> lhs_tiles_;
    std::vector<SkewedStream<T>> lhs_streams_;
    std::vector<std::vector<Tile<T>>> rhs_tiles_;
    std::vector<SkewedStream<T>> rhs_streams_;
    std::vector<Tile<T>> products_;
    std::vector<Tile<T>> drained_;
};

/// Convenience wrapper: one-shot engine product.
template <class Domain>
MatMulResult<typename Domain::value_type> run_matmul(const Matrix<typename Domain::value_type>& lhs,
                                                     const Matrix<typename Domain::value_type>& rhs,
                                                     const EngineConfig& cfg,
                                                     CacheHierarchy<typename Domain::value_type>& h, Mode mode,
                                                     const Domain& dom,
                                                     const typename MatMulEngine<Domain>::Observer& observer = {})
{
    MatMulEngine<Domain> engine(cfg, dom);
    return engine.run_matmul(lhs, rhs, h, mode, observer);
}

// ---------------------------------------------------------------------------
// Rotation mode
// ---------------------------------------------------------------------------

template <class T>
struct RotationUpdate {
    Matrix<T> c;
    Matrix<T> v;
    std::uint64_t cycles = 0;
    PhaseCounters counters;
};

/// C' = Rᵀ C R and V' = V R as three engine products (M = RᵀC, C' = MR, V' = VR).
template <class Domain>
RotationUpdate<typename Domain::value_type> run_rotation_update(MatMulEngine<Domain>& engine,
                                                                const Matrix<typename Domain::value_type>& c,
                                                                const Matrix<typename Domain::value_type>& v,
                                                                const Matrix<typename Domain::value_type>& givens,
                                                                CacheHierarchy<typename Domain::value_type>& h)
{
    using T = typename Domain::value_type;
    if (h.mode() != Mode::Rotation) throw ContractViolation("run_rotation_update: mode signal is not Rotation");
    const std::size_t n = c.rows();
    detail::require_input(c.cols() == n && v.rows() == n && v.cols() == n && givens.rows() == n && givens.cols() == n,
                          "run_rotation_update: operands must be square and equal-sized");
    const OperandRef rt = engine.stage(h, transpose_view(givens));
    const OperandRef r = engine.stage(h, givens);
    const OperandRef cr = engine.stage(h, c);
    const OperandRef vr = engine.stage(h, v);
    const OperandRef m = engine.allocate(h, n, n);
    const OperandRef c_out = engine.allocate(h, n, n);
    const OperandRef v_out = engine.allocate(h, n, n);

    RotationUpdate<T> out;
    out.counters += engine.run(rt, cr, m, h).counters;
    out.counters += engine.run(m, r, c_out, h).counters;
    out.counters += engine.run(vr, r, v_out, h).counters;
    out.cycles = out.counters.total();
    out.c = engine.readback(h, c_out);
    out.v = engine.readback(h, v_out);
    return out;
}

/// Entries of a Givens matrix at the pivot plane, exactly as stored.
template <class T>
struct GivensEntries {
    std::size_t p = 0;
    std::size_t q = 0;
    T r_pp{};
    T r_pq{};
    T r_qp{};
    T r_qq{};
};

/// Sparse rotation update: computes the same values as the three engine
/// products (same operand order, same association) but only touches rows and
/// columns p and q.
template <class Domain>
void apply_givens_sparse(Matrix<typename Domain::value_type>& c, Matrix<typename Domain::value_type>& v,
                         const GivensEntries<typename Domain::value_type>& g, const Domain& dom)
{
    const std::size_t n = c.rows();
    const std::size_t p = g.p, q = g.q;
    // M = RᵀC: rows p and q change.
    for (std::size_t j = 0; j < n; ++j) {
        const auto cp = c(p, j);
        const auto cq = c(q, j);
        c(p, j) = dom.add(dom.mul(g.r_pp, cp), dom.mul(g.r_qp, cq));
        c(q, j) = dom.add(dom.mul(g.r_pq, cp), dom.mul(g.r_qq, cq));
    }
    // C' = MR and V' = VR: columns p and q change.
    auto right = [&](Matrix<typename Domain::value_type>& m) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const auto mp = m(i, p);
            const auto mq = m(i, q);
            m(i, p) = dom.add(dom.mul(mp, g.r_pp), dom.mul(mq, g.r_qp));
            m(i, q) = dom.add(dom.mul(mp, g.r_pq), dom.mul(mq, g.r_qq));
        }
    };
    right(c);
    right(v);
}

/// Structural counters of one product under the analytical model: exact pass
/// and step counts, loads costed at the assumed step hit rate.
inline PhaseCounters estimate_matmul_counters(std::size_t lhs_rows, std::size_t inner, std::size_t rhs_cols,
                                              const EngineConfig& cfg, const CacheConfig& cache, double p)
{
    const std::size_t gr = ceil_div(lhs_rows, cfg.t);
    const std::size_t gk = ceil_div(inner, cfg.t);
    const std::size_t gc = ceil_div(rhs_cols, cfg.t);
    PhaseCounters pc;
    pc.estimated = true;
    pc.matmuls = 1;
    pc.passes = gr * ceil_div(gc, cfg.s);
    pc.tile_steps = pc.passes * gk;
    pc.drain_steps = pc.passes;
    pc.active_array_tiles = gr * gc * gk;
    pc.fast_steps = static_cast<std::uint64_t>(std::llround(p * static_cast<double>(pc.access_steps())));
    if (cfg.costing == CostingMode::WorstCaseSequential) {
        pc.load_cycles = static_cast<std::uint64_t>(
            std::llround(static_cast<double>(pc.access_steps()) * effective_access_time(p, cache)));
    } else {
        // Only the part of each fetch longer than one tile computation is exposed.
        const double tc = static_cast<double>(3 * cfg.t - 2);
        const double hit = cache.hit_time;
        const double miss = static_cast<double>(cache.miss_latency());
        const double exposed = p * std::max(0.0, hit - tc) + (1.0 - p) * std::max(0.0, miss - tc);
        pc.load_cycles = static_cast<std::uint64_t>(std::llround(static_cast<double>(pc.tile_steps) * exposed +
                                                                 static_cast<double>(pc.drain_steps) *
                                                                     effective_access_time(p, cache)));
    }
    pc.compute_cycles = pc.tile_steps * (3 * cfg.t - 2);
    return pc;
}

} // namespace pcasim
