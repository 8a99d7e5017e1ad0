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

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace pcasim {

/// One-bit datapath mode driven by the top-level controller.
enum class Mode { Covariance, Rotation };

enum class WriteMissPolicy { WriteAround, WriteAllocateNoFetch };

inline WriteMissPolicy policy_for(Mode m)
{
    return m == Mode::Covariance ? WriteMissPolicy::WriteAround : WriteMissPolicy::WriteAllocateNoFetch;
}

inline const char* to_string(Mode m) { return m == Mode::Covariance ? "covariance" : "rotation"; }
inline const char* to_string(WriteMissPolicy p)
{
    return p == WriteMissPolicy::WriteAround ? "write-around" : "write-allocate-no-fetch";
}

struct CacheConfig {
    std::size_t rows = 64;       // tile-wide lines, power of two
    std::size_t tile_bytes = 0;  // informational: T*T*scalar width
    std::uint32_t dram_penalty = 10;
    std::uint32_t hit_time = 1;

    bool valid() const { return rows >= 1 && (rows & (rows - 1)) == 0 && dram_penalty >= 1 && hit_time >= 1; }
    std::uint64_t miss_latency() const { return static_cast<std::uint64_t>(dram_penalty) * hit_time; }
};

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t writebacks = 0;
    std::uint64_t allocations = 0;

    std::uint64_t reads() const { return hits + misses; }
    double hit_rate() const { return reads() ? static_cast<double>(hits) / static_cast<double>(reads()) : 0.0; }

    friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

/// EAT = p*t_hit + (1-p)*penalty*t_hit.
inline double effective_access_time(double p, const CacheConfig& cfg)
{
    detail::require_input(p >= 0.0 && p <= 1.0, "effective_access_time: hit rate outside [0, 1]");
    const double t = cfg.hit_time;
    return p * t + (1.0 - p) * cfg.dram_penalty * t;
}

inline double effective_access_time(const CacheStats& stats, const CacheConfig& cfg)
{
    detail::require_input(stats.reads() > 0, "effective_access_time: no accesses recorded");
    return effective_access_time(stats.hit_rate(), cfg);
}

/// Simulated DRAM, addressed in whole tiles.
template <class T>
class BackingStore {
public:
    /// Reserves `n` consecutive tile addresses and returns the first.
    std::uint64_t allocate(std::size_t n, const Tile<T>& fill)
    {
        const std::uint64_t base = tiles_.size();
        tiles_.resize(tiles_.size() + n, fill);
        return base;
    }

    std::size_t size() const { return tiles_.size(); }

    const Tile<T>& read(std::uint64_t addr) const
    {
        check(addr);
        return tiles_[addr];
    }

    void write(std::uint64_t addr, const Tile<T>& tile)
    {
        check(addr);
        tiles_[addr] = tile;
    }

private:
    void check(std::uint64_t addr) const
    {
        if (addr >= tiles_.size())
            throw InputError("tile address " + std::to_string(addr) + " outside backing store (size " +
                             std::to_string(tiles_.size()) + ")");
    }

    std::vector<Tile<T>> tiles_;
};

/// Direct-mapped cache whose lines each hold one complete tile.
template <class T>
class TileCache {
public:
    struct Line {
        bool valid = false;
        std::uint64_t tag = 0; // full tile address
        Tile<T> payload;
    };

    explicit TileCache(CacheConfig cfg = {}) : cfg_(cfg), lines_(cfg.rows)
    {
        detail::require_input(cfg.valid(), "CacheConfig: rows must be a power of two >= 1");
    }

    const CacheConfig& config() const { return cfg_; }
    const CacheStats& stats() const { return stats_; }
    const std::vector<Line>& lines() const { return lines_; }
    std::size_t line_index(std::uint64_t addr) const { return static_cast<std::size_t>(addr % cfg_.rows); }

    bool holds(std::uint64_t addr) const
    {
        const Line& l = lines_[line_index(addr)];
        return l.valid && l.tag == addr;
    }

    /// Burst read of a whole tile. Read misses always allocate.
    std::uint64_t read(std::uint64_t addr, const BackingStore<T>& backing, Tile<T>& out)
    {
        Line& l = lines_[line_index(addr)];
        if (l.valid && l.tag == addr) {
            ++stats_.hits;
            out = l.payload;
            return cfg_.hit_time;
        }
        const Tile<T>& src = backing.read(addr);
        ++stats_.misses;
        ++stats_.allocations;
        l.valid = true;
        l.tag = addr;
        l.payload = src;
        out = src;
        return cfg_.miss_latency();
    }

    /// Write-through on hit; the miss path depends on `policy`. Returns the
    /// latency: hit_time when the tile ends up cache resident, otherwise the
    /// DRAM penalty.
    std::uint64_t write(std::uint64_t addr, const Tile<T>& tile, WriteMissPolicy policy, BackingStore<T>& backing)
    {
        backing.write(addr, tile);
        ++stats_.writebacks;
        Line& l = lines_[line_index(addr)];
        if (l.valid && l.tag == addr) {
            l.payload = tile;
            return cfg_.hit_time;
        }
        if (policy == WriteMissPolicy::WriteAround) return cfg_.miss_latency();
        l.valid = true;
        l.tag = addr;
        l.payload = tile;
        ++stats_.allocations;
        return cfg_.hit_time;
    }

    /// Reset-time load: keeps any resident copy coherent, touches no stats.
    void refresh(std::uint64_t addr, const Tile<T>& tile)
    {
        Line& l = lines_[line_index(addr)];
        if (l.valid && l.tag == addr) l.payload = tile;
    }

    void reset_stats() { stats_ = {}; }

private:
    CacheConfig cfg_;
    std::vector<Line> lines_;
    CacheStats stats_;
};

/// Which operand cache an access goes through.
struct CacheSide {
    enum Kind { Lhs, Rhs } kind = Lhs;
    std::size_t index = 0; // private cache index for Rhs

    static CacheSide lhs() { return {Lhs, 0}; }
    static CacheSide rhs(std::size_t s) { return {Rhs, s}; }
};

struct HierarchyConfig {
    std::size_t parallelism = 1; // S private RHS caches
    CacheConfig lhs{256, 0, 10, 1};
    CacheConfig rhs{64, 0, 10, 1};
};

/// One shared LHS cache plus S private RHS caches over a tile-addressed
/// backing store. The mode selects the write-miss policy of every cache.
template <class T>
class CacheHierarchy {
public:
    CacheHierarchy(HierarchyConfig cfg, T zero) : cfg_(cfg), lhs_(cfg.lhs), zero_(zero)
    {
        detail::require_input(cfg.parallelism >= 1, "CacheHierarchy: parallelism must be >= 1");
        rhs_.reserve(cfg.parallelism);
        for (std::size_t s = 0; s < cfg.parallelism; ++s) rhs_.emplace_back(cfg.rhs);
    }

    const HierarchyConfig& config() const { return cfg_; }
    std::size_t parallelism() const { return rhs_.size(); }
    Mode mode() const { return mode_; }
    WriteMissPolicy policy() const { return policy_for(mode_); }
    void set_mode(Mode m) { mode_ = m; }

    TileCache<T>& cache(CacheSide side) { return side.kind == CacheSide::Lhs ? lhs_ : rhs_.at(side.index); }
    const TileCache<T>& cache(CacheSide side) const
    {
        return side.kind == CacheSide::Lhs ? lhs_ : rhs_.at(side.index);
    }
    const TileCache<T>& lhs_cache() const { return lhs_; }
    const TileCache<T>& rhs_cache(std::size_t s) const { return rhs_.at(s); }

    BackingStore<T>& backing() { return backing_; }
    const BackingStore<T>& backing() const { return backing_; }

    /// Reserves a region of `n` tiles of dimension t, zero filled.
    std::uint64_t allocate_region(std::size_t n, std::size_t t) { return backing_.allocate(n, Tile<T>(t, zero_)); }

    std::uint64_t read_tile(CacheSide side, std::uint64_t addr, Tile<T>& out)
    {
        return cache(side).read(addr, backing_, out);
    }

    std::pair<Tile<T>, std::uint64_t> read_tile(CacheSide side, std::uint64_t addr)
    {
        Tile<T> out;
        const std::uint64_t lat = read_tile(side, addr, out);
        return {std::move(out), lat};
    }

    /// Write through `side`. Other caches holding the tag are updated in
    /// place (snooped), so no stale copy survives the write.
    std::uint64_t write_tile(CacheSide side, std::uint64_t addr, const Tile<T>& tile)
    {
        const std::uint64_t lat = cache(side).write(addr, tile, policy(), backing_);
        if (side.kind != CacheSide::Lhs) lhs_.refresh(addr, tile);
        for (std::size_t s = 0; s < rhs_.size(); ++s)
            if (side.kind == CacheSide::Lhs || s != side.index) rhs_[s].refresh(addr, tile);
        return lat;
    }

    /// Reset-time placement of a tile (offline layout load); not costed.
    void preload(std::uint64_t addr, const Tile<T>& tile)
    {
        backing_.write(addr, tile);
        lhs_.refresh(addr, tile);
        for (auto& c : rhs_) c.refresh(addr, tile);
    }

    void preload(std::uint64_t base, const TiledMatrix<T>& tm)
    {
        for (std::size_t i = 0; i < tm.tiles.size(); ++i) preload(base + i, tm.tiles[i]);
    }

    /// True when every valid line equals the backing store at its tag.
    bool coherent() const
    {
        auto ok = [&](const TileCache<T>& c) {
            for (const auto& l : c.lines())
                if (l.valid && !(l.payload.values == backing_.read(l.tag).values)) return false;
            return true;
        };
        if (!ok(lhs_)) return false;
        for (const auto& c : rhs_)
            if (!ok(c)) return false;
        return true;
    }

    void reset_stats()
    {
        lhs_.reset_stats();
        for (auto& c : rhs_) c.reset_stats();
    }

    /// Stats rows: cache_id,mode,hits,misses,allocations,writebacks,measured_p,EAT
    void write_stats_csv(std::ostream& os, bool header = true) const
    {
        if (header) os << "cache_id,mode,hits,misses,allocations,writebacks,measured_p,EAT\n";
        auto row = [&](const std::string& id, const TileCache<T>& c) {
            const CacheStats& st = c.stats();
            const double p = st.hit_rate();
            os << id << ',' << to_string(mode_) << ',' << st.hits << ',' << st.misses << ',' << st.allocations << ','
               << st.writebacks << ',' << p << ',';
            if (st.reads() > 0)
                os << effective_access_time(st, c.config());
            else
                os << "nan";
            os << '\n';
        };
        row("lhs", lhs_);
        for (std::size_t s = 0; s < rhs_.size(); ++s) row("rhs" + std::to_string(s), rhs_[s]);
    }

private:
    HierarchyConfig cfg_;
    TileCache<T> lhs_;
    std::vector<TileCache<T>> rhs_;
    BackingStore<T> backing_;
    T zero_;
    Mode mode_ = Mode::Covariance;
};

} // namespace pcasim
