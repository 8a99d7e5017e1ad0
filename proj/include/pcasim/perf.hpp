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
#include "scheduler.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pcasim {

inline constexpr double kClock200MHz = 200e6;
inline constexpr double kClock434MHz = 434e6;
inline constexpr double kPowerT4S8 = 1.271;    // W, (T, S) = (4, 8)
inline constexpr double kPowerT16S32 = 16.957; // W, (T, S) = (16, 32)

struct PerfModelConfig {
    double hit_rate_assumed = 0.9;
    std::uint32_t dram_penalty = 10;
    std::uint32_t hit_time = 1;
    double clock_hz = kClock200MHz;
    std::optional<double> peak_power_w; // supplied by the user, never modeled

    void validate() const
    {
        detail::require_input(hit_rate_assumed >= 0.0 && hit_rate_assumed <= 1.0, "perf: hit rate outside [0, 1]");
        detail::require_input(dram_penalty >= 1, "perf: DRAM penalty must be >= 1");
        detail::require_input(clock_hz > 0.0, "perf: clock must be positive");
        detail::require_input(!peak_power_w || *peak_power_w >= 0.0, "perf: power must be nonnegative");
    }

    CacheConfig cache() const
    {
        CacheConfig c;
        c.dram_penalty = dram_penalty;
        c.hit_time = hit_time;
        return c;
    }
};

struct PhaseCycles {
    std::string phase;
    std::uint64_t load = 0;
    std::uint64_t compute = 0;
    std::uint64_t total = 0;
    double hit_rate = 1.0; // measured for simulated phases, assumed for estimates
    bool estimated = false;
};

inline PhaseCycles to_phase(const std::string& name, const PhaseCounters& c)
{
    return {name, c.load_cycles, c.compute_cycles, c.total(), c.measured_p(), c.estimated};
}

struct PerfReport {
    std::vector<PhaseCycles> phases; // covariance, jacobi, projection
    std::uint64_t total_cycles = 0;
    double wall_time_s = 0.0;
    std::optional<double> energy_j;
    // Two ways of counting covariance work, kept side by side:
    // input-tile batches M*N / (S*T^2) and output-block passes.
    std::uint64_t batches = 0;
    std::uint64_t output_block_passes = 0;
};

/// Input-tile batch count M*N / (S*T^2), rounded up.
inline std::uint64_t batch_count(std::size_t m, std::size_t n, const EngineConfig& cfg)
{
    const std::uint64_t denom = static_cast<std::uint64_t>(cfg.s) * cfg.t * cfg.t;
    return (static_cast<std::uint64_t>(m) * n + denom - 1) / denom;
}

/// Output-block passes of the N x N covariance product.
inline std::uint64_t covariance_passes(std::size_t n, const EngineConfig& cfg)
{
    const std::size_t g = ceil_div(n, cfg.t);
    return static_cast<std::uint64_t>(g) * ceil_div(g, cfg.s);
}

inline double energy(const PerfReport& r, const PerfModelConfig& model)
{
    if (!model.peak_power_w) throw InputError("energy: power must be supplied externally");
    return *model.peak_power_w * r.wall_time_s;
}

inline PerfReport finish_report(std::vector<PhaseCycles> phases, std::size_t m, std::size_t n,
                                const EngineConfig& cfg, const PerfModelConfig& model)
{
    model.validate();
    PerfReport r;
    r.phases = std::move(phases);
    for (const auto& p : r.phases) r.total_cycles += p.total;
    r.wall_time_s = static_cast<double>(r.total_cycles) / model.clock_hz;
    if (model.peak_power_w) r.energy_j = energy(r, model);
    r.batches = batch_count(m, n, cfg);
    r.output_block_passes = covariance_passes(n, cfg);
    return r;
}

struct PcaDims {
    std::size_t m = 0;                // samples
    std::size_t n = 0;                // features
    std::size_t k = 0;                // retained components (0: skip projection)
    std::uint64_t rotations = 0;      // Jacobi rotations executed
};

/// Analytical estimate: EAT per access step at the assumed hit rate,
/// 3T-2 per tile product, pass structure from plan_passes.
inline PerfReport estimate_cycles(const PcaDims& d, const EngineConfig& cfg, const PerfModelConfig& model)
{
    cfg.validate();
    model.validate();
    detail::require_input(d.m >= 1 && d.n >= 1, "estimate_cycles: dimensions must be positive");
    const CacheConfig cache = model.cache();
    const double p = model.hit_rate_assumed;
    std::vector<PhaseCycles> phases;
    phases.push_back(to_phase("covariance", estimate_matmul_counters(d.n, d.m, d.n, cfg, cache, p)));
    PhaseCounters jac;
    jac.estimated = true;
    if (d.rotations > 0) {
        const PhaseCounters one = estimate_matmul_counters(d.n, d.n, d.n, cfg, cache, p);
        for (int i = 0; i < 3; ++i) jac += one;
        jac.load_cycles *= d.rotations;
        jac.compute_cycles *= d.rotations;
        jac.passes *= d.rotations;
        jac.tile_steps *= d.rotations;
        jac.drain_steps *= d.rotations;
        jac.fast_steps *= d.rotations;
    }
    auto j = to_phase("jacobi", jac);
    j.hit_rate = p;
    phases.push_back(j);
    if (d.k > 0) phases.push_back(to_phase("projection", estimate_matmul_counters(d.m, d.n, d.k, cfg, cache, p)));
    return finish_report(std::move(phases), d.m, d.n, cfg, model);
}

inline void write_perf_csv(std::ostream& os, const PerfReport& r)
{
    os << "phase,cycles_load,cycles_compute,cycles_total,hit_rate,estimated\n";
    for (const auto& p : r.phases)
        os << p.phase << ',' << p.load << ',' << p.compute << ',' << p.total << ',' << p.hit_rate << ','
           << (p.estimated ? 1 : 0) << '\n';
    os << "total,,," << r.total_cycles << ",,\n";
    os << "# wall_time_s," << r.wall_time_s << '\n';
    os << "# energy_j," << (r.energy_j ? std::to_string(*r.energy_j) : std::string("n/a")) << '\n';
    os << "# batches_MN_over_ST2," << r.batches << '\n';
    os << "# covariance_output_block_passes," << r.output_block_passes << '\n';
}

struct DseRow {
    std::size_t t = 0;
    std::size_t s = 0;
    std::string phase;
    std::uint64_t cycles_load = 0;
    std::uint64_t cycles_compute = 0;
    std::uint64_t cycles_total = 0;
    double wall_time_s = 0.0;
    std::optional<double> energy_j;
    bool simulated = false;
    double measured_p = 1.0;
    std::uint64_t estimate_with_measured_p = 0; // analytical total at measured p (simulated rows)
};

struct DseVerdicts {
    bool nonincreasing_in_s = true;
    bool nonincreasing_in_t = true;
    bool estimate_matches_simulation = true;
};

struct DseResult {
    std::vector<DseRow> rows;
    DseVerdicts verdicts;
};

/// Covariance-phase sweep over (T, S). Simulated on the given data when
/// `data` is set, otherwise analytical for an m x n input.
inline DseResult dse_sweep(std::size_t m, std::size_t n, const std::vector<std::size_t>& t_values,
                           const std::vector<std::size_t>& s_values, const PerfModelConfig& model,
                           const Matrix<double>* data = nullptr, CostingMode costing = CostingMode::WorstCaseSequential)
{
    detail::require_input(!t_values.empty() && !s_values.empty(), "dse_sweep: empty parameter grid");
    model.validate();
    if (data) {
        m = data->rows();
        n = data->cols();
    }
    DseResult out;
    for (std::size_t t : t_values)
        for (std::size_t s : s_values) {
            EngineConfig cfg;
            cfg.t = t;
            cfg.s = s;
            cfg.costing = costing;
            cfg.record_trace = false;
            cfg.validate();
            DseRow row;
            row.t = t;
            row.s = s;
            row.phase = "covariance";
            PhaseCounters c;
            if (data) {
                HierarchyConfig hc;
                hc.parallelism = s;
                hc.lhs.dram_penalty = hc.rhs.dram_penalty = model.dram_penalty;
                hc.lhs.hit_time = hc.rhs.hit_time = model.hit_time;
                CacheHierarchy<double> h(hc, 0.0);
                MatMulEngine<RealDomain> eng(cfg, RealDomain{});
                c = eng.run_matmul(transpose_view(*data), *data, h, Mode::Covariance).counters;
                row.simulated = true;
                row.measured_p = c.measured_p();
                row.estimate_with_measured_p = estimate_matmul_counters(n, m, n, cfg, model.cache(), c.measured_p()).total();
                if (costing == CostingMode::WorstCaseSequential && row.estimate_with_measured_p != c.total())
                    out.verdicts.estimate_matches_simulation = false;
            } else {
                c = estimate_matmul_counters(n, m, n, cfg, model.cache(), model.hit_rate_assumed);
                row.measured_p = model.hit_rate_assumed;
                row.estimate_with_measured_p = c.total();
            }
            row.cycles_load = c.load_cycles;
            row.cycles_compute = c.compute_cycles;
            row.cycles_total = c.total();
            row.wall_time_s = static_cast<double>(row.cycles_total) / model.clock_hz;
            if (model.peak_power_w) row.energy_j = *model.peak_power_w * row.wall_time_s;
            out.rows.push_back(row);
        }

    // Scaling verdicts on divisible points only.
    auto find = [&](std::size_t t, std::size_t s) -> const DseRow* {
        for (const auto& r : out.rows)
            if (r.t == t && r.s == s) return &r;
        return nullptr;
    };
    for (const auto& r : out.rows) {
        const DseRow* s2 = find(r.t, 2 * r.s);
        if (s2 && ceil_div(n, r.t) % (2 * r.s) == 0 && s2->cycles_total > r.cycles_total)
            out.verdicts.nonincreasing_in_s = false;
        const DseRow* t2 = find(2 * r.t, r.s);
        if (t2 && n % (2 * r.t) == 0 && m % (2 * r.t) == 0 && t2->cycles_total > r.cycles_total)
            out.verdicts.nonincreasing_in_t = false;
    }
    return out;
}

inline void write_dse_csv(std::ostream& os, const DseResult& d)
{
    os << "T,S,phase,cycles_load,cycles_compute,cycles_total,wall_time_s,energy_j\n";
    for (const auto& r : d.rows)
        os << r.t << ',' << r.s << ',' << r.phase << ',' << r.cycles_load << ',' << r.cycles_compute << ','
           << r.cycles_total << ',' << r.wall_time_s << ',' << (r.energy_j ? std::to_string(*r.energy_j) : "") << '\n';
}

} // namespace pcasim
