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

// Command implementations behind the pcasim executable. Kept in a header so
// the tests can drive the commands without spawning processes.

#pragma once

#include <pcasim/pcasim.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pcasim::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    std::size_t t = 4;
    std::size_t s = 8;
    std::string q_format = "16.16";
    int cordic_iters = 16;
    std::string rounding = "truncate";
    std::size_t sweeps = 50;
    std::string pivot = "max";
    double epsilon = 0.0;
    std::string path = "float";
    std::size_t lhs_cache_rows = 256;
    std::size_t rhs_cache_rows = 64;
    double clock_mhz = 200.0;
    std::optional<double> power_w;
    std::string select = "cvcr:0.95";
    std::string standardize = "on";
    std::uint64_t seed = 1;
    std::string out = "out";
    bool givens_fast_path = false;
    std::string costing = "worst";
    double hit_rate = 0.9;
    std::uint32_t dram_penalty = 10;

    QFormat qformat() const
    {
        const auto dot = q_format.find('.');
        detail::require_input(dot != std::string::npos, "--q-format: expected I.F, got '" + q_format + "'");
        try {
            return make_qformat(std::stoi(q_format.substr(0, dot)), std::stoi(q_format.substr(dot + 1)));
        } catch (const InputError&) {
            throw;
        } catch (const std::exception&) {
            throw InputError("--q-format: cannot parse '" + q_format + "'");
        }
    }

    FixedDomain fixed_domain() const
    {
        return FixedDomain(qformat(), cordic_iters, rounding == "nearest" ? Rounding::Nearest : Rounding::TowardZero);
    }

    EngineConfig engine() const
    {
        EngineConfig e;
        e.t = t;
        e.s = s;
        e.givens_fast_path = givens_fast_path;
        e.threads = configured_threads();
        if (costing == "worst")
            e.costing = CostingMode::WorstCaseSequential;
        else if (costing == "overlapped")
            e.costing = CostingMode::OverlappedOptimistic;
        else
            throw InputError("--costing: expected worst or overlapped");
        e.validate();
        return e;
    }

    JacobiConfig jacobi() const
    {
        JacobiConfig j;
        j.sweep_budget = sweeps;
        j.epsilon = epsilon;
        if (pivot == "max")
            j.pivot_strategy = PivotStrategy::MaxPivot;
        else if (pivot == "cyclic")
            j.pivot_strategy = PivotStrategy::CyclicRowwise;
        else
            throw InputError("--pivot: expected max or cyclic");
        j.assumed_hit_rate = hit_rate;
        j.validate();
        return j;
    }

    PerfModelConfig perf() const
    {
        PerfModelConfig p;
        p.hit_rate_assumed = hit_rate;
        p.dram_penalty = dram_penalty;
        p.clock_hz = clock_mhz * 1e6;
        p.peak_power_w = power_w;
        p.validate();
        return p;
    }

    HierarchyConfig caches() const
    {
        HierarchyConfig h;
        h.parallelism = s;
        h.lhs.rows = lhs_cache_rows;
        h.rhs.rows = rhs_cache_rows;
        h.lhs.dram_penalty = h.rhs.dram_penalty = dram_penalty;
        detail::require_input(h.lhs.valid(), "--lhs-cache-rows must be a power of two");
        detail::require_input(h.rhs.valid(), "--rhs-cache-rows must be a power of two");
        return h;
    }

    bool standardize_on() const
    {
        if (standardize == "on") return true;
        if (standardize == "off") return false;
        throw InputError("--standardize: expected on or off");
    }

    bool fixed() const
    {
        if (path == "fixed") return true;
        if (path == "float") return false;
        throw InputError("--path: expected float or fixed");
    }

    PcaConfig pca() const
    {
        PcaConfig c;
        c.engine = engine();
        c.caches = caches();
        c.jacobi = jacobi();
        c.criterion = SelectionCriterion::parse(select);
        c.standardize = standardize_on();
        c.perf = perf();
        return c;
    }

    /// Everything that can change an output byte.
    void validate() const
    {
        (void)pca();
        (void)fixed();
        detail::require_input(rounding == "truncate" || rounding == "nearest",
                              "--rounding: expected truncate or nearest");
        if (fixed()) (void)fixed_domain();
    }

    nlohmann::ordered_json manifest(const std::string& command) const
    {
        nlohmann::ordered_json j;
        j["tool"] = "pcasim";
        j["version"] = kVersion;
        j["command"] = command;
        j["tile_size"] = t;
        j["parallelism"] = s;
        j["path"] = path;
        j["q_format"] = q_format;
        j["cordic_iters"] = cordic_iters;
        j["rounding"] = rounding;
        j["sweeps"] = sweeps;
        j["pivot"] = pivot;
        j["epsilon"] = epsilon;
        j["givens_fast_path"] = givens_fast_path;
        j["costing"] = costing;
        j["lhs_cache_rows"] = lhs_cache_rows;
        j["rhs_cache_rows"] = rhs_cache_rows;
        j["dram_penalty"] = dram_penalty;
        j["hit_rate_assumed"] = hit_rate;
        j["clock_mhz"] = clock_mhz;
        j["power_w"] = power_w ? nlohmann::ordered_json(*power_w) : nlohmann::ordered_json(nullptr);
        j["select"] = select;
        j["standardize"] = standardize;
        j["seed"] = seed;
        j["compiler"] = __VERSION__;
        j["cxx_standard"] = static_cast<long>(__cplusplus);
        return j;
    }
};

inline void add_engine_options(CLI::App& app, RunConfig& c)
{
    app.add_option("--tile-size", c.t, "Systolic array dimension T")->check(CLI::Range(2, 1024));
    app.add_option("--parallelism", c.s, "Number of systolic arrays S")->check(CLI::Range(1, 1024));
    app.add_option("--lhs-cache-rows", c.lhs_cache_rows, "Shared LHS cache lines (power of two)");
    app.add_option("--rhs-cache-rows", c.rhs_cache_rows, "Lines per private RHS cache (power of two)");
    app.add_option("--costing", c.costing, "worst (sequential) or overlapped (optimistic)");
    app.add_option("--hit-rate", c.hit_rate, "Assumed hit rate for analytical estimates");
    app.add_option("--dram-penalty", c.dram_penalty, "Miss penalty multiplier");
    app.add_option("--clock-mhz", c.clock_mhz, "Clock for wall-time conversion (200 or 434 presets)");
    app.add_option("--power-w", c.power_w, "Peak power in watts, supplied externally");
    app.add_option("--seed", c.seed, "Seed for synthetic data");
    app.add_option("--out", c.out, "Output directory");
}

inline void add_numeric_options(CLI::App& app, RunConfig& c)
{
    app.add_option("--q-format", c.q_format, "Fixed-point format I.F");
    app.add_option("--cordic-iters", c.cordic_iters, "CORDIC iterations");
    app.add_option("--rounding", c.rounding, "fixed-point product rounding")
        ->check(CLI::IsMember({"truncate", "nearest"}));
    app.add_option("--sweeps", c.sweeps, "Jacobi sweep budget");
    app.add_option("--pivot", c.pivot, "max or cyclic");
    app.add_option("--epsilon", c.epsilon, "Early-exit threshold on E_off (0: budget only)");
    app.add_option("--path", c.path, "float or fixed");
    app.add_option("--select", c.select, "evcr:TAU, cvcr:TAU or k:N");
    app.add_option("--standardize", c.standardize, "on or off");
    app.add_flag("--givens-fast-path", c.givens_fast_path, "Sparse rotation update, analytically costed");
}

namespace io {

inline std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write '" + p.string() + "'");
    f.precision(17);
    return f;
}

inline void write_manifest(const fs::path& dir, const nlohmann::ordered_json& j)
{
    auto f = open_out(dir / "manifest.json");
    f << j.dump(2) << '\n';
}

inline fs::path prepare_out(const std::string& out)
{
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + out + "': " + ec.message());
    return dir;
}

} // namespace io

template <class Domain>
int run_pca_with(const csv::Table& input, const RunConfig& cfg, const Domain& dom, const fs::path& dir,
                 nlohmann::ordered_json manifest)
{
    const PcaConfig pc = cfg.pca();
    const auto out = run_pca(input.data, pc, dom);

    auto f = io::open_out(dir / "eigenvalues.csv");
    write_eigenvalues_csv(f, out.jacobi.eigenvalues);
    f = io::open_out(dir / "evcr_cvcr.csv");
    write_selection_csv(f, out.selection);
    f = io::open_out(dir / "projection.csv");
    std::vector<std::string> hdr;
    for (std::size_t j = 0; j < out.selection.k; ++j) hdr.push_back("pc" + std::to_string(j + 1));
    csv::write(f, out.projected, hdr);
    f = io::open_out(dir / "convergence.csv");
    write_convergence_csv(f, out.jacobi.trace);
    f = io::open_out(dir / "cache_stats.csv");
    f << out.cache_stats_csv;
    f = io::open_out(dir / "perf.csv");
    write_perf_csv(f, out.perf);
    f.close();

    manifest["input_rows"] = input.data.rows();
    manifest["input_cols"] = input.data.cols();
    manifest["selected_k"] = out.selection.k;
    manifest["sweeps_executed"] = out.jacobi.sweeps_executed;
    manifest["rotations_executed"] = out.jacobi.rotations_executed;
    manifest["saturations"] = out.saturations;
    std::vector<std::size_t> zero_var;
    for (std::size_t j = 0; j < out.standardized.params.zero_variance.size(); ++j)
        if (out.standardized.params.zero_variance[j]) zero_var.push_back(j);
    manifest["zero_variance_columns"] = zero_var;
    io::write_manifest(dir, manifest);
    if (!zero_var.empty())
        std::cerr << "warning: " << zero_var.size() << " zero-variance column(s) passed through as zeros\n";
    return 0;
}

/// Standardize -> covariance -> Jacobi -> select -> project, with CSV reports.
inline int cmd_pca(const std::string& input, const RunConfig& cfg)
{
    cfg.validate();
    const csv::Table t = csv::read_file(input);
    const fs::path dir = io::prepare_out(cfg.out);
    auto m = cfg.manifest("pca");
    m["input"] = fs::path(input).filename().string();
    if (cfg.fixed()) return run_pca_with(t, cfg, cfg.fixed_domain(), dir, m);
    return run_pca_with(t, cfg, RealDomain{}, dir, m);
}

template <class Domain>
JacobiResult<typename Domain::value_type> convergence_run(const Matrix<double>& x, bool is_matrix, const RunConfig& cfg,
                                                          const Domain& dom)
{
    using T = typename Domain::value_type;
    const EngineConfig ec = cfg.engine();
    CacheHierarchy<T> h(cfg.caches(), dom.zero());
    MatMulEngine<Domain> engine(ec, dom);
    Matrix<T> c;
    if (is_matrix) {
        c = to_domain(x, dom);
    } else {
        const Matrix<double> y = cfg.standardize_on() ? standardize(x).y : x;
        const Matrix<T> yd = to_domain(y, dom);
        c = engine.run_matmul(transpose_view(yd), yd, h, Mode::Covariance).product;
    }
    return jacobi_eigendecomposition(c, cfg.jacobi(), engine, h);
}

/// Per-sweep relative E_off for each dataset, one CSV.
inline int cmd_convergence(const std::vector<std::string>& inputs, bool is_matrix, const RunConfig& cfg)
{
    cfg.validate();
    detail::require_input(!inputs.empty(), "convergence: no inputs");
    const fs::path dir = io::prepare_out(cfg.out);
    std::ostringstream body;
    body.precision(17);
    body << "dataset,sweep,e_off,e_off_relative,max_pivot_magnitude,rotations_so_far\n";
    for (const auto& in : inputs) {
        const csv::Table t = csv::read_file(in);
        const std::string name = fs::path(in).stem().string();
        std::vector<SweepRecord> trace;
        if (cfg.fixed())
            trace = convergence_run(t.data, is_matrix, cfg, cfg.fixed_domain()).trace;
        else
            trace = convergence_run(t.data, is_matrix, cfg, RealDomain{}).trace;
        std::ostringstream rows;
        rows.precision(17);
        write_convergence_csv(rows, trace, false);
        std::istringstream lines(rows.str());
        for (std::string line; std::getline(lines, line);) body << name << ',' << line << '\n';
    }
    auto f = io::open_out(dir / "convergence.csv");
    f << body.str();
    f.close();
    auto m = cfg.manifest("convergence");
    std::vector<std::string> names;
    for (const auto& in : inputs) names.push_back(fs::path(in).filename().string());
    m["inputs"] = names;
    m["inputs_are_matrices"] = is_matrix;
    io::write_manifest(dir, m);
    return 0;
}

inline std::vector<std::size_t> parse_grid(const std::string& s, const char* flag)
{
    std::vector<std::size_t> v;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            const long long x = std::stoll(item, &used);
            detail::require_input(used == item.size() && x > 0, std::string(flag) + ": bad value '" + item + "'");
            v.push_back(static_cast<std::size_t>(x));
        } catch (const InputError&) {
            throw;
        } catch (const std::exception&) {
            throw InputError(std::string(flag) + ": bad value '" + item + "'");
        }
    }
    detail::require_input(!v.empty(), std::string(flag) + ": empty grid");
    return v;
}

/// (T, S) sweep of the covariance phase: simulated when N <= 128,
/// analytical beyond.
inline int cmd_dse(const std::optional<std::string>& input, std::size_t m, std::size_t n, const std::string& t_grid,
                   const std::string& s_grid, const RunConfig& cfg)
{
    const auto ts = parse_grid(t_grid, "--t-grid");
    const auto ss = parse_grid(s_grid, "--s-grid");
    const PerfModelConfig model = cfg.perf();
    Matrix<double> data;
    if (input) {
        data = csv::read_file(*input).data;
        m = data.rows();
        n = data.cols();
    }
    detail::require_input(m >= 1 && n >= 1, "dse: need --input or --rows/--cols");
    const bool simulate = n <= 128;
    if (simulate && !input) data = synthetic::uncorrelated(m, n, cfg.seed);
    const CostingMode costing = cfg.engine().costing;
    const DseResult r = dse_sweep(m, n, ts, ss, model, simulate ? &data : nullptr, costing);

    const fs::path dir = io::prepare_out(cfg.out);
    auto f = io::open_out(dir / "dse.csv");
    write_dse_csv(f, r);
    f.close();
    auto man = cfg.manifest("dse");
    man["input"] = input ? fs::path(*input).filename().string() : std::string("synthetic:uncorrelated");
    man["rows"] = m;
    man["cols"] = n;
    man["t_grid"] = ts;
    man["s_grid"] = ss;
    man["simulated"] = simulate;
    man["nonincreasing_in_s"] = r.verdicts.nonincreasing_in_s;
    man["nonincreasing_in_t"] = r.verdicts.nonincreasing_in_t;
    man["estimate_matches_simulation"] = r.verdicts.estimate_matches_simulation;
    io::write_manifest(dir, man);
    return 0;
}

/// Engine product of two CSV matrices (or the Gram matrix AᵀA of one).
inline int cmd_matmul(const std::string& a_path, const std::optional<std::string>& b_path, bool verify,
                      const RunConfig& cfg)
{
    const EngineConfig ec = cfg.engine();
    const Matrix<double> a = csv::read_file(a_path).data;
    const bool gram = !b_path;
    const Matrix<double> b = gram ? a : csv::read_file(*b_path).data;
    const Matrix<double> lhs = gram ? transpose_view(a) : a;
    detail::require_input(lhs.cols() == b.rows(), "matmul: lhs has " + std::to_string(lhs.cols()) +
                                                               " columns but rhs has " + std::to_string(b.rows()) + " rows");
    CacheHierarchy<double> h(cfg.caches(), 0.0);
    MatMulEngine<RealDomain> engine(ec, RealDomain{});
    const auto r = engine.run_matmul(lhs, b, h, Mode::Covariance);

    const fs::path dir = io::prepare_out(cfg.out);
    auto f = io::open_out(dir / "product.csv");
    csv::write(f, r.product);
    f = io::open_out(dir / "trace.csv");
    write_pass_trace_csv(f, r.trace);
    f = io::open_out(dir / "cache_stats.csv");
    h.write_stats_csv(f);
    f.close();

    auto man = cfg.manifest("matmul");
    man["a"] = fs::path(a_path).filename().string();
    man["b"] = gram ? std::string("gram(a)") : fs::path(*b_path).filename().string();
    man["row_blocks"] = r.row_blocks;
    man["column_blocks"] = r.column_blocks;
    man["tiles_per_block"] = r.tiles_per_block;
    man["passes"] = r.passes;
    man["cycles_total"] = r.counters.total();
    man["cycles_load"] = r.counters.load_cycles;
    man["cycles_compute"] = r.counters.compute_cycles;
    if (verify) {
        const Matrix<double> ref = oracle::oracle_matmul(lhs, b);
        double worst = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < ref.data().size(); ++i) {
            worst = std::max(worst, std::fabs(ref.data()[i] - r.product.data()[i]));
            scale = std::max(scale, std::fabs(ref.data()[i]));
        }
        const bool ok = worst <= 1e-12 * std::max(scale, 1.0);
        man["oracle_max_abs_diff"] = worst;
        man["oracle_match"] = ok;
        io::write_manifest(dir, man);
        if (!ok) {
            std::cerr << "error: engine product differs from oracle by " << worst << '\n';
            return 2;
        }
        return 0;
    }
    io::write_manifest(dir, man);
    return 0;
}

inline int cmd_generate(const std::string& kind, std::size_t rows, std::size_t cols, std::size_t rank, double noise,
                        std::uint64_t seed, const std::string& out_file)
{
    const Matrix<double> x = synthetic::generate(kind, rows, cols, seed, rank, noise);
    std::ofstream f(out_file, std::ios::binary);
    if (!f) throw InputError("cannot write '" + out_file + "'");
    csv::write(f, x);
    return 0;
}

/// Parses argv and dispatches. Exit codes: 0 ok, 1 input error,
/// 2 numerical failure, 3 internal error.
inline int run(int argc, const char* const* argv)
{
    CLI::App app{"Cycle-approximate PCA accelerator simulator"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    RunConfig cfg;

    auto* pca = app.add_subcommand("pca", "End-to-end PCA of a CSV dataset");
    std::string pca_input;
    pca->add_option("input", pca_input, "Input CSV (rows = samples)")->required();
    add_engine_options(*pca, cfg);
    add_numeric_options(*pca, cfg);

    auto* conv = app.add_subcommand("convergence", "Per-sweep E_off traces");
    std::vector<std::string> conv_inputs;
    bool conv_matrix = false;
    conv->add_option("inputs", conv_inputs, "Input CSVs")->required();
    conv->add_flag("--matrix", conv_matrix, "Inputs are symmetric matrices, not datasets");
    add_engine_options(*conv, cfg);
    add_numeric_options(*conv, cfg);

    auto* dse = app.add_subcommand("dse", "Design-space sweep over T and S");
    std::optional<std::string> dse_input;
    std::size_t dse_rows = 64, dse_cols = 64;
    std::string t_grid = "2,4,8", s_grid = "1,2,4,8";
    dse->add_option("--input", dse_input, "Dataset CSV (defaults to synthetic data)");
    dse->add_option("--rows", dse_rows, "Samples M when no input is given");
    dse->add_option("--cols", dse_cols, "Features N when no input is given");
    dse->add_option("--t-grid", t_grid, "Comma-separated tile sizes");
    dse->add_option("--s-grid", s_grid, "Comma-separated parallelism values");
    add_engine_options(*dse, cfg);

    auto* mm = app.add_subcommand("matmul", "Engine product A*B (or AᵀA with only --a)");
    std::string a_path;
    std::optional<std::string> b_path;
    bool verify = false;
    mm->add_option("--a", a_path, "Left operand CSV")->required();
    mm->add_option("--b", b_path, "Right operand CSV");
    mm->add_flag("--verify", verify, "Check against the oracle product");
    add_engine_options(*mm, cfg);

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
    std::string kind = "planted", gen_out;
    std::size_t rows = 200, cols = 8, rank = 2;
    double noise = 0.01;
    gen->add_option("--kind", kind, "planted, uncorrelated, symmetric or wilkinson");
    gen->add_option("--rows", rows, "Rows");
    gen->add_option("--cols", cols, "Columns");
    gen->add_option("--rank", rank, "Planted factors");
    gen->add_option("--noise", noise, "Noise standard deviation");
    gen->add_option("--seed", cfg.seed, "Seed");
    gen->add_option("--out", gen_out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*pca) return cmd_pca(pca_input, cfg);
        if (*conv) return cmd_convergence(conv_inputs, conv_matrix, cfg);
        if (*dse) return cmd_dse(dse_input, dse_rows, dse_cols, t_grid, s_grid, cfg);
        if (*mm) return cmd_matmul(a_path, b_path, verify, cfg);
        if (*gen) return cmd_generate(kind, rows, cols, rank, noise, cfg.seed, gen_out);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}

} // namespace pcasim::cli
