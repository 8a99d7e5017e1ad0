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

// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. Usage: acceptance [DIGITS_CSV]

#include "cli.hpp"

#include <pcasim/pcasim.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace pcasim;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

HierarchyConfig caches_for(const EngineConfig& e)
{
    HierarchyConfig h;
    h.parallelism = e.s;
    return h;
}

// 1. Block-streaming illustration at full size.
Verdict illustration()
{
    const auto t0 = Clock::now();
    EngineConfig e;
    e.t = 4;
    e.s = 8;
    e.record_trace = false;
    const Matrix<double> x = synthetic::uncorrelated(1000, 1024, 11);
    CacheHierarchy<double> h(caches_for(e), 0.0);
    const auto r = run_matmul(transpose_view(x), x, e, h, Mode::Covariance, RealDomain{});
    const double secs = seconds_since(t0);

    // Spot-check a handful of entries against a plain dot product.
    double worst = 0.0;
    for (std::size_t k = 0; k < 64; ++k) {
        const std::size_t i = (k * 131) % 1024, j = (k * 977 + 5) % 1024;
        double ref = 0.0, scale = 0.0;
        for (std::size_t m = 0; m < 1000; ++m) {
            ref += x(m, i) * x(m, j);
            scale += std::fabs(x(m, i) * x(m, j));
        }
        worst = std::max(worst, std::fabs(r.product(i, j) - ref) / scale);
    }
    const bool shape = r.row_blocks == 256 && r.column_blocks == 256 && r.tiles_per_block == 250 && r.passes == 8192;
    return {shape && worst < 1e-12 && secs <= 60.0,
            "row_blocks=" + std::to_string(r.row_blocks) + " column_blocks=" + std::to_string(r.column_blocks) +
                " tiles/block=" + std::to_string(r.tiles_per_block) + " passes=" + std::to_string(r.passes) +
                " max_rel_err=" + fmt(worst) + " time=" + fmt(secs) + "s"};
}

// 2. Random engine products against the oracle, bit for bit.
Verdict random_matmuls()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> dim(1, 48);
    const std::size_t ts[] = {2, 4, 8}, ss[] = {1, 2, 4, 8};
    std::size_t exact = 0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
        EngineConfig e;
        e.t = ts[rng() % 3];
        e.s = ss[rng() % 4];
        e.record_trace = false;
        const Matrix<double> a = synthetic::dyadic(m, k, 1000 + i);
        const Matrix<double> b = synthetic::dyadic(k, n, 5000 + i);
        CacheHierarchy<double> h(caches_for(e), 0.0);
        const auto r = run_matmul(a, b, e, h, Mode::Covariance, RealDomain{});
        if (r.product == oracle::oracle_matmul(a, b)) ++exact;
    }
    const double secs = seconds_since(t0);
    return {exact == 200 && secs <= 30.0, std::to_string(exact) + "/200 bit-exact time=" + fmt(secs) + "s"};
}

// Largest off-diagonal magnitude over both triangles, ties to the smallest (p, q).
std::pair<std::size_t, std::size_t> brute_force_pivot(const Matrix<double>& c)
{
    const std::size_t n = c.rows();
    double best = -1.0;
    std::pair<std::size_t, std::size_t> at{0, 1};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double v = std::fabs(c(i, j));
            const std::pair pq{std::min(i, j), std::max(i, j)};
            if (v > best || (v == best && pq < at)) {
                best = v;
                at = pq;
            }
        }
    return at;
}

// 3. The DLE, fed by the engine's drained tiles, picks the brute-force pivot
// before every rotation of one full sweep.
Verdict dle_pivots()
{
    const auto t0 = Clock::now();
    const std::size_t ns[] = {8, 16, 32}, ts[] = {2, 4}, ss[] = {1, 2, 4};
    const RealDomain dom;
    std::size_t checked = 0, agreed = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        const std::size_t n = ns[i % 3];
        EngineConfig e;
        e.t = ts[(i / 3) % 2];
        e.s = ss[(i / 6) % 3];
        e.record_trace = false;
        MatMulEngine<RealDomain> engine(e, dom);
        Matrix<double> c = synthetic::random_symmetric(n, 300 + i);

        DataLookupEngine<RealDomain> dle(n, dom);
        Tile<double> scratch;
        stream_into_dle(dle, c, e, scratch);
        for (std::size_t rot = 0; rot < n * (n - 1) / 2; ++rot) {
            const PivotRecord<double> pv = dle.pivot();
            ++checked;
            const auto want = brute_force_pivot(c);
            // C' is symmetric only up to rounding; the pivot magnitude is the larger copy.
            const double mag = std::max(std::fabs(c(want.first, want.second)), std::fabs(c(want.second, want.first)));
            if (pv.p == want.first && pv.q == want.second && std::fabs(pv.c_pq) == mag) ++agreed;

            const RotationAngles<double> ang = compute_rotation(pv, dom);
            if (ang.skipped) break;
            const GivensEntries<double> g = annihilating_entries(pv.p, pv.q, ang, dom);
            Matrix<double> r = Matrix<double>::identity(n, 0.0, 1.0);
            r(g.p, g.p) = g.r_pp;
            r(g.p, g.q) = g.r_pq;
            r(g.q, g.p) = g.r_qp;
            r(g.q, g.q) = g.r_qq;

            CacheHierarchy<double> h(caches_for(e), 0.0);
            const Matrix<double> m = engine.run_matmul(transpose_view(r), c, h, Mode::Rotation).product;
            dle.reset(n);
            c = engine
                    .run_matmul(m, r, h, Mode::Rotation,
                                [&](const Tile<double>& tl, std::size_t acc, std::size_t rb) {
                                    dle.observe_tile(tl, acc, rb);
                                })
                    .product;
        }
    }
    const double secs = seconds_since(t0);
    return {agreed == checked && secs <= 60.0,
            std::to_string(agreed) + "/" + std::to_string(checked) + " rotations agree time=" + fmt(secs) + "s"};
}

// First sweep whose relative off-diagonal norm is below `target`, or 0.
std::size_t sweeps_to(const JacobiResult<double>& r, double target)
{
    for (const auto& s : r.trace)
        if (s.sweep > 0 && s.e_off_relative < target) return s.sweep;
    return 0;
}

JacobiResult<double> float_jacobi(const Matrix<double>& c, PivotStrategy ps, std::size_t budget, bool fast_path)
{
    EngineConfig e;
    e.givens_fast_path = fast_path;
    e.record_trace = false;
    MatMulEngine<RealDomain> engine(e, RealDomain{});
    CacheHierarchy<double> h(caches_for(e), 0.0);
    JacobiConfig j;
    j.sweep_budget = budget;
    j.pivot_strategy = ps;
    return jacobi_eigendecomposition(c, j, engine, h);
}

// 4. Convergence on the digits covariance and a random N = 64 matrix.
Verdict convergence_64(const std::string& digits_path)
{
    std::vector<std::pair<std::string, Matrix<double>>> inputs;
    std::string missing;
    if (!digits_path.empty() && fs::exists(digits_path)) {
        const Matrix<double> y = standardize(csv::read_file(digits_path).data).y;
        EngineConfig e;
        e.record_trace = false;
        CacheHierarchy<double> h(caches_for(e), 0.0);
        inputs.emplace_back("digits", run_matmul(transpose_view(y), y, e, h, Mode::Covariance, RealDomain{}).product);
    } else {
        missing = " digits=MISSING";
    }
    inputs.emplace_back("random64", synthetic::random_symmetric(64, 64));

    bool ok = missing.empty();
    std::string detail;
    for (const auto& [name, c] : inputs)
        for (PivotStrategy ps : {PivotStrategy::MaxPivot, PivotStrategy::CyclicRowwise}) {
            const auto r = float_jacobi(c, ps, 20, true);
            const std::size_t k = sweeps_to(r, 1e-10);
            ok = ok && k >= 1 && k <= 15;
            detail += " " + name + "/" + to_string(ps) + "=" + (k ? std::to_string(k) : std::string("none"));
        }
    return {ok, "sweeps to 1e-10:" + detail + missing};
}

// 5. Wilkinson W+_21 on the full engine path.
Verdict wilkinson()
{
    const auto r = float_jacobi(synthetic::wilkinson(21), PivotStrategy::MaxPivot, 50, false);
    const std::size_t k = sweeps_to(r, 1e-8);
    return {k >= 1 && k <= 50, "sweeps to 1e-8: " + (k ? std::to_string(k) : std::string("none"))};
}

double orthogonality_error(const Matrix<double>& v)
{
    const std::size_t n = v.rows();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += v(k, i) * v(k, j);
            worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
        }
    return worst;
}

double frobenius(const Matrix<double>& c)
{
    double s = 0.0;
    for (double v : c.data()) s += v * v;
    return std::sqrt(s);
}

// 6. Eigenvalue accuracy and orthogonality on both datapaths. The fixed path is
// gated with round-to-nearest products: truncation toward zero shrinks every
// rotated entry, and that bias alone breaks the orthogonality bound from N=16 up.
Verdict eigen_accuracy()
{
    double float_worst = 0.0, float_orth = 0.0, fixed_worst = 0.0, fixed_orth = 0.0, trunc_orth = 0.0;
    for (std::size_t n : {8, 16, 32, 64}) {
        const Matrix<double> c = synthetic::random_symmetric(n, 600 + n);
        const auto ref = oracle::oracle_jacobi(c);
        double scale = 0.0;
        for (double l : ref.eigenvalues) scale = std::max(scale, std::fabs(l));

        const auto r = float_jacobi(c, PivotStrategy::MaxPivot, 20, n == 64);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::fabs(r.eigenvalues[i] - ref.eigenvalues[i]));
        float_worst = std::max(float_worst, err / scale);
        float_orth = std::max(float_orth, orthogonality_error(r.eigenvectors));

        if (n > 32) continue;
        for (Rounding rounding : {Rounding::Nearest, Rounding::TowardZero}) {
            const FixedDomain dom(make_qformat(16, 16), 16, rounding);
            EngineConfig e;
            e.record_trace = false;
            MatMulEngine<FixedDomain> engine(e, dom);
            CacheHierarchy<Fixed> h(caches_for(e), dom.zero());
            JacobiConfig j;
            j.sweep_budget = 20;
            const auto fr = jacobi_eigendecomposition(to_domain(c, dom), j, engine, h);
            double ferr = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                ferr = std::max(ferr, std::fabs(fr.eigenvalues[i] - ref.eigenvalues[i]));
            const double orth = orthogonality_error(to_real(fr.eigenvectors, dom));
            if (rounding == Rounding::Nearest) {
                fixed_worst = std::max(fixed_worst, ferr / frobenius(c));
                fixed_orth = std::max(fixed_orth, orth);
            } else {
                trunc_orth = std::max(trunc_orth, orth);
            }
        }
    }
    const bool ok = float_worst <= 1e-9 && float_orth <= 1e-8 && fixed_worst <= std::ldexp(1.0, -12) &&
         fixed_orth <= std::ldexp(1.0, -10);
    return {ok, "float rel=" + fmt(float_worst) + " orth=" + fmt(float_orth) + "; fixed (nearest) err/|C|_F=" +
                    fmt(fixed_worst) + " orth=" + fmt(fixed_orth) + "; truncating products orth=" + fmt(trunc_orth) +
                    " (reported, not gated)"};
}

// 7. Write-miss policy discrimination and the EAT formula.
Verdict cache_policies()
{
    std::vector<std::string> failed;
    auto check = [&](bool c, const char* what) {
        if (!c) failed.emplace_back(what);
    };
    const Tile<double> tile(2, 1.0);
    auto fresh = [&](std::size_t rows) {
        HierarchyConfig cfg;
        cfg.lhs.rows = rows;
        CacheHierarchy<double> h(cfg, 0.0);
        h.allocate_region(256, 2);
        return h;
    };
    {
        auto h = fresh(64);
        Tile<double> out;
        check(h.read_tile(CacheSide::lhs(), 7, out) == 10, "cold miss costs 10");
        check(h.read_tile(CacheSide::lhs(), 7, out) == 1, "re-read hits");
        h.reset_stats();
        for (int i = 0; i < 4; ++i) h.read_tile(CacheSide::lhs(), i % 2 ? 3 : 67, out);
        check(h.lhs_cache().stats().misses == 4, "conflicting addresses thrash");
    }
    {
        auto h = fresh(64);
        Tile<double> out;
        h.set_mode(Mode::Covariance);
        h.write_tile(CacheSide::lhs(), 9, tile);
        check(h.read_tile(CacheSide::lhs(), 9, out) == 10, "write-around does not allocate");
        h.set_mode(Mode::Rotation);
        h.write_tile(CacheSide::lhs(), 12, tile);
        check(h.read_tile(CacheSide::lhs(), 12, out) == 1, "write-allocate-no-fetch allocates");
        check(out.values == tile.values, "allocated line holds the written tile");
    }
    {
        // Output stream written once and never re-read.
        auto a = fresh(256), b = fresh(256);
        a.set_mode(Mode::Covariance);
        b.set_mode(Mode::Rotation);
        for (std::uint64_t addr = 0; addr < 128; ++addr) {
            a.write_tile(CacheSide::lhs(), addr, tile);
            b.write_tile(CacheSide::lhs(), addr, tile);
        }
        check(a.lhs_cache().stats().allocations < b.lhs_cache().stats().allocations, "fewer allocations");
        bool same = true;
        for (std::uint64_t addr = 0; addr < 256; ++addr)
            same = same && a.backing().read(addr).values == b.backing().read(addr).values;
        check(same, "identical backing contents");
    }
    {
        // Rotation-mode SAXPY over 64 tiles: the second sweep hits every time.
        auto h = fresh(128);
        h.set_mode(Mode::Rotation);
        Tile<double> av, bv;
        for (int sweep = 0; sweep < 2; ++sweep) {
            if (sweep == 1) h.reset_stats();
            for (std::uint64_t j = 0; j < 64; ++j) {
                h.read_tile(CacheSide::lhs(), j, av);
                h.read_tile(CacheSide::rhs(0), 128 + j, bv);
                for (std::size_t k = 0; k < av.values.size(); ++k) av.values[k] += bv.values[k];
                h.write_tile(CacheSide::lhs(), j, av);
            }
        }
        check(h.lhs_cache().stats().hit_rate() == 1.0, "SAXPY second sweep 100% hits");
        check(h.coherent(), "coherent after write-through");
    }
    const double eat = effective_access_time(0.9, CacheConfig{});
    check(std::fabs(eat - 1.9) < 1e-12, "EAT(0.9) = 1.9");

    std::string detail = "EAT(0.9,10)=" + fmt(eat);
    for (const auto& f : failed) detail += "; failed: " + f;
    return {failed.empty(), detail};
}

// 8. Design-space sweep on a simulated 64 x 64 covariance.
Verdict dse()
{
    const Matrix<double> x = synthetic::uncorrelated(64, 64, 8);
    const auto d = dse_sweep(0, 0, {2, 4, 8}, {1, 2, 4, 8}, PerfModelConfig{}, &x);
    bool all_sim = d.rows.size() == 12;
    for (const auto& r : d.rows) all_sim = all_sim && r.simulated;
    const auto& v = d.verdicts;
    return {all_sim && v.nonincreasing_in_s && v.nonincreasing_in_t && v.estimate_matches_simulation,
            std::string("nonincreasing_in_S=") + (v.nonincreasing_in_s ? "yes" : "no") +
                " nonincreasing_in_T=" + (v.nonincreasing_in_t ? "yes" : "no") +
                " estimate(measured p)==simulated=" + (v.estimate_matches_simulation ? "yes" : "no")};
}

// 9. CORDIC accuracy at 16 iterations in Q16.16.
Verdict cordic()
{
    const QFormat q = make_qformat(16, 16);
    const auto cfg = make_cordic_config(16, q);
    const double bound = cordic_angle_bound(16) + 2 * q.ulp();
    const double pyth_bound = std::ldexp(1.0, -(q.fraction_bits - 2));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> coord(-100.0, 100.0);
    std::uniform_real_distribution<double> angle(-std::numbers::pi / 2, std::numbers::pi / 2);

    double atan_worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Fixed y = Fixed::from_real(coord(rng), q);
        Fixed x = Fixed::from_real(coord(rng), q);
        if (x.raw == 0) x.raw = 1;
        const double ref = std::atan(y.to_real() / x.to_real()); // folded into (-pi/2, pi/2)
        atan_worst = std::max(atan_worst, std::fabs(cordic_atan(y, x, cfg).angle.to_real() - ref));
    }
    double sc_worst = 0.0, pyth_worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Fixed th = Fixed::from_real(angle(rng), q);
        const SinCos sc = cordic_sincos(th, cfg);
        const double s = sc.sin.to_real(), c = sc.cos.to_real();
        sc_worst = std::max({sc_worst, std::fabs(s - std::sin(th.to_real())), std::fabs(c - std::cos(th.to_real()))});
        pyth_worst = std::max(pyth_worst, std::fabs(s * s + c * c - 1.0));
    }
    return {atan_worst <= bound && sc_worst <= bound && pyth_worst <= pyth_bound,
            "atan=" + fmt(atan_worst) + " sincos=" + fmt(sc_worst) + " bound=" + fmt(bound) +
                " pythagorean=" + fmt(pyth_worst) + " (<= " + fmt(pyth_bound) + ")"};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 10. Two identical PCA runs write identical bytes.
Verdict determinism()
{
    const fs::path root = fs::temp_directory_path() / ("pcasim_acceptance_" + std::to_string(std::random_device{}()));
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path input = root / "input.csv";
    {
        std::ofstream os(input);
        csv::write(os, synthetic::planted_spike(200, 24, 3, 0.1, 10));
    }

    cli::RunConfig cfg;
    int rc = 0;
    {
        std::ostringstream sink; // the command reports to stdout
        auto* old = std::cout.rdbuf(sink.rdbuf());
        for (const char* sub : {"a", "b"}) {
            cfg.out = (root / sub).string();
            rc |= cli::cmd_pca(input.string(), cfg);
        }
        std::cout.rdbuf(old);
    }

    std::size_t files = 0, same = 0;
    for (const auto& ent : fs::directory_iterator(root / "a")) {
        ++files;
        const fs::path other = root / "b" / ent.path().filename();
        if (fs::exists(other) && slurp(ent.path()) == slurp(other)) ++same;
    }
    std::size_t files_b = 0;
    for ([[maybe_unused]] const auto& ent : fs::directory_iterator(root / "b")) ++files_b;
    fs::remove_all(root);
    return {rc == 0 && files > 0 && same == files && files_b == files,
            std::to_string(same) + "/" + std::to_string(files) + " output files byte-identical"};
}

} // namespace

int main(int argc, char** argv)
{
    const std::string digits = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"illustration 1000x1024, T=4, S=8", illustration},
        {"200 random matmuls bit-exact vs oracle", random_matmuls},
        {"DLE pivot equals brute-force argmax", dle_pivots},
        {"N=64 convergence within 15 sweeps", [&] { return convergence_64(digits); }},
        {"Wilkinson W+21 convergence", wilkinson},
        {"eigenvalue accuracy and orthogonality", eigen_accuracy},
        {"cache write-miss policies and EAT", cache_policies},
        {"DSE monotonicity and exact estimate", dse},
        {"CORDIC accuracy", cordic},
        {"deterministic PCA output", determinism},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << v.detail
                  << std::endl;
    }
    std::cout << (failures ? "FAILED " : "ALL PASSED ") << criteria.size() - failures << "/" << criteria.size()
              << std::endl;
    return failures ? 1 : 0;
}
