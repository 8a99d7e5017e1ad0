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
#include "jacobi.hpp"
#include "matrix.hpp"
#include "memory.hpp"
#include "numerics.hpp"
#include "perf.hpp"
#include "scheduler.hpp"

#include <cmath>
#include <cstddef>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace pcasim {

struct StandardizationParams {
    std::vector<double> mu;
    std::vector<double> sigma;            // sample standard deviation
    std::vector<bool> zero_variance;      // columns emitted as zeros

    bool any_zero_variance() const
    {
        for (bool z : zero_variance)
            if (z) return true;
        return false;
    }
};

struct Standardized {
    Matrix<double> y;
    StandardizationParams params;
};

/// y_ij = (x_ij - mu_j) / sigma_j. Host-side preprocessing, outside the cycle model.
inline Standardized standardize(const Matrix<double>& x)
{
    detail::require_input(x.rows() >= 2, "standardize: need at least 2 rows");
    const std::size_t m = x.rows(), n = x.cols();
    Standardized s;
    s.y = Matrix<double>(m, n, 0.0);
    s.params.mu.assign(n, 0.0);
    s.params.sigma.assign(n, 0.0);
    s.params.zero_variance.assign(n, false);
    for (std::size_t j = 0; j < n; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += x(i, j);
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(m - 1));
        s.params.mu[j] = mean;
        s.params.sigma[j] = sd;
        // Anything this close to constant is rounding noise, not signal.
        if (!(sd > 1e-12 * std::max(1.0, std::fabs(mean)))) {
            s.params.zero_variance[j] = true;
            continue;
        }
        for (std::size_t i = 0; i < m; ++i) s.y(i, j) = (x(i, j) - mean) / sd;
    }
    return s;
}

enum class SelectionKind { EvcrFloor, CvcrTarget, FixedK };

struct SelectionCriterion {
    SelectionKind kind = SelectionKind::CvcrTarget;
    double tau = 0.95;
    std::size_t k = 0;

    static SelectionCriterion evcr(double tau) { return {SelectionKind::EvcrFloor, tau, 0}; }
    static SelectionCriterion cvcr(double tau) { return {SelectionKind::CvcrTarget, tau, 0}; }
    static SelectionCriterion fixed(std::size_t k) { return {SelectionKind::FixedK, 0.0, k}; }

    /// "evcr:TAU", "cvcr:TAU" or "k:N".
    static SelectionCriterion parse(const std::string& s)
    {
        const auto colon = s.find(':');
        detail::require_input(colon != std::string::npos, "--select: expected evcr:TAU, cvcr:TAU or k:N, got '" + s + "'");
        const std::string kind = s.substr(0, colon), val = s.substr(colon + 1);
        try {
            std::size_t used = 0;
            if (kind == "k") {
                const long long k = std::stoll(val, &used);
                detail::require_input(used == val.size() && k >= 1, "--select: k must be a positive integer");
                return fixed(static_cast<std::size_t>(k));
            }
            const double tau = std::stod(val, &used);
            detail::require_input(used == val.size() && tau > 0.0 && tau <= 1.0, "--select: tau must be in (0, 1]");
            if (kind == "evcr") return evcr(tau);
            if (kind == "cvcr") return cvcr(tau);
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const InputError*>(&e)) throw;
            throw InputError("--select: cannot parse '" + s + "'");
        }
        throw InputError("--select: unknown criterion '" + kind + "'");
    }

    std::string to_string() const
    {
        std::ostringstream os;
        switch (kind) {
        case SelectionKind::EvcrFloor: os << "evcr:" << tau; break;
        case SelectionKind::CvcrTarget: os << "cvcr:" << tau; break;
        case SelectionKind::FixedK: os << "k:" << k; break;
        }
        return os.str();
    }
};

struct ComponentSelection {
    std::vector<double> eigenvalues; // clamped at zero
    std::vector<double> evcr;
    std::vector<double> cvcr;
    std::size_t k = 0;
    SelectionCriterion criterion;
};

/// EVCR_i = l_i / sum(l), CVCR_k = sum_{i<=k} l_i / sum(l); k is the
/// smallest count satisfying the criterion. Eigenvalues within `tolerance`
/// (relative to the largest magnitude) below zero are clamped to zero.
inline ComponentSelection select_components(const std::vector<double>& eigenvalues, const SelectionCriterion& crit,
                                            double tolerance = 1e-9)
{
    detail::require_input(!eigenvalues.empty(), "select_components: no eigenvalues");
    double scale = 0.0;
    for (double l : eigenvalues) scale = std::max(scale, std::fabs(l));
    ComponentSelection s;
    s.criterion = crit;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
        const double l = eigenvalues[i];
        detail::require_input(!std::isnan(l), "select_components: NaN eigenvalue");
        detail::require_input(l >= -tolerance * std::max(scale, 1.0),
                              "select_components: eigenvalue " + std::to_string(i) + " is negative beyond tolerance");
        if (i > 0) detail::require_input(l <= eigenvalues[i - 1], "select_components: eigenvalues must be sorted descending");
        s.eigenvalues.push_back(std::max(l, 0.0));
    }
    double total = 0.0;
    for (double l : s.eigenvalues) total += l;
    detail::require_input(total > 0.0, "select_components: total variance must be positive");

    const std::size_t n = s.eigenvalues.size();
    double run = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        run += s.eigenvalues[i];
        s.evcr.push_back(s.eigenvalues[i] / total);
        s.cvcr.push_back(run / total);
    }
    s.cvcr.back() = 1.0; // exact by definition; removes summation residue

    constexpr double slack = 1e-12;
    switch (crit.kind) {
    case SelectionKind::FixedK:
        detail::require_input(crit.k >= 1 && crit.k <= n, "select_components: k must be in [1, N]");
        s.k = crit.k;
        break;
    case SelectionKind::CvcrTarget:
        s.k = n;
        for (std::size_t i = 0; i < n; ++i)
            if (s.cvcr[i] >= crit.tau - slack) {
                s.k = i + 1;
                break;
            }
        break;
    case SelectionKind::EvcrFloor:
        s.k = 0;
        while (s.k < n && s.evcr[s.k] >= crit.tau - slack) ++s.k;
        s.k = std::max<std::size_t>(s.k, 1);
        break;
    }
    return s;
}

template <class T>
struct Projection {
    Matrix<T> o;
    PhaseCounters counters;
};

/// O = X V[:, :k] on the engine.
template <class Domain>
Projection<typename Domain::value_type> project(MatMulEngine<Domain>& engine, CacheHierarchy<typename Domain::value_type>& h,
                                                const Matrix<typename Domain::value_type>& x,
                                                const Matrix<typename Domain::value_type>& v, std::size_t k)
{
    detail::require_input(k >= 1, "project: k must be >= 1");
    detail::require_input(v.rows() == x.cols(), "project: v.rows != x.cols");
    detail::require_input(k <= v.cols(), "project: k exceeds the number of eigenvectors");
    Matrix<typename Domain::value_type> vk(v.rows(), k);
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) vk(i, j) = v(i, j);
    auto r = engine.run_matmul(x, vk, h, Mode::Covariance);
    return {std::move(r.product), r.counters};
}

struct PcaConfig {
    EngineConfig engine;
    HierarchyConfig caches; // parallelism is forced to engine.s
    JacobiConfig jacobi;
    SelectionCriterion criterion;
    bool standardize = true;
    PerfModelConfig perf;
};

template <class T>
struct PcaOutput {
    Standardized standardized;     // y == x when standardization is off
    Matrix<double> covariance;
    JacobiResult<T> jacobi;
    ComponentSelection selection;
    Matrix<double> components;     // N x k
    Matrix<double> projected;      // M x k
    PhaseCounters covariance_counters;
    PhaseCounters projection_counters;
    PerfReport perf;
    std::string cache_stats_csv;   // one block of rows per phase
    std::uint64_t saturations = 0;
};

/// standardize -> C = YᵀY (Covariance mode) -> Jacobi -> select -> project.
template <class Domain>
PcaOutput<typename Domain::value_type> run_pca(const Matrix<double>& x, const PcaConfig& cfg, const Domain& dom)
{
    using T = typename Domain::value_type;
    detail::require_input(x.rows() >= 2 && x.cols() >= 1, "run_pca: need at least 2 samples and 1 feature");
    for (double v : x.data())
        if (!std::isfinite(v)) throw InputError("run_pca: input contains a non-finite value");
    cfg.engine.validate();
    cfg.jacobi.validate();
    cfg.perf.validate();

    PcaOutput<T> out;
    const std::uint64_t sat0 = dom.saturations();
    if (cfg.standardize) {
        out.standardized = standardize(x);
    } else {
        out.standardized.y = x;
        out.standardized.params.mu.assign(x.cols(), 0.0);
        out.standardized.params.sigma.assign(x.cols(), 1.0);
        out.standardized.params.zero_variance.assign(x.cols(), false);
    }

    HierarchyConfig hc = cfg.caches;
    hc.parallelism = cfg.engine.s;
    CacheHierarchy<T> h(hc, dom.zero());
    MatMulEngine<Domain> engine(cfg.engine, dom);
    std::ostringstream stats;
    stats << "phase,";
    {
        std::ostringstream hdr;
        h.write_stats_csv(hdr, true);
        stats << hdr.str().substr(0, hdr.str().find('\n') + 1);
    }
    auto dump = [&](const char* phase) {
        std::ostringstream rows;
        h.write_stats_csv(rows, false);
        std::istringstream in(rows.str());
        for (std::string line; std::getline(in, line);) stats << phase << ',' << line << '\n';
        h.reset_stats();
    };

    const Matrix<T> y = to_domain(out.standardized.y, dom);
    auto cov = engine.run_matmul(transpose_view(y), y, h, Mode::Covariance);
    out.covariance_counters = cov.counters;
    out.covariance = to_real(cov.product, dom);
    dump("covariance");
    if constexpr (Domain::is_fixed)
        if (dom.saturations() - sat0 >= cfg.jacobi.saturation_storm_threshold)
            throw NumericalError("run_pca: covariance saturated " + std::to_string(dom.saturations() - sat0) +
                                 " times; widen the Q format");

    out.jacobi = jacobi_eigendecomposition(cov.product, cfg.jacobi, engine, h);
    dump("jacobi");

    double tol = 1e-9;
    if constexpr (Domain::is_fixed) tol = std::ldexp(1.0, -dom.format.fraction_bits + 4) * x.cols();
    out.selection = select_components(out.jacobi.eigenvalues, cfg.criterion, tol);

    const std::size_t k = out.selection.k;
    auto proj = project(engine, h, y, out.jacobi.eigenvectors, k);
    out.projection_counters = proj.counters;
    out.projected = to_real(proj.o, dom);
    dump("projection");
    const Matrix<double> vr = to_real(out.jacobi.eigenvectors, dom);
    out.components = Matrix<double>(vr.rows(), k, 0.0);
    for (std::size_t i = 0; i < vr.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) out.components(i, j) = vr(i, j);

    out.perf = finish_report({to_phase("covariance", out.covariance_counters), to_phase("jacobi", out.jacobi.counters),
                              to_phase("projection", out.projection_counters)},
                             x.rows(), x.cols(), cfg.engine, cfg.perf);
    out.cache_stats_csv = stats.str();
    out.saturations = dom.saturations() - sat0;
    return out;
}

inline void write_eigenvalues_csv(std::ostream& os, const std::vector<double>& eig)
{
    os << "index,eigenvalue\n";
    for (std::size_t i = 0; i < eig.size(); ++i) os << i << ',' << eig[i] << '\n';
}

inline void write_selection_csv(std::ostream& os, const ComponentSelection& s)
{
    os << "component,eigenvalue,evcr,cvcr,selected\n";
    for (std::size_t i = 0; i < s.evcr.size(); ++i)
        os << (i + 1) << ',' << s.eigenvalues[i] << ',' << s.evcr[i] << ',' << s.cvcr[i] << ',' << (i < s.k ? 1 : 0)
           << '\n';
}

} // namespace pcasim
