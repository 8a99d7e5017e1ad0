// Copyright 2026 The pcasim Authors
// SPDX-License-Identifier: Apache-2.0

#include <pcasim/oracle.hpp>
#include <pcasim/pca.hpp>
#include <pcasim/synthetic.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace pcasim;

namespace {

PcaConfig small_config(std::size_t t = 4, std::size_t s = 2)
{
    PcaConfig c;
    c.engine.t = t;
    c.engine.s = s;
    c.engine.givens_fast_path = true;
    c.jacobi.sweep_budget = 20;
    return c;
}

// ||V Vᵀ - W Wᵀ||_F for two N x k bases.
double projector_distance(const Matrix<double>& v, const Matrix<double>& w)
{
    const auto pv = oracle::oracle_matmul(v, transpose_view(v));
    const auto pw = oracle::oracle_matmul(w, transpose_view(w));
    double s = 0.0;
    for (std::size_t i = 0; i < pv.data().size(); ++i) s += std::pow(pv.data()[i] - pw.data()[i], 2);
    return std::sqrt(s);
}

} // namespace

TEST(Standardize, SymmetricTriple)
{
    Matrix<double> x(3, 1, std::vector<double>{1, 2, 3});
    const auto s = standardize(x);
    EXPECT_DOUBLE_EQ(s.params.mu[0], 2.0);
    EXPECT_DOUBLE_EQ(s.params.sigma[0], 1.0);
    EXPECT_EQ(s.y, Matrix<double>(3, 1, std::vector<double>{-1, 0, 1}));
}

TEST(Standardize, IdempotentAndColumnStats)
{
    const auto x = synthetic::uncorrelated(100, 8, 2);
    const auto s1 = standardize(x);
    const auto s2 = standardize(s1.y);
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_NEAR(s2.params.mu[j], 0.0, 1e-10);
        EXPECT_NEAR(s2.params.sigma[j], 1.0, 1e-10);
        // Summation oracle.
        double m = 0, ss = 0;
        for (std::size_t i = 0; i < 100; ++i) m += x(i, j);
        m /= 100;
        for (std::size_t i = 0; i < 100; ++i) ss += (x(i, j) - m) * (x(i, j) - m);
        EXPECT_NEAR(s1.params.mu[j], m, 1e-12);
        EXPECT_NEAR(s1.params.sigma[j], std::sqrt(ss / 99), 1e-12);
    }
}

TEST(Standardize, ZeroVarianceAndTooFewRows)
{
    Matrix<double> x(3, 2, std::vector<double>{1, 5, 2, 5, 3, 5});
    const auto s = standardize(x);
    EXPECT_TRUE(s.params.zero_variance[1]);
    EXPECT_TRUE(s.params.any_zero_variance());
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s.y(i, 1), 0.0);
    EXPECT_THROW(standardize(Matrix<double>(1, 2, 1.0)), InputError);
}

TEST(Selection, HandArithmetic)
{
    const auto s = select_components({4, 3, 2, 1}, SelectionCriterion::cvcr(0.7));
    EXPECT_EQ(s.k, 2u);
    const std::vector<double> expect{0.4, 0.7, 0.9, 1.0};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.cvcr[i], expect[i], 1e-15);
    EXPECT_EQ(select_components({7}, SelectionCriterion::cvcr(0.9)).k, 1u);
    const auto u = select_components({1, 1, 1, 1}, SelectionCriterion::fixed(2));
    EXPECT_EQ(u.k, 2u);
    for (double e : u.evcr) EXPECT_DOUBLE_EQ(e, 0.25);
    EXPECT_EQ(select_components({4, 3, 2, 1}, SelectionCriterion::evcr(0.25)).k, 2u);
}

TEST(Selection, InvariantsAndErrors)
{
    const auto s = select_components({5, 2, 1e-3, -1e-12}, SelectionCriterion::cvcr(0.99));
    double sum = 0;
    for (double e : s.evcr) sum += e;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t i = 1; i < s.cvcr.size(); ++i) EXPECT_GE(s.cvcr[i], s.cvcr[i - 1]);
    EXPECT_EQ(s.eigenvalues.back(), 0.0);
    EXPECT_THROW(select_components({0, 0}, SelectionCriterion::cvcr(0.5)), InputError);
    EXPECT_THROW(select_components({1, -1}, SelectionCriterion::cvcr(0.5)), InputError);
    EXPECT_THROW(select_components({1, 1}, SelectionCriterion::fixed(3)), InputError);
}

TEST(Selection, Parse)
{
    EXPECT_EQ(SelectionCriterion::parse("k:3").k, 3u);
    EXPECT_EQ(SelectionCriterion::parse("cvcr:0.95").kind, SelectionKind::CvcrTarget);
    EXPECT_EQ(SelectionCriterion::parse("evcr:0.1").kind, SelectionKind::EvcrFloor);
    EXPECT_THROW(SelectionCriterion::parse("k:0"), InputError);
    EXPECT_THROW(SelectionCriterion::parse("cvcr:abc"), InputError);
    EXPECT_THROW(SelectionCriterion::parse("foo:1"), InputError);
    EXPECT_THROW(SelectionCriterion::parse("cvcr"), InputError);
}

TEST(Project, IdentityAndOracleAndErrors)
{
    EngineConfig cfg;
    cfg.t = 4;
    cfg.s = 2;
    HierarchyConfig hc;
    hc.parallelism = 2;
    CacheHierarchy<double> h(hc, 0.0);
    MatMulEngine<RealDomain> eng(cfg, RealDomain{});
    const auto x = synthetic::dyadic(10, 5, 1);
    EXPECT_EQ(project(eng, h, x, Matrix<double>::identity(5, 0.0, 1.0), 5).o, x);
    const auto v = synthetic::dyadic(5, 5, 2);
    const auto o = project(eng, h, x, v, 3).o;
    Matrix<double> v3(5, 3, 0.0);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) v3(i, j) = v(i, j);
    EXPECT_EQ(o, oracle::oracle_matmul(x, v3));
    EXPECT_THROW(project(eng, h, x, v, 0), InputError);
    EXPECT_THROW(project(eng, h, x, Matrix<double>(4, 4, 0.0), 2), InputError);
}

TEST(Pipeline, PlantedSpikeSelectsTwo)
{
    const auto x = synthetic::planted_spike(300, 10, 2, 0.01, 17);
    auto cfg = small_config();
    cfg.criterion = SelectionCriterion::cvcr(0.95);
    const auto r = run_pca(x, cfg, RealDomain{});
    EXPECT_EQ(r.selection.k, 2u);
    EXPECT_EQ(r.projected.cols(), 2u);
    const auto ref = oracle::oracle_pca(x, 2);
    EXPECT_LE(projector_distance(r.components, ref.components), 1e-6);
}

TEST(Pipeline, UncorrelatedFeaturesGiveNearUniformEvcr)
{
    const auto x = synthetic::uncorrelated(20000, 4, 3);
    auto cfg = small_config();
    cfg.criterion = SelectionCriterion::fixed(4);
    const auto r = run_pca(x, cfg, RealDomain{});
    for (double e : r.selection.evcr) EXPECT_NEAR(e, 0.25, 0.02);
    // Raw C = YᵀY: diagonal is M - 1 after standardization.
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.covariance(i, i), 19999.0, 1e-6);
}

TEST(Pipeline, VarianceBookkeepingWithAllComponents)
{
    const auto x = synthetic::planted_spike(80, 6, 3, 0.3, 5);
    auto cfg = small_config();
    cfg.criterion = SelectionCriterion::fixed(6);
    const auto r = run_pca(x, cfg, RealDomain{});
    double in = 0, out = 0;
    for (double v : r.standardized.y.data()) in += v * v;
    for (double v : r.projected.data()) out += v * v;
    EXPECT_NEAR(out, in, 1e-8 * in);
}

TEST(Pipeline, FixedPathStaysCloseToFloat)
{
    const auto x = synthetic::planted_spike(200, 8, 2, 0.1, 9);
    auto cfg = small_config();
    const auto fl = run_pca(x, cfg, RealDomain{});
    const auto fx = run_pca(x, cfg, FixedDomain(QFormat{16, 16}, 16));
    double fro = 0;
    for (double v : fl.covariance.data()) fro += v * v;
    fro = std::sqrt(fro);
    for (std::size_t i = 0; i < 8; ++i)
        EXPECT_NEAR(fx.jacobi.eigenvalues[i], fl.jacobi.eigenvalues[i], std::ldexp(fro, -16 + 4));
    EXPECT_EQ(fx.selection.k, fl.selection.k);
}

TEST(Pipeline, PerfReportAggregatesPhases)
{
    const auto x = synthetic::uncorrelated(40, 6, 1);
    auto cfg = small_config();
    cfg.perf.peak_power_w = 1.271;
    const auto r = run_pca(x, cfg, RealDomain{});
    ASSERT_EQ(r.perf.phases.size(), 3u);
    std::uint64_t sum = 0;
    for (const auto& p : r.perf.phases) {
        EXPECT_EQ(p.total, p.load + p.compute);
        sum += p.total;
    }
    EXPECT_EQ(sum, r.perf.total_cycles);
    EXPECT_DOUBLE_EQ(*r.perf.energy_j, 1.271 * r.perf.wall_time_s);
    EXPECT_NE(r.cache_stats_csv.find("jacobi,lhs,rotation"), std::string::npos);
}

TEST(Pipeline, RejectsNonFiniteInput)
{
    Matrix<double> x(3, 2, 1.0);
    x(1, 1) = std::nan("");
    EXPECT_THROW(run_pca(x, small_config(), RealDomain{}), InputError);
}
