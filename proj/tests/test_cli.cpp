// Copyright 2026 The pcasim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

using namespace pcasim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("pcasim_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

int run(std::vector<std::string> args)
{
    args.insert(args.begin(), "pcasim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST(Csv, HeaderDetectionAndErrors)
{
    std::istringstream with("a,b\n1,2\n3,4\n");
    const auto t = csv::read(with);
    EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.data.rows(), 2u);
    std::istringstream bad("1,2\n3,oops\n");
    try {
        csv::read(bad, "x.csv");
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("x.csv:2:2"), std::string::npos);
    }
    std::istringstream ragged("1,2\n3\n");
    EXPECT_THROW(csv::read(ragged), InputError);
    std::istringstream empty("");
    EXPECT_THROW(csv::read(empty), InputError);
    EXPECT_EQ(csv::format(0.1), "0.1");
}

TEST(Cli, PcaIsByteDeterministic)
{
    const auto dir = scratch("det");
    ASSERT_EQ(run({"generate", "--kind", "planted", "--rows", "120", "--cols", "7", "--seed", "4", "--out",
                   (dir / "x.csv").string()}),
              0);
    for (const char* o : {"a", "b"})
        ASSERT_EQ(run({"pca", (dir / "x.csv").string(), "--tile-size", "2", "--parallelism", "3", "--out",
                       (dir / o).string()}),
                  0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path();
        ++files;
    }
    EXPECT_EQ(files, 7u);
}

TEST(Cli, ToyPlantedDirectionSelectsOne)
{
    const auto dir = scratch("toy");
    {
        std::ofstream f(dir / "toy.csv");
        f << "u,v\n";
        synthetic::Rng rng(1);
        for (int i = 0; i < 200; ++i) {
            const double t = rng.normal();
            f << csv::format(t) << ',' << csv::format(t + 0.05 * rng.normal()) << '\n';
        }
    }
    ASSERT_EQ(run({"pca", (dir / "toy.csv").string(), "--select", "cvcr:0.9", "--out", (dir / "o").string()}), 0);
    EXPECT_NE(slurp(dir / "o" / "manifest.json").find("\"selected_k\": 1"), std::string::npos);
}

TEST(Cli, ErrorsMapToExitCodes)
{
    const auto dir = scratch("err");
    std::ofstream(dir / "empty.csv").close();
    EXPECT_EQ(run({"pca", (dir / "empty.csv").string(), "--out", (dir / "o").string()}), 1);
    EXPECT_FALSE(fs::exists(dir / "o" / "eigenvalues.csv"));
    EXPECT_EQ(run({"pca", (dir / "missing.csv").string()}), 1);
    EXPECT_EQ(run({"pca", "x.csv", "--pivot", "sideways"}), 1);
    EXPECT_EQ(run({"pca", "x.csv", "--rounding", "up"}), 1);
    EXPECT_EQ(run({"bogus"}), 1);
    {
        std::ofstream f(dir / "hot.csv");
        f << "1,0\n0,1\n";
    }
    {
        std::ofstream f(dir / "big.csv");
        f << "30000,20000\n20000,-30000\n";
    }
    EXPECT_EQ(run({"convergence", (dir / "big.csv").string(), "--matrix", "--path", "fixed", "--out",
                   (dir / "c").string()}),
              2);
}

TEST(Cli, FixedPathRoundingIsRecorded)
{
    const auto dir = scratch("round");
    {
        std::ofstream f(dir / "x.csv");
        csv::write(f, synthetic::planted_spike(40, 6, 1, 0.1, 3));
    }
    ASSERT_EQ(run({"pca", (dir / "x.csv").string(), "--path", "fixed", "--rounding", "nearest", "--out",
                   (dir / "o").string()}),
              0);
    std::ifstream m(dir / "o" / "manifest.json");
    const std::string text((std::istreambuf_iterator<char>(m)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find("\"rounding\": \"nearest\""), std::string::npos);
}

TEST(Cli, ConvergenceDiagonalIsFlat)
{
    const auto dir = scratch("conv");
    {
        std::ofstream f(dir / "diag.csv");
        f << "2,0,0\n0,1,0\n0,0,3\n";
    }
    ASSERT_EQ(run({"convergence", (dir / "diag.csv").string(), "--matrix", "--sweeps", "3", "--out",
                   (dir / "o").string()}),
              0);
    EXPECT_EQ(slurp(dir / "o" / "convergence.csv"),
              "dataset,sweep,e_off,e_off_relative,max_pivot_magnitude,rotations_so_far\n"
              "diag,0,0,0,0,0\ndiag,1,0,0,0,0\ndiag,2,0,0,0,0\ndiag,3,0,0,0,0\n");
}

TEST(Cli, MatmulIdentityAndGramTrace)
{
    const auto dir = scratch("mm");
    {
        std::ofstream a(dir / "a.csv"), i(dir / "i.csv");
        a << "1,2,3\n4,5,6\n";
        i << "1,0,0\n0,1,0\n0,0,1\n";
    }
    ASSERT_EQ(run({"matmul", "--a", (dir / "a.csv").string(), "--b", (dir / "i.csv").string(), "--verify",
                   "--tile-size", "2", "--parallelism", "1", "--out", (dir / "o").string()}),
              0);
    EXPECT_EQ(slurp(dir / "o" / "product.csv"), "1,2,3\n4,5,6\n");
    ASSERT_EQ(run({"matmul", "--a", (dir / "a.csv").string(), "--tile-size", "2", "--parallelism", "1", "--out",
                   (dir / "g").string()}),
              0);
    EXPECT_EQ(slurp(dir / "g" / "product.csv"), "17,22,27\n22,29,36\n27,36,45\n");
}

TEST(Cli, DseWritesGrid)
{
    const auto dir = scratch("dse");
    ASSERT_EQ(run({"dse", "--rows", "64", "--cols", "64", "--t-grid", "2,4", "--s-grid", "1,2", "--out",
                   (dir / "o").string()}),
              0);
    const std::string s = slurp(dir / "o" / "dse.csv");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
    EXPECT_EQ(run({"dse", "--t-grid", "2,x", "--out", (dir / "p").string()}), 1);
}
