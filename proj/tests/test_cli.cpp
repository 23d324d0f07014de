#include <gtest/gtest.h>

#include <spinmetro/cli.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace spinmetro::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto d = fs::temp_directory_path() / ("spinmetro_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
  return out;
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "spinmetro");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return main_entry(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST(Validate, EmptyGridNamesField) {
  RunConfig c;
  c.subcommand = "squeeze";
  const auto d = validate(c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].rfind("n:", 0), 0u) << d[0];
}

TEST(Validate, MonteCarloNeedsSeed) {
  RunConfig c;
  c.subcommand = "estimate";
  c.n_grid = {600};
  c.ensembles = 3;
  c.mode = "monte_carlo";
  auto d = validate(c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NE(d[0].find("seed"), std::string::npos);
  c.seed = 5;
  EXPECT_TRUE(validate(c).empty());
}

TEST(Validate, AllocationTooSmall) {
  RunConfig c;
  c.subcommand = "estimate";
  c.n_grid = {60, 5000};
  c.ensembles = 4;
  const auto d = validate(c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NE(d[0].find("N=60"), std::string::npos);
  EXPECT_NE(d[0].find("allocation"), std::string::npos);
}

TEST(Validate, ListsEveryViolation) {
  RunConfig c;
  c.subcommand = "estimate";
  c.n_grid = {1000};
  c.threads = 0;
  c.quadrature_nodes = 0;
  c.sigma_grid = {};
  EXPECT_EQ(validate(c).size(), 3u);
}

TEST(ConfigHash, IgnoresThreadsAndOutput) {
  RunConfig c;
  c.subcommand = "squeeze";
  c.n_grid = {500};
  const auto h = config_hash(c);
  EXPECT_EQ(h.size(), 64u);
  c.threads = 4;
  c.out = "elsewhere.csv";
  EXPECT_EQ(config_hash(c), h);
  c.seed = 1;
  EXPECT_NE(config_hash(c), h);
}

TEST(FormatDouble, SeventeenDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(format_double(1.0 / 3)), 1.0 / 3);
}

TEST(Run, PredictChiStar) {
  const auto out = scratch_dir() / "predict.csv";
  ASSERT_EQ(run_args({"predict", "--formula", "chi-star", "--s2", "1", "--n", "1000", "--out",
                      out.string()}),
            0);
  const auto l = lines(slurp(out));
  ASSERT_GE(l.size(), 2u);
  EXPECT_EQ(l[0].find("config_hash"), l[0].size() - 11);
  EXPECT_NE(l[1].find("0.012009369551760031"), std::string::npos);
}

TEST(Run, RecordEmbedsHash) {
  RunConfig c;
  c.subcommand = "squeeze";
  c.n_grid = {400, 800, 1600};
  c.depth = 2;
  c.c = 0.7;
  c.out = (scratch_dir() / "squeeze.csv").string();
  ASSERT_EQ(run(c), 0);
  const auto csv = lines(slurp(c.out));
  ASSERT_EQ(csv.size(), 4u);
  const auto h = config_hash(c);
  for (std::size_t k = 1; k < csv.size(); ++k) EXPECT_EQ(cells(csv[k]).back(), h);
  const auto rec = nlohmann::json::parse(slurp(fs::path(c.out).replace_extension(".json")));
  EXPECT_EQ(rec["config_hash"], h);
  EXPECT_EQ(rec["results_file"], "squeeze.csv");
  EXPECT_TRUE(rec.contains("version"));
  EXPECT_EQ(rec["config"]["depth"], 2);
}

TEST(Run, FloatsRoundTrip) {
  RunConfig c;
  c.subcommand = "squeeze";
  c.n_grid = {300, 600, 900};
  c.out = (scratch_dir() / "rt.csv").string();
  ASSERT_EQ(run(c), 0);
  const auto csv = lines(slurp(c.out));
  for (std::size_t k = 1; k < csv.size(); ++k) {
    for (const auto& cell : cells(csv[k])) {
      if (cell.find('.') == std::string::npos || cell.size() == 64) continue;
      EXPECT_EQ(format_double(std::stod(cell)), cell);
    }
  }
}

TEST(Run, MonteCarloBytesIndependentOfThreads) {
  RunConfig c;
  c.subcommand = "estimate";
  c.n_grid = {600, 900};
  c.ensembles = 3;
  c.mode = "monte_carlo";
  c.seed = 123;
  c.window_min = 600;
  c.window_max = 900;
  c.out = (scratch_dir() / "mc1.csv").string();
  c.threads = 1;
  ASSERT_EQ(run(c), 0);
  const auto a = slurp(c.out);
  c.out = (scratch_dir() / "mc3.csv").string();
  c.threads = 3;
  ASSERT_EQ(run(c), 0);
  EXPECT_EQ(slurp(c.out), a);
}

TEST(Run, QdistColumns) {
  const auto out = scratch_dir() / "q.csv";
  ASSERT_EQ(run_args({"qdist", "--n", "12", "--polar-points", "5", "--azimuth-points", "4",
                      "--out", out.string()}),
            0);
  const auto l = lines(slurp(out));
  ASSERT_EQ(l.size(), 21u);
  EXPECT_EQ(l[0].rfind("polar,azimuth,q", 0), 0u);
}

TEST(Run, PowerLawFitFromFile) {
  const auto in = scratch_dir() / "pts.csv";
  {
    std::ofstream f(in);
    f << "N,delta_phi2\n";
    for (double n : {100.0, 200.0, 400.0, 800.0}) f << n << ',' << 3 * std::pow(n, -1.5) << '\n';
  }
  const auto out = scratch_dir() / "fit.csv";
  ASSERT_EQ(run_args({"fit", "--kind", "powerlaw", "--input", in.string(), "--out", out.string()}),
            0);
  const auto l = lines(slurp(out));
  ASSERT_GE(l.size(), 2u);
  EXPECT_NEAR(std::stod(cells(l[1])[1]), -1.5, 1e-5) << l[1];
}

TEST(Run, InvalidConfigExitsTwo) {
  EXPECT_EQ(run_args({"squeeze", "--out", (scratch_dir() / "x.csv").string()}), 2);
  EXPECT_EQ(run_args({"estimate", "--n", "60", "--ensembles", "4", "--dry-run"}), 2);
}
