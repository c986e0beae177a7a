// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_app.hpp"

namespace fs = std::filesystem;
using hierperc::cli::run_cli;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "hierperc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hierperc_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, UnknownFlagIsInvalid) {
  const auto r = run({"moments", "--bogus", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, MissingOrUnknownSubcommand) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST(Cli, InvalidParametersExitTwo) {
  const auto dir = scratch("invalid");
  EXPECT_EQ(run({"moments", "--alpha", "1.5", "--beta", "auto", "--out-dir", dir.string()}).code, 2);
  EXPECT_EQ(run({"moments", "--beta", "-1", "--out-dir", dir.string()}).code, 2);
  EXPECT_EQ(run({"moments", "--beta", "abc", "--out-dir", dir.string()}).code, 2);
  EXPECT_EQ(run({"moments", "--out-dir", dir.string()}).code, 2);
  EXPECT_EQ(run({"tail", "--beta", "1", "--n", "40", "--out-dir", dir.string()}).code, 2);
  EXPECT_EQ(run({"coalescent", "--masses", "1,-2", "--out-dir", dir.string()}).code, 2);
}

TEST(Cli, MomentsSchemaThreeRowsPerScale) {
  const auto dir = scratch("moments");
  const auto r = run({"moments", "--d", "1", "--L", "2", "--alpha", "0.2", "--beta", "0.2", "--n", "8,10", "--p",
                      "1,2,3", "--reps", "20", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(dir / "moments.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,t,p,estimate,stderr,replicas");
  EXPECT_EQ(lines(csv), 1 + 2 * 3);
  const auto side = nlohmann::json::parse(slurp(dir / "moments.json"));
  EXPECT_EQ(side["schema_version"], 1);
  EXPECT_TRUE(side.contains("wall_time_seconds"));
  EXPECT_EQ(side["config"]["alpha"], 0.2);
}

TEST(Cli, ZeroCouplingMomentsAreOne) {
  const auto dir = scratch("zero");
  ASSERT_EQ(run({"moments", "--beta", "0", "--n", "6", "--reps", "3", "--out-dir", dir.string()}).code, 0);
  std::istringstream in(slurp(dir / "moments.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    EXPECT_EQ(f[3], "1");
    EXPECT_EQ(f[4], "0");
  }
}

TEST(Cli, ConfigOverridesFlags) {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "run.cfg") << "# test\nreps = 7\nbeta=0.3\n";
  const auto r = run({"sample", "--beta", "0.9", "--reps", "3", "--n", "5", "--config", (dir / "run.cfg").string(),
                      "--out-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(dir / "sample.csv")), 1 + 7);
  const auto side = nlohmann::json::parse(slurp(dir / "sample.json"));
  EXPECT_EQ(side["config"]["beta"], "0.3");
  std::ofstream(dir / "bad.cfg") << "no equals sign\n";
  EXPECT_EQ(run({"sample", "--beta", "1", "--config", (dir / "bad.cfg").string()}).code, 2);
  std::ofstream(dir / "unknown.cfg") << "bogus=1\n";
  EXPECT_EQ(run({"sample", "--beta", "1", "--config", (dir / "unknown.cfg").string()}).code, 2);
}

TEST(Cli, SeedFromEnvironment) {
  const auto dir = scratch("env");
  setenv("HIERPERC_SEED", "77", 1);
  ASSERT_EQ(run({"sample", "--beta", "1", "--n", "6", "--reps", "4", "--out-dir", (dir / "a").string()}).code, 0);
  unsetenv("HIERPERC_SEED");
  ASSERT_EQ(run({"sample", "--beta", "1", "--n", "6", "--reps", "4", "--seed", "77", "--out-dir", (dir / "b").string()}).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "sample.csv"), slurp(dir / "b" / "sample.csv"));
  setenv("HIERPERC_SEED", "not-a-number", 1);
  EXPECT_EQ(run({"sample", "--beta", "1"}).code, 2);
  unsetenv("HIERPERC_SEED");
}

TEST(Cli, ByteIdenticalAcrossWorkerCounts) {
  const auto dir = scratch("determinism");
  for (const std::string cmd : {"moments", "tail", "twopoint", "lpnorm", "sizebias"}) {
    std::string prev;
    for (const std::string w : {"1", "3"}) {
      const auto out = dir / (cmd + w);
      const auto r = run({cmd, "--beta", "0.7", "--n", "8", "--p", "2", "--reps", "30", "--workers", w, "--seed", "5",
                          "--out-dir", out.string()});
      ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
      const auto body = slurp(out / (cmd + ".csv"));
      if (!prev.empty()) {
        EXPECT_EQ(body, prev) << cmd;
      }
      prev = body;
    }
  }
}

TEST(Cli, BinaryIsDeterministic) {
  const auto dir = scratch("binary");
  const std::string base = std::string(HIERPERC_CLI_PATH) + " moments --beta 0.5 --n 7 --reps 10 --seed 3 --out-dir ";
  ASSERT_EQ(std::system((base + (dir / "x").string() + " > /dev/null").c_str()), 0);
  ASSERT_EQ(std::system((base + (dir / "y").string() + " > /dev/null").c_str()), 0);
  EXPECT_EQ(slurp(dir / "x" / "moments.csv"), slurp(dir / "y" / "moments.csv"));
  EXPECT_NE(std::system((std::string(HIERPERC_CLI_PATH) + " moments --nope 2> /dev/null").c_str()), 0);
}

TEST(Cli, CoalescentReportsOracle) {
  const auto dir = scratch("coal");
  const auto r = run({"coalescent", "--masses", "2,1,1", "--t", "0.5", "--p", "2,3", "--reps", "20000", "--out-dir",
                      dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(slurp(dir / "coalescent.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,p,estimate,stderr,replicas,oracle");
  while (std::getline(in, line)) {
    std::vector<double> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(std::stod(x));
    EXPECT_NEAR(f[2], f[5], 4 * f[3]);
  }
}

TEST(Cli, RenormAndVerify) {
  const auto dir = scratch("verify");
  const auto r = run({"renorm", "--beta", "0.8", "--steps", "3", "--draws", "500", "--compare", "3", "--out-dir",
                      dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(dir / "renorm.csv")), 4);
  const auto v = run({"verify", "--out-dir", dir.string()});
  EXPECT_EQ(v.code, 0) << v.out;
}

TEST(Cli, BetacInconclusiveOnTinyBudget) {
  const auto dir = scratch("betac");
  const auto r = run({"betac", "--alpha", "0.5", "--budget", "1000", "--out-dir", dir.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(fs::exists(dir / "betac_cache.json"));
}

TEST(Cli, BetaAutoUsesCache) {
  const auto dir = scratch("cache");
  fs::create_directories(dir);
  std::ofstream(dir / "betac_cache.json")
      << R"({"d=1,L=2,alpha=0.5,tol=0.050000000000000003": {"lower": 0.77, "upper": 0.8, "estimate": 0.785}})";
  const auto r = run({"sample", "--beta", "auto", "--alpha", "0.5", "--n", "4", "--reps", "2", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto side = nlohmann::json::parse(slurp(dir / "sample.json"));
  EXPECT_EQ(side["beta"]["source"], "cache");
}
