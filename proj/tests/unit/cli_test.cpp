#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "experiments.hpp"

namespace fs = std::filesystem;
using namespace pdmpctl;

namespace {

const char* kTauberian = R"({
  "model": {"name": "constant_cost"},
  "experiment": "tauberian",
  "seed": 11,
  "tauberian": {
    "family": {"kind": "constant", "u_levels": [], "v_levels": []},
    "probes": [{"mode": 0, "x": [0.5]}],
    "deltas": [0.5, 0.2, 0.1],
    "n_paths": 50
  }
})";

const char* kNonexp = R"({
  "model": {"name": "phage_lambda"},
  "experiment": "nonexp_check",
  "seed": 7,
  "nonexp_check": {"n_samples": 2000, "v_grid_points": 5}
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pdmpctl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_binary(const fs::path& config, const fs::path& out, const std::string& env = "") {
  fs::create_directories(out);
  const std::string cmd = env + " " + std::string(PDMPCTL_PATH) + " run --config " + config.string() +
                          " --output-dir " + out.string() + " --threads 1 > " + (out / "stdout.txt").string() +
                          " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, MissingSeedRejected) {
  auto j = nlohmann::json::parse(kNonexp);
  j.erase("seed");
  try {
    parse_config(j.dump());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(e.where().find("seed"), std::string::npos);
  }
}

TEST(Config, UnknownFieldRejected) {
  auto j = nlohmann::json::parse(kNonexp);
  j["nonexp_check"]["n_sample"] = 10;
  try {
    parse_config(j.dump());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(e.where().find("/nonexp_check"), std::string::npos);
  }
}

TEST(Config, SyntaxErrorHasPosition) {
  try {
    parse_config("{\n  \"seed\": 1,\n  oops\n}");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(e.where().find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, WrongTypeRejected) {
  auto j = nlohmann::json::parse(kNonexp);
  j["seed"] = "seven";
  EXPECT_THROW(parse_config(j.dump()), ConfigError);
  j["seed"] = -1;
  EXPECT_THROW(parse_config(j.dump()), ConfigError);
}

TEST(Config, SeedOverride) {
  ExperimentConfig c = parse_config(kNonexp);
  override_seed(c, 99);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.resolved["seed"], 99);
}

TEST(Experiments, ConstantCostTauberianPasses) {
  const ExperimentConfig c = parse_config(kTauberian);
  const fs::path dir = scratch("tauberian");
  const RunOutcome r = run_experiment(c, dir, 1);
  EXPECT_TRUE(r.passed()) << format_summary(c, r);
  ASSERT_FALSE(r.files.empty());
  for (const std::string& f : r.files) EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Experiments, PhageNonexpPasses) {
  const ExperimentConfig c = parse_config(kNonexp);
  const RunOutcome r = run_experiment(c, scratch("nonexp"), 1);
  EXPECT_TRUE(r.passed()) << format_summary(c, r);
  EXPECT_NE(format_summary(c, r).find("PASS nonexpansive_condition"), std::string::npos);
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch("binary");
  {
    std::ofstream(dir / "ok.json") << kNonexp;
    auto j = nlohmann::json::parse(kNonexp);
    j.erase("seed");
    std::ofstream(dir / "noseed.json") << j.dump();
  }
  EXPECT_EQ(run_binary(dir / "ok.json", dir / "ok"), 0);
  const auto manifest = nlohmann::json::parse(read(dir / "ok" / "manifest.json"));
  EXPECT_EQ(manifest["passed"], true);
  EXPECT_EQ(manifest["config"]["seed"], 7);
  EXPECT_NE(read(dir / "ok" / "summary.txt").find("PASS"), std::string::npos);

  EXPECT_EQ(run_binary(dir / "noseed.json", dir / "noseed"), 2);
  EXPECT_EQ(run_binary(dir / "ok.json", dir / "badenv", "PDMP_SEED_OVERRIDE=abc"), 2);
  EXPECT_EQ(run_binary(dir / "ok.json", dir / "override", "PDMP_SEED_OVERRIDE=12"), 0);
  EXPECT_EQ(nlohmann::json::parse(read(dir / "override" / "manifest.json"))["config"]["seed"], 12);
}

TEST(Binary, OutputIndependentOfThreads) {
  const fs::path dir = scratch("threads");
  std::ofstream(dir / "cfg.json") << kTauberian;
  for (int t : {1, 2}) {
    const std::string cmd = std::string(PDMPCTL_PATH) + " run --config " + (dir / "cfg.json").string() +
                            " --output-dir " + (dir / std::to_string(t)).string() + " --threads " +
                            std::to_string(t) + " > /dev/null";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
  }
  for (const auto& entry : fs::directory_iterator(dir / "1")) {
    if (entry.path().extension() != ".csv") continue;
    EXPECT_EQ(read(entry.path()), read(dir / "2" / entry.path().filename())) << entry.path().filename();
  }
}
