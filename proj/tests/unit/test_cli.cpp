#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "crowdloss/cli/commands.hpp"
#include "crowdloss/cli/config.hpp"
#include "crowdloss/io.hpp"

namespace fs = std::filesystem;
using namespace crowdloss;
using namespace crowdloss::cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("crowdloss_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "crowdloss");
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Rows of a CSV file as column-name -> value maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    if (header.empty()) {
      header = split(line);
      continue;
    }
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t k = 0; k < header.size() && k < cells.size(); ++k) row[header[k]] = cells[k];
    rows.push_back(row);
  }
  return rows;
}

const char* kSmallSim =
    "[run]\nseeds = 1-2\n"
    "[sim]\nsteps = 40\n";

}  // namespace

TEST(Config, Defaults) {
  const RunConfig cfg = parse_config("");
  ASSERT_EQ(cfg.seeds.size(), 20u);
  EXPECT_EQ(cfg.seeds.front(), 1u);
  EXPECT_EQ(cfg.variants.size(), 4u);
  EXPECT_EQ(cfg.nms_thresholds.size(), 11u);
}

TEST(Config, ParsesSectionsAndComments) {
  const RunConfig cfg = parse_config(
      "; comment\n[run]\nseeds = 3, 7-9\n[loss]\n; comment inside a section\nalpha = 0.5\nregression_norm = per_proposal\n"
      "[couloss]\naggregation = literal\n[nms]\nthresholds = 0.4, 0.6\n",
      "/base");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 7, 8, 9}));
  EXPECT_EQ(cfg.loss.alpha, 0.5);
  EXPECT_EQ(cfg.loss.regression_norm, RegressionNorm::PerProposal);
  EXPECT_EQ(cfg.cou.aggregation, Aggregation::TripletLiteral);
  EXPECT_EQ(cfg.nms_thresholds, (std::vector<double>{0.4, 0.6}));
}

TEST(Config, ExampleFileMatchesDefaults) {
  const RunConfig file = load_config(CROWDLOSS_EXAMPLE_CONFIG);
  const RunConfig def;
  EXPECT_EQ(file.seeds, def.seeds);
  EXPECT_EQ(file.sim.scene.distractors, def.sim.scene.distractors);
  EXPECT_EQ(file.sim.steps, def.sim.steps);
  EXPECT_EQ(file.sim.step_size, def.sim.step_size);
  EXPECT_EQ(file.sim.target_sharpness, def.sim.target_sharpness);
  EXPECT_EQ(file.loss.smoothl1_beta, def.loss.smoothl1_beta);
  EXPECT_EQ(file.loss.regression_norm, def.loss.regression_norm);
  EXPECT_EQ(file.cou.aggregation, def.cou.aggregation);
  EXPECT_EQ(file.gradcheck.kink_tolerance, def.gradcheck.kink_tolerance);
  EXPECT_EQ(file.nms_thresholds, def.nms_thresholds);
  EXPECT_EQ(file.anchors.bumps.spread, def.anchors.bumps.spread);
  EXPECT_EQ(file.anchors.spec.scales, def.anchors.spec.scales);
  EXPECT_EQ(file.variants, def.variants);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("[run]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[nowhere]\nseeds = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[sim]\nsteps = many\n"), ConfigError);
  EXPECT_THROW(parse_config("[sim]\nvariants = baseline, mystery\n"), ConfigError);
  EXPECT_THROW(parse_seed_list("5-2"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/crowdloss.ini"), ConfigError);
}

TEST_F(CliTest, ExitCodesForBadInput) {
  EXPECT_EQ(invoke({"simulate", "--config", (dir_ / "missing.ini").string()}), kExitUsage);
  const fs::path bad = write_config("bad.ini", "[sim]\nwobble = 2\n");
  EXPECT_EQ(invoke({"simulate", "--config", bad.string()}), kExitUsage);
  EXPECT_NE(err_.str().find("wobble"), std::string::npos);
  EXPECT_EQ(invoke({"no-such-command"}), kExitUsage);
}

TEST_F(CliTest, DivergenceExitsWithAbort) {
  const fs::path cfg = write_config("c.ini", std::string(kSmallSim) + "step_size = 5\n");
  EXPECT_EQ(invoke({"simulate", "--config", cfg.string(), "--out", (dir_ / "o").string()}), kExitAborted);
}

TEST_F(CliTest, SimulateRowsAndReruns) {
  const fs::path cfg = write_config("c.ini", kSmallSim);
  const fs::path a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--out", a.string()}), kExitOk) << err_.str();
  const auto rows = read_csv(a / "simulate.csv");
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(rows[k].at("seed"), "1");
  EXPECT_EQ(rows[0].at("variant"), "baseline");
  EXPECT_EQ(rows[3].at("variant"), "only_rep");
  EXPECT_TRUE(fs::exists(a / "scene_001.txt"));
  EXPECT_TRUE(fs::exists(a / "detections_couloss.csv"));

  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--out", b.string()}), kExitOk);
  EXPECT_EQ(slurp(a / "simulate.csv"), slurp(b / "simulate.csv"));
  EXPECT_EQ(slurp(a / "detections_baseline.csv"), slurp(b / "detections_baseline.csv"));
}

TEST_F(CliTest, SeedsFlagOverridesConfig) {
  const fs::path cfg = write_config("c.ini", kSmallSim);
  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--out", (dir_ / "o").string(), "--seeds", "5"}), kExitOk);
  const auto rows = read_csv(dir_ / "o" / "simulate.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].at("seed"), "5");
}

TEST_F(CliTest, ZeroWeightCouLossMatchesBaseline) {
  const fs::path cfg =
      write_config("c.ini", std::string(kSmallSim) + "variants = baseline, couloss\n[loss]\nalpha = 0\n");
  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--out", (dir_ / "o").string()}), kExitOk);
  const auto rows = read_csv(dir_ / "o" / "simulate.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 0; k < rows.size(); k += 2) {
    for (const char* col : {"drift_rate", "mean_final_iou", "overlap_occupancy", "final_loss", "steps_run"}) {
      EXPECT_EQ(rows[k].at(col), rows[k + 1].at(col)) << col;
    }
  }
}

TEST_F(CliTest, NmsSweepGrid) {
  const fs::path cfg = write_config("c.ini", kSmallSim);
  ASSERT_EQ(invoke({"nms-sweep", "--config", cfg.string(), "--out", (dir_ / "o").string(), "--svg"}), kExitOk)
      << err_.str();
  const auto rows = read_csv(dir_ / "o" / "nms_sweep.csv");
  ASSERT_EQ(rows.size(), 22u);
  EXPECT_EQ(rows[0].at("threshold"), "0.29999999999999999");
  EXPECT_EQ(rows[0].at("variant"), "baseline");
  EXPECT_EQ(rows[11].at("variant"), "couloss");
  EXPECT_EQ(read_csv(dir_ / "o" / "nms_summary.csv").size(), 2u);
  EXPECT_EQ(slurp(dir_ / "o" / "nms_sweep.svg").rfind("<svg", 0), 0u);
}

TEST_F(CliTest, AnchorDemoFlatMapFallsBack) {
  const fs::path cfg = write_config("c.ini", "[run]\nseeds = 1-3\n[anchors]\nmap = flat\nflat_value = 0.3\n");
  ASSERT_EQ(invoke({"anchor-demo", "--config", cfg.string(), "--out", (dir_ / "o").string()}), kExitOk)
      << err_.str();
  const auto rows = read_csv(dir_ / "o" / "anchor_demo.csv");
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.at("fallback"), "1");
    EXPECT_EQ(r.at("retained_cells"), r.at("total_cells"));
  }
}

TEST_F(CliTest, AnchorDemoIndicatorKeepsSupport) {
  const fs::path cfg = write_config("c.ini", "[run]\nseeds = 4\n[anchors]\nmap = indicator\n");
  ASSERT_EQ(invoke({"anchor-demo", "--config", cfg.string(), "--out", (dir_ / "o").string()}), kExitOk)
      << err_.str();
  const auto rows = read_csv(dir_ / "o" / "anchor_demo.csv");
  ASSERT_EQ(rows.size(), 1u);
  std::ifstream in(dir_ / "o" / "maps" / "probability_4.txt");
  const ProbabilityMap map = io::read_probability_map(in);
  std::size_t support = 0;
  for (double v : map.values()) support += v > 0.0 ? 1 : 0;
  ASSERT_GT(support, 0u);
  EXPECT_EQ(rows[0].at("retained_cells"), std::to_string(support));
  EXPECT_EQ(rows[0].at("fallback"), "0");
}

TEST_F(CliTest, GradcheckKinkFixtureWarns) {
  const fs::path cfg = write_config("c.ini", "[gradcheck]\nscenes = 20\nkink_fixture = true\n");
  ASSERT_EQ(invoke({"gradcheck", "--config", cfg.string(), "--out", (dir_ / "o").string()}), kExitOk)
      << out_.str() << err_.str();
  EXPECT_FALSE(slurp(dir_ / "o" / "gradcheck_warnings.txt").empty());
  EXPECT_GE(read_csv(dir_ / "o" / "gradcheck.csv").size(), 2u);
}

TEST_F(CliTest, SimulateThenEvaluate) {
  const fs::path sim_cfg = write_config("sim.ini", kSmallSim);
  const fs::path o = dir_ / "o";
  ASSERT_EQ(invoke({"simulate", "--config", sim_cfg.string(), "--out", o.string()}), kExitOk);
  const fs::path eval_cfg = write_config(
      "eval.ini", "[eval]\ndetections = o/detections_couloss.csv\nscenes = o/scene_000.txt, o/scene_001.txt\n");
  ASSERT_EQ(invoke({"eval", "--config", eval_cfg.string(), "--out", (dir_ / "e").string()}), kExitOk)
      << err_.str();
  const auto summary = read_csv(dir_ / "e" / "eval_summary.csv");
  ASSERT_EQ(summary.size(), 1u);
  const double mr = std::stod(summary[0].at("log_average_miss_rate"));
  EXPECT_GT(mr, 0.0);
  EXPECT_LE(mr, 1.0);
  EXPECT_FALSE(read_csv(dir_ / "e" / "curve.csv").empty());
}
