#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdloss/anchors.hpp"
#include "crowdloss/baselines.hpp"
#include "crowdloss/couloss.hpp"
#include "crowdloss/gradcheck.hpp"
#include "crowdloss/scene.hpp"
#include "crowdloss/simulator.hpp"

namespace crowdloss::cli {

/// Malformed or unreadable configuration; the CLI exits with status 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MapKind { Flat, Indicator, Bumps, File };

struct AnchorDemoConfig {
  MapKind map = MapKind::Bumps;
  double flat_value = 0.5;
  BumpMapConfig bumps;
  AnchorSpec spec;
  bool restrict_positives = true;
  double positive_iou = 0.5;
  double negative_iou = 0.3;
  std::filesystem::path map_file;    // MapKind::File only
  std::filesystem::path scene_file;  // MapKind::File only
};

struct EvalConfig {
  std::filesystem::path detections;
  std::vector<std::filesystem::path> scenes;  // scene_id k reads scenes[k]
  double iou_threshold = 0.5;
  double nms_threshold = 0.5;  // 0 disables NMS
  std::string subset = "all";
};

struct RunConfig {
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out = "out";
  SimConfig sim;
  CouLossConfig cou;
  CompositeConfig loss = default_simulation_loss();
  std::vector<std::string> variants{"baseline", "couloss", "only_att", "only_rep"};
  GradCheckOptions gradcheck;
  std::vector<std::string> nms_variants{"baseline", "couloss"};
  std::vector<double> nms_thresholds = default_nms_grid();
  double match_iou = 0.5;
  AnchorDemoConfig anchors;
  EvalConfig eval;

  RunConfig();
  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

/// INI-style `key = value` lines grouped under `[section]` headers; lines
/// starting with `;` are comments. Unknown keys are errors. Relative paths resolve against
/// the directory of the file.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");

std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

}  // namespace crowdloss::cli
