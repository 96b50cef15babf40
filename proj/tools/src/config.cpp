#include "crowdloss/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "crowdloss/error.hpp"

namespace crowdloss::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + text + "'");
}

std::vector<double> parse_reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<double>(key, item));
  if (out.empty()) throw ConfigError("config: '" + key + "' is empty");
  return out;
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

std::map<std::string, Setter> setters(RunConfig& c, const std::filesystem::path& base) {
  auto real = [](double& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<double>(k, v); };
  };
  auto integer = [](int& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<int>(k, v); };
  };
  auto flag = [](bool& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_bool(k, v); };
  };
  auto path = [&base](std::filesystem::path& dst) {
    return [&dst, &base](const std::string&, const std::string& v) { dst = base / trim(v); };
  };
  auto names = [](std::vector<std::string>& dst) {
    return [&dst](const std::string& k, const std::string& v) {
      dst = split_list(v);
      if (dst.empty()) throw ConfigError("config: '" + k + "' is empty");
    };
  };

  SceneConfig& sc = c.sim.scene;
  return {
      {"run.seeds", [&c](const std::string&, const std::string& v) { c.seeds = parse_seed_list(v); }},
      {"run.out", [&c, &base](const std::string&, const std::string& v) { c.out = base / trim(v); }},

      {"scene.width", real(sc.width)},
      {"scene.height", real(sc.height)},
      {"scene.pedestrians", integer(sc.pedestrians)},
      {"scene.crowd_iou_min", real(sc.crowd_iou_min)},
      {"scene.crowd_iou_max", real(sc.crowd_iou_max)},
      {"scene.aspect_ratio", real(sc.aspect_ratio)},
      {"scene.min_height", real(sc.min_height)},
      {"scene.max_height", real(sc.max_height)},
      {"scene.distractors", integer(sc.distractors)},
      {"scene.distractor_min_aspect", real(sc.distractor_min_aspect)},
      {"scene.distractor_max_aspect", real(sc.distractor_max_aspect)},
      {"scene.min_visible_fraction", real(sc.min_visible_fraction)},
      {"scene.max_retries", integer(sc.max_retries)},

      {"sim.jitter", real(c.sim.jitter)},
      {"sim.proposals_per_gt", integer(c.sim.proposals_per_gt)},
      {"sim.steps", integer(c.sim.steps)},
      {"sim.step_size", real(c.sim.step_size)},
      {"sim.recompute_assignments", flag(c.sim.recompute_assignments)},
      {"sim.target_sharpness", real(c.sim.target_sharpness)},
      {"sim.divergence_factor", real(c.sim.divergence_factor)},
      {"sim.min_box_size", real(c.sim.min_box_size)},
      {"sim.variants", names(c.variants)},

      {"couloss.positive_iou_threshold", real(c.cou.positive_iou_threshold)},
      {"couloss.iou_floor", real(c.cou.iou_floor)},
      {"couloss.kink_tolerance", real(c.cou.kink_tolerance)},
      {"couloss.aggregation",
       [&c](const std::string& k, const std::string& v) {
         const std::string s = trim(v);
         if (s == "deduplicated") {
           c.cou.aggregation = Aggregation::Deduplicated;
         } else if (s == "literal" || s == "triplet_literal") {
           c.cou.aggregation = Aggregation::TripletLiteral;
         } else {
           throw ConfigError("config: '" + k + "' expects deduplicated or literal, got '" + v + "'");
         }
       }},

      {"loss.alpha", real(c.loss.alpha)},
      {"loss.gamma", real(c.loss.gamma)},
      {"loss.focal_gamma", real(c.loss.focal_gamma)},
      {"loss.focal_alpha", real(c.loss.focal_alpha)},
      {"loss.smoothl1_beta", real(c.loss.smoothl1_beta)},
      {"loss.smoothl1_weight", real(c.loss.smoothl1_weight)},
      {"loss.iou_loss_weight", real(c.loss.iou_loss_weight)},
      {"loss.regression_norm",
       [&c](const std::string& k, const std::string& v) {
         const std::string s = trim(v);
         if (s == "per_proposal") {
           c.loss.regression_norm = RegressionNorm::PerProposal;
         } else if (s == "per_gt") {
           c.loss.regression_norm = RegressionNorm::PerGroundTruth;
         } else {
           throw ConfigError("config: '" + k + "' expects per_proposal or per_gt, got '" + v + "'");
         }
       }},

      {"gradcheck.scenes", integer(c.gradcheck.scenes)},
      {"gradcheck.seed",
       [&c](const std::string& k, const std::string& v) { c.gradcheck.seed = parse_number<std::uint64_t>(k, v); }},
      {"gradcheck.rel_step", real(c.gradcheck.rel_step)},
      {"gradcheck.tolerance", real(c.gradcheck.tolerance)},
      {"gradcheck.kink_tolerance", real(c.gradcheck.kink_tolerance)},
      {"gradcheck.kink_fixture", flag(c.gradcheck.include_kink_fixture)},

      {"nms.variants", names(c.nms_variants)},
      {"nms.thresholds", [&c](const std::string& k, const std::string& v) { c.nms_thresholds = parse_reals(k, v); }},
      {"nms.match_iou", real(c.match_iou)},

      {"anchors.map",
       [&c](const std::string& k, const std::string& v) {
         const std::string s = trim(v);
         if (s == "flat") {
           c.anchors.map = MapKind::Flat;
         } else if (s == "indicator") {
           c.anchors.map = MapKind::Indicator;
         } else if (s == "bumps") {
           c.anchors.map = MapKind::Bumps;
         } else if (s == "file") {
           c.anchors.map = MapKind::File;
         } else {
           throw ConfigError("config: '" + k + "' expects flat, indicator, bumps or file, got '" + v + "'");
         }
       }},
      {"anchors.flat_value", real(c.anchors.flat_value)},
      {"anchors.map_width", integer(c.anchors.bumps.width)},
      {"anchors.map_height", integer(c.anchors.bumps.height)},
      {"anchors.background", real(c.anchors.bumps.background)},
      {"anchors.min_peak", real(c.anchors.bumps.min_peak)},
      {"anchors.max_peak", real(c.anchors.bumps.max_peak)},
      {"anchors.spread", real(c.anchors.bumps.spread)},
      {"anchors.scales", [&c](const std::string& k, const std::string& v) { c.anchors.spec.scales = parse_reals(k, v); }},
      {"anchors.ratios", [&c](const std::string& k, const std::string& v) { c.anchors.spec.ratios = parse_reals(k, v); }},
      {"anchors.restrict_positives", flag(c.anchors.restrict_positives)},
      {"anchors.positive_iou", real(c.anchors.positive_iou)},
      {"anchors.negative_iou", real(c.anchors.negative_iou)},
      {"anchors.map_file", path(c.anchors.map_file)},
      {"anchors.scene_file", path(c.anchors.scene_file)},

      {"eval.detections", path(c.eval.detections)},
      {"eval.scenes",
       [&c, &base](const std::string& k, const std::string& v) {
         c.eval.scenes.clear();
         for (const auto& item : split_list(v)) c.eval.scenes.push_back(base / item);
         if (c.eval.scenes.empty()) throw ConfigError("config: '" + k + "' is empty");
       }},
      {"eval.iou_threshold", real(c.eval.iou_threshold)},
      {"eval.nms_threshold", real(c.eval.nms_threshold)},
      {"eval.subset", [&c](const std::string&, const std::string& v) { c.eval.subset = trim(v); }},
  };
}

}  // namespace

RunConfig::RunConfig() : seeds(20) {
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{1});
  sim.scene.distractors = 3;
}

void RunConfig::validate() const {
  try {
    if (seeds.empty()) throw ConfigError("config: seed list is empty");
    sim.validate();
    cou.validate();
    loss.validate();
    for (const auto& v : variants) make_variant(v, loss);
    for (const auto& v : nms_variants) make_variant(v, loss);
    for (double t : nms_thresholds) {
      if (!(t > 0.0 && t < 1.0)) throw ConfigError("config: NMS thresholds must lie in (0, 1)");
    }
    if (!(match_iou > 0.0 && match_iou <= 1.0)) throw ConfigError("config: nms.match_iou must lie in (0, 1]");
    if (gradcheck.scenes < 1) throw ConfigError("config: gradcheck.scenes must be >= 1");
    if (!(gradcheck.rel_step > 0.0) || !(gradcheck.tolerance > 0.0) || !(gradcheck.kink_tolerance >= 0.0)) {
      throw ConfigError("config: gradcheck step, tolerance and kink tolerance must be positive");
    }
    if (!(anchors.flat_value >= 0.0 && anchors.flat_value <= 1.0)) {
      throw ConfigError("config: anchors.flat_value must lie in [0, 1]");
    }
    if (anchors.bumps.width < 1 || anchors.bumps.height < 1) throw ConfigError("config: map size must be >= 1");
    if (!(eval.nms_threshold >= 0.0 && eval.nms_threshold < 1.0)) {
      throw ConfigError("config: eval.nms_threshold must lie in [0, 1)");
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(csv)) {
    // "a-b" expands to the inclusive range.
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = parse_number<std::uint64_t>("seeds", item.substr(0, dash));
      const auto hi = parse_number<std::uint64_t>("seeds", item.substr(dash + 1));
      if (hi < lo) throw ConfigError("config: descending seed range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(parse_number<std::uint64_t>("seeds", item));
    }
  }
  if (out.empty()) throw ConfigError("config: seed list is empty");
  return out;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }

  RunConfig cfg;
  const auto table = setters(cfg, base_dir);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config: key '" + section + "' must appear inside a [section]");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError("config: unknown key '" + full + "'");
      it->second(full, value.data());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace crowdloss::cli
