#pragma once

#include <cstdint>
#include <vector>

#include "crowdloss/geometry.hpp"

namespace crowdloss {

struct Pedestrian {
  BBox full;
  BBox visible;
};

struct Scene {
  double width = 0.0;
  double height = 0.0;
  std::vector<Pedestrian> pedestrians;
  std::vector<BBox> distractors;

  std::vector<BBox> full_boxes() const;
  /// Throws InvalidInput on a visible box outside its full box or a box outside the extent.
  void validate() const;
};

struct SceneConfig {
  double width = 640.0;
  double height = 480.0;
  int pedestrians = 2;
  /// Each pedestrian after the first must overlap its most-overlapping
  /// predecessor with IoU in [crowd_iou_min, crowd_iou_max]; no pair may
  /// exceed crowd_iou_max. Setting both to 0 places pedestrians freely.
  double crowd_iou_min = 0.3;
  double crowd_iou_max = 0.5;
  double aspect_ratio = 0.41;  // width / height
  double min_height = 120.0;
  double max_height = 200.0;
  int distractors = 0;
  double distractor_min_aspect = 0.12;
  double distractor_max_aspect = 0.3;
  /// Minimum fraction of a full box that must stay visible after occlusion.
  double min_visible_fraction = 0.15;
  int max_retries = 2000;

  void validate() const;
};

/// Deterministic for a given (config, seed). Throws InfeasibleConfig when
/// placement keeps failing after max_retries attempts.
Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed);

/// Visible boxes carved by occlusion: a pedestrian with a larger y2 (lower
/// in the image) is nearer and occludes those behind it.
void carve_visible_boxes(std::vector<Pedestrian>& pedestrians);

}  // namespace crowdloss
