#pragma once

#include <optional>
#include <span>
#include <vector>

#include "crowdloss/geometry.hpp"

namespace crowdloss {

struct Detection {
  BBox box;
  double score = 0.0;
  int scene_id = 0;
};

/// Score-descending greedy suppression: a box is dropped when its IoU with
/// an already kept box exceeds `threshold`. Equal scores keep input order.
std::vector<Detection> greedy_nms(std::span<const Detection> dets, double threshold);

/// Ground truth with an optional ignore flag (outside the evaluated subset).
struct EvalGt {
  BBox box;
  bool ignore = false;
};

struct MatchResult {
  int true_positives = 0;
  int false_positives = 0;
  int misses = 0;
  /// Per detection in descending-score order: matched GT index, -1 for a false
  /// positive, -2 for a detection absorbed by an ignored GT.
  std::vector<int> matched_gt;
  /// Detection indices (into the input span) in the order they were matched.
  std::vector<int> order;
};

/// Greedy matching in descending score: each detection takes the unmatched
/// GT of highest IoU >= iou_threshold (ties to the lowest index).
MatchResult match(std::span<const Detection> dets, std::span<const BBox> gts, double iou_threshold = 0.5);
MatchResult match(std::span<const Detection> dets, std::span<const EvalGt> gts, double iou_threshold = 0.5);

struct CurvePoint {
  double threshold = 0.0;
  double fppi = 0.0;
  double miss_rate = 1.0;
};

struct EvalCurve {
  std::vector<CurvePoint> points;  // score threshold descending
};

/// Sweeps every distinct score. `gts_per_scene[s]` holds scene s's GTs;
/// detection scene ids index into it. Throws InvalidInput when no
/// (non-ignored) GT exists or a scene id is out of range.
EvalCurve fppi_curve(std::span<const Detection> dets, std::span<const std::vector<EvalGt>> gts_per_scene,
                     double iou_threshold = 0.5);
EvalCurve fppi_curve(std::span<const Detection> dets, std::span<const std::vector<BBox>> gts_per_scene,
                     double iou_threshold = 0.5);

/// Log-average miss rate over 9 FPPI reference points log-spaced in
/// [1e-2, 1e0]; miss rates are floored at 1e-4 before the logarithm.
double log_average_miss_rate(const EvalCurve& curve);

/// The 9 reference FPPI values used by log_average_miss_rate.
std::vector<double> mr_reference_points();

/// FPPI of the first curve point whose miss rate is <= the target.
std::optional<double> fppi_at_miss_rate(const EvalCurve& curve, double miss_rate);

/// Evaluation subset as a predicate on (box height, visible-area ratio).
struct SubsetFilter {
  double min_height = 0.0;
  double max_height = 1e300;
  double min_visibility = 0.0;
  double max_visibility = 1.0;

  bool accepts(double height, double visibility) const {
    return height >= min_height && height <= max_height && visibility >= min_visibility &&
           visibility <= max_visibility;
  }

  static SubsetFilter all() { return {}; }
  static SubsetFilter reasonable() { return {50.0, 1e300, 0.65, 1.0}; }
  static SubsetFilter heavy() { return {50.0, 1e300, 0.2, 0.65}; }
  static SubsetFilter partial() { return {50.0, 1e300, 0.65, 0.9}; }
  static SubsetFilter bare() { return {50.0, 1e300, 0.9, 1.0}; }
};

}  // namespace crowdloss
