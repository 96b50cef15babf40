#pragma once

#include <cstdint>
#include <vector>

#include "crowdloss/baselines.hpp"
#include "crowdloss/geometry.hpp"
#include "crowdloss/scene.hpp"

namespace crowdloss {

/// Grid of pedestrian-existence probabilities; cell (x, y) covers
/// [x*stride, (x+1)*stride) x [y*stride, (y+1)*stride) in scene units.
class ProbabilityMap {
 public:
  ProbabilityMap(int width, int height, double stride, std::vector<double> values);
  ProbabilityMap(int width, int height, double stride, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  double stride() const { return stride_; }
  std::size_t size() const { return values_.size(); }
  double at(int x, int y) const { return values_[index(x, y)]; }
  void set(int x, int y, double v);
  const std::vector<double>& values() const { return values_; }
  Point cell_center(int x, int y) const { return {(x + 0.5) * stride_, (y + 0.5) * stride_}; }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  double stride_;
  std::vector<double> values_;
};

enum class CellLabel : char { Positive = 'P', Ignored = 'I', Negative = 'N' };

class TargetMap {
 public:
  TargetMap(int width, int height, double stride, CellLabel fill = CellLabel::Negative);

  int width() const { return width_; }
  int height() const { return height_; }
  double stride() const { return stride_; }
  CellLabel at(int x, int y) const { return labels_[index(x, y)]; }
  void set(int x, int y, CellLabel l) { labels_[index(x, y)] = l; }
  std::size_t count(CellLabel l) const;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  double stride_;
  std::vector<CellLabel> labels_;
};

struct AnchorSpec {
  std::vector<double> scales{64.0, 128.0};  // sqrt(area) in scene units
  std::vector<double> ratios{0.41};         // width / height
};

struct Anchor {
  int cell_x = 0;
  int cell_y = 0;
  BBox box;
};

struct AnchorSet {
  std::vector<Anchor> anchors;
  double threshold = 0.0;
  std::size_t retained_cells = 0;
  std::size_t total_cells = 0;
  /// No cell exceeded the threshold, so every cell was kept.
  bool fallback = false;
};

/// Root mean square of all cell values.
double dynamic_threshold(const ProbabilityMap& map);

/// Keep anchors whose center cell is strictly above the RMS threshold; one
/// anchor per (scale, ratio) at each retained cell center.
AnchorSet select_anchors(const ProbabilityMap& map, const AnchorSpec& spec);
/// Every cell, as in uniform sliding-window sampling.
AnchorSet all_cell_anchors(const ProbabilityMap& map, const AnchorSpec& spec);

/// PR = cells whose center lies in a visible box, IR = in a full box but no
/// visible box, NR = the rest. Positive wins across pedestrians.
TargetMap build_target_map(const Scene& scene, int width, int height, double stride);

/// Mean focal loss over positive and negative cells; ignored cells are
/// skipped and an all-ignored map gives 0.
double location_branch_loss(const ProbabilityMap& map, const TargetMap& targets, const CompositeConfig& cfg = {});

struct NegativeStats {
  std::size_t selected_negatives = 0;
  std::size_t selected_hits = 0;
  std::size_t uniform_negatives = 0;
  std::size_t uniform_hits = 0;
  double selected_fraction = 0.0;
  double uniform_fraction = 0.0;
};

/// Negatives are anchors with IoU below `negative_iou` against every GT; a
/// hit is a negative whose center lies in a distractor box.
NegativeStats negative_informativeness(const AnchorSet& selected, const AnchorSet& uniform, const Scene& scene,
                                       double negative_iou = 0.3);

struct LabeledAnchors {
  std::vector<Anchor> positives;  // IoU >= positive_iou with some GT
  std::vector<Anchor> negatives;  // IoU < negative_iou with every GT
};

/// Training anchors after location selection. Negatives always come from
/// the selected cells; positives do too unless restrict_positives is off.
LabeledAnchors training_anchors(const ProbabilityMap& map, const AnchorSpec& spec, const Scene& scene,
                                bool restrict_positives = true, double positive_iou = 0.5,
                                double negative_iou = 0.3);

struct BumpMapConfig {
  int width = 100;
  int height = 100;
  double background = 0.05;  // upper bound of uniform background noise
  double min_peak = 0.6;
  double max_peak = 1.0;
  double spread = 0.35;  // Gaussian sigma as a fraction of box width/height
};

/// Synthetic location-branch output: Gaussian bumps on pedestrians and
/// distractors over low background noise. Stride = scene width / map width.
ProbabilityMap bump_map(const Scene& scene, const BumpMapConfig& cfg, std::uint64_t seed);
/// 1 on cells whose center lies in a pedestrian or distractor box, else 0.
ProbabilityMap indicator_map(const Scene& scene, int width, int height, double stride);

}  // namespace crowdloss
