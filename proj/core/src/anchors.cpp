#include "crowdloss/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crowdloss/error.hpp"

namespace crowdloss {

namespace {

void check_shape(int width, int height, double stride) {
  if (width < 1 || height < 1) throw InvalidInput("grid: width and height must be >= 1");
  if (!(stride > 0.0) || !std::isfinite(stride)) throw InvalidInput("grid: stride must be positive");
}

}  // namespace

ProbabilityMap::ProbabilityMap(int width, int height, double stride, std::vector<double> values)
    : width_(width), height_(height), stride_(stride), values_(std::move(values)) {
  check_shape(width, height, stride);
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidInput("ProbabilityMap: value count does not match width * height");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("ProbabilityMap: values must lie in [0, 1]");
  }
}

ProbabilityMap::ProbabilityMap(int width, int height, double stride, double fill)
    : ProbabilityMap(width, height, stride,
                     std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                             static_cast<std::size_t>(std::max(height, 0)),
                                         fill)) {}

void ProbabilityMap::set(int x, int y, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("ProbabilityMap: values must lie in [0, 1]");
  values_[index(x, y)] = v;
}

TargetMap::TargetMap(int width, int height, double stride, CellLabel fill)
    : width_(width), height_(height), stride_(stride) {
  check_shape(width, height, stride);
  labels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

std::size_t TargetMap::count(CellLabel l) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

double dynamic_threshold(const ProbabilityMap& map) {
  // Normalizing by the peak makes a constant map return its value exactly.
  const double peak = *std::max_element(map.values().begin(), map.values().end());
  if (peak == 0.0) return 0.0;
  double sum = 0.0;
  for (double v : map.values()) sum += (v / peak) * (v / peak);
  return peak * std::sqrt(sum / static_cast<double>(map.size()));
}

namespace {

void add_cell_anchors(AnchorSet& set, const ProbabilityMap& map, const AnchorSpec& spec, int x, int y) {
  const Point c = map.cell_center(x, y);
  for (double s : spec.scales) {
    for (double r : spec.ratios) {
      const double sr = std::sqrt(r);
      set.anchors.push_back({x, y, BBox::from_center(c.x, c.y, s * sr, s / sr)});
    }
  }
}

void check_spec(const AnchorSpec& spec) {
  if (spec.scales.empty() || spec.ratios.empty()) throw InvalidInput("AnchorSpec: scales and ratios required");
  for (double s : spec.scales) {
    if (!(s > 0.0)) throw InvalidInput("AnchorSpec: scales must be positive");
  }
  for (double r : spec.ratios) {
    if (!(r > 0.0)) throw InvalidInput("AnchorSpec: ratios must be positive");
  }
}

}  // namespace

AnchorSet select_anchors(const ProbabilityMap& map, const AnchorSpec& spec) {
  check_spec(spec);
  AnchorSet set;
  set.threshold = dynamic_threshold(map);
  set.total_cells = map.size();
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.at(x, y) > set.threshold) {
        ++set.retained_cells;
        add_cell_anchors(set, map, spec, x, y);
      }
    }
  }
  if (set.retained_cells == 0) {
    AnchorSet all = all_cell_anchors(map, spec);
    all.threshold = set.threshold;
    all.fallback = true;
    return all;
  }
  return set;
}

AnchorSet all_cell_anchors(const ProbabilityMap& map, const AnchorSpec& spec) {
  check_spec(spec);
  AnchorSet set;
  set.total_cells = map.size();
  set.retained_cells = map.size();
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) add_cell_anchors(set, map, spec, x, y);
  }
  return set;
}

TargetMap build_target_map(const Scene& scene, int width, int height, double stride) {
  for (const auto& p : scene.pedestrians) {
    if (!contains(p.full, p.visible)) throw InvalidInput("build_target_map: visible box not inside full box");
  }
  TargetMap map(width, height, stride);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point c{(x + 0.5) * stride, (y + 0.5) * stride};
      bool positive = false, ignored = false;
      for (const auto& p : scene.pedestrians) {
        if (contains_point(p.visible, c)) {
          positive = true;
        } else if (contains_point(p.full, c)) {
          ignored = true;
        }
      }
      map.set(x, y, positive ? CellLabel::Positive : ignored ? CellLabel::Ignored : CellLabel::Negative);
    }
  }
  return map;
}

double location_branch_loss(const ProbabilityMap& map, const TargetMap& targets, const CompositeConfig& cfg) {
  if (map.width() != targets.width() || map.height() != targets.height()) {
    throw InvalidInput("location_branch_loss: probability and target maps differ in shape");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const CellLabel l = targets.at(x, y);
      if (l == CellLabel::Ignored) continue;
      sum += focal_loss(map.at(x, y), l == CellLabel::Positive ? 1 : 0, cfg.focal_gamma, cfg.focal_alpha);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

bool is_negative(const BBox& a, const Scene& scene, double negative_iou) {
  for (const auto& p : scene.pedestrians) {
    if (iou(p.full, a) >= negative_iou) return false;
  }
  return true;
}

bool in_distractor(const BBox& a, const Scene& scene) {
  const Point c = center(a);
  for (const auto& d : scene.distractors) {
    if (contains_point(d, c)) return true;
  }
  return false;
}

}  // namespace

NegativeStats negative_informativeness(const AnchorSet& selected, const AnchorSet& uniform, const Scene& scene,
                                       double negative_iou) {
  NegativeStats st;
  auto tally = [&](const AnchorSet& set, std::size_t& neg, std::size_t& hits) {
    for (const Anchor& a : set.anchors) {
      if (!is_negative(a.box, scene, negative_iou)) continue;
      ++neg;
      if (in_distractor(a.box, scene)) ++hits;
    }
  };
  tally(selected, st.selected_negatives, st.selected_hits);
  tally(uniform, st.uniform_negatives, st.uniform_hits);
  if (st.selected_negatives > 0) {
    st.selected_fraction = static_cast<double>(st.selected_hits) / static_cast<double>(st.selected_negatives);
  }
  if (st.uniform_negatives > 0) {
    st.uniform_fraction = static_cast<double>(st.uniform_hits) / static_cast<double>(st.uniform_negatives);
  }
  return st;
}

LabeledAnchors training_anchors(const ProbabilityMap& map, const AnchorSpec& spec, const Scene& scene,
                                bool restrict_positives, double positive_iou, double negative_iou) {
  const AnchorSet selected = select_anchors(map, spec);
  LabeledAnchors out;
  auto best_iou = [&](const BBox& a) {
    double best = 0.0;
    for (const auto& p : scene.pedestrians) best = std::max(best, iou(p.full, a));
    return best;
  };
  for (const Anchor& a : selected.anchors) {
    const double u = best_iou(a.box);
    if (u < negative_iou) out.negatives.push_back(a);
    if (restrict_positives && u >= positive_iou) out.positives.push_back(a);
  }
  if (!restrict_positives) {
    for (const Anchor& a : all_cell_anchors(map, spec).anchors) {
      if (best_iou(a.box) >= positive_iou) out.positives.push_back(a);
    }
  }
  return out;
}

ProbabilityMap bump_map(const Scene& scene, const BumpMapConfig& cfg, std::uint64_t seed) {
  const double stride = scene.width / cfg.width;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> values(static_cast<std::size_t>(cfg.width) * static_cast<std::size_t>(cfg.height));
  for (auto& v : values) v = cfg.background * unit(rng);

  struct Bump {
    Point c;
    double sx, sy, peak;
  };
  std::vector<Bump> bumps;
  auto add = [&](const BBox& b) {
    bumps.push_back({center(b), cfg.spread * b.width(), cfg.spread * b.height(),
                     cfg.min_peak + (cfg.max_peak - cfg.min_peak) * unit(rng)});
  };
  for (const auto& p : scene.pedestrians) add(p.full);
  for (const auto& d : scene.distractors) add(d);

  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const Point c{(x + 0.5) * stride, (y + 0.5) * stride};
      double& v = values[static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg.width) + static_cast<std::size_t>(x)];
      for (const Bump& b : bumps) {
        const double dx = (c.x - b.c.x) / b.sx, dy = (c.y - b.c.y) / b.sy;
        v = std::max(v, b.peak * std::exp(-0.5 * (dx * dx + dy * dy)));
      }
      v = std::clamp(v, 0.0, 1.0);
    }
  }
  return ProbabilityMap(cfg.width, cfg.height, stride, std::move(values));
}

ProbabilityMap indicator_map(const Scene& scene, int width, int height, double stride) {
  ProbabilityMap map(width, height, stride);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point c = map.cell_center(x, y);
      bool on = false;
      for (const auto& p : scene.pedestrians) on = on || contains_point(p.full, c);
      for (const auto& d : scene.distractors) on = on || contains_point(d, c);
      map.set(x, y, on ? 1.0 : 0.0);
    }
  }
  return map;
}

}  // namespace crowdloss
