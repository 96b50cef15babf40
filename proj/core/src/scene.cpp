#include "crowdloss/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "crowdloss/error.hpp"

namespace crowdloss {

std::vector<BBox> Scene::full_boxes() const {
  std::vector<BBox> out;
  out.reserve(pedestrians.size());
  for (const auto& p : pedestrians) out.push_back(p.full);
  return out;
}

void Scene::validate() const {
  if (!(width > 0.0 && height > 0.0)) throw InvalidInput("Scene: extent must be positive");
  const BBox extent(0.0, 0.0, width, height);
  for (const auto& p : pedestrians) {
    if (!contains(p.full, p.visible)) throw InvalidInput("Scene: visible box not inside full box");
    if (!contains(extent, p.full)) throw InvalidInput("Scene: pedestrian outside extent");
  }
  for (const auto& d : distractors) {
    if (!contains(extent, d)) throw InvalidInput("Scene: distractor outside extent");
  }
}

void SceneConfig::validate() const {
  if (!(width > 0.0 && height > 0.0)) throw InvalidInput("SceneConfig: extent must be positive");
  if (pedestrians < 0 || distractors < 0) throw InvalidInput("SceneConfig: negative counts");
  if (!(crowd_iou_min >= 0.0 && crowd_iou_min <= crowd_iou_max && crowd_iou_max < 1.0)) {
    throw InvalidInput("SceneConfig: crowd IoU band must satisfy 0 <= min <= max < 1");
  }
  if (!(aspect_ratio > 0.0)) throw InvalidInput("SceneConfig: aspect ratio must be positive");
  if (!(min_height > 0.0 && min_height <= max_height && max_height < height)) {
    throw InvalidInput("SceneConfig: pedestrian height band must fit inside the extent");
  }
  if (max_height * aspect_ratio >= width) throw InvalidInput("SceneConfig: pedestrians wider than the extent");
  if (!(distractor_min_aspect > 0.0 && distractor_min_aspect <= distractor_max_aspect)) {
    throw InvalidInput("SceneConfig: distractor aspect band invalid");
  }
  if (max_retries < 1) throw InvalidInput("SceneConfig: max_retries must be >= 1");
}

namespace {

// Largest of the four slabs of `box` left after removing `occluder`.
std::optional<BBox> subtract(const BBox& box, const BBox& occluder) {
  if (intersection_area(box, occluder) <= 0.0) return box;
  std::optional<BBox> best;
  auto consider = [&](double x1, double y1, double x2, double y2) {
    if (x2 > x1 && y2 > y1) {
      BBox c(x1, y1, x2, y2);
      if (!best || c.area() > best->area()) best = c;
    }
  };
  consider(box.x1(), box.y1(), std::min(box.x2(), occluder.x1()), box.y2());
  consider(std::max(box.x1(), occluder.x2()), box.y1(), box.x2(), box.y2());
  consider(box.x1(), box.y1(), box.x2(), std::min(box.y2(), occluder.y1()));
  consider(box.x1(), std::max(box.y1(), occluder.y2()), box.x2(), box.y2());
  return best;
}

}  // namespace

void carve_visible_boxes(std::vector<Pedestrian>& pedestrians) {
  for (auto& p : pedestrians) {
    std::optional<BBox> visible = p.full;
    for (const auto& other : pedestrians) {
      if (&other == &p || !(other.full.y2() > p.full.y2())) continue;
      if (!visible) break;
      visible = subtract(*visible, other.full);
    }
    // A fully hidden pedestrian keeps a sliver at its head so the invariant
    // visible ⊆ full still holds; generate_scene rejects such layouts.
    p.visible = visible.value_or(BBox(p.full.x1(), p.full.y1(), p.full.x2(), p.full.y1() + 1e-3 * p.full.height()));
  }
}

Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool crowded = cfg.crowd_iou_max > 0.0;

  auto random_pedestrian = [&]() {
    const double h = cfg.min_height + (cfg.max_height - cfg.min_height) * unit(rng);
    const double w = h * cfg.aspect_ratio;
    const double x1 = (cfg.width - w) * unit(rng);
    const double y1 = (cfg.height - h) * unit(rng);
    return BBox(x1, y1, x1 + w, y1 + h);
  };

  // Place a pedestrian next to an anchor so their IoU lands in the band.
  auto neighbour_of = [&](const BBox& anchor) -> std::optional<BBox> {
    const double h = cfg.min_height + (cfg.max_height - cfg.min_height) * unit(rng);
    const double w = h * cfg.aspect_ratio;
    const double target = cfg.crowd_iou_min + (cfg.crowd_iou_max - cfg.crowd_iou_min) * unit(rng);
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    // Offsets mostly horizontal: crowds line up side by side.
    const double dirx = std::cos(angle), diry = 0.35 * std::sin(angle);
    const Point c = center(anchor);
    // IoU is monotone in the offset along a ray; bisect for the target value.
    double lo = 0.0, hi = 2.0 * (anchor.width() + anchor.height());
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      const BBox b = BBox::from_center(c.x + mid * dirx, c.y + mid * diry, w, h);
      (iou(anchor, b) > target ? lo : hi) = mid;
    }
    const BBox b = BBox::from_center(c.x + lo * dirx, c.y + lo * diry, w, h);
    if (b.x1() < 0.0 || b.y1() < 0.0 || b.x2() > cfg.width || b.y2() > cfg.height) return std::nullopt;
    return b;
  };

  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    std::vector<Pedestrian> peds;
    bool ok = true;
    for (int k = 0; k < cfg.pedestrians && ok; ++k) {
      std::optional<BBox> box;
      if (k == 0 || !crowded) {
        box = random_pedestrian();
      } else {
        const std::size_t anchor = static_cast<std::size_t>(unit(rng) * static_cast<double>(peds.size()));
        box = neighbour_of(peds[std::min(anchor, peds.size() - 1)].full);
      }
      if (!box) {
        ok = false;
        break;
      }
      double max_iou = 0.0;
      for (const auto& p : peds) max_iou = std::max(max_iou, iou(p.full, *box));
      if (crowded && k > 0 && (max_iou < cfg.crowd_iou_min || max_iou > cfg.crowd_iou_max)) ok = false;
      if (!crowded && max_iou > 0.0) ok = false;
      if (ok) peds.push_back({*box, *box});
    }
    if (!ok) continue;
    carve_visible_boxes(peds);
    for (const auto& p : peds) {
      if (p.visible.area() < cfg.min_visible_fraction * p.full.area()) ok = false;
    }
    if (!ok) continue;

    Scene scene;
    scene.width = cfg.width;
    scene.height = cfg.height;
    scene.pedestrians = std::move(peds);
    // Distractors: thin upright structures that do not touch any pedestrian.
    int placed = 0;
    for (int tries = 0; placed < cfg.distractors && tries < cfg.max_retries; ++tries) {
      const double h = cfg.min_height + (cfg.max_height - cfg.min_height) * unit(rng);
      const double aspect =
          cfg.distractor_min_aspect + (cfg.distractor_max_aspect - cfg.distractor_min_aspect) * unit(rng);
      const double w = h * aspect;
      const double x1 = (cfg.width - w) * unit(rng);
      const double y1 = (cfg.height - h) * unit(rng);
      const BBox d(x1, y1, x1 + w, y1 + h);
      bool clear = true;
      for (const auto& p : scene.pedestrians) clear = clear && intersection_area(p.full, d) <= 0.0;
      for (const auto& o : scene.distractors) clear = clear && intersection_area(o, d) <= 0.0;
      if (clear) {
        scene.distractors.push_back(d);
        ++placed;
      }
    }
    if (placed < cfg.distractors) continue;
    return scene;
  }
  throw InfeasibleConfig("generate_scene: could not place pedestrians within the retry budget");
}

}  // namespace crowdloss
