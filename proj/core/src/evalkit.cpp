#include "crowdloss/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crowdloss/error.hpp"

namespace crowdloss {

namespace {

std::vector<int> score_order(std::span<const Detection> dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dets[static_cast<std::size_t>(a)].score > dets[static_cast<std::size_t>(b)].score;
  });
  return order;
}

}  // namespace

std::vector<Detection> greedy_nms(std::span<const Detection> dets, double threshold) {
  std::vector<Detection> kept;
  for (int idx : score_order(dets)) {
    const Detection& d = dets[static_cast<std::size_t>(idx)];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.scene_id == d.scene_id && iou(k.box, d.box) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

MatchResult match(std::span<const Detection> dets, std::span<const BBox> gts, double iou_threshold) {
  std::vector<EvalGt> eg;
  eg.reserve(gts.size());
  for (const BBox& g : gts) eg.push_back({g, false});
  return match(dets, std::span<const EvalGt>(eg), iou_threshold);
}

MatchResult match(std::span<const Detection> dets, std::span<const EvalGt> gts, double iou_threshold) {
  MatchResult r;
  r.order = score_order(dets);
  r.matched_gt.assign(dets.size(), -1);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t rank = 0; rank < r.order.size(); ++rank) {
    const Detection& d = dets[static_cast<std::size_t>(r.order[rank])];
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].ignore) continue;
      const double u = iou(gts[g].box, d.box);
      if (u >= best_iou && (best < 0 || u > best_iou)) {
        best_iou = u;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      r.matched_gt[rank] = best;
      ++r.true_positives;
      continue;
    }
    bool absorbed = false;
    for (std::size_t g = 0; g < gts.size() && !absorbed; ++g) {
      absorbed = gts[g].ignore && iou(gts[g].box, d.box) >= iou_threshold;
    }
    if (absorbed) {
      r.matched_gt[rank] = -2;
    } else {
      ++r.false_positives;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gts[g].ignore && !taken[g]) ++r.misses;
  }
  return r;
}

EvalCurve fppi_curve(std::span<const Detection> dets, std::span<const std::vector<BBox>> gts_per_scene,
                     double iou_threshold) {
  std::vector<std::vector<EvalGt>> eg(gts_per_scene.size());
  for (std::size_t s = 0; s < gts_per_scene.size(); ++s) {
    for (const BBox& g : gts_per_scene[s]) eg[s].push_back({g, false});
  }
  return fppi_curve(dets, std::span<const std::vector<EvalGt>>(eg), iou_threshold);
}

EvalCurve fppi_curve(std::span<const Detection> dets, std::span<const std::vector<EvalGt>> gts_per_scene,
                     double iou_threshold) {
  if (gts_per_scene.empty()) throw InvalidInput("fppi_curve: at least one scene required");
  int total_gt = 0;
  for (const auto& scene : gts_per_scene) {
    for (const auto& g : scene) total_gt += g.ignore ? 0 : 1;
  }
  if (total_gt == 0) throw InvalidInput("fppi_curve: no ground truth to evaluate");

  // Greedy matching per scene is prefix-consistent in score order, so one
  // pass gives the outcome at every threshold.
  struct Outcome {
    double score;
    int tp;
    int fp;
  };
  std::vector<Outcome> outcomes;
  std::vector<std::vector<Detection>> per_scene(gts_per_scene.size());
  for (const Detection& d : dets) {
    if (d.scene_id < 0 || static_cast<std::size_t>(d.scene_id) >= gts_per_scene.size()) {
      throw InvalidInput("fppi_curve: detection scene id out of range");
    }
    per_scene[static_cast<std::size_t>(d.scene_id)].push_back(d);
  }
  for (std::size_t s = 0; s < per_scene.size(); ++s) {
    const MatchResult m = match(per_scene[s], gts_per_scene[s], iou_threshold);
    for (std::size_t rank = 0; rank < m.order.size(); ++rank) {
      const double score = per_scene[s][static_cast<std::size_t>(m.order[rank])].score;
      const int mg = m.matched_gt[rank];
      outcomes.push_back({score, mg >= 0 ? 1 : 0, mg == -1 ? 1 : 0});
    }
  }
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const Outcome& a, const Outcome& b) { return a.score > b.score; });

  EvalCurve curve;
  const double n_scenes = static_cast<double>(gts_per_scene.size());
  if (outcomes.empty()) {
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
    return curve;
  }
  int tp = 0, fp = 0;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    tp += outcomes[k].tp;
    fp += outcomes[k].fp;
    if (k + 1 < outcomes.size() && outcomes[k + 1].score == outcomes[k].score) continue;
    curve.points.push_back({outcomes[k].score, fp / n_scenes, 1.0 - static_cast<double>(tp) / total_gt});
  }
  return curve;
}

std::vector<double> mr_reference_points() {
  std::vector<double> refs(9);
  for (int k = 0; k < 9; ++k) refs[static_cast<std::size_t>(k)] = std::pow(10.0, -2.0 + 0.25 * k);
  return refs;
}

double log_average_miss_rate(const EvalCurve& curve) {
  if (curve.points.empty()) throw InvalidInput("log_average_miss_rate: empty curve");
  constexpr double floor = 1e-4;
  double highest = 0.0;
  for (const auto& p : curve.points) highest = std::max(highest, p.miss_rate);
  double log_sum = 0.0;
  for (double ref : mr_reference_points()) {
    // Largest FPPI not above the reference; among equal FPPI the lowest miss rate.
    const CurvePoint* pick = nullptr;
    for (const auto& p : curve.points) {
      if (p.fppi > ref) continue;
      if (pick == nullptr || p.fppi > pick->fppi || (p.fppi == pick->fppi && p.miss_rate < pick->miss_rate)) {
        pick = &p;
      }
    }
    const double mr = pick != nullptr ? pick->miss_rate : highest;
    log_sum += std::log(std::max(mr, floor));
  }
  return std::exp(log_sum / 9.0);
}

std::optional<double> fppi_at_miss_rate(const EvalCurve& curve, double miss_rate) {
  for (const auto& p : curve.points) {
    if (p.miss_rate <= miss_rate) return p.fppi;
  }
  return std::nullopt;
}

}  // namespace crowdloss
