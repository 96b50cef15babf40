#include "crowdloss/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "crowdloss/error.hpp"
#include "crowdloss/parallel.hpp"

namespace crowdloss {

void SimConfig::validate() const {
  scene.validate();
  if (!(jitter >= 0.0)) throw InvalidInput("SimConfig: jitter must be >= 0");
  if (proposals_per_gt < 1) throw InvalidInput("SimConfig: proposals_per_gt must be >= 1");
  if (steps < 0) throw InvalidInput("SimConfig: steps must be >= 0");
  if (!(step_size > 0.0)) throw InvalidInput("SimConfig: step_size must be positive");
  if (!(target_sharpness > 0.0)) throw InvalidInput("SimConfig: target_sharpness must be positive");
  if (!(divergence_factor > 1.0)) throw InvalidInput("SimConfig: divergence_factor must exceed 1");
  if (!(min_box_size > 0.0)) throw InvalidInput("SimConfig: min_box_size must be positive");
}

CompositeConfig default_simulation_loss() {
  CompositeConfig c;
  c.smoothl1_beta = 0.02;
  c.regression_norm = RegressionNorm::PerGroundTruth;
  return c;
}

std::vector<BBox> SimResult::final_boxes() const {
  std::vector<BBox> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) out.push_back(p.final);
  return out;
}

namespace {

BBox clip_to(const BBox& b, double width, double height, double min_size) {
  double x1 = std::clamp(b.x1(), 0.0, width), x2 = std::clamp(b.x2(), 0.0, width);
  double y1 = std::clamp(b.y1(), 0.0, height), y2 = std::clamp(b.y2(), 0.0, height);
  if (x2 - x1 < min_size) {
    x1 = std::clamp(0.5 * (x1 + x2) - 0.5 * min_size, 0.0, width - min_size);
    x2 = x1 + min_size;
  }
  if (y2 - y1 < min_size) {
    y1 = std::clamp(0.5 * (y1 + y2) - 0.5 * min_size, 0.0, height - min_size);
    y2 = y1 + min_size;
  }
  return BBox(x1, y1, x2, y2);
}

BBox scaled(const BBox& b, double k) { return BBox(b.x1() * k, b.y1() * k, b.x2() * k, b.y2() * k); }

}  // namespace

ProposalSet spawn_proposals(const Scene& scene, const SimConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> score(0.5, 1.0);
  ProposalSet out;
  for (std::size_t i = 0; i < scene.pedestrians.size(); ++i) {
    const BBox& g = scene.pedestrians[i].full;
    for (int k = 0; k < cfg.proposals_per_gt; ++k) {
      const double dx = normal(rng) * cfg.jitter * g.width();
      const double dy = normal(rng) * cfg.jitter * g.height();
      const double sw = std::exp(normal(rng) * cfg.jitter);
      const double sh = std::exp(normal(rng) * cfg.jitter);
      // Written so that zero jitter reproduces the GT corners exactly.
      const double gx = 0.5 * g.width() * (1.0 - sw);
      const double gy = 0.5 * g.height() * (1.0 - sh);
      const BBox raw(g.x1() + dx + gx, g.y1() + dy + gy, g.x2() + dx - gx, g.y2() + dy - gy);
      out.boxes.push_back(clip_to(raw, scene.width, scene.height, 1e-6 * scene.height));
      out.origin.push_back(static_cast<int>(i));
      out.scores.push_back(score(rng));
    }
  }
  return out;
}

std::vector<BBox> perceived_targets(std::span<const BBox> gts, std::span<const BBox> proposals,
                                    std::span<const int> origin, double sharpness) {
  std::vector<BBox> out;
  out.reserve(proposals.size());
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    std::vector<double> w(gts.size(), 0.0);
    double best = 0.0;
    std::size_t best_i = static_cast<std::size_t>(origin[k]);
    for (std::size_t i = 0; i < gts.size(); ++i) {
      w[i] = iou(gts[i], proposals[k]);
      if (w[i] > best) {
        best = w[i];
        best_i = i;
      }
    }
    if (best <= 0.0) {
      out.push_back(gts[static_cast<std::size_t>(origin[k])]);
      continue;
    }
    if (std::isinf(sharpness)) {
      out.push_back(gts[best_i]);
      continue;
    }
    double total = 0.0;
    for (auto& v : w) {
      v = v > 0.0 ? std::pow(v / best, sharpness) : 0.0;
      total += v;
    }
    std::array<double, 4> c{};
    for (std::size_t i = 0; i < gts.size(); ++i) {
      if (w[i] == 0.0) continue;
      const auto gc = gts[i].coords();
      for (int j = 0; j < 4; ++j) c[static_cast<std::size_t>(j)] += (w[i] / total) * gc[static_cast<std::size_t>(j)];
    }
    out.push_back(BBox::from_coords(c));
  }
  return out;
}

double overlap_occupancy(std::span<const BBox> gts, std::span<const BBox> boxes) {
  if (boxes.empty()) return 0.0;
  int inside = 0;
  for (const BBox& b : boxes) {
    const Point c = center(b);
    bool hit = false;
    for (std::size_t a = 0; a < gts.size() && !hit; ++a) {
      for (std::size_t o = a + 1; o < gts.size() && !hit; ++o) {
        hit = intersection_area(gts[a], gts[o]) > 0.0 && contains_point(gts[a], c) && contains_point(gts[o], c);
      }
    }
    inside += hit ? 1 : 0;
  }
  return static_cast<double>(inside) / static_cast<double>(boxes.size());
}

SimResult run_descent(const Scene& scene, const ProposalSet& proposals, const CompositeConfig& loss,
                      const CouLossConfig& cou, const SimConfig& cfg) {
  cfg.validate();
  loss.validate();
  cou.validate();
  if (scene.pedestrians.empty()) throw InvalidInput("run_descent: scene has no pedestrians");
  if (proposals.boxes.size() != proposals.origin.size()) throw InvalidInput("run_descent: malformed proposal set");

  // Descent runs in coordinates normalized by the scene height.
  const double unit = scene.height;
  const double inv = 1.0 / unit;
  std::vector<BBox> gts;
  for (const auto& p : scene.pedestrians) gts.push_back(scaled(p.full, inv));
  std::vector<BBox> boxes;
  for (const auto& b : proposals.boxes) boxes.push_back(scaled(b, inv));

  SimResult result;
  std::vector<BBox> targets;
  std::vector<Assignment> assignments;
  auto refresh = [&]() {
    targets = perceived_targets(gts, boxes, proposals.origin, cfg.target_sharpness);
    assignments = assign_proposals(gts, boxes, cou);
  };
  refresh();

  for (int step = 0;; ++step) {
    if (step > 0 && cfg.recompute_assignments) refresh();
    const CompositeReport rep = composite_regression_loss(gts, boxes, targets, assignments, loss, cou);
    result.curve.push_back({rep.total, rep.smooth_l1, rep.iou_loss, rep.cou_attraction, rep.cou_repulsion});
    const double initial = result.curve.front().total;
    if (!std::isfinite(rep.total) || (initial > 0.0 && rep.total > cfg.divergence_factor * initial)) {
      std::ostringstream os;
      os << "run_descent: diverged at step " << step << " (loss " << rep.total << ", initial " << initial << ")";
      throw NumericalAbort(os.str());
    }
    if (step == cfg.steps || rep.total == 0.0) break;

    const CompositeGradient grad = composite_regression_gradient(gts, boxes, targets, assignments, loss, cou);
    result.kink_warnings += grad.kinks.size();
    bool moved = false;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      auto c = boxes[k].coords();
      for (std::size_t j = 0; j < 4; ++j) {
        if (grad.total[k][j] != 0.0) moved = true;
        c[j] -= cfg.step_size * grad.total[k][j];
      }
      for (double v : c) {
        if (!std::isfinite(v)) throw NumericalAbort("run_descent: non-finite proposal coordinate");
      }
      if (c[2] - c[0] >= cfg.min_box_size && c[3] - c[1] >= cfg.min_box_size) {
        boxes[k] = BBox::from_coords(c);
      } else {
        ++result.projections;
        boxes[k] = BBox::from_center(0.5 * (c[0] + c[2]), 0.5 * (c[1] + c[3]),
                                     std::max(c[2] - c[0], cfg.min_box_size), std::max(c[3] - c[1], cfg.min_box_size));
      }
    }
    result.steps_run = step + 1;
    if (!moved) break;
  }

  double iou_sum = 0.0;
  int drifted = 0;
  std::vector<BBox> finals;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    ProposalTrack t{proposals.origin[k], proposals.boxes[k], scaled(boxes[k], unit), 0.0, 0.0, false, false};
    const auto o = static_cast<std::size_t>(t.origin);
    t.final_iou_target = iou(gts[o], boxes[k]);
    for (std::size_t i = 0; i < gts.size(); ++i) {
      if (i != o) t.final_max_iou_other = std::max(t.final_max_iou_other, iou(gts[i], boxes[k]));
    }
    t.drifted = t.final_max_iou_other > t.final_iou_target;
    t.in_overlap = overlap_occupancy(gts, std::span<const BBox>(&boxes[k], 1)) > 0.0;
    iou_sum += t.final_iou_target;
    drifted += t.drifted ? 1 : 0;
    result.proposals.push_back(t);
  }
  if (!boxes.empty()) {
    const double n = static_cast<double>(boxes.size());
    result.mean_final_iou = iou_sum / n;
    result.drift_rate = drifted / n;
    result.overlap_occupancy = overlap_occupancy(gts, boxes);
  }
  return result;
}

std::vector<Detection> distractor_detections(const Scene& scene, std::uint64_t seed, int scene_id) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> score(0.3, 0.9);
  std::vector<Detection> out;
  for (const BBox& d : scene.distractors) {
    for (int k = 0; k < 2; ++k) {
      const double dx = 0.1 * normal(rng) * d.width();
      const double dy = 0.1 * normal(rng) * d.height();
      const BBox b = clip_to(BBox(d.x1() + dx, d.y1() + dy, d.x2() + dx, d.y2() + dy), scene.width, scene.height,
                             1e-6 * scene.height);
      out.push_back({b, score(rng), scene_id});
    }
  }
  return out;
}

LossVariant make_variant(const std::string& name, const CompositeConfig& base) {
  LossVariant v{name, base};
  if (name == "baseline") {
    v.loss.use_attraction = v.loss.use_repulsion = false;
    v.loss.iou_loss_weight = 0.0;
  } else if (name == "couloss") {
    v.loss.use_attraction = v.loss.use_repulsion = true;
    v.loss.iou_loss_weight = 0.0;
  } else if (name == "only_att") {
    v.loss.use_attraction = true;
    v.loss.use_repulsion = false;
    v.loss.iou_loss_weight = 0.0;
  } else if (name == "only_rep") {
    v.loss.use_attraction = false;
    v.loss.use_repulsion = true;
    v.loss.iou_loss_weight = 0.0;
  } else if (name == "iou_loss") {
    v.loss.use_attraction = v.loss.use_repulsion = false;
    if (v.loss.iou_loss_weight == 0.0) v.loss.iou_loss_weight = 1.0;
  } else {
    throw InvalidInput("unknown loss variant '" + name + "'");
  }
  return v;
}

std::uint64_t proposal_seed(std::uint64_t seed) { return seed + 1000; }
std::uint64_t detection_seed(std::uint64_t seed) { return seed + 2000; }
std::uint64_t map_seed(std::uint64_t seed) { return seed + 3000; }

std::vector<SeedRun> run_suite(const SimConfig& cfg, std::span<const LossVariant> variants, const CouLossConfig& cou,
                               std::span<const std::uint64_t> seeds, std::size_t threads) {
  cfg.validate();
  std::vector<SeedRun> runs(seeds.size());
  parallel_for(
      seeds.size(),
      [&](std::size_t k) {
        SeedRun& r = runs[k];
        r.seed = seeds[k];
        r.scene = generate_scene(cfg.scene, r.seed);
        r.proposals = spawn_proposals(r.scene, cfg, proposal_seed(r.seed));
        for (const LossVariant& v : variants) {
          try {
            r.results.push_back(run_descent(r.scene, r.proposals, v.loss, cou, cfg));
          } catch (const NumericalAbort& e) {
            r.abort_message = "seed " + std::to_string(r.seed) + ", variant " + v.name + ": " + e.what();
            return;
          }
        }
      },
      threads);
  return runs;
}

SceneOutcome scene_outcome(const SeedRun& run, std::size_t variant, int scene_id) {
  if (variant >= run.results.size()) throw InvalidInput("scene_outcome: variant has no result");
  SceneOutcome out{run.scene.full_boxes(), distractor_detections(run.scene, detection_seed(run.seed), scene_id)};
  const SimResult& res = run.results[variant];
  for (std::size_t k = 0; k < res.proposals.size(); ++k) {
    out.detections.push_back({res.proposals[k].final, run.proposals.scores[k], scene_id});
  }
  return out;
}

std::vector<double> default_nms_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back((30 + 5 * k) / 100.0);
  return grid;
}

NmsSensitivity nms_sensitivity_experiment(std::span<const VariantOutcome> variants,
                                          std::span<const double> thresholds, double match_iou) {
  NmsSensitivity out;
  for (const VariantOutcome& v : variants) {
    int total_gt = 0;
    for (const auto& s : v.scenes) total_gt += static_cast<int>(s.gts.size());
    std::vector<int> misses;
    for (double thr : thresholds) {
      NmsSweepRow row{v.variant, thr};
      for (const auto& s : v.scenes) {
        const auto kept = greedy_nms(s.detections, thr);
        const MatchResult m = match(kept, s.gts, match_iou);
        row.kept += static_cast<int>(kept.size());
        row.true_positives += m.true_positives;
        row.false_positives += m.false_positives;
        row.misses += m.misses;
      }
      row.miss_rate = total_gt > 0 ? static_cast<double>(row.misses) / total_gt : 0.0;
      misses.push_back(row.misses);
      out.rows.push_back(row);
    }
    NmsVariantSummary sum{v.variant};
    if (!misses.empty()) {
      sum.min_misses = *std::min_element(misses.begin(), misses.end());
      sum.max_misses = *std::max_element(misses.begin(), misses.end());
      sum.spread = sum.max_misses - sum.min_misses;
      double mean = 0.0;
      for (int m : misses) mean += m;
      mean /= static_cast<double>(misses.size());
      for (int m : misses) sum.variance += (m - mean) * (m - mean);
      sum.variance /= static_cast<double>(misses.size());
    }
    out.summary.push_back(sum);
  }
  return out;
}

}  // namespace crowdloss
