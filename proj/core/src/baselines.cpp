#include "crowdloss/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowdloss/error.hpp"

namespace crowdloss {

void CompositeConfig::validate() const {
  if (alpha < 0.0 || gamma < 0.0 || smoothl1_weight < 0.0 || iou_loss_weight < 0.0) {
    throw InvalidInput("CompositeConfig: weights must be non-negative");
  }
  if (!(smoothl1_beta > 0.0)) throw InvalidInput("CompositeConfig: smoothl1_beta must be positive");
  if (focal_gamma < 0.0 || focal_alpha < 0.0 || focal_alpha > 1.0) {
    throw InvalidInput("CompositeConfig: focal parameters out of range");
  }
}

double smooth_l1(const BBox& pred, const BBox& target, double beta) {
  const auto p = pred.coords();
  const auto t = target.coords();
  double sum = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double d = std::abs(p[k] - t[k]);
    sum += d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
  }
  return sum;
}

BoxGradient smooth_l1_gradient(const BBox& pred, const BBox& target, double beta) {
  const auto p = pred.coords();
  const auto t = target.coords();
  BoxGradient g{};
  for (int k = 0; k < 4; ++k) {
    const double d = p[k] - t[k];
    g[k] = std::abs(d) < beta ? d / beta : (d > 0.0 ? 1.0 : -1.0);
  }
  return g;
}

double iou_loss(const BBox& pred, const BBox& target, double floor) {
  const double u = iou(pred, target);
  if (u <= 0.0) throw NoForce("iou_loss: boxes do not overlap");
  return -std::log(std::max(u, floor));
}

BoxGradient iou_loss_gradient(const BBox& pred, const BBox& target, double floor) {
  const double u = iou(target, pred);
  if (u <= floor) return {};
  return (-1.0 / u) * iou_gradient(target, pred);
}

double focal_loss(double prob, int label, double focal_gamma, double focal_alpha, bool* clamped) {
  constexpr double eps = 1e-12;
  if (label != 0 && label != 1) throw InvalidInput("focal_loss: label must be 0 or 1");
  if (std::isnan(prob)) throw InvalidInput("focal_loss: probability is NaN");
  const double p = std::clamp(prob, eps, 1.0 - eps);
  if (clamped != nullptr) *clamped = p != prob;
  const double pt = label == 1 ? p : 1.0 - p;
  const double at = label == 1 ? focal_alpha : 1.0 - focal_alpha;
  return -at * std::pow(1.0 - pt, focal_gamma) * std::log(pt);
}

std::vector<int> max_iou_targets(std::span<const BBox> gts, std::span<const BBox> proposals) {
  if (gts.empty()) throw InvalidInput("max_iou_targets: ground-truth list is empty");
  std::vector<int> out(proposals.size(), 0);
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    double best = 0.0;
    int best_gt = -1;
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const double u = iou(gts[i], proposals[k]);
      if (u > best) {
        best = u;
        best_gt = static_cast<int>(i);
      }
    }
    if (best_gt < 0) {
      const Point c = center(proposals[k]);
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < gts.size(); ++i) {
        const Point g = center(gts[i]);
        const double d = std::hypot(g.x - c.x, g.y - c.y);
        if (d < best_d) {
          best_d = d;
          best_gt = static_cast<int>(i);
        }
      }
    }
    out[k] = best_gt;
  }
  return out;
}

namespace {

double regression_scale(const CompositeConfig& cfg, std::size_t n_proposals, std::size_t n_gts) {
  const std::size_t n = cfg.regression_norm == RegressionNorm::PerProposal ? n_proposals : n_gts;
  return 1.0 / static_cast<double>(n);
}

void check_targets(std::span<const BBox> proposals, std::span<const BBox> targets) {
  if (targets.size() != proposals.size()) {
    throw InvalidInput("composite_regression_loss: one regression target per proposal required");
  }
}

}  // namespace

CompositeReport composite_regression_loss(std::span<const BBox> gts, std::span<const BBox> proposals,
                                          std::span<const BBox> targets,
                                          std::span<const Assignment> assignments, const CompositeConfig& cfg,
                                          const CouLossConfig& cou_cfg) {
  cfg.validate();
  check_targets(proposals, targets);
  CompositeReport r;
  if (gts.empty()) throw InvalidInput("composite_regression_loss: ground-truth list is empty");
  if (!proposals.empty()) {
    const double inv_n = regression_scale(cfg, proposals.size(), gts.size());
    double sl1 = 0.0, il = 0.0;
    for (std::size_t k = 0; k < proposals.size(); ++k) {
      if (cfg.smoothl1_weight > 0.0) sl1 += smooth_l1(proposals[k], targets[k], cfg.smoothl1_beta);
      if (cfg.iou_loss_weight > 0.0) {
        // Non-overlapping pairs contribute the floor value; their gradient is zero.
        il += iou(proposals[k], targets[k]) > 0.0 ? iou_loss(proposals[k], targets[k], cou_cfg.iou_floor)
                                                  : -std::log(cou_cfg.iou_floor);
      }
    }
    r.smooth_l1 = cfg.smoothl1_weight * sl1 * inv_n;
    r.iou_loss = cfg.iou_loss_weight * il * inv_n;
  }
  r.couloss = couloss(gts, proposals, assignments, cou_cfg);
  const double norm = 1.0 / static_cast<double>(gts.size());
  if (cfg.use_attraction) r.cou_attraction = cfg.alpha * (r.couloss.attractive_work * norm);
  if (cfg.use_repulsion) r.cou_repulsion = cfg.alpha * (r.couloss.repulsive_work * norm);
  r.total = r.regression() + r.cou();
  return r;
}

CompositeReport composite_regression_loss(std::span<const BBox> gts, std::span<const BBox> proposals,
                                          std::span<const BBox> targets, const CompositeConfig& cfg,
                                          const CouLossConfig& cou_cfg) {
  if (gts.empty()) throw InvalidInput("composite_regression_loss: ground-truth list is empty");
  const auto assignments = assign_proposals(gts, proposals, cou_cfg);
  return composite_regression_loss(gts, proposals, targets, assignments, cfg, cou_cfg);
}

CompositeReport composite_regression_loss(std::span<const BBox> gts, std::span<const BBox> proposals,
                                          const CompositeConfig& cfg, const CouLossConfig& cou_cfg) {
  const auto idx = max_iou_targets(gts, proposals);
  std::vector<BBox> targets;
  targets.reserve(idx.size());
  for (int i : idx) targets.push_back(gts[static_cast<std::size_t>(i)]);
  return composite_regression_loss(gts, proposals, targets, cfg, cou_cfg);
}

CompositeGradient composite_regression_gradient(std::span<const BBox> gts, std::span<const BBox> proposals,
                                                std::span<const BBox> targets,
                                                std::span<const Assignment> assignments,
                                                const CompositeConfig& cfg, const CouLossConfig& cou_cfg) {
  cfg.validate();
  check_targets(proposals, targets);
  CompositeGradient out;
  out.total.assign(proposals.size(), BoxGradient{});
  if (gts.empty()) throw InvalidInput("composite_regression_gradient: ground-truth list is empty");
  if (proposals.empty()) return out;
  const double inv_n = regression_scale(cfg, proposals.size(), gts.size());
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    if (cfg.smoothl1_weight > 0.0) {
      out.total[k] += (cfg.smoothl1_weight * inv_n) * smooth_l1_gradient(proposals[k], targets[k], cfg.smoothl1_beta);
    }
    if (cfg.iou_loss_weight > 0.0) {
      out.total[k] += (cfg.iou_loss_weight * inv_n) * iou_loss_gradient(proposals[k], targets[k], cou_cfg.iou_floor);
    }
  }
  if (cfg.alpha > 0.0 && (cfg.use_attraction || cfg.use_repulsion)) {
    CouLossGradient cg = couloss_gradient(gts, proposals, assignments, cou_cfg);
    for (std::size_t k = 0; k < proposals.size(); ++k) {
      if (cfg.use_attraction) out.total[k] += cfg.alpha * cg.attraction[k];
      if (cfg.use_repulsion) out.total[k] += cfg.alpha * cg.repulsion[k];
    }
    out.kinks = std::move(cg.kinks);
  }
  return out;
}

}  // namespace crowdloss
