#pragma once

#include <span>
#include <vector>

#include "crowdloss/couloss.hpp"
#include "crowdloss/geometry.hpp"

namespace crowdloss {

enum class RegressionNorm {
  PerProposal,     // mean over proposals
  PerGroundTruth,  // sum over proposals / |G|, the same normalization as L_cou
};

/// Weights of the regression/location objective
///   L = L_reg + alpha * L_cou + gamma * L_loc
/// where L_reg is the SmoothL1 (and optionally IoULoss) regression term.
struct CompositeConfig {
  double alpha = 1.0;  // CouLoss weight
  double gamma = 1.0;  // location-branch weight
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double smoothl1_beta = 1.0;
  double smoothl1_weight = 1.0;
  double iou_loss_weight = 0.0;
  RegressionNorm regression_norm = RegressionNorm::PerProposal;
  bool use_attraction = true;
  bool use_repulsion = true;

  void validate() const;
};

double smooth_l1(const BBox& pred, const BBox& target, double beta = 1.0);
BoxGradient smooth_l1_gradient(const BBox& pred, const BBox& target, double beta = 1.0);

/// -ln(IoU), floored at `floor`. Throws NoForce when the boxes do not overlap.
double iou_loss(const BBox& pred, const BBox& target, double floor = 1e-6);
BoxGradient iou_loss_gradient(const BBox& pred, const BBox& target, double floor = 1e-6);

/// Alpha-balanced focal loss -alpha_t (1 - p_t)^gamma ln(p_t). Probabilities
/// at or beyond 0/1 are clamped into [eps, 1 - eps]; `clamped` reports it.
double focal_loss(double prob, int label, double focal_gamma = 2.0, double focal_alpha = 0.25,
                  bool* clamped = nullptr);

struct CompositeReport {
  double smooth_l1 = 0.0;  // weighted, normalized per CompositeConfig::regression_norm
  double iou_loss = 0.0;
  double cou_attraction = 0.0;  // alpha * attractive_work / |G|
  double cou_repulsion = 0.0;   // alpha * repulsive_work / |G|
  double total = 0.0;
  LossReport couloss;

  double regression() const { return smooth_l1 + iou_loss; }
  double cou() const { return cou_attraction + cou_repulsion; }
};

/// Max-IoU ground truth per proposal (ties to the lowest index); proposals
/// without any overlap fall back to the nearest center.
std::vector<int> max_iou_targets(std::span<const BBox> gts, std::span<const BBox> proposals);

/// Regression slice of the joint objective with explicit regression targets
/// (one box per proposal). CouLoss uses its own assignment rule.
CompositeReport composite_regression_loss(std::span<const BBox> gts, std::span<const BBox> proposals,
                                          std::span<const BBox> targets, const CompositeConfig& cfg,
                                          const CouLossConfig& cou_cfg = {});
/// Same, with regression targets chosen by max_iou_targets.
CompositeReport composite_regression_loss(std::span<const BBox> gts, std::span<const BBox> proposals,
                                          const CompositeConfig& cfg, const CouLossConfig& cou_cfg = {});

struct CompositeGradient {
  std::vector<BoxGradient> total;
  std::vector<KinkWarning> kinks;
};

/// Gradient of composite_regression_loss with targets and CouLoss
/// assignments held fixed.
CompositeGradient composite_regression_gradient(std::span<const BBox> gts, std::span<const BBox> proposals,
                                                std::span<const BBox> targets,
                                                std::span<const Assignment> assignments,
                                                const CompositeConfig& cfg, const CouLossConfig& cou_cfg = {});

/// Same objective evaluated with a fixed CouLoss assignment.
CompositeReport composite_regression_loss(std::span<const BBox> gts, std::span<const BBox> proposals,
                                          std::span<const BBox> targets,
                                          std::span<const Assignment> assignments, const CompositeConfig& cfg,
                                          const CouLossConfig& cou_cfg = {});

}  // namespace crowdloss
