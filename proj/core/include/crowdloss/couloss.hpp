#pragma once

#include <span>
#include <string>
#include <vector>

#include "crowdloss/geometry.hpp"

namespace crowdloss {

enum class Aggregation {
  /// Sum W_a + W_r over every <G_i, P_p, P_n> triplet as written; W_a is
  /// repeated once per negative and W_r once per positive.
  TripletLiteral,
  /// Count W_a once per (G_i, P_p) and W_r once per (G_i, P_n).
  Deduplicated,
};

struct CouLossConfig {
  double positive_iou_threshold = 0.5;
  /// Floor applied to the argument of both logarithms.
  double iou_floor = 1e-6;
  Aggregation aggregation = Aggregation::Deduplicated;
  /// Relative distance to a non-differentiable point below which the
  /// gradient reports a kink warning.
  double kink_tolerance = 1e-6;

  void validate() const;
};

/// A proposal matched to a ground truth: max-IoU target (ties to the lowest
/// index), IoU above the positive threshold and center inside the target.
struct Assignment {
  int proposal_index = -1;
  int target_gt_index = -1;
  double iou_with_target = 0.0;
};

struct Triplet {
  int gt_index = -1;                 // G_i
  int positive_proposal_index = -1;  // P_p, assigned to G_i
  int negative_proposal_index = -1;  // P_n, assigned to G_j != G_i, overlapping G_i
  int negative_target_index = -1;    // G_j
};

struct TripletWork {
  Triplet triplet;
  double attractive = 0.0;  // W_a
  double repulsive = 0.0;   // W_r
};

struct LossReport {
  double total = 0.0;
  double attractive_work = 0.0;
  double repulsive_work = 0.0;
  int gt_count = 0;
  std::vector<TripletWork> triplets;
};

struct TripletSet {
  std::vector<Assignment> assignments;
  std::vector<Triplet> triplets;
};

// Attractive -ln(IoU) and repulsive -ln(1 - IoU) forces. Both throw NoForce
// when the pair does not overlap.
double attractive_force(const BBox& g, const BBox& p, const CouLossConfig& cfg = {});
double repulsive_force(const BBox& g, const BBox& p, const CouLossConfig& cfg = {});

struct EffectiveCos {
  double attractive = 1.0;
  double repulsive = 1.0;
};

/// cos(theta) of both effective forces: attraction acts along the line to
/// the target (theta = 0); repulsion uses the angle P_n G_i G_j at G_i's center.
EffectiveCos effective_cos(const BBox& target_gt, const BBox& negative, const BBox& negative_target);

struct WorkTerms {
  double attractive = 0.0;
  double repulsive = 0.0;
};

/// Work of one triplet, each term clamped at zero from below.
WorkTerms work_terms(std::span<const BBox> gts, std::span<const BBox> proposals, const Triplet& t,
                     const CouLossConfig& cfg = {});

/// Work of the attractive pair (G_i, P_p) alone.
double attractive_work(const BBox& g, const BBox& p, const CouLossConfig& cfg = {});
/// Work of the repulsive pair (G_i, P_n) given P_n's own target G_j.
double repulsive_work(const BBox& g, const BBox& p, const BBox& p_target, const CouLossConfig& cfg = {});

std::vector<Assignment> assign_proposals(std::span<const BBox> gts, std::span<const BBox> proposals,
                                         const CouLossConfig& cfg = {});

/// Triplets from a fixed assignment (used when assignments are frozen).
std::vector<Triplet> build_triplets(std::span<const BBox> gts, std::span<const BBox> proposals,
                                    std::span<const Assignment> assignments);

TripletSet assemble_triplets(std::span<const BBox> gts, std::span<const BBox> proposals,
                             const CouLossConfig& cfg = {});

/// Throws InvalidInput when gts is empty.
LossReport couloss(std::span<const BBox> gts, std::span<const BBox> proposals, const CouLossConfig& cfg = {});
LossReport couloss(std::span<const BBox> gts, std::span<const BBox> proposals,
                   std::span<const Assignment> assignments, const CouLossConfig& cfg = {});

struct KinkWarning {
  int proposal_index = -1;
  int gt_index = -1;
  std::string what;
  double margin = 0.0;
};

/// Analytic gradient of L_cou, split into its attractive and repulsive
/// parts. GT boxes are constants; assignments are held fixed.
struct CouLossGradient {
  std::vector<BoxGradient> attraction;
  std::vector<BoxGradient> repulsion;
  std::vector<KinkWarning> kinks;

  std::vector<BoxGradient> total() const;
};

CouLossGradient couloss_gradient(std::span<const BBox> gts, std::span<const BBox> proposals,
                                 const CouLossConfig& cfg = {});
CouLossGradient couloss_gradient(std::span<const BBox> gts, std::span<const BBox> proposals,
                                 std::span<const Assignment> assignments, const CouLossConfig& cfg = {});

/// Scan for sub-expressions within cfg.kink_tolerance (relative) of a point
/// where L_cou is not differentiable or where the assignment would change.
std::vector<KinkWarning> detect_kinks(std::span<const BBox> gts, std::span<const BBox> proposals,
                                      std::span<const Assignment> assignments, const CouLossConfig& cfg);

}  // namespace crowdloss
