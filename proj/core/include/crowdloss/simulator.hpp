#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "crowdloss/baselines.hpp"
#include "crowdloss/couloss.hpp"
#include "crowdloss/evalkit.hpp"
#include "crowdloss/scene.hpp"

namespace crowdloss {

struct SimConfig {
  SceneConfig scene;
  /// Proposal jitter: center offset ~ N(0, jitter * size), log-size ~ N(0, jitter).
  double jitter = 0.1;
  int proposals_per_gt = 8;
  int steps = 300;
  /// Gradient step in coordinates normalized by the scene height.
  double step_size = 1e-3;
  bool recompute_assignments = true;
  /// Regression targets seen by the simulated regressor are the IoU^k
  /// weighted mean of the overlapping GTs (k = target_sharpness). A finite k
  /// models a regressor that cannot fully separate overlapping instances;
  /// infinity gives hard max-IoU targets.
  double target_sharpness = 1.0;
  double divergence_factor = 10.0;
  /// Minimum box side (normalized units) enforced after each step.
  double min_box_size = 1e-3;

  void validate() const;
};

/// Regression objective used by the simulation commands: SmoothL1 with a
/// transition scaled to normalized coordinates, summed per GT like L_cou.
CompositeConfig default_simulation_loss();

struct ProposalSet {
  std::vector<BBox> boxes;
  std::vector<int> origin;     // GT each proposal was spawned from
  std::vector<double> scores;  // classifier score stand-in, used for evaluation
};

ProposalSet spawn_proposals(const Scene& scene, const SimConfig& cfg, std::uint64_t seed);

struct ProposalTrack {
  int origin = -1;
  BBox initial;
  BBox final;
  double final_iou_target = 0.0;
  double final_max_iou_other = 0.0;
  bool drifted = false;
  bool in_overlap = false;
};

struct StepLoss {
  double total = 0.0;
  double smooth_l1 = 0.0;
  double iou_loss = 0.0;
  double attraction = 0.0;
  double repulsion = 0.0;
};

struct SimResult {
  std::vector<ProposalTrack> proposals;
  std::vector<StepLoss> curve;  // entry 0 is the initial state
  double mean_final_iou = 0.0;
  double drift_rate = 0.0;
  double overlap_occupancy = 0.0;
  int steps_run = 0;
  int projections = 0;  // boxes pushed back to min_box_size
  std::size_t kink_warnings = 0;

  double initial_loss() const { return curve.empty() ? 0.0 : curve.front().total; }
  double final_loss() const { return curve.empty() ? 0.0 : curve.back().total; }
  std::vector<BBox> final_boxes() const;
};

/// Fixed-step gradient descent of the composite regression objective on raw
/// proposal coordinates. Throws NumericalAbort when the loss exceeds
/// divergence_factor times its initial value or turns non-finite.
SimResult run_descent(const Scene& scene, const ProposalSet& proposals, const CompositeConfig& loss,
                      const CouLossConfig& cou, const SimConfig& cfg);

/// Regression targets as perceived by the simulated regressor.
std::vector<BBox> perceived_targets(std::span<const BBox> gts, std::span<const BBox> proposals,
                                    std::span<const int> origin, double sharpness);

/// Fraction of centers inside the intersection of two or more GTs.
double overlap_occupancy(std::span<const BBox> gts, std::span<const BBox> boxes);

/// False alarms on human-like distractors, identical for every loss variant.
std::vector<Detection> distractor_detections(const Scene& scene, std::uint64_t seed, int scene_id);

/// A named loss variant of the ablation grid.
struct LossVariant {
  std::string name;
  CompositeConfig loss;
};

/// baseline (SmoothL1), couloss (+CouLoss), only_att, only_rep, iou_loss (+IoULoss).
LossVariant make_variant(const std::string& name, const CompositeConfig& base);

struct SceneOutcome {
  std::vector<BBox> gts;
  std::vector<Detection> detections;
};

struct VariantOutcome {
  std::string variant;
  std::vector<SceneOutcome> scenes;
};

struct NmsSweepRow {
  std::string variant;
  double threshold = 0.0;
  int kept = 0;
  int true_positives = 0;
  int false_positives = 0;
  int misses = 0;
  double miss_rate = 0.0;
};

struct NmsVariantSummary {
  std::string variant;
  int min_misses = 0;
  int max_misses = 0;
  int spread = 0;
  double variance = 0.0;  // of miss counts across thresholds
};

struct NmsSensitivity {
  std::vector<NmsSweepRow> rows;
  std::vector<NmsVariantSummary> summary;
};

/// One seed of a paired suite: a scene, its proposals, and one result per
/// variant. A run that aborted keeps the results finished before it.
struct SeedRun {
  std::uint64_t seed = 0;
  Scene scene;
  ProposalSet proposals;
  std::vector<SimResult> results;  // in variant order, possibly truncated
  std::string abort_message;       // empty unless a descent aborted

  bool complete(std::size_t variants) const { return abort_message.empty() && results.size() == variants; }
};

/// Seed derivation shared by every suite: the scene uses `seed`, proposals
/// and distractor detections use fixed offsets of it.
std::uint64_t proposal_seed(std::uint64_t seed);
std::uint64_t detection_seed(std::uint64_t seed);
/// Seed of the synthetic probability map drawn for a scene.
std::uint64_t map_seed(std::uint64_t seed);

/// Every variant descends from the same scene and proposals for each seed.
/// Seeds run concurrently; output order follows `seeds`.
std::vector<SeedRun> run_suite(const SimConfig& cfg, std::span<const LossVariant> variants, const CouLossConfig& cou,
                               std::span<const std::uint64_t> seeds, std::size_t threads);

/// Final boxes of one variant as detections (proposal scores carried over)
/// plus the shared distractor false alarms.
SceneOutcome scene_outcome(const SeedRun& run, std::size_t variant, int scene_id);

/// 0.30, 0.35, ..., 0.80.
std::vector<double> default_nms_grid();

NmsSensitivity nms_sensitivity_experiment(std::span<const VariantOutcome> variants,
                                          std::span<const double> thresholds, double match_iou = 0.5);

}  // namespace crowdloss
