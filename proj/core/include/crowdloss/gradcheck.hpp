#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crowdloss/couloss.hpp"
#include "crowdloss/geometry.hpp"

namespace crowdloss {

/// Central differences of f with respect to every proposal coordinate. The
/// step along x (y) is rel_step times the box width (height).
std::vector<BoxGradient> finite_difference(std::span<const BBox> proposals,
                                           const std::function<double(std::span<const BBox>)>& f,
                                           double rel_step = 1e-5);

/// ||a - b|| / max(||a||, ||b||, floor) over all coordinates (Euclidean norm).
double relative_error(std::span<const BoxGradient> a, std::span<const BoxGradient> b, double floor = 1e-8);

struct GradCheckCase {
  std::vector<BBox> gts;
  std::vector<BBox> proposals;
  std::vector<BBox> targets;  // regression targets for SmoothL1 / IoULoss
};

/// A crowd of 2-4 overlapping GTs with 1-2 jittered proposals each, at least
/// one triplet, and no kink within `kink_tolerance`.
GradCheckCase random_gradcheck_case(std::uint64_t seed, double kink_tolerance);

/// Proposal sitting exactly on its target's center: border distance and
/// IoU edges are at kinks, so the gradient must warn.
GradCheckCase kink_fixture();

struct GradCheckOptions {
  int scenes = 1000;
  std::uint64_t seed = 1;
  double rel_step = 1e-5;
  double tolerance = 1e-4;
  double kink_tolerance = 5e-3;
  bool include_kink_fixture = false;
  std::size_t threads = 1;
};

struct TermError {
  std::string term;
  int scenes = 0;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TermError> terms;
  std::vector<std::string> warnings;
  double seconds = 0.0;

  double max_error() const;
  bool passed(double tolerance) const { return max_error() < tolerance; }
};

/// Analytic gradients of every loss term against central differences.
GradCheckReport run_gradcheck(const GradCheckOptions& opts);

}  // namespace crowdloss
