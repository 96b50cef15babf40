#include "crowdloss/couloss.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "crowdloss/error.hpp"

namespace crowdloss {

void CouLossConfig::validate() const {
  if (!(positive_iou_threshold > 0.0 && positive_iou_threshold < 1.0)) {
    throw InvalidInput("CouLossConfig: positive_iou_threshold must lie in (0, 1)");
  }
  if (!(iou_floor > 0.0 && iou_floor < 1.0)) {
    throw InvalidInput("CouLossConfig: iou_floor must lie in (0, 1)");
  }
  if (!(kink_tolerance >= 0.0)) throw InvalidInput("CouLossConfig: kink_tolerance must be >= 0");
}

double attractive_force(const BBox& g, const BBox& p, const CouLossConfig& cfg) {
  const double u = iou(g, p);
  if (u <= 0.0) throw NoForce("attractive_force: boxes do not overlap");
  return -std::log(std::max(u, cfg.iou_floor));
}

double repulsive_force(const BBox& g, const BBox& p, const CouLossConfig& cfg) {
  const double u = iou(g, p);
  if (u <= 0.0) throw NoForce("repulsive_force: boxes do not overlap");
  return -std::log(std::max(1.0 - u, cfg.iou_floor));
}

EffectiveCos effective_cos(const BBox& target_gt, const BBox& negative, const BBox& negative_target) {
  return {1.0, cos_angle_at(center(target_gt), center(negative), center(negative_target))};
}

namespace {

struct PairWork {
  double work = 0.0;
  BoxGradient grad{};
};

PairWork attractive_pair(const BBox& g, const BBox& p, const CouLossConfig& cfg, bool with_grad) {
  const double u = iou(g, p);
  if (u <= 0.0) return {};
  const double force = -std::log(std::max(u, cfg.iou_floor));
  const double s = border_distance(g, p);
  PairWork out;
  out.work = std::max(force * s, 0.0);
  if (!with_grad || out.work <= 0.0) return out;
  BoxGradient ds = border_distance_gradient(g, p);
  BoxGradient grad = force * ds;
  if (u > cfg.iou_floor) grad += (-s / u) * iou_gradient(g, p);
  out.grad = grad;
  return out;
}

PairWork repulsive_pair(const BBox& g, const BBox& p, const BBox& p_target, const CouLossConfig& cfg,
                        bool with_grad) {
  const double u = iou(g, p);
  if (u <= 0.0) return {};
  const double one_minus = 1.0 - u;
  const double force = -std::log(std::max(one_minus, cfg.iou_floor));
  const Point gc = center(g), pc = center(p), tc = center(p_target);
  const double cosv = cos_angle_at(gc, pc, tc);
  const double s = border_distance(g, p);
  const double raw = force * cosv * s;
  PairWork out;
  out.work = std::max(raw, 0.0);
  if (!with_grad || out.work <= 0.0) return out;
  BoxGradient grad = (force * s) * center_to_corners(cos_angle_gradient(gc, pc, tc));
  grad += (force * cosv) * border_distance_gradient(g, p);
  if (one_minus > cfg.iou_floor) grad += (cosv * s / one_minus) * iou_gradient(g, p);
  out.grad = grad;
  return out;
}

void require_gts(std::span<const BBox> gts) {
  if (gts.empty()) throw InvalidInput("couloss: ground-truth list is empty");
}

// Per-pair multiplicities implied by the aggregation mode.
struct PairCounts {
  std::map<std::pair<int, int>, int> attractive;  // (gt, positive proposal)
  std::map<std::pair<int, int>, int> repulsive;   // (gt, negative proposal)
  std::map<int, int> negative_target;             // proposal -> its own target
};

PairCounts count_pairs(std::span<const Triplet> triplets, Aggregation mode) {
  PairCounts counts;
  for (const Triplet& t : triplets) {
    auto& a = counts.attractive[{t.gt_index, t.positive_proposal_index}];
    auto& r = counts.repulsive[{t.gt_index, t.negative_proposal_index}];
    if (mode == Aggregation::TripletLiteral) {
      ++a;
      ++r;
    } else {
      a = 1;
      r = 1;
    }
    counts.negative_target[t.negative_proposal_index] = t.negative_target_index;
  }
  return counts;
}

std::vector<int> target_lookup(std::size_t proposal_count, std::span<const Assignment> assignments) {
  std::vector<int> target(proposal_count, -1);
  for (const Assignment& a : assignments) {
    if (a.proposal_index < 0 || static_cast<std::size_t>(a.proposal_index) >= proposal_count) {
      throw InvalidInput("assignment refers to a proposal out of range");
    }
    target[static_cast<std::size_t>(a.proposal_index)] = a.target_gt_index;
  }
  return target;
}

}  // namespace

double attractive_work(const BBox& g, const BBox& p, const CouLossConfig& cfg) {
  return attractive_pair(g, p, cfg, false).work;
}

double repulsive_work(const BBox& g, const BBox& p, const BBox& p_target, const CouLossConfig& cfg) {
  return repulsive_pair(g, p, p_target, cfg, false).work;
}

WorkTerms work_terms(std::span<const BBox> gts, std::span<const BBox> proposals, const Triplet& t,
                     const CouLossConfig& cfg) {
  const BBox& gi = gts[static_cast<std::size_t>(t.gt_index)];
  const BBox& pp = proposals[static_cast<std::size_t>(t.positive_proposal_index)];
  const BBox& pn = proposals[static_cast<std::size_t>(t.negative_proposal_index)];
  const BBox& gj = gts[static_cast<std::size_t>(t.negative_target_index)];
  return {attractive_work(gi, pp, cfg), repulsive_work(gi, pn, gj, cfg)};
}

std::vector<Assignment> assign_proposals(std::span<const BBox> gts, std::span<const BBox> proposals,
                                         const CouLossConfig& cfg) {
  std::vector<Assignment> out;
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const double u = iou(gts[i], proposals[k]);
      if (u > best_iou) {
        best_iou = u;
        best = static_cast<int>(i);
      }
    }
    if (best < 0 || !(best_iou > cfg.positive_iou_threshold)) continue;
    if (!contains_center(gts[static_cast<std::size_t>(best)], proposals[k])) continue;
    out.push_back({static_cast<int>(k), best, best_iou});
  }
  return out;
}

std::vector<Triplet> build_triplets(std::span<const BBox> gts, std::span<const BBox> proposals,
                                    std::span<const Assignment> assignments) {
  std::vector<Triplet> out;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const int gi = static_cast<int>(i);
    for (const Assignment& pos : assignments) {
      if (pos.target_gt_index != gi) continue;
      for (const Assignment& neg : assignments) {
        if (neg.target_gt_index == gi) continue;
        if (!(iou(gts[i], proposals[static_cast<std::size_t>(neg.proposal_index)]) > 0.0)) continue;
        out.push_back({gi, pos.proposal_index, neg.proposal_index, neg.target_gt_index});
      }
    }
  }
  return out;
}

TripletSet assemble_triplets(std::span<const BBox> gts, std::span<const BBox> proposals,
                             const CouLossConfig& cfg) {
  require_gts(gts);
  TripletSet out;
  out.assignments = assign_proposals(gts, proposals, cfg);
  out.triplets = build_triplets(gts, proposals, out.assignments);
  return out;
}

LossReport couloss(std::span<const BBox> gts, std::span<const BBox> proposals, const CouLossConfig& cfg) {
  require_gts(gts);
  const auto assignments = assign_proposals(gts, proposals, cfg);
  return couloss(gts, proposals, assignments, cfg);
}

LossReport couloss(std::span<const BBox> gts, std::span<const BBox> proposals,
                   std::span<const Assignment> assignments, const CouLossConfig& cfg) {
  require_gts(gts);
  cfg.validate();
  LossReport report;
  report.gt_count = static_cast<int>(gts.size());
  const auto triplets = build_triplets(gts, proposals, assignments);
  report.triplets.reserve(triplets.size());
  for (const Triplet& t : triplets) {
    const WorkTerms w = work_terms(gts, proposals, t, cfg);
    report.triplets.push_back({t, w.attractive, w.repulsive});
  }

  if (cfg.aggregation == Aggregation::TripletLiteral) {
    for (const TripletWork& tw : report.triplets) {
      report.attractive_work += tw.attractive;
      report.repulsive_work += tw.repulsive;
    }
  } else {
    const PairCounts counts = count_pairs(triplets, cfg.aggregation);
    for (const auto& [key, n] : counts.attractive) {
      report.attractive_work += attractive_work(gts[static_cast<std::size_t>(key.first)],
                                                proposals[static_cast<std::size_t>(key.second)], cfg);
    }
    for (const auto& [key, n] : counts.repulsive) {
      const int target = counts.negative_target.at(key.second);
      report.repulsive_work += repulsive_work(gts[static_cast<std::size_t>(key.first)],
                                              proposals[static_cast<std::size_t>(key.second)],
                                              gts[static_cast<std::size_t>(target)], cfg);
    }
  }
  report.total = (report.attractive_work + report.repulsive_work) / static_cast<double>(gts.size());
  return report;
}

std::vector<BoxGradient> CouLossGradient::total() const {
  std::vector<BoxGradient> out = attraction;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += repulsion[k];
  return out;
}

CouLossGradient couloss_gradient(std::span<const BBox> gts, std::span<const BBox> proposals,
                                 const CouLossConfig& cfg) {
  require_gts(gts);
  const auto assignments = assign_proposals(gts, proposals, cfg);
  return couloss_gradient(gts, proposals, assignments, cfg);
}

CouLossGradient couloss_gradient(std::span<const BBox> gts, std::span<const BBox> proposals,
                                 std::span<const Assignment> assignments, const CouLossConfig& cfg) {
  require_gts(gts);
  cfg.validate();
  CouLossGradient out;
  out.attraction.assign(proposals.size(), BoxGradient{});
  out.repulsion.assign(proposals.size(), BoxGradient{});

  const auto triplets = build_triplets(gts, proposals, assignments);
  const PairCounts counts = count_pairs(triplets, cfg.aggregation);
  const double norm = 1.0 / static_cast<double>(gts.size());

  for (const auto& [key, n] : counts.attractive) {
    const auto p = static_cast<std::size_t>(key.second);
    const PairWork w = attractive_pair(gts[static_cast<std::size_t>(key.first)], proposals[p], cfg, true);
    out.attraction[p] += (norm * n) * w.grad;
  }
  for (const auto& [key, n] : counts.repulsive) {
    const auto p = static_cast<std::size_t>(key.second);
    const int target = counts.negative_target.at(key.second);
    const PairWork w = repulsive_pair(gts[static_cast<std::size_t>(key.first)], proposals[p],
                                      gts[static_cast<std::size_t>(target)], cfg, true);
    out.repulsion[p] += (norm * n) * w.grad;
  }
  if (cfg.kink_tolerance > 0.0) out.kinks = detect_kinks(gts, proposals, assignments, cfg);
  return out;
}

namespace {

class KinkScanner {
 public:
  KinkScanner(double tol, std::vector<KinkWarning>& out) : tol_(tol), out_(out) {}

  void check(double margin, int proposal, int gt, const char* what) {
    if (std::abs(margin) < tol_) out_.push_back({proposal, gt, what, margin});
  }

  // Edge coincidences that switch a min()/max() inside the IoU.
  void iou_edges(const BBox& g, const BBox& p, int proposal, int gt) {
    const double w = g.width(), h = g.height();
    check((p.x1() - g.x1()) / w, proposal, gt, "iou: left edges coincide");
    check((p.x2() - g.x2()) / w, proposal, gt, "iou: right edges coincide");
    check((p.y1() - g.y1()) / h, proposal, gt, "iou: top edges coincide");
    check((p.y2() - g.y2()) / h, proposal, gt, "iou: bottom edges coincide");
  }

  // Overlap onset: the pair is about to start or stop touching.
  void overlap_onset(const BBox& g, const BBox& p, int proposal, int gt) {
    const double gap_x = std::max(g.x1() - p.x2(), p.x1() - g.x2()) / g.width();
    const double gap_y = std::max(g.y1() - p.y2(), p.y1() - g.y2()) / g.height();
    if (gap_x <= tol_ && gap_y <= tol_) {
      check(gap_x, proposal, gt, "overlap onset along x");
      check(gap_y, proposal, gt, "overlap onset along y");
    }
  }

  void border_factors(const BBox& g, const BBox& p, int proposal, int gt) {
    const Point c = center(p);
    const Point gc = center(g);
    const double hw = 0.5 * g.width(), hh = 0.5 * g.height();
    // Factor is |c - gc| / half inside, 2 - |c - gc| / half outside, 0 beyond twice the half extent.
    const double dx = std::abs(c.x - gc.x) / hw, dy = std::abs(c.y - gc.y) / hh;
    check(dx, proposal, gt, "border distance: center on vertical axis");
    check(dy, proposal, gt, "border distance: center on horizontal axis");
    check(dx - 1.0, proposal, gt, "border distance: center on vertical border");
    check(dy - 1.0, proposal, gt, "border distance: center on horizontal border");
    check(dx - 2.0, proposal, gt, "border distance: factor clamp along x");
    check(dy - 2.0, proposal, gt, "border distance: factor clamp along y");
  }

 private:
  double tol_;
  std::vector<KinkWarning>& out_;
};

}  // namespace

std::vector<KinkWarning> detect_kinks(std::span<const BBox> gts, std::span<const BBox> proposals,
                                      std::span<const Assignment> assignments, const CouLossConfig& cfg) {
  std::vector<KinkWarning> out;
  const double tol = cfg.kink_tolerance;
  if (tol <= 0.0) return out;
  KinkScanner scan(tol, out);
  const std::vector<int> target = target_lookup(proposals.size(), assignments);

  // Assignment stability, for every proposal.
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    const int pk = static_cast<int>(k);
    double best = 0.0, second = 0.0;
    int best_gt = -1;
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const double u = iou(gts[i], proposals[k]);
      if (u > best) {
        second = best;
        best = u;
        best_gt = static_cast<int>(i);
      } else if (u > second) {
        second = u;
      }
    }
    if (best_gt < 0) continue;
    scan.check(best - cfg.positive_iou_threshold, pk, best_gt, "assignment: iou at positive threshold");
    if (second > 0.0) scan.check(best - second, pk, best_gt, "assignment: argmax tie");
    const BBox& g = gts[static_cast<std::size_t>(best_gt)];
    const Point c = center(proposals[k]);
    scan.check((c.x - g.x1()) / g.width(), pk, best_gt, "assignment: center on left border");
    scan.check((g.x2() - c.x) / g.width(), pk, best_gt, "assignment: center on right border");
    scan.check((c.y - g.y1()) / g.height(), pk, best_gt, "assignment: center on top border");
    scan.check((g.y2() - c.y) / g.height(), pk, best_gt, "assignment: center on bottom border");
  }

  const auto triplets = build_triplets(gts, proposals, assignments);
  const PairCounts counts = count_pairs(triplets, Aggregation::Deduplicated);

  for (const auto& [key, n] : counts.attractive) {
    const BBox& g = gts[static_cast<std::size_t>(key.first)];
    const BBox& p = proposals[static_cast<std::size_t>(key.second)];
    scan.iou_edges(g, p, key.second, key.first);
    scan.border_factors(g, p, key.second, key.first);
    scan.check(iou(g, p) / cfg.iou_floor - 1.0, key.second, key.first, "attractive log floor");
  }
  for (const auto& [key, n] : counts.repulsive) {
    const BBox& g = gts[static_cast<std::size_t>(key.first)];
    const BBox& p = proposals[static_cast<std::size_t>(key.second)];
    const BBox& gj = gts[static_cast<std::size_t>(target[static_cast<std::size_t>(key.second)])];
    scan.iou_edges(g, p, key.second, key.first);
    scan.border_factors(g, p, key.second, key.first);
    scan.check((1.0 - iou(g, p)) / cfg.iou_floor - 1.0, key.second, key.first, "repulsive log floor");
    const Point gc = center(g), pc = center(p);
    scan.check(cos_angle_at(gc, pc, center(gj)), key.second, key.first, "repulsive work sign (cos = 0)");
    scan.check(std::hypot((pc.x - gc.x) / g.width(), (pc.y - gc.y) / g.height()), key.second, key.first,
               "repulsion angle: centers coincide");
  }

  // Triplet membership: a negative that is about to touch (or stop touching) a non-target.
  for (const Assignment& a : assignments) {
    for (std::size_t i = 0; i < gts.size(); ++i) {
      if (static_cast<int>(i) == a.target_gt_index) continue;
      scan.overlap_onset(gts[i], proposals[static_cast<std::size_t>(a.proposal_index)], a.proposal_index,
                         static_cast<int>(i));
    }
  }
  return out;
}

}  // namespace crowdloss
