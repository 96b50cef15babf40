#include "crowdloss/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "crowdloss/baselines.hpp"
#include "crowdloss/error.hpp"
#include "crowdloss/parallel.hpp"
#include "crowdloss/scene.hpp"

namespace crowdloss {

std::vector<BoxGradient> finite_difference(std::span<const BBox> proposals,
                                           const std::function<double(std::span<const BBox>)>& f,
                                           double rel_step) {
  std::vector<BBox> work(proposals.begin(), proposals.end());
  std::vector<BoxGradient> out(proposals.size());
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    const auto base = proposals[k].coords();
    for (std::size_t j = 0; j < 4; ++j) {
      const double h = rel_step * (j % 2 == 0 ? proposals[k].width() : proposals[k].height());
      auto plus = base, minus = base;
      plus[j] += h;
      minus[j] -= h;
      work[k] = BBox::from_coords(plus);
      const double fp = f(work);
      work[k] = BBox::from_coords(minus);
      const double fm = f(work);
      out[k][j] = (fp - fm) / (2.0 * h);
    }
    work[k] = proposals[k];
  }
  return out;
}

double relative_error(std::span<const BoxGradient> a, std::span<const BoxGradient> b, double floor) {
  if (a.size() != b.size()) throw InvalidInput("relative_error: size mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t j = 0; j < 4; ++j) {
      diff += (a[k][j] - b[k][j]) * (a[k][j] - b[k][j]);
      na += a[k][j] * a[k][j];
      nb += b[k][j] * b[k][j];
    }
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

namespace {

constexpr double kSmoothL1Beta = 5.0;

bool regression_kinks(const GradCheckCase& c, double tol) {
  for (std::size_t k = 0; k < c.proposals.size(); ++k) {
    const auto p = c.proposals[k].coords();
    const auto t = c.targets[k].coords();
    for (std::size_t j = 0; j < 4; ++j) {
      const double d = std::abs(p[j] - t[j]);
      const double size = j % 2 == 0 ? c.targets[k].width() : c.targets[k].height();
      if (std::abs(d - kSmoothL1Beta) < tol * kSmoothL1Beta) return true;  // SmoothL1 branch switch
      if (d < tol * size) return true;                                      // IoU edge coincidence
    }
  }
  return false;
}

}  // namespace

GradCheckCase random_gradcheck_case(std::uint64_t seed, double kink_tolerance) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> gt_count(2, 4);
  std::uniform_int_distribution<int> per_gt(1, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  CouLossConfig cou;
  cou.kink_tolerance = kink_tolerance;

  for (int attempt = 0; attempt < 10000; ++attempt) {
    SceneConfig sc;
    sc.width = 400.0;
    sc.height = 240.0;
    sc.pedestrians = gt_count(rng);
    sc.crowd_iou_min = 0.15;
    sc.crowd_iou_max = 0.6;
    sc.min_height = 80.0;
    sc.max_height = 160.0;
    sc.max_retries = 50;
    Scene scene;
    try {
      scene = generate_scene(sc, rng());
    } catch (const InfeasibleConfig&) {
      continue;
    }
    GradCheckCase c;
    c.gts = scene.full_boxes();
    for (const BBox& g : c.gts) {
      const int n = per_gt(rng);
      for (int k = 0; k < n && c.proposals.size() < 8; ++k) {
        const double dx = 0.08 * normal(rng) * g.width(), dy = 0.08 * normal(rng) * g.height();
        const double sw = std::exp(0.08 * normal(rng)), sh = std::exp(0.08 * normal(rng));
        c.proposals.push_back(BBox::from_center(center(g).x + dx, center(g).y + dy, g.width() * sw, g.height() * sh));
        c.targets.push_back(g);
      }
    }
    const auto assignments = assign_proposals(c.gts, c.proposals, cou);
    if (build_triplets(c.gts, c.proposals, assignments).empty()) continue;
    if (!detect_kinks(c.gts, c.proposals, assignments, cou).empty()) continue;
    if (regression_kinks(c, kink_tolerance)) continue;
    return c;
  }
  throw InfeasibleConfig("random_gradcheck_case: no kink-free scene found");
}

GradCheckCase kink_fixture() {
  GradCheckCase c;
  c.gts = {BBox(0, 0, 40, 100), BBox(25, 0, 65, 100)};
  c.proposals = {BBox(0, 0, 40, 100), BBox(27, 2, 66, 101)};
  c.targets = c.gts;
  return c;
}

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& t : terms) m = std::max(m, t.max_rel_error);
  return m;
}

namespace {

const std::vector<std::string> kTerms = {"couloss_attraction", "couloss_repulsion", "couloss_deduplicated",
                                         "couloss_literal",    "smooth_l1",         "iou_loss",
                                         "composite"};

double mean_over(std::span<const BBox> props, const std::function<double(const BBox&, std::size_t)>& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < props.size(); ++k) s += f(props[k], k);
  return s / static_cast<double>(props.size());
}

std::vector<double> check_case(const GradCheckCase& c, double rel_step) {
  CouLossConfig dedup;
  dedup.kink_tolerance = 0.0;
  CouLossConfig literal = dedup;
  literal.aggregation = Aggregation::TripletLiteral;
  const auto assignments = assign_proposals(c.gts, c.proposals, dedup);
  const double n_gt = static_cast<double>(c.gts.size());
  std::vector<double> errors;

  const CouLossGradient g_dedup = couloss_gradient(c.gts, c.proposals, assignments, dedup);
  const CouLossGradient g_lit = couloss_gradient(c.gts, c.proposals, assignments, literal);

  auto fd = [&](const std::function<double(std::span<const BBox>)>& f) {
    return finite_difference(c.proposals, f, rel_step);
  };
  errors.push_back(relative_error(g_dedup.attraction, fd([&](std::span<const BBox> p) {
                                    return couloss(c.gts, p, assignments, dedup).attractive_work / n_gt;
                                  })));
  errors.push_back(relative_error(g_dedup.repulsion, fd([&](std::span<const BBox> p) {
                                    return couloss(c.gts, p, assignments, dedup).repulsive_work / n_gt;
                                  })));
  errors.push_back(relative_error(g_dedup.total(), fd([&](std::span<const BBox> p) {
                                    return couloss(c.gts, p, assignments, dedup).total;
                                  })));
  errors.push_back(relative_error(g_lit.total(), fd([&](std::span<const BBox> p) {
                                    return couloss(c.gts, p, assignments, literal).total;
                                  })));

  std::vector<BoxGradient> sl1(c.proposals.size()), il(c.proposals.size());
  const double inv_n = 1.0 / static_cast<double>(c.proposals.size());
  for (std::size_t k = 0; k < c.proposals.size(); ++k) {
    sl1[k] = inv_n * smooth_l1_gradient(c.proposals[k], c.targets[k], kSmoothL1Beta);
    il[k] = inv_n * iou_loss_gradient(c.proposals[k], c.targets[k]);
  }
  errors.push_back(relative_error(sl1, fd([&](std::span<const BBox> p) {
                                    return mean_over(p, [&](const BBox& b, std::size_t k) {
                                      return smooth_l1(b, c.targets[k], kSmoothL1Beta);
                                    });
                                  })));
  errors.push_back(relative_error(il, fd([&](std::span<const BBox> p) {
                                    return mean_over(p, [&](const BBox& b, std::size_t k) {
                                      return iou_loss(b, c.targets[k]);
                                    });
                                  })));

  CompositeConfig comp;
  comp.smoothl1_beta = kSmoothL1Beta;
  comp.iou_loss_weight = 1.0;
  const CompositeGradient g_comp =
      composite_regression_gradient(c.gts, c.proposals, c.targets, assignments, comp, dedup);
  errors.push_back(relative_error(g_comp.total, fd([&](std::span<const BBox> p) {
                                    return composite_regression_loss(c.gts, p, c.targets, assignments, comp, dedup)
                                        .total;
                                  })));
  return errors;
}

}  // namespace

GradCheckReport run_gradcheck(const GradCheckOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  const auto n = static_cast<std::size_t>(std::max(opts.scenes, 0));
  std::vector<std::vector<double>> errors(n);
  parallel_for(
      n,
      [&](std::size_t s) {
        const std::uint64_t seed = opts.seed * 0x9E3779B97F4A7C15ULL + s;
        errors[s] = check_case(random_gradcheck_case(seed, opts.kink_tolerance), opts.rel_step);
      },
      opts.threads);

  for (std::size_t t = 0; t < kTerms.size(); ++t) {
    TermError te{kTerms[t], static_cast<int>(n)};
    double sum = 0.0;
    for (const auto& e : errors) {
      te.max_rel_error = std::max(te.max_rel_error, e[t]);
      sum += e[t];
    }
    te.mean_rel_error = n > 0 ? sum / static_cast<double>(n) : 0.0;
    report.terms.push_back(te);
  }

  if (opts.include_kink_fixture) {
    const GradCheckCase c = kink_fixture();
    CouLossConfig cou;
    cou.kink_tolerance = opts.kink_tolerance;
    for (const KinkWarning& w : couloss_gradient(c.gts, c.proposals, cou).kinks) {
      std::ostringstream os;
      os << "kink fixture: proposal " << w.proposal_index << " vs gt " << w.gt_index << ": " << w.what
         << " (margin " << w.margin << ")";
      report.warnings.push_back(os.str());
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace crowdloss
