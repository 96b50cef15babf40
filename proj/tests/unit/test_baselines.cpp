#include <gtest/gtest.h>

#include <cmath>

#include "crowdloss/baselines.hpp"
#include "crowdloss/error.hpp"
#include "crowdloss/gradcheck.hpp"

using namespace crowdloss;

TEST(SmoothL1, Examples) {
  const BBox t(0, 0, 4, 8);
  EXPECT_EQ(smooth_l1(t, t, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(smooth_l1(BBox(1, 0, 4, 8), t, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(smooth_l1(BBox(2, 0, 4, 8), t, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1(BBox(0.5, 0, 4.5, 8), t, 1.0), 0.25);
}

TEST(IouLoss, Examples) {
  const BBox a(0, 0, 2, 2);
  EXPECT_EQ(iou_loss(a, a), 0.0);
  EXPECT_NEAR(iou_loss(a, BBox(1, 1, 3, 3)), std::log(7.0), 1e-12);
  // IoU e^-1 against the unit square.
  const double d = (1 - std::exp(-1.0)) / (1 + std::exp(-1.0));
  EXPECT_NEAR(iou_loss(BBox(0, 0, 1, 1), BBox(d, 0, 1 + d, 1)), 1.0, 1e-12);
  EXPECT_THROW(iou_loss(a, BBox(5, 5, 6, 6)), NoForce);
}

TEST(Focal, Examples) {
  EXPECT_NEAR(focal_loss(0.9, 1, 2.0, 0.25), 0.25 * 0.01 * -std::log(0.9), 1e-15);
  EXPECT_NEAR(focal_loss(0.9, 1, 2.0, 0.25), 2.634e-4, 1e-7);
  for (double p : {0.1, 0.4, 0.77}) {
    EXPECT_NEAR(focal_loss(p, 1, 0.0, 1.0), -std::log(p), 1e-15);
    EXPECT_NEAR(2.0 * focal_loss(p, 0, 0.0, 0.5), -std::log(1 - p), 1e-15);
  }
  EXPECT_LT(focal_loss(1 - 1e-9, 1), 1e-12);
}

TEST(Focal, NegativeLabelUsesComplementWeight) {
  EXPECT_NEAR(focal_loss(0.3, 0, 2.0, 0.25), 0.75 * 0.09 * -std::log(0.7), 1e-15);
}

TEST(Focal, BelowCrossEntropy) {
  for (double p = 0.01; p < 1.0; p += 0.01) {
    ASSERT_LE(focal_loss(p, 1, 2.0, 1.0), -std::log(p));
    ASSERT_LE(focal_loss(p, 0, 0.5, 0.0), -std::log(1 - p));
  }
}

TEST(Focal, ClampsAtBoundaries) {
  bool clamped = false;
  const double v = focal_loss(0.0, 1, 2.0, 0.25, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_TRUE(std::isfinite(v));
  clamped = false;
  focal_loss(0.5, 1, 2.0, 0.25, &clamped);
  EXPECT_FALSE(clamped);
  EXPECT_THROW(focal_loss(0.5, 2), InvalidInput);
}

namespace {

struct Fixture {
  std::vector<BBox> gts{BBox(0, 0, 4, 8), BBox(3, 0, 7, 8)};
  std::vector<BBox> props{BBox(0.2, 0.3, 4.1, 8.4), BBox(0.4, 0.1, 4.3, 7.8), BBox(3.1, -0.2, 7.3, 8.1),
                          BBox(2.7, 0.2, 7.1, 8.3)};
  std::vector<BBox> targets{gts[0], gts[0], gts[1], gts[1]};
};

}  // namespace

TEST(Composite, PerfectProposalsSmoothL1Only) {
  Fixture f;
  CompositeConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_EQ(composite_regression_loss(f.gts, f.gts, cfg).total, 0.0);
}

TEST(Composite, EqualsRegressionPlusWeightedCouLoss) {
  Fixture f;
  CompositeConfig cfg;
  cfg.alpha = 0.7;
  const CompositeReport r = composite_regression_loss(f.gts, f.props, f.targets, cfg);
  const LossReport cl = couloss(f.gts, f.props);
  double sl1 = 0.0;
  for (std::size_t k = 0; k < f.props.size(); ++k) sl1 += smooth_l1(f.props[k], f.targets[k], 1.0);
  EXPECT_NEAR(r.smooth_l1, sl1 / 4.0, 1e-15);
  EXPECT_NEAR(r.cou(), 0.7 * cl.total, 1e-15);
  EXPECT_EQ(r.total, r.regression() + r.cou());
}

TEST(Composite, LinearInEachWeight) {
  Fixture f;
  CompositeConfig a, b;
  a.alpha = 1.0;
  b.alpha = 3.0;
  const auto ra = composite_regression_loss(f.gts, f.props, f.targets, a);
  const auto rb = composite_regression_loss(f.gts, f.props, f.targets, b);
  EXPECT_NEAR(rb.cou(), 3.0 * ra.cou(), 1e-14);
  EXPECT_EQ(rb.smooth_l1, ra.smooth_l1);
  a.smoothl1_weight = 2.0;
  EXPECT_NEAR(composite_regression_loss(f.gts, f.props, f.targets, a).smooth_l1, 2.0 * ra.smooth_l1, 1e-15);
}

TEST(Composite, TogglesAffectOnlyTheirTerm) {
  Fixture f;
  CompositeConfig full, att, rep;
  att.use_repulsion = false;
  rep.use_attraction = false;
  const auto rf = composite_regression_loss(f.gts, f.props, f.targets, full);
  const auto ra = composite_regression_loss(f.gts, f.props, f.targets, att);
  const auto rr = composite_regression_loss(f.gts, f.props, f.targets, rep);
  EXPECT_EQ(ra.cou_attraction, rf.cou_attraction);
  EXPECT_EQ(ra.cou_repulsion, 0.0);
  EXPECT_EQ(rr.cou_repulsion, rf.cou_repulsion);
  EXPECT_EQ(rr.cou_attraction, 0.0);
  EXPECT_EQ(ra.smooth_l1, rf.smooth_l1);
  EXPECT_EQ(ra.cou() + rr.cou(), rf.cou());
}

TEST(Composite, PerGroundTruthNormalization) {
  Fixture f;
  CompositeConfig mean, per_gt;
  per_gt.regression_norm = RegressionNorm::PerGroundTruth;
  const auto rm = composite_regression_loss(f.gts, f.props, f.targets, mean);
  const auto rg = composite_regression_loss(f.gts, f.props, f.targets, per_gt);
  EXPECT_NEAR(rg.smooth_l1, rm.smooth_l1 * 4.0 / 2.0, 1e-15);
}

TEST(Composite, AutoTargetsUseMaxIou) {
  Fixture f;
  EXPECT_EQ(max_iou_targets(f.gts, f.props), (std::vector<int>{0, 0, 1, 1}));
  const std::vector<BBox> far{BBox(20, 0, 24, 8)};
  EXPECT_EQ(max_iou_targets(f.gts, far), std::vector<int>{1});
  CompositeConfig cfg;
  EXPECT_EQ(composite_regression_loss(f.gts, f.props, cfg).total,
            composite_regression_loss(f.gts, f.props, f.targets, cfg).total);
}

TEST(Composite, RejectsBadInput) {
  Fixture f;
  CompositeConfig cfg;
  EXPECT_THROW(composite_regression_loss(f.gts, f.props, std::vector<BBox>{f.gts[0]}, cfg), InvalidInput);
  cfg.alpha = -1.0;
  EXPECT_THROW(composite_regression_loss(f.gts, f.props, f.targets, cfg), InvalidInput);
}

TEST(Gradients, MatchFiniteDifferences) {
  Fixture f;
  const std::vector<BBox> one{f.props[0]};
  const std::vector<BBox> tgt{BBox(0.5, -0.2, 3.3, 7.1)};
  for (double beta : {0.1, 1.0, 5.0}) {
    const auto fd = finite_difference(one, [&](std::span<const BBox> p) { return smooth_l1(p[0], tgt[0], beta); });
    const std::vector<BoxGradient> an{smooth_l1_gradient(one[0], tgt[0], beta)};
    EXPECT_LT(relative_error(an, fd), 1e-4) << "beta " << beta;
  }
  const auto fd = finite_difference(one, [&](std::span<const BBox> p) { return iou_loss(p[0], tgt[0]); });
  const std::vector<BoxGradient> an{iou_loss_gradient(one[0], tgt[0])};
  EXPECT_LT(relative_error(an, fd), 1e-4);

  CompositeConfig cfg;
  cfg.iou_loss_weight = 0.5;
  cfg.smoothl1_beta = 5.0;
  const auto assign = assign_proposals(f.gts, f.props);
  const auto g = composite_regression_gradient(f.gts, f.props, f.targets, assign, cfg);
  const auto fdc = finite_difference(f.props, [&](std::span<const BBox> p) {
    return composite_regression_loss(f.gts, p, f.targets, assign, cfg).total;
  });
  EXPECT_LT(relative_error(g.total, fdc), 1e-4);
}

TEST(Gradients, ZeroCouLossWeightMatchesBaseline) {
  Fixture f;
  CompositeConfig zero, off;
  zero.alpha = 0.0;
  off.use_attraction = off.use_repulsion = false;
  const auto a = assign_proposals(f.gts, f.props);
  const auto gz = composite_regression_gradient(f.gts, f.props, f.targets, a, zero).total;
  const auto go = composite_regression_gradient(f.gts, f.props, f.targets, a, off).total;
  EXPECT_EQ(gz, go);
}
