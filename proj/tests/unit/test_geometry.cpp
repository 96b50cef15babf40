#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crowdloss/error.hpp"
#include "crowdloss/geometry.hpp"

using namespace crowdloss;

TEST(BBox, RejectsDegenerateAndNonFinite) {
  EXPECT_THROW(BBox(0, 0, 0, 1), InvalidInput);
  EXPECT_THROW(BBox(0, 0, 1, 0), InvalidInput);
  EXPECT_THROW(BBox(1, 0, 0, 1), InvalidInput);
  EXPECT_THROW(BBox(0, 0, NAN, 1), InvalidInput);
  EXPECT_THROW(BBox(0, 0, INFINITY, 1), InvalidInput);
  EXPECT_NO_THROW(BBox(0, 0, 1e-9, 1e-9));
}

TEST(BBox, FromCenterRoundTrip) {
  const BBox b = BBox::from_center(2, 4, 4, 8);
  EXPECT_EQ(b, BBox(0, 0, 4, 8));
  EXPECT_EQ(BBox::from_coords(b.coords()), b);
}

TEST(Iou, Examples) {
  const BBox b(0.5, -3, 7, 2);
  EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
  EXPECT_NEAR(iou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)), 1.0 / 7.0, 1e-15);
  EXPECT_EQ(iou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)), 0.0);
}

TEST(Iou, TouchingEdgesDoNotOverlap) { EXPECT_EQ(iou(BBox(0, 0, 1, 1), BBox(1, 0, 2, 1)), 0.0); }

TEST(Iou, SymmetricBoundedAndInvariant) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-10, 10), s(0.1, 5);
  for (int k = 0; k < 2000; ++k) {
    const BBox a = BBox::from_center(u(rng), u(rng), s(rng), s(rng));
    const BBox b = BBox::from_center(u(rng) * 0.2, u(rng) * 0.2, s(rng), s(rng));
    const double v = iou(a, b);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    ASSERT_EQ(v, iou(b, a));
    const double dx = u(rng), dy = u(rng);
    const BBox at(a.x1() + dx, a.y1() + dy, a.x2() + dx, a.y2() + dy);
    const BBox bt(b.x1() + dx, b.y1() + dy, b.x2() + dx, b.y2() + dy);
    ASSERT_NEAR(iou(at, bt), v, 1e-12);
    const double k2 = s(rng);
    ASSERT_NEAR(iou(BBox(a.x1() * k2, a.y1() * k2, a.x2() * k2, a.y2() * k2),
                    BBox(b.x1() * k2, b.y1() * k2, b.x2() * k2, b.y2() * k2)),
                v, 1e-12);
  }
}

TEST(Iou, EqualsOneOnlyForIdenticalBoxes) {
  EXPECT_LT(iou(BBox(0, 0, 1, 1), BBox(0, 0, 1, 1.000001)), 1.0);
  EXPECT_EQ(iou(BBox(0, 0, 1, 1), BBox(0, 0, 1, 1)), 1.0);
}

// Pixel-rasterization oracle on integer boxes.
TEST(Iou, MatchesRasterizationOnIntegerBoxes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pos(0, 20), len(1, 12);
  for (int k = 0; k < 500; ++k) {
    const int ax = pos(rng), ay = pos(rng), aw = len(rng), ah = len(rng);
    const int bx = pos(rng), by = pos(rng), bw = len(rng), bh = len(rng);
    int inter = 0, uni = 0;
    for (int y = 0; y < 40; ++y) {
      for (int x = 0; x < 40; ++x) {
        const bool ia = x >= ax && x < ax + aw && y >= ay && y < ay + ah;
        const bool ib = x >= bx && x < bx + bw && y >= by && y < by + bh;
        inter += ia && ib;
        uni += ia || ib;
      }
    }
    const double expected = static_cast<double>(inter) / uni;
    ASSERT_NEAR(iou(BBox(ax, ay, ax + aw, ay + ah), BBox(bx, by, bx + bw, by + bh)), expected, 1e-9);
  }
}

TEST(Center, Examples) {
  EXPECT_EQ(center(BBox(0, 0, 2, 2)).x, 1.0);
  EXPECT_EQ(center(BBox(0, 0, 2, 2)).y, 1.0);
  EXPECT_EQ(center(BBox(0, 0, 4, 8)).x, 2.0);
  EXPECT_EQ(center(BBox(0, 0, 4, 8)).y, 4.0);
  EXPECT_EQ(center(BBox(-1, -1, 1, 1)).x, 0.0);
  EXPECT_EQ(center(BBox(-1, -1, 1, 1)).y, 0.0);
}

TEST(CosAngle, CanonicalLayouts) {
  EXPECT_NEAR(cos_angle_at({0, 0}, {1, 0}, {2, 0}), 1.0, 1e-12);
  EXPECT_NEAR(cos_angle_at({0, 0}, {1, 0}, {-1, 0}), -1.0, 1e-12);
  EXPECT_NEAR(cos_angle_at({0, 0}, {1, 0}, {0, 1}), 0.0, 1e-12);
}

TEST(CosAngle, DegenerateVertexGivesOne) {
  EXPECT_EQ(cos_angle_at({0, 0}, {0, 0}, {3, 1}), 1.0);
  EXPECT_EQ(cos_angle_at({0, 0}, {3, 1}, {0, 0}), 1.0);
}

TEST(CosAngle, BoundedAndSymmetric) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 2000; ++k) {
    const Point b{u(rng), u(rng)}, a{u(rng), u(rng)}, c{u(rng), u(rng)};
    const double v = cos_angle_at(b, a, c);
    ASSERT_GE(v, -1.0);
    ASSERT_LE(v, 1.0);
    ASSERT_NEAR(v, cos_angle_at(b, c, a), 1e-12);
  }
  // Nearly collinear points would round outside [-1, 1] without the clamp.
  EXPECT_LE(cos_angle_at({0, 0}, {1e-8, 0}, {1e8, 1e-9}), 1.0);
}

TEST(BorderDistance, Examples) {
  const BBox g(0, 0, 4, 8);
  EXPECT_NEAR(border_distance(g, BBox::from_center(2, 4, 1, 1)), 0.0, 1e-12);
  EXPECT_NEAR(border_distance(g, BBox::from_center(0, 0, 1, 1)), 1.0, 1e-12);
  EXPECT_NEAR(border_distance(g, BBox::from_center(1, 2, 1, 1)), 0.5, 1e-12);
}

TEST(BorderDistance, CornersAndClampOutside) {
  const BBox g(0, 0, 4, 8);
  for (auto [x, y] : {std::pair{0.0, 0.0}, {4.0, 0.0}, {0.0, 8.0}, {4.0, 8.0}}) {
    EXPECT_NEAR(border_distance(g, BBox::from_center(x, y, 2, 2)), 1.0, 1e-12);
  }
  // Outside along x the factor falls off again and reaches 0 at twice the half width.
  EXPECT_NEAR(border_distance(g, BBox::from_center(5, 0, 1, 1)), std::sqrt(0.5), 1e-12);
  EXPECT_EQ(border_distance(g, BBox::from_center(8, 0, 1, 1)), 0.0);
  EXPECT_EQ(border_distance(g, BBox::from_center(20, 0, 1, 1)), 0.0);
}

TEST(BorderDistance, RangeZeroAtCenterAndInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-6, 6), s(0.5, 4);
  for (int k = 0; k < 2000; ++k) {
    const BBox g = BBox::from_center(u(rng), u(rng), s(rng), s(rng));
    const BBox p = BBox::from_center(center(g).x + u(rng), center(g).y + u(rng), s(rng), s(rng));
    const double v = border_distance(g, p);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    const double dx = u(rng), k2 = s(rng);
    auto tf = [&](const BBox& b) { return BBox((b.x1() + dx) * k2, (b.y1() - dx) * k2, (b.x2() + dx) * k2, (b.y2() - dx) * k2); };
    ASSERT_NEAR(border_distance(tf(g), tf(p)), v, 1e-9);
  }
  const BBox g(1, 1, 3, 9);
  EXPECT_EQ(border_distance(g, BBox::from_center(2, 5, 0.3, 7)), 0.0);
  EXPECT_GT(border_distance(g, BBox::from_center(2.1, 5.2, 0.3, 7)), 0.0);
}

TEST(ContainsCenter, ClosedBoundary) {
  const BBox g(0, 0, 4, 4);
  EXPECT_TRUE(contains_center(g, BBox(1, 1, 3, 3)));
  EXPECT_FALSE(contains_center(g, BBox(3, 3, 7, 7)));
  EXPECT_TRUE(contains_center(g, BBox(2, 2, 6, 6)));
}
