#include "crowdloss/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "crowdloss/error.hpp"

namespace crowdloss {

BBox::BBox(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw InvalidInput("BBox: non-finite coordinate");
  }
  if (!(x2 > x1) || !(y2 > y1)) {
    std::ostringstream os;
    os << "BBox: degenerate box [" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << "]";
    throw InvalidInput(os.str());
  }
}

BBox BBox::from_center(double cx, double cy, double width, double height) {
  return BBox(cx - 0.5 * width, cy - 0.5 * height, cx + 0.5 * width, cy + 0.5 * height);
}

std::ostream& operator<<(std::ostream& os, const BBox& b) {
  return os << '[' << b.x1() << ", " << b.y1() << ", " << b.x2() << ", " << b.y2() << ']';
}

double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Point center(const BBox& b) { return {0.5 * (b.x1() + b.x2()), 0.5 * (b.y1() + b.y2())}; }

double cos_angle_at(Point b, Point a, Point c) {
  const double bax = a.x - b.x, bay = a.y - b.y;
  const double bcx = c.x - b.x, bcy = c.y - b.y;
  const double acx = c.x - a.x, acy = c.y - a.y;
  const double ba2 = bax * bax + bay * bay;
  const double bc2 = bcx * bcx + bcy * bcy;
  if (ba2 == 0.0 || bc2 == 0.0) return 1.0;
  const double ac2 = acx * acx + acy * acy;
  const double cosv = (ba2 + bc2 - ac2) / (2.0 * std::sqrt(ba2) * std::sqrt(bc2));
  return std::clamp(cosv, -1.0, 1.0);
}

namespace {

struct AxisFactor {
  double value;
  double slope;  // d value / d center coordinate
};

// 1 - min(l, r) / (extent / 2), clamped to [0, 1].
AxisFactor axis_factor(double c, double lo, double hi) {
  const double l = std::abs(c - lo);
  const double r = std::abs(hi - c);
  const double half = 0.5 * (hi - lo);
  const double raw = 1.0 - std::min(l, r) / half;
  if (raw <= 0.0) return {0.0, 0.0};
  if (raw >= 1.0) return {1.0, 0.0};
  double dmin;
  if (l < r) {
    dmin = c > lo ? 1.0 : -1.0;
  } else {
    dmin = hi > c ? -1.0 : 1.0;
  }
  return {raw, -dmin / half};
}

}  // namespace

double border_distance(const BBox& g, const BBox& p) {
  const Point pc = center(p);
  const double fx = axis_factor(pc.x, g.x1(), g.x2()).value;
  const double fy = axis_factor(pc.y, g.y1(), g.y2()).value;
  return std::sqrt(fx * fy);
}

bool contains_point(const BBox& g, Point q) {
  return q.x >= g.x1() && q.x <= g.x2() && q.y >= g.y1() && q.y <= g.y2();
}

bool contains_center(const BBox& g, const BBox& p) { return contains_point(g, center(p)); }

bool contains(const BBox& outer, const BBox& inner) {
  return inner.x1() >= outer.x1() && inner.y1() >= outer.y1() && inner.x2() <= outer.x2() &&
         inner.y2() <= outer.y2();
}

BoxGradient iou_gradient(const BBox& g, const BBox& p) {
  const double iw = std::min(g.x2(), p.x2()) - std::max(g.x1(), p.x1());
  const double ih = std::min(g.y2(), p.y2()) - std::max(g.y1(), p.y1());
  if (iw <= 0.0 || ih <= 0.0) return {0.0, 0.0, 0.0, 0.0};

  // d(iw)/d(p.x1), d(iw)/d(p.x2), likewise for ih.
  const double diw_x1 = p.x1() > g.x1() ? -1.0 : 0.0;
  const double diw_x2 = p.x2() < g.x2() ? 1.0 : 0.0;
  const double dih_y1 = p.y1() > g.y1() ? -1.0 : 0.0;
  const double dih_y2 = p.y2() < g.y2() ? 1.0 : 0.0;

  const double inter = iw * ih;
  const double uni = g.area() + p.area() - inter;
  const double pw = p.width(), ph = p.height();

  const BoxGradient d_inter{diw_x1 * ih, dih_y1 * iw, diw_x2 * ih, dih_y2 * iw};
  const BoxGradient d_area{-ph, -pw, ph, pw};

  BoxGradient out{};
  for (int k = 0; k < 4; ++k) {
    // d(I/U) with U = Ag + Ap - I
    out[k] = (d_inter[k] * (uni + inter) - inter * d_area[k]) / (uni * uni);
  }
  return out;
}

BoxGradient border_distance_gradient(const BBox& g, const BBox& p) {
  const Point pc = center(p);
  const AxisFactor fx = axis_factor(pc.x, g.x1(), g.x2());
  const AxisFactor fy = axis_factor(pc.y, g.y1(), g.y2());
  const double s = std::sqrt(fx.value * fy.value);
  if (s == 0.0) return {0.0, 0.0, 0.0, 0.0};
  const double dcx = fy.value * fx.slope / (2.0 * s);
  const double dcy = fx.value * fy.slope / (2.0 * s);
  return center_to_corners({dcx, dcy});
}

std::array<double, 2> cos_angle_gradient(Point b, Point a, Point c) {
  const double ux = a.x - b.x, uy = a.y - b.y;
  const double vx = c.x - b.x, vy = c.y - b.y;
  const double nu2 = ux * ux + uy * uy;
  const double nv2 = vx * vx + vy * vy;
  if (nu2 == 0.0 || nv2 == 0.0) return {0.0, 0.0};
  const double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
  const double dot = ux * vx + uy * vy;
  // d/du (u.v / (|u||v|)) = v/(|u||v|) - (u.v) u / (|u|^3 |v|)
  const double k1 = 1.0 / (nu * nv);
  const double k2 = dot / (nu2 * nu * nv);
  return {vx * k1 - ux * k2, vy * k1 - uy * k2};
}

}  // namespace crowdloss
