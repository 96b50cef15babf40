#pragma once

#include <array>
#include <iosfwd>

namespace crowdloss {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box in corner form. Construction rejects non-finite
/// coordinates and zero or negative extent, so every BBox in the library
/// has strictly positive width and height.
class BBox {
 public:
  BBox(double x1, double y1, double x2, double y2);

  static BBox from_center(double cx, double cy, double width, double height);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }

  std::array<double, 4> coords() const { return {x1_, y1_, x2_, y2_}; }
  static BBox from_coords(const std::array<double, 4>& c) { return BBox(c[0], c[1], c[2], c[3]); }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x1_, y1_, x2_, y2_;
};

std::ostream& operator<<(std::ostream& os, const BBox& b);

/// Partial derivatives with respect to (x1, y1, x2, y2) of a box.
using BoxGradient = std::array<double, 4>;

inline BoxGradient& operator+=(BoxGradient& a, const BoxGradient& b) {
  for (int k = 0; k < 4; ++k) a[k] += b[k];
  return a;
}
inline BoxGradient operator*(double s, BoxGradient g) {
  for (auto& v : g) v *= s;
  return g;
}

double intersection_area(const BBox& a, const BBox& b);
double iou(const BBox& a, const BBox& b);
Point center(const BBox& b);

/// Cosine of the angle at vertex `b` of triangle (a, b, c), via the law of
/// cosines. Returns 1 when either a or c coincides with b.
double cos_angle_at(Point b, Point a, Point c);

/// Normalized distance of p's center from g's center:
///   s = sqrt((1 - min(l,r)/(W/2)) * (1 - min(t,b)/(H/2)))
/// with l,r,t,b the unsigned distances from p's center to g's border lines.
/// Each factor is clamped to [0,1] before the product.
double border_distance(const BBox& g, const BBox& p);

/// True iff center(p) lies inside g, boundary included.
bool contains_center(const BBox& g, const BBox& p);
bool contains_point(const BBox& g, Point q);
/// True iff inner lies entirely inside outer (shared edges allowed).
bool contains(const BBox& outer, const BBox& inner);

// Gradients with respect to the corners of the second box. Kinks
// (edge coincidences, clamp boundaries, zero distance) take the zero
// subgradient on the non-smooth component.
BoxGradient iou_gradient(const BBox& g, const BBox& p);
BoxGradient border_distance_gradient(const BBox& g, const BBox& p);
/// d cos_angle_at(b, a, c) / d a.
std::array<double, 2> cos_angle_gradient(Point b, Point a, Point c);

/// Lift a gradient with respect to a box center onto the four corners.
inline BoxGradient center_to_corners(const std::array<double, 2>& g) {
  return {0.5 * g[0], 0.5 * g[1], 0.5 * g[0], 0.5 * g[1]};
}

}  // namespace crowdloss
