#include "brute_couloss.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace oracle {

double iou(const Rect& a, const Rect& b) {
  double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  double inter = iw * ih;
  double ua = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return inter / ua;
}

static double s_factor(const Rect& g, const Rect& p) {
  double cx = (p.x1 + p.x2) / 2, cy = (p.y1 + p.y2) / 2;
  double l = std::fabs(cx - g.x1), r = std::fabs(g.x2 - cx);
  double t = std::fabs(cy - g.y1), b = std::fabs(g.y2 - cy);
  double fx = 1 - std::min(l, r) / ((g.x2 - g.x1) / 2);
  double fy = 1 - std::min(t, b) / ((g.y2 - g.y1) / 2);
  if (fx < 0) fx = 0;
  if (fx > 1) fx = 1;
  if (fy < 0) fy = 0;
  if (fy > 1) fy = 1;
  return std::sqrt(fx * fy);
}

static double cos_at(double bx, double by, double ax, double ay, double cx, double cy) {
  double ba2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
  double bc2 = (cx - bx) * (cx - bx) + (cy - by) * (cy - by);
  double ac2 = (cx - ax) * (cx - ax) + (cy - ay) * (cy - ay);
  if (ba2 == 0 || bc2 == 0) return 1.0;
  double c = (ba2 + bc2 - ac2) / (2 * std::sqrt(ba2) * std::sqrt(bc2));
  if (c > 1) c = 1;
  if (c < -1) c = -1;
  return c;
}

Work triplet_work(const Rect& gi, const Rect& gj, const Rect& pp, const Rect& pn, double eps) {
  double fa = -std::log(std::max(iou(gi, pp), eps));
  double fr = -std::log(std::max(1 - iou(gi, pn), eps));
  double cos_r = cos_at((gi.x1 + gi.x2) / 2, (gi.y1 + gi.y2) / 2, (pn.x1 + pn.x2) / 2, (pn.y1 + pn.y2) / 2,
                        (gj.x1 + gj.x2) / 2, (gj.y1 + gj.y2) / 2);
  double wa = fa * 1.0 * s_factor(gi, pp);
  double wr = fr * cos_r * s_factor(gi, pn);
  return {wa > 0 ? wa : 0, wr > 0 ? wr : 0};
}

Loss couloss(const std::vector<Rect>& gts, const std::vector<Rect>& props, bool literal, double threshold,
             double eps) {
  std::vector<int> target(props.size(), -1);
  for (size_t k = 0; k < props.size(); ++k) {
    int best = -1;
    double best_iou = -1;
    for (size_t i = 0; i < gts.size(); ++i) {
      double v = iou(gts[i], props[k]);
      if (v > best_iou) {
        best_iou = v;
        best = (int)i;
      }
    }
    const Rect& g = gts[best];
    double cx = (props[k].x1 + props[k].x2) / 2, cy = (props[k].y1 + props[k].y2) / 2;
    bool inside = cx >= g.x1 && cx <= g.x2 && cy >= g.y1 && cy <= g.y2;
    if (best_iou > threshold && inside) target[k] = best;
  }

  double att = 0, rep = 0;
  int count = 0;
  std::set<std::pair<int, int>> seen_a, seen_r;
  for (size_t i = 0; i < gts.size(); ++i) {
    for (size_t p = 0; p < props.size(); ++p) {
      if (target[p] != (int)i) continue;
      for (size_t n = 0; n < props.size(); ++n) {
        if (target[n] < 0 || target[n] == (int)i) continue;
        if (iou(gts[i], props[n]) <= 0) continue;
        Work w = triplet_work(gts[i], gts[target[n]], props[p], props[n], eps);
        ++count;
        if (literal) {
          att += w.attractive;
          rep += w.repulsive;
        } else {
          if (seen_a.insert({(int)i, (int)p}).second) att += w.attractive;
          if (seen_r.insert({(int)i, (int)n}).second) rep += w.repulsive;
        }
      }
    }
  }
  return {(att + rep) / gts.size(), att, rep, count};
}

}  // namespace oracle
