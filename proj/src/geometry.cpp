// SPDX-License-Identifier: Apache-2.0
#include "gbbd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "gbbd/error.hpp"

namespace gbbd {

namespace {

constexpr double kPi = std::numbers::pi;

bool all_finite(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

double signed_area(std::span<const Vec2> v) {
  if (v.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    acc += cross(v[i], v[(i + 1) % n]);
  }
  return 0.5 * acc;
}

// Distance of p from the infinite line through a and b.
double line_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double len = std::hypot(d.x, d.y);
  if (len <= kGeoEps) return std::hypot(p.x - a.x, p.y - a.y);
  return std::abs(cross(d, p - a)) / len;
}

// Drops repeated and collinear vertices; collapses to empty below 3.
std::vector<Vec2> simplify(std::vector<Vec2> pts) {
  bool changed = true;
  while (changed && pts.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < pts.size() && pts.size() >= 3; ++i) {
      const std::size_t n = pts.size();
      const Vec2 prev = pts[(i + n - 1) % n];
      const Vec2 next = pts[(i + 1) % n];
      const Vec2 cur = pts[i];
      const bool dup = std::hypot(cur.x - next.x, cur.y - next.y) <= kGeoEps;
      if (dup || line_distance(cur, prev, next) <= kGeoEps) {
        pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        --i;
      }
    }
  }
  if (pts.size() < 3) pts.clear();
  return pts;
}

}  // namespace

double wrap_half_turn(double theta) {
  double t = theta - kPi * std::floor((theta + kPi / 2) / kPi);
  if (t >= kPi / 2) t -= kPi;
  if (t < -kPi / 2) t += kPi;
  return t;
}

ObbBox::ObbBox(double cx, double cy, double w, double h, double theta)
    : cx_(cx), cy_(cy), w_(w), h_(h), theta_(theta) {
  if (!all_finite({cx, cy, w, h, theta})) {
    throw Error(ErrorCode::kInvalidArgument, "box parameters must be finite");
  }
  if (!(w > 0.0) || !(h > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "box sizes must be positive (w=" + std::to_string(w) +
                    ", h=" + std::to_string(h) + ")");
  }
  if (w_ < h_) {
    std::swap(w_, h_);
    theta_ -= kPi / 2;
  }
  theta_ = wrap_half_turn(theta_);
}

ConvexPolygon::ConvexPolygon(std::vector<Vec2> vertices)
    : vertices_(std::move(vertices)) {
  if (!vertices_.empty() && vertices_.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "a non-empty polygon needs at least 3 vertices");
  }
  if (signed_area(vertices_) < 0.0) {
    std::reverse(vertices_.begin(), vertices_.end());
  }
}

Hbb::Hbb(double x0, double y0, double x1, double y1)
    : xmin(x0), ymin(y0), xmax(x1), ymax(y1) {
  if (!all_finite({x0, y0, x1, y1}) || !(x0 < x1) || !(y0 < y1)) {
    throw Error(ErrorCode::kInvalidArgument,
                "horizontal box needs xmin < xmax and ymin < ymax");
  }
}

ConvexPolygon obb_to_polygon(const ObbBox& box) {
  const double c = std::cos(box.theta());
  const double s = std::sin(box.theta());
  const double hw = box.w() / 2;
  const double hh = box.h() / 2;
  const Vec2 u{c * hw, s * hw};    // half long edge
  const Vec2 v{-s * hh, c * hh};   // half short edge
  const Vec2 o = box.center();
  return ConvexPolygon({o + u - v, o + u + v, o - u + v, o - u - v});
}

ConvexPolygon polygon_clip(const ConvexPolygon& subject,
                           const ConvexPolygon& clip) {
  if (subject.empty() || clip.empty()) return {};

  std::vector<Vec2> out(subject.vertices().begin(), subject.vertices().end());
  std::vector<Vec2> in;
  const auto edges = clip.vertices();
  for (std::size_t e = 0; e < edges.size() && !out.empty(); ++e) {
    const Vec2 a = edges[e];
    const Vec2 b = edges[(e + 1) % edges.size()];
    const Vec2 ab = b - a;
    in.swap(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2 cur = in[i];
      const Vec2 prev = in[(i + in.size() - 1) % in.size()];
      const double sc = cross(ab, cur - a);
      const double sp = cross(ab, prev - a);
      if ((sc >= 0.0) != (sp >= 0.0)) {
        const double t = sp / (sp - sc);
        out.push_back(prev + t * (cur - prev));
      }
      if (sc >= 0.0) out.push_back(cur);
    }
  }
  auto simplified = simplify(std::move(out));
  if (simplified.empty()) return {};
  return ConvexPolygon(std::move(simplified));
}

double polygon_area(const ConvexPolygon& poly) {
  return std::abs(signed_area(poly.vertices()));
}

double rotated_iou(const ObbBox& a, const ObbBox& b) {
  const double inter =
      polygon_area(polygon_clip(obb_to_polygon(a), obb_to_polygon(b)));
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double hbb_iou(const Hbb& a, const Hbb& b) {
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double ciou_loss(const Hbb& pred, const Hbb& gt) {
  const double iou = hbb_iou(pred, gt);

  const double dx = (pred.xmin + pred.xmax - gt.xmin - gt.xmax) / 2;
  const double dy = (pred.ymin + pred.ymax - gt.ymin - gt.ymax) / 2;
  const double rho2 = dx * dx + dy * dy;
  const double cw = std::max(pred.xmax, gt.xmax) - std::min(pred.xmin, gt.xmin);
  const double ch = std::max(pred.ymax, gt.ymax) - std::min(pred.ymin, gt.ymin);
  const double c2 = cw * cw + ch * ch;

  const double dat = std::atan(gt.width() / gt.height()) -
                     std::atan(pred.width() / pred.height());
  const double v = 4.0 / (kPi * kPi) * dat * dat;
  const double alpha = v > 0.0 ? v / ((1.0 - iou) + v) : 0.0;

  return 1.0 - iou + rho2 / c2 + alpha * v;
}

std::vector<Vec2> convex_hull(std::span<const Vec2> points) {
  std::vector<Vec2> p(points.begin(), points.end());
  std::sort(p.begin(), p.end(), [](Vec2 a, Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) return p;

  std::vector<Vec2> hull(2 * p.size());
  std::size_t k = 0;
  for (const Vec2& q : p) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], q - hull[k - 2]) <= 0) --k;
    hull[k++] = q;
  }
  for (std::size_t i = p.size() - 1, lo = k + 1; i-- > 0;) {
    const Vec2 q = p[i];
    while (k >= lo && cross(hull[k - 1] - hull[k - 2], q - hull[k - 2]) <= 0) --k;
    hull[k++] = q;
  }
  hull.resize(k - 1);
  return hull;
}

ObbBox min_area_rect(std::span<const Vec2> points) {
  const std::vector<Vec2> hull = convex_hull(points);
  if (hull.size() < 3 || signed_area(hull) < kGeoEps) {
    throw Error(ErrorCode::kDegenerate, "point set has (near) zero hull area");
  }

  double best_area = std::numeric_limits<double>::infinity();
  Vec2 best_center, best_u;
  double best_w = 0.0, best_h = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 edge = hull[(i + 1) % hull.size()] - hull[i];
    const double len = std::hypot(edge.x, edge.y);
    const Vec2 u{edge.x / len, edge.y / len};
    const Vec2 v{-u.y, u.x};
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const Vec2& q : hull) {
      const double pu = dot(q, u);
      const double pv = dot(q, v);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double area = (umax - umin) * (vmax - vmin);
    if (area < best_area) {
      best_area = area;
      best_u = u;
      best_w = umax - umin;
      best_h = vmax - vmin;
      best_center = (0.5 * (umin + umax)) * u + (0.5 * (vmin + vmax)) * v;
    }
  }
  return ObbBox(best_center.x, best_center.y, best_w, best_h,
                std::atan2(best_u.y, best_u.x));
}

}  // namespace gbbd
