// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numbers>
#include <span>
#include <vector>

namespace gbbd {

/// Collinearity / contact tolerance for polygon work, in length units.
inline constexpr double kGeoEps = 1e-9;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Wraps an angle into [-pi/2, pi/2).
double wrap_half_turn(double theta);

/// Oriented box in the long-edge convention: w >= h > 0 and
/// theta in [-pi/2, pi/2) is the direction of the long edge.
///
/// Construction normalizes any (w, h, theta) with positive sizes through
/// (w, h, theta) -> (h, w, theta - pi/2) and wrapping theta by multiples of
/// pi. Non-positive or non-finite parameters throw kInvalidArgument.
class ObbBox {
 public:
  ObbBox(double cx, double cy, double w, double h, double theta);

  double cx() const noexcept { return cx_; }
  double cy() const noexcept { return cy_; }
  double w() const noexcept { return w_; }
  double h() const noexcept { return h_; }
  double theta() const noexcept { return theta_; }
  Vec2 center() const noexcept { return {cx_, cy_}; }
  double area() const noexcept { return w_ * h_; }

  friend bool operator==(const ObbBox&, const ObbBox&) = default;

 private:
  double cx_, cy_, w_, h_, theta_;
};

/// Convex polygon, vertices counter-clockwise. An empty vertex list is the
/// empty polygon.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;
  explicit ConvexPolygon(std::vector<Vec2> vertices);

  std::span<const Vec2> vertices() const noexcept { return vertices_; }
  std::size_t size() const noexcept { return vertices_.size(); }
  bool empty() const noexcept { return vertices_.empty(); }

 private:
  std::vector<Vec2> vertices_;
};

/// Axis-aligned box, xmin < xmax and ymin < ymax.
struct Hbb {
  double xmin, ymin, xmax, ymax;

  Hbb(double x0, double y0, double x1, double y1);
  double width() const noexcept { return xmax - xmin; }
  double height() const noexcept { return ymax - ymin; }
  double area() const noexcept { return width() * height(); }
};

ConvexPolygon obb_to_polygon(const ObbBox& box);

/// Sutherland-Hodgman clip of one convex polygon by another. Contacts of
/// zero measure come back empty.
ConvexPolygon polygon_clip(const ConvexPolygon& subject,
                           const ConvexPolygon& clip);

/// Shoelace area; 0 for empty or degenerate input.
double polygon_area(const ConvexPolygon& poly);

double rotated_iou(const ObbBox& a, const ObbBox& b);

double hbb_iou(const Hbb& a, const Hbb& b);

/// Complete-IoU loss: 1 - IoU + rho^2/c^2 + alpha*v, where rho is the center
/// distance, c the diagonal of the smallest enclosing box, v the
/// arctangent aspect-ratio discrepancy and alpha = v / ((1 - IoU) + v).
double ciou_loss(const Hbb& pred, const Hbb& gt);

/// Convex hull (counter-clockwise, no collinear points) of a point set.
std::vector<Vec2> convex_hull(std::span<const Vec2> points);

/// Minimum-area enclosing rectangle of a point set (rotating calipers over the
/// hull edges). Throws kDegenerate when the hull area is below kGeoEps.
ObbBox min_area_rect(std::span<const Vec2> points);

}  // namespace gbbd
