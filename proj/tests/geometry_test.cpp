// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gbbd/error.hpp"
#include "gbbd/geometry.hpp"
#include "oracles.hpp"

namespace gbbd {
namespace {

constexpr double kPi = std::numbers::pi;

oracle::Rect as_rect(const ObbBox& b) { return {b.cx(), b.cy(), b.w(), b.h(), b.theta()}; }

ObbBox as_box(const oracle::Rect& r) { return ObbBox(r.cx, r.cy, r.w, r.h, r.theta); }

// Every vertex of `a` lies within tol of some vertex of `b`, and vice versa.
bool same_vertex_set(const ConvexPolygon& a, const ConvexPolygon& b, double tol) {
  if (a.size() != b.size()) return false;
  auto covered = [tol](const ConvexPolygon& x, const ConvexPolygon& y) {
    for (Vec2 p : x.vertices()) {
      bool found = false;
      for (Vec2 q : y.vertices()) found |= std::hypot(p.x - q.x, p.y - q.y) <= tol;
      if (!found) return false;
    }
    return true;
  };
  return covered(a, b) && covered(b, a);
}

TEST(ObbBox, NormalizesToLongEdge) {
  const ObbBox b(0, 0, 2, 4, 0.3);
  EXPECT_DOUBLE_EQ(b.w(), 4);
  EXPECT_DOUBLE_EQ(b.h(), 2);
  EXPECT_NEAR(b.theta(), 0.3 - kPi / 2, 1e-15);
}

TEST(ObbBox, WrapsAngleIntoHalfOpenRange) {
  EXPECT_NEAR(ObbBox(0, 0, 4, 2, kPi / 2).theta(), -kPi / 2, 1e-15);
  EXPECT_NEAR(ObbBox(0, 0, 4, 2, 3.0).theta(), 3.0 - kPi, 1e-15);
  EXPECT_NEAR(ObbBox(0, 0, 4, 2, -7.0).theta(), -7.0 + 2 * kPi, 1e-14);
}

TEST(ObbBox, RejectsBadInput) {
  EXPECT_THROW(ObbBox(0, 0, 0, 1, 0), Error);
  EXPECT_THROW(ObbBox(0, 0, 1, -1, 0), Error);
  EXPECT_THROW(ObbBox(NAN, 0, 1, 1, 0), Error);
  EXPECT_THROW(ObbBox(0, 0, 1, 1, INFINITY), Error);
}

TEST(Polygon, AxisAlignedSquareCorners) {
  const ConvexPolygon p = obb_to_polygon(ObbBox(0, 0, 2, 2, 0));
  const ConvexPolygon want({{1, -1}, {1, 1}, {-1, 1}, {-1, -1}});
  EXPECT_TRUE(same_vertex_set(p, want, 1e-15));
}

TEST(Polygon, QuarterTurnSpansExpectedExtent) {
  const ConvexPolygon p = obb_to_polygon(ObbBox(0, 0, 4, 2, kPi / 2));
  const ConvexPolygon want({{1, -2}, {1, 2}, {-1, 2}, {-1, -2}});
  EXPECT_TRUE(same_vertex_set(p, want, 1e-12));
}

TEST(Polygon, RotatedBoxRoundTripsThroughMinAreaRect) {
  const ObbBox b(1, 2, 4, 2, kPi / 6);
  const ConvexPolygon p = obb_to_polygon(b);
  ASSERT_EQ(p.size(), 4u);
  double cx = 0, cy = 0;
  for (Vec2 v : p.vertices()) {
    cx += v.x / 4;
    cy += v.y / 4;
  }
  EXPECT_NEAR(cx, 1, 1e-12);
  EXPECT_NEAR(cy, 2, 1e-12);
  const auto v = p.vertices();
  std::vector<double> edges;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2 e = v[(i + 1) % 4] - v[i];
    edges.push_back(std::hypot(e.x, e.y));
    const double ang = std::atan2(e.y, e.x);
    // every edge is parallel or perpendicular to the pi/6 direction
    const double off = std::remainder(ang - kPi / 6, kPi / 2);
    EXPECT_NEAR(off, 0.0, 1e-12);
  }
  std::sort(edges.begin(), edges.end());
  EXPECT_NEAR(edges[0], 2, 1e-12);
  EXPECT_NEAR(edges[3], 4, 1e-12);
  const ObbBox r = min_area_rect(v);
  EXPECT_NEAR(r.cx(), b.cx(), 1e-9);
  EXPECT_NEAR(r.cy(), b.cy(), 1e-9);
  EXPECT_NEAR(r.w(), b.w(), 1e-9);
  EXPECT_NEAR(r.h(), b.h(), 1e-9);
  EXPECT_NEAR(r.theta(), b.theta(), 1e-9);
}

TEST(Polygon, ClockwiseInputIsReoriented) {
  const ConvexPolygon p({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
  EXPECT_NEAR(polygon_area(p), 1.0, 1e-15);
}

TEST(Clip, SelfClipKeepsPolygon) {
  const ConvexPolygon p = obb_to_polygon(ObbBox(3, -1, 5, 2, 0.7));
  EXPECT_NEAR(polygon_area(polygon_clip(p, p)), polygon_area(p), 1e-12);
}

TEST(Clip, DisjointSquaresGiveEmpty) {
  const auto a = obb_to_polygon(ObbBox(0, 0, 1, 1, 0));
  const auto b = obb_to_polygon(ObbBox(5, 5, 1, 1, 0));
  EXPECT_TRUE(polygon_clip(a, b).empty());
}

TEST(Clip, ShiftedUnitSquare) {
  const ConvexPolygon a({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const ConvexPolygon b({{0.5, 0}, {1.5, 0}, {1.5, 1}, {0.5, 1}});
  const ConvexPolygon c = polygon_clip(a, b);
  EXPECT_EQ(c.size(), 4u);
  EXPECT_NEAR(polygon_area(c), 0.5, 1e-15);
}

TEST(Clip, TouchingEdgeHasNoArea) {
  const ConvexPolygon a({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const ConvexPolygon b({{1, 0}, {2, 0}, {2, 1}, {1, 1}});
  EXPECT_NEAR(polygon_area(polygon_clip(a, b)), 0.0, 1e-12);
}

TEST(Clip, OutputAreaNeverExceedsInputs) {
  oracle::Gen gen(11);
  for (int i = 0; i < 2000; ++i) {
    const auto a = obb_to_polygon(as_box(gen.rect(0, 3)));
    const auto b = obb_to_polygon(as_box(gen.rect(0, 3)));
    const double area = polygon_area(polygon_clip(a, b));
    EXPECT_LE(area, std::min(polygon_area(a), polygon_area(b)) + 1e-12);
  }
}

TEST(Area, TrivialCases) {
  EXPECT_DOUBLE_EQ(polygon_area(obb_to_polygon(ObbBox(0, 0, 2, 2, 0))), 4.0);
  EXPECT_DOUBLE_EQ(polygon_area(ConvexPolygon()), 0.0);
}

TEST(Area, OctagonMatchesRaster) {
  const ObbBox a(0, 0, 2, 2, 0), b(0, 0, 2, 2, kPi / 4);
  const double area = polygon_area(polygon_clip(obb_to_polygon(a), obb_to_polygon(b)));
  const double raster = oracle::raster_intersection(as_rect(a), as_rect(b), 1000);
  EXPECT_NEAR(raster, 8 * (std::sqrt(2.0) - 1), 2e-3);
  EXPECT_NEAR(area, raster, 2e-3);
  EXPECT_NEAR(area, 8 * (std::sqrt(2.0) - 1), 1e-12);
}

TEST(RotatedIou, TrivialCases) {
  const ObbBox a(1, 1, 3, 2, 0.4);
  EXPECT_NEAR(rotated_iou(a, a), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(rotated_iou(a, ObbBox(20, 20, 3, 2, 0.4)), 0.0);
}

TEST(RotatedIou, SquareAgainstItsDiagonalTurn) {
  const ObbBox a(0, 0, 2, 2, 0), b(0, 0, 2, 2, kPi / 4);
  const double iou = rotated_iou(a, b);
  EXPECT_NEAR(iou, oracle::raster_iou(as_rect(a), as_rect(b), 1000000), 2e-3);
  EXPECT_NEAR(iou, 0.7071, 1e-3);
}

TEST(RotatedIou, AgreesWithRaster) {
  oracle::Gen gen(2024);
  for (int i = 0; i < 100; ++i) {
    const ObbBox a = as_box(gen.rect(0, 3)), b = as_box(gen.rect(0, 3));
    EXPECT_NEAR(rotated_iou(a, b), oracle::raster_iou(as_rect(a), as_rect(b), 100000), 2e-3)
        << "pair " << i;
  }
}

TEST(RotatedIou, Symmetric) {
  oracle::Gen gen(5);
  for (int i = 0; i < 10000; ++i) {
    const ObbBox a = as_box(gen.rect(0, 4)), b = as_box(gen.rect(0, 4));
    EXPECT_LE(std::abs(rotated_iou(a, b) - rotated_iou(b, a)), 1e-12);
  }
}

TEST(RotatedIou, InvariantUnderRigidMotion) {
  oracle::Gen gen(6);
  for (int i = 0; i < 5000; ++i) {
    const oracle::Rect ra = gen.rect(0, 4), rb = gen.rect(0, 4);
    const double phi = gen.uniform(-kPi, kPi), tx = gen.uniform(-50, 50), ty = gen.uniform(-50, 50);
    auto move = [&](oracle::Rect r) {
      const double x = std::cos(phi) * r.cx - std::sin(phi) * r.cy + tx;
      const double y = std::sin(phi) * r.cx + std::cos(phi) * r.cy + ty;
      return oracle::Rect{x, y, r.w, r.h, r.theta + phi};
    };
    const double before = rotated_iou(as_box(ra), as_box(rb));
    const double after = rotated_iou(as_box(move(ra)), as_box(move(rb)));
    EXPECT_NEAR(before, after, 1e-9);
  }
}

TEST(HbbIou, HandCountedAreas) {
  const Hbb a(0, 0, 2, 2);
  EXPECT_DOUBLE_EQ(hbb_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(hbb_iou(a, Hbb(5, 5, 6, 6)), 0.0);
  EXPECT_NEAR(hbb_iou(a, Hbb(1, 0, 3, 2)), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(Hbb(1, 0, 1, 2), Error);
}

TEST(Ciou, TrivialCases) {
  const Hbb a(0, 0, 2, 2);
  EXPECT_NEAR(ciou_loss(a, a), 0.0, 1e-15);
  EXPECT_GT(ciou_loss(a, Hbb(4, 0, 6, 2)), 1.0);
}

TEST(Ciou, MatchesSecondTranscription) {
  const double got = ciou_loss(Hbb(0, 0, 2, 2), Hbb(1, 1, 3, 3));
  EXPECT_NEAR(got, oracle::ciou({0, 0, 2, 2}, {1, 1, 3, 3}), 1e-15);
  EXPECT_NEAR(got, 61.0 / 63.0, 1e-15);

  oracle::Gen gen(8);
  for (int i = 0; i < 1000; ++i) {
    const double x0 = gen.uniform(0, 3), y0 = gen.uniform(0, 3);
    const double x1 = gen.uniform(0, 3), y1 = gen.uniform(0, 3);
    const std::array<double, 4> p = {x0, y0, x0 + gen.uniform(0.5, 4), y0 + gen.uniform(0.5, 4)};
    const std::array<double, 4> g = {x1, y1, x1 + gen.uniform(0.5, 4), y1 + gen.uniform(0.5, 4)};
    EXPECT_NEAR(ciou_loss(Hbb(p[0], p[1], p[2], p[3]), Hbb(g[0], g[1], g[2], g[3])),
                oracle::ciou(p, g), 1e-12);
  }
}

TEST(MinAreaRect, RecoversAxisAlignedRectangle) {
  const std::vector<Vec2> pts = {{0, 0}, {4, 0}, {4, 2}, {0, 2}};
  const ObbBox r = min_area_rect(pts);
  EXPECT_NEAR(r.cx(), 2, 1e-12);
  EXPECT_NEAR(r.cy(), 1, 1e-12);
  EXPECT_NEAR(r.w(), 4, 1e-12);
  EXPECT_NEAR(r.h(), 2, 1e-12);
  EXPECT_NEAR(r.theta(), 0, 1e-12);
}

TEST(MinAreaRect, RoundTripIsRepresentationEquivalent) {
  oracle::Gen gen(9);
  for (int i = 0; i < 5000; ++i) {
    const ObbBox b = as_box(gen.rect(-20, 20, 0.1, 8));
    const ConvexPolygon p = obb_to_polygon(b);
    const ObbBox r = min_area_rect(p.vertices());
    EXPECT_TRUE(same_vertex_set(obb_to_polygon(r), p, 1e-9));
    EXPECT_NEAR(r.w(), b.w(), 1e-9);
    EXPECT_NEAR(r.h(), b.h(), 1e-9);
  }
}

TEST(MinAreaRect, DegenerateInputThrows) {
  const std::vector<Vec2> line = {{0, 0}, {1, 1}, {2, 2}};
  try {
    min_area_rect(line);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
  }
}

TEST(ConvexHull, DropsInteriorAndCollinearPoints) {
  const std::vector<Vec2> pts = {{0, 0}, {1, 0}, {2, 0}, {2, 2}, {1, 1}, {0, 2}};
  EXPECT_EQ(convex_hull(pts).size(), 4u);
}

}  // namespace
}  // namespace gbbd
