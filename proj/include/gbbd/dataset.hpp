// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbbd/gaussian.hpp"
#include "gbbd/geometry.hpp"

namespace gbbd {

/// One DOTA object: "x1 y1 x2 y2 x3 y3 x4 y4 category difficult".
struct AnnotationRecord {
  std::array<Vec2, 4> quad;
  std::string category;
  bool difficult = false;
};

/// Strict parse of a DOTA label file. Blank lines and the "imagesource:" /
/// "gsd:" header lines are skipped. Throws ParseError on the first bad line.
std::vector<AnnotationRecord> parse_dota_annotation(std::string_view text);

struct LineDiagnostic {
  std::size_t line;
  std::string message;
};

struct LenientParse {
  std::vector<AnnotationRecord> records;
  std::vector<LineDiagnostic> diagnostics;
};

/// Like parse_dota_annotation, but keeps going past bad lines and reports
/// them instead.
LenientParse parse_dota_annotation_lenient(std::string_view text);

/// Minimum-area oriented rectangle around the four corners.
/// Throws kDegenerate if the hull area is below kGeoEps.
ObbBox quad_to_obb(const AnnotationRecord& record);

struct KdePoint {
  double x;
  double density;
};

struct AspectRatioStats {
  std::string category;
  std::vector<double> ratios;  // long / short, >= 1
  double bandwidth = 0.0;
  std::vector<KdePoint> kde_grid;
};

/// Scott's rule bandwidth, sigma * n^(-1/5). Falls back to 1% of the mean
/// when the sample has no spread.
double scott_bandwidth(std::span<const double> samples);

/// Gaussian KDE of samples supported on [lower, inf), reflected at `lower` so
/// no mass leaks below it. Evaluated on a uniform grid over
/// [lower, max + 4 bandwidths] with a step of at most bandwidth / 20.
std::vector<KdePoint> reflected_kde(std::span<const double> samples,
                                    double bandwidth, double lower);

/// Aspect-ratio KDE for one category. Throws kInsufficientData below two
/// samples; bandwidth defaults to Scott's rule.
AspectRatioStats aspect_ratio_kde(std::span<const AnnotationRecord> records,
                                  std::string_view category,
                                  std::optional<double> bandwidth = {});

struct ScatterPoint {
  std::string category;
  double w, h, ratio;
  bool square_like;
};

struct CategorySquareness {
  std::string category;
  std::size_t count = 0;
  std::size_t square_like = 0;
  double fraction = 0.0;
};

struct SquarenessReport {
  std::vector<CategorySquareness> categories;  // sorted by name
  std::vector<ScatterPoint> points;            // record order
};

SquarenessReport squareness_report(std::span<const AnnotationRecord> records,
                                   const SquareLikePolicy& policy);

/// Sorted distinct category names.
std::vector<std::string> categories_of(std::span<const AnnotationRecord> records);

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);

/// "category,w,h,ratio,square_like"
void write_scatter_csv(std::ostream& os, std::span<const ScatterPoint> points);

/// "category,grid_x,density"
void write_kde_csv(std::ostream& os, std::span<const AspectRatioStats> stats);

}  // namespace gbbd
