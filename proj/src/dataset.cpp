// SPDX-License-Identifier: Apache-2.0
#include "gbbd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <set>

#include "gbbd/error.hpp"

namespace gbbd {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

bool is_header(std::string_view line) {
  return line.starts_with("imagesource:") || line.starts_with("gsd:");
}

// Returns std::nullopt for lines that carry no object.
std::optional<AnnotationRecord> parse_line(std::string_view line, std::size_t lineno) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto tokens = split_ws(line);
  if (tokens.empty() || is_header(tokens.front())) return std::nullopt;
  if (tokens.size() != 10) {
    throw ParseError(lineno, "expected 10 fields, got " + std::to_string(tokens.size()));
  }
  AnnotationRecord r;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto x = to_double(tokens[2 * k]);
    const auto y = to_double(tokens[2 * k + 1]);
    if (!x || !y) {
      throw ParseError(lineno, "non-numeric coordinate in corner " + std::to_string(k + 1));
    }
    r.quad[k] = {*x, *y};
  }
  r.category = std::string(tokens[8]);
  int difficult = 0;
  const std::string_view dtok = tokens[9];
  const auto [ptr, ec] = std::from_chars(dtok.data(), dtok.data() + dtok.size(), difficult);
  if (ec != std::errc{} || ptr != dtok.data() + dtok.size()) {
    throw ParseError(lineno, "difficult flag is not an integer");
  }
  r.difficult = difficult != 0;

  const auto& q = r.quad;
  if (segments_cross(q[0], q[1], q[2], q[3]) || segments_cross(q[1], q[2], q[3], q[0])) {
    throw ParseError(lineno, "self-intersecting quadrilateral");
  }
  auto hull = convex_hull(q);
  if (hull.size() < 3 || polygon_area(ConvexPolygon(std::move(hull))) < kGeoEps) {
    throw ParseError(lineno, "degenerate quadrilateral");
  }
  return r;
}

template <class OnError>
std::vector<AnnotationRecord> parse_impl(std::string_view text, OnError&& on_error) {
  std::vector<AnnotationRecord> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    ++lineno;
    try {
      if (auto r = parse_line(text.substr(pos, end - pos), lineno)) {
        out.push_back(std::move(*r));
      }
    } catch (const ParseError& e) {
      on_error(e);
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace

std::vector<AnnotationRecord> parse_dota_annotation(std::string_view text) {
  return parse_impl(text, [](const ParseError& e) { throw e; });
}

LenientParse parse_dota_annotation_lenient(std::string_view text) {
  LenientParse out;
  out.records = parse_impl(text, [&](const ParseError& e) {
    out.diagnostics.push_back({e.line(), e.what()});
  });
  return out;
}

ObbBox quad_to_obb(const AnnotationRecord& record) {
  return min_area_rect(record.quad);
}

double scott_bandwidth(std::span<const double> samples) {
  const double n = static_cast<double>(samples.size());
  if (samples.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "bandwidth needs at least 2 samples");
  }
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sigma = std::sqrt(ss / (n - 1));
  if (sigma > 1e-12 * std::abs(mean)) return sigma * std::pow(n, -0.2);
  return 0.01 * std::max(std::abs(mean), 1e-12);
}

std::vector<KdePoint> reflected_kde(std::span<const double> samples,
                                    double bandwidth, double lower) {
  if (samples.empty()) {
    throw Error(ErrorCode::kInsufficientData, "KDE needs samples");
  }
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorCode::kInvalidArgument, "KDE bandwidth must be positive");
  }
  const double hi = *std::max_element(samples.begin(), samples.end()) + 4.0 * bandwidth;
  const double range = hi - lower;
  const double steps = std::clamp(std::ceil(range / (bandwidth / 20.0)), 200.0, 2e6);
  const std::size_t n = static_cast<std::size_t>(steps) + 1;
  const double step = range / steps;

  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  const double cutoff = 9.0 * bandwidth;  // exp(-40.5) is below double noise here

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<KdePoint> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lower + step * static_cast<double>(i);
    double acc = 0.0;
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x - cutoff);
    const auto last = std::upper_bound(sorted.begin(), sorted.end(), x + cutoff);
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    // mirror images of samples within the cutoff of the boundary
    const auto mirror_end = std::upper_bound(sorted.begin(), sorted.end(),
                                             lower + cutoff - (x - lower));
    for (auto it = sorted.begin(); it != mirror_end; ++it) {
      const double z = (x - (2.0 * lower - *it)) / bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    grid[i] = {x, acc * norm};
  }
  return grid;
}

AspectRatioStats aspect_ratio_kde(std::span<const AnnotationRecord> records,
                                  std::string_view category,
                                  std::optional<double> bandwidth) {
  AspectRatioStats out;
  out.category = std::string(category);
  for (const auto& r : records) {
    if (r.category != category) continue;
    const ObbBox box = quad_to_obb(r);
    out.ratios.push_back(box.w() / box.h());
  }
  if (out.ratios.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "category '" + out.category + "' has " +
                    std::to_string(out.ratios.size()) + " sample(s); KDE needs 2");
  }
  out.bandwidth = bandwidth ? *bandwidth : scott_bandwidth(out.ratios);
  out.kde_grid = reflected_kde(out.ratios, out.bandwidth, 1.0);
  return out;
}

std::vector<std::string> categories_of(std::span<const AnnotationRecord> records) {
  std::set<std::string> names;
  for (const auto& r : records) names.insert(r.category);
  return {names.begin(), names.end()};
}

SquarenessReport squareness_report(std::span<const AnnotationRecord> records,
                                   const SquareLikePolicy& policy) {
  SquarenessReport out;
  std::map<std::string, CategorySquareness> by_cat;
  out.points.reserve(records.size());
  for (const auto& r : records) {
    const ObbBox box = quad_to_obb(r);
    const bool sq = is_square_like(box, policy);
    out.points.push_back({r.category, box.w(), box.h(), box.w() / box.h(), sq});
    auto& c = by_cat[r.category];
    c.category = r.category;
    ++c.count;
    if (sq) ++c.square_like;
  }
  for (auto& [name, c] : by_cat) {
    c.fraction = static_cast<double>(c.square_like) / static_cast<double>(c.count);
    out.categories.push_back(c);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_scatter_csv(std::ostream& os, std::span<const ScatterPoint> points) {
  os << "category,w,h,ratio,square_like\n";
  for (const auto& p : points) {
    os << p.category << ',' << format_double(p.w) << ',' << format_double(p.h)
       << ',' << format_double(p.ratio) << ',' << (p.square_like ? 1 : 0) << '\n';
  }
}

void write_kde_csv(std::ostream& os, std::span<const AspectRatioStats> stats) {
  os << "category,grid_x,density\n";
  for (const auto& s : stats) {
    for (const auto& g : s.kde_grid) {
      os << s.category << ',' << format_double(g.x) << ','
         << format_double(g.density) << '\n';
    }
  }
}

}  // namespace gbbd
