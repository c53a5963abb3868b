// SPDX-License-Identifier: Apache-2.0
#include "gbbd/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "gbbd/dataset.hpp"
#include "gbbd/error.hpp"

namespace gbbd {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kBlock = 4096;
constexpr std::size_t kScalePairs = 10000;
constexpr std::size_t kTriangleCsvRows = 10000;

// Substream tags, kept in the top bits of the stream id.
constexpr std::uint64_t kTagTriple = 1ULL << 56;
constexpr std::uint64_t kTagScale = 2ULL << 56;
constexpr std::uint64_t kTagCompare = 3ULL << 56;
constexpr std::uint64_t kTagGrad = 4ULL << 56;

using Json = nlohmann::ordered_json;

std::ofstream open_csv(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  return os;
}

void finish_csv(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string fmt(double v) { return format_double(v); }

void append_box(std::string& row, const BoxParams& b) {
  for (double v : {b.cx, b.cy, b.w, b.h, b.theta}) {
    row += ',';
    row += fmt(v);
  }
}

enum LossKind : std::size_t { kBd = 0, kGwd = 1, kKld = 2 };
constexpr std::array<const char*, 3> kLossNames = {"L_BD", "L_GWD", "L_KLD"};

double raw_distance(LossKind k, const Gaussian2& p, const Gaussian2& t,
                    const DivergenceConfig& cfg) {
  switch (k) {
    case kBd: return bhattacharyya_distance(p, t, cfg);
    case kGwd: return gwd(p, t);
    case kKld: return kld(p, t);
  }
  return 0.0;
}

double loss_of(LossKind k, const Gaussian2& p, const Gaussian2& t,
               const DivergenceConfig& cfg) {
  return normalized_loss(raw_distance(k, p, t, cfg));
}

struct PropertyCounts {
  std::uint64_t pairs = 0;
  std::uint64_t negative = 0;
  std::uint64_t self_nonzero = 0;
  std::uint64_t near_tested = 0;
  std::uint64_t near_violations = 0;
  std::uint64_t distinct_zero = 0;
  std::uint64_t symmetry_violations = 0;
  double max_symmetry_gap = 0.0;
  std::uint64_t triangle_violations = 0;
  double max_triangle_excess = -std::numeric_limits<double>::infinity();
  std::uint64_t scale_pairs = 0;
  std::uint64_t scale_violations = 0;
  double max_scale_rel_change = 0.0;
  std::uint64_t uniform_scale_sensitive = 0;

  void merge(const PropertyCounts& o) {
    pairs += o.pairs;
    negative += o.negative;
    self_nonzero += o.self_nonzero;
    near_tested += o.near_tested;
    near_violations += o.near_violations;
    distinct_zero += o.distinct_zero;
    symmetry_violations += o.symmetry_violations;
    max_symmetry_gap = std::max(max_symmetry_gap, o.max_symmetry_gap);
    triangle_violations += o.triangle_violations;
    max_triangle_excess = std::max(max_triangle_excess, o.max_triangle_excess);
    scale_pairs += o.scale_pairs;
    scale_violations += o.scale_violations;
    max_scale_rel_change = std::max(max_scale_rel_change, o.max_scale_rel_change);
    uniform_scale_sensitive += o.uniform_scale_sensitive;
  }
};

struct BlockResult {
  std::array<PropertyCounts, 3> counts;
  std::vector<std::string> csv_rows;
};

// Random invertible 2x2 map with bounded conditioning.
std::array<double, 4> sample_transform(CounterRng& rng) {
  for (;;) {
    const std::array<double, 4> m = {rng.uniform(-2, 2), rng.uniform(-2, 2),
                                     rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const double det = m[0] * m[3] - m[1] * m[2];
    const double fro2 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3];
    // singular values s1 >= s2: s1^2 + s2^2 = fro2, s1 s2 = |det|
    const double disc = std::sqrt(std::max(fro2 * fro2 - 4 * det * det, 0.0));
    const double s1 = std::sqrt(0.5 * (fro2 + disc));
    const double s2 = std::abs(det) / s1;
    if (std::abs(det) >= 0.25 && s1 / s2 <= 20.0) return m;
  }
}

BoxParams perturb(const BoxParams& b, double eps) {
  return {b.cx + eps, b.cy - eps, b.w * (1 + eps), b.h * (1 - 0.5 * eps), b.theta + eps};
}

void triple_trial(const ExperimentConfig& cfg, std::size_t trial, BlockResult& out) {
  CounterRng rng(cfg.seed, kTagTriple | trial);
  const std::array<BoxParams, 3> boxes = {sample_box(rng, cfg.ranges),
                                          sample_box(rng, cfg.ranges),
                                          sample_box(rng, cfg.ranges)};
  const std::array<Gaussian2, 3> g = {obb_to_gaussian(boxes[0].box()),
                                      obb_to_gaussian(boxes[1].box()),
                                      obb_to_gaussian(boxes[2].box())};
  const double near_eps = std::pow(10.0, -3.0 - static_cast<double>(trial % 10));
  const BoxParams near = perturb(boxes[0], near_eps);
  const Gaussian2 g_near = obb_to_gaussian(near.box());

  std::array<std::array<double, 3>, 3> sides{};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto kind = static_cast<LossKind>(k);
    PropertyCounts& c = out.counts[k];
    const double l12 = loss_of(kind, g[0], g[1], cfg.divergence);
    const double l23 = loss_of(kind, g[1], g[2], cfg.divergence);
    const double l13 = loss_of(kind, g[0], g[2], cfg.divergence);
    const double l21 = loss_of(kind, g[1], g[0], cfg.divergence);
    sides[k] = {l12, l23, l13};
    c.pairs += 3;
    c.negative += (l12 < 0) + (l23 < 0) + (l13 < 0);

    // largest side against the sum of the other two
    const double largest = std::max({l12, l23, l13});
    const double others = l12 + l23 + l13 - largest;
    const double excess = largest - others;
    c.max_triangle_excess = std::max(c.max_triangle_excess, excess);
    if (largest > others) ++c.triangle_violations;

    const double gap = std::abs(l12 - l21);
    c.max_symmetry_gap = std::max(c.max_symmetry_gap, gap);
    if (gap > 1e-12) ++c.symmetry_violations;

    // raw distance: the sqrt in the loss would amplify rounding residue
    if (raw_distance(kind, g[0], g[0], cfg.divergence) > 1e-12 * (1 + g[0].cov.trace())) {
      ++c.self_nonzero;
    }
    if (l12 == 0.0 && (g[0].mx != g[1].mx || g[0].my != g[1].my ||
                       frobenius_distance(g[0].cov, g[1].cov) > 0.0)) {
      ++c.distinct_zero;
    }

    const double l_near = loss_of(kind, g[0], g_near, cfg.divergence);
    if (l_near <= 1e-9) {
      ++c.near_tested;
      const double dmu = std::hypot(g[0].mx - g_near.mx, g[0].my - g_near.my);
      const double dcov = frobenius_distance(g[0].cov, g_near.cov);
      if (dmu > 1e-4 || dcov > 1e-4 * frobenius_norm(g_near.cov)) ++c.near_violations;
    }
  }

  if (trial < kTriangleCsvRows && !cfg.out.empty()) {
    for (std::size_t k = 0; k < 3; ++k) {
      std::string row = std::to_string(trial) + ',' + kLossNames[k];
      for (const auto& b : boxes) append_box(row, b);
      for (double v : sides[k]) {
        row += ',';
        row += fmt(v);
      }
      out.csv_rows.push_back(std::move(row));
    }
  }

  if (trial < std::min(cfg.trials, kScalePairs)) {
    CounterRng srng(cfg.seed, kTagScale | trial);
    const auto m = sample_transform(srng);
    const Gaussian2 p2 = transform(g[0], m[0], m[1], m[2], m[3]);
    const Gaussian2 t2 = transform(g[1], m[0], m[1], m[2], m[3]);
    const Gaussian2 p_s = transform(g[0], 2, 0, 0, 2);
    const Gaussian2 t_s = transform(g[1], 2, 0, 0, 2);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto kind = static_cast<LossKind>(k);
      PropertyCounts& c = out.counts[k];
      const double d0 = raw_distance(kind, g[0], g[1], cfg.divergence);
      const double d1 = raw_distance(kind, p2, t2, cfg.divergence);
      const double ds = raw_distance(kind, p_s, t_s, cfg.divergence);
      ++c.scale_pairs;
      if (std::abs(d1 - d0) > 1e-9 * (1 + std::abs(d0)) ||
          std::abs(ds - d0) > 1e-9 * (1 + std::abs(d0))) {
        ++c.scale_violations;
      }
      const double rel = std::abs(d1 - d0) / std::max(std::abs(d0), 1e-300);
      c.max_scale_rel_change = std::max(c.max_scale_rel_change, rel);
      if (std::abs(ds - d0) > 1e-3 * std::abs(d0)) ++c.uniform_scale_sensitive;
    }
  }
}

Json counts_json(const PropertyCounts& c) {
  Json j;
  j["pairs"] = c.pairs;
  j["negative"] = c.negative;
  j["self_nonzero"] = c.self_nonzero;
  j["near_pairs_tested"] = c.near_tested;
  j["near_pair_violations"] = c.near_violations;
  j["distinct_zero_loss"] = c.distinct_zero;
  j["symmetry_violations"] = c.symmetry_violations;
  j["max_symmetry_gap"] = c.max_symmetry_gap;
  j["triangle_violations"] = c.triangle_violations;
  j["max_triangle_excess"] = c.max_triangle_excess;
  j["scale_pairs"] = c.scale_pairs;
  j["scale_violations"] = c.scale_violations;
  j["max_scale_relative_change"] = c.max_scale_rel_change;
  j["uniform_scale2_sensitive_pairs"] = c.uniform_scale_sensitive;
  return j;
}

struct TableRow {
  bool non_negativity, identity, symmetry, triangle, scale_invariant;
  bool all() const { return non_negativity && identity && symmetry && triangle && scale_invariant; }
};

TableRow table_row(const PropertyCounts& c) {
  return {c.negative == 0, c.self_nonzero == 0 && c.near_violations == 0 && c.distinct_zero == 0,
          c.symmetry_violations == 0, c.triangle_violations == 0, c.scale_violations == 0};
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Loss of the prediction given raw parameters, skipping normalization so that
// finite differences move exactly one coordinate.
double loss_at(const std::array<double, 5>& q, const ObbBox& gt,
               const SquareLikePolicy& policy, const DivergenceConfig& cfg,
               bool anisotropic) {
  Gaussian2 p, t;
  if (anisotropic) {
    p = detail::anisotropic_gaussian(q[0], q[1], q[2], q[3], q[4], policy.delta);
    t = obb_to_anisotropic_gaussian(gt, policy);
  } else {
    p = detail::plain_gaussian(q[0], q[1], q[2], q[3], q[4]);
    t = obb_to_gaussian(gt);
  }
  return bd_loss(p, t, cfg);
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  const auto& r = cfg.ranges;
  if (cfg.trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  if (!(r.size_min > 0.0) || !(r.size_min <= r.size_max)) {
    throw Error(ErrorCode::kInvalidArgument, "size range must be positive and ordered");
  }
  if (!(r.center_min <= r.center_max) || !(r.angle_min <= r.angle_max)) {
    throw Error(ErrorCode::kInvalidArgument, "sampling ranges must be ordered");
  }
  validate(cfg.policy);
  validate(cfg.divergence);
  validate(cfg.total);
}

std::string ExperimentReport::json(int indent) const {
  Json j;
  j["command"] = command;
  j["seed"] = seed;
  j["trials"] = trials;
  j["verdict"] = passed ? "pass" : "fail";
  j["metrics"] = metrics;
  return j.dump(indent);
}

BoxParams sample_box(CounterRng& rng, const SamplingRanges& r) {
  BoxParams b;
  b.cx = rng.uniform(r.center_min, r.center_max);
  b.cy = rng.uniform(r.center_min, r.center_max);
  b.w = rng.uniform(r.size_min, r.size_max);
  b.h = rng.uniform(r.size_min, r.size_max);
  b.theta = rng.uniform(r.angle_min, r.angle_max);
  return b;
}

void parallel_blocks(std::size_t blocks, unsigned threads,
                     const std::function<void(std::size_t)>& fn) {
  unsigned n = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  n = static_cast<unsigned>(std::min<std::size_t>(n, blocks));
  if (n <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::jthread> workers;
  workers.reserve(n);
  for (unsigned i = 0; i < n; ++i) {
    workers.emplace_back([&] {
      for (std::size_t b; (b = next.fetch_add(1)) < blocks;) {
        try {
          fn(b);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double mean_abs_deviation(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

ExperimentReport verify_properties(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::size_t blocks = (cfg.trials + kBlock - 1) / kBlock;
  std::vector<BlockResult> results(blocks);
  parallel_blocks(blocks, cfg.threads, [&](std::size_t b) {
    const std::size_t end = std::min(cfg.trials, (b + 1) * kBlock);
    for (std::size_t t = b * kBlock; t < end; ++t) triple_trial(cfg, t, results[b]);
  });

  std::array<PropertyCounts, 3> total;
  for (const auto& r : results) {
    for (std::size_t k = 0; k < 3; ++k) total[k].merge(r.counts[k]);
  }

  ExperimentReport rep;
  rep.command = "verify-properties";
  rep.seed = cfg.seed;
  rep.trials = cfg.trials;
  Json per_loss, table;
  for (std::size_t k = 0; k < 3; ++k) {
    per_loss[kLossNames[k]] = counts_json(total[k]);
    const TableRow row = table_row(total[k]);
    table[kLossNames[k]] = {{"non_negativity", row.non_negativity},
                            {"identity_of_indiscernibles", row.identity},
                            {"symmetry", row.symmetry},
                            {"triangle_inequality", row.triangle},
                            {"scale_invariant", row.scale_invariant}};
  }
  rep.metrics["losses"] = per_loss;
  rep.metrics["table"] = table;
  rep.metrics["baseline_expectations"] = {
      {"kld_triangle_violated", total[kKld].triangle_violations >= 1},
      {"kld_asymmetric", total[kKld].max_symmetry_gap > 1e-3},
      {"gwd_triangle_holds", total[kGwd].triangle_violations == 0},
      {"gwd_scale_sensitive", total[kGwd].uniform_scale_sensitive >= 1},
  };
  rep.passed = table_row(total[kBd]).all();

  if (!cfg.out.empty()) {
    const auto path = cfg.out / "triangle.csv";
    auto os = open_csv(path);
    os << "trial,loss";
    for (int i = 1; i <= 3; ++i) {
      for (const char* f : {"cx", "cy", "w", "h", "theta"}) os << ",b" << i << '_' << f;
    }
    os << ",d12,d23,d13\n";
    for (const auto& r : results) {
      for (const auto& row : r.csv_rows) os << row << '\n';
    }
    finish_csv(os, path);
    rep.artifacts.push_back(path);
  }
  return rep;
}

ExperimentReport compare_losses(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::size_t n = cfg.trials;
  std::vector<BoxParams> gts(n), preds(n);
  std::vector<double> ciou(n), bd(n), gw(n), kl(n);
  const auto& r = cfg.ranges;

  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  parallel_blocks(blocks, cfg.threads, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      CounterRng rng(cfg.seed, kTagCompare | i);
      BoxParams gt = sample_box(rng, r);
      gt.theta = 0.0;
      BoxParams pred{};
      for (;;) {
        pred = sample_box(rng, r);
        pred.theta = 0.0;
        if (i % 2 == 0) {
          pred.cx = gt.cx + rng.uniform(-1, 1) * 0.5 * (gt.w + pred.w);
          pred.cy = gt.cy + rng.uniform(-1, 1) * 0.5 * (gt.h + pred.h);
        }
        const Hbb hp(pred.cx - pred.w / 2, pred.cy - pred.h / 2, pred.cx + pred.w / 2, pred.cy + pred.h / 2);
        const Hbb hg(gt.cx - gt.w / 2, gt.cy - gt.h / 2, gt.cx + gt.w / 2, gt.cy + gt.h / 2);
        if (i % 2 == 1 || hbb_iou(hp, hg) > 0.0) {
          ciou[i] = ciou_loss(hp, hg);
          break;
        }
      }
      const auto [p, t] = gaussian_for_pair(pred.box(), gt.box(), cfg.policy);
      bd[i] = bd_loss(p, t, cfg.divergence);
      gw[i] = gwd_loss(p, t);
      kl[i] = kld_loss(p, t);
      gts[i] = gt;
      preds[i] = pred;
    }
  });

  ExperimentReport rep;
  rep.command = "compare-losses";
  rep.seed = cfg.seed;
  rep.trials = n;
  const double mad_bd = mean_abs_deviation(bd, ciou);
  const double mad_gwd = mean_abs_deviation(gw, ciou);
  const double mad_kld = mean_abs_deviation(kl, ciou);
  const double corr_bd = pearson(bd, ciou);
  const double corr_gwd = pearson(gw, ciou);
  const double corr_kld = pearson(kl, ciou);
  rep.metrics["mad_vs_ciou"] = {{"L_BD", mad_bd}, {"L_GWD", mad_gwd}, {"L_KLD", mad_kld}};
  rep.metrics["pearson_vs_ciou"] = {{"L_BD", corr_bd}, {"L_GWD", corr_gwd}, {"L_KLD", corr_kld}};
  rep.metrics["mean_loss"] = {{"L_CIoU", mean(ciou)}, {"L_BD", mean(bd)},
                              {"L_GWD", mean(gw)}, {"L_KLD", mean(kl)}};
  rep.passed = n >= 2 && mad_bd < mad_gwd && mad_bd < mad_kld && corr_bd > corr_gwd &&
               corr_bd > corr_kld;

  if (!cfg.out.empty()) {
    const auto path = cfg.out / "compare_losses.csv";
    auto os = open_csv(path);
    os << "pair,gt_cx,gt_cy,gt_w,gt_h,pred_cx,pred_cy,pred_w,pred_h,ciou,bd,gwd,kld\n";
    for (std::size_t i = 0; i < n; ++i) {
      os << i;
      for (double v : {gts[i].cx, gts[i].cy, gts[i].w, gts[i].h, preds[i].cx, preds[i].cy,
                       preds[i].w, preds[i].h, ciou[i], bd[i], gw[i], kl[i]}) {
        os << ',' << fmt(v);
      }
      os << '\n';
    }
    finish_csv(os, path);
    rep.artifacts.push_back(path);
  }
  return rep;
}

ExperimentReport isotropic_demo(const ExperimentConfig& cfg) {
  validate(cfg.policy);
  validate(cfg.divergence);
  const ObbBox gt(0.0, 0.0, 2.0, 2.0, 0.0);
  const ObbBox pred(0.0, 0.0, 2.0, 2.0, kPi / 4);

  const double gbb_db =
      bhattacharyya_distance(obb_to_gaussian(pred), obb_to_gaussian(gt), cfg.divergence);
  const double iou = rotated_iou(pred, gt);
  const auto [pa, ta] = gaussian_for_pair(pred, gt, cfg.policy);
  const double agbb_db = bhattacharyya_distance(pa, ta, cfg.divergence);
  const double agbb_loss = normalized_loss(agbb_db);

  ExperimentReport rep;
  rep.command = "isotropic-demo";
  rep.seed = cfg.seed;
  rep.trials = 1;
  rep.metrics["gt"] = {gt.cx(), gt.cy(), gt.w(), gt.h(), gt.theta()};
  rep.metrics["pred"] = {pred.cx(), pred.cy(), pred.w(), pred.h(), pred.theta()};
  rep.metrics["gbb_bhattacharyya_distance"] = gbb_db;
  rep.metrics["gbb_bd_loss"] = normalized_loss(gbb_db);
  rep.metrics["rotated_iou"] = iou;
  rep.metrics["iou_loss"] = 1.0 - iou;
  rep.metrics["agbb_bhattacharyya_distance"] = agbb_db;
  rep.metrics["agbb_bd_loss"] = agbb_loss;
  rep.passed = gbb_db <= 1e-10 && std::abs(iou - std::sqrt(0.5)) <= 1e-3 && agbb_loss > 0.01;
  return rep;
}

double grad_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(numeric), kGradRelFloor);
}

LossGradient finite_difference_grad(const ObbBox& pred, const ObbBox& gt,
                                    const SquareLikePolicy& policy,
                                    const DivergenceConfig& cfg, Representation rep) {
  const bool anisotropic = rep == Representation::kAdaptive && is_square_like(gt, policy);
  const std::array<double, 5> q0 = {pred.cx(), pred.cy(), pred.w(), pred.h(), pred.theta()};
  std::array<double, 5> g{};
  // lengths step relative to the box, the angle by grad_step radians
  const double length_scale = std::max(pred.w(), pred.h());
  for (std::size_t k = 0; k < 5; ++k) {
    const double step = cfg.grad_step * (k < 4 ? length_scale : 1.0);
    auto plus = q0, minus = q0;
    plus[k] += step;
    minus[k] -= step;
    const double h2 = plus[k] - minus[k];  // exactly representable spacing
    g[k] = (loss_at(plus, gt, policy, cfg, anisotropic) -
            loss_at(minus, gt, policy, cfg, anisotropic)) / h2;
  }
  return {g[0], g[1], g[2], g[3], g[4]};
}

ExperimentReport grad_check(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::size_t n = cfg.trials;
  const auto& r = cfg.ranges;
  struct Row {
    BoxParams pred, gt;
    bool anisotropic;
    LossAndGradient analytic;
    LossGradient numeric;
    double rel_err;
    double identity_norm;
  };
  std::vector<Row> rows(n);

  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  parallel_blocks(blocks, cfg.threads, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      CounterRng rng(cfg.seed, kTagGrad | i);
      Row& row = rows[i];
      // even trials: square-like gt (anisotropic branch); odd: elongated gt
      const double short_side = rng.uniform(r.size_min, r.size_max);
      const double ratio = i % 2 == 0
                               ? rng.uniform(1.0, cfg.policy.tau)
                               : rng.uniform(std::max(1.5, 1.2 * cfg.policy.tau),
                                             std::max(4.0, 2.0 * cfg.policy.tau));
      row.gt = {rng.uniform(r.center_min, r.center_max), rng.uniform(r.center_min, r.center_max),
                short_side * ratio, short_side, rng.uniform(r.angle_min, r.angle_max)};
      const ObbBox gt = row.gt.box();
      row.pred = {gt.cx() + rng.uniform(-0.5, 0.5) * gt.w(), gt.cy() + rng.uniform(-0.5, 0.5) * gt.h(),
                  gt.w() * rng.uniform(0.7, 1.3), gt.h() * rng.uniform(0.7, 1.3),
                  gt.theta() + rng.uniform(-0.5, 0.5)};
      const ObbBox pred = row.pred.box();
      row.anisotropic = is_square_like(gt, cfg.policy);
      row.analytic = bd_loss_grad(pred, gt, cfg.policy, cfg.divergence);
      row.numeric = finite_difference_grad(pred, gt, cfg.policy, cfg.divergence);
      const auto a = row.analytic.grad.as_array();
      const auto f = row.numeric.as_array();
      row.rel_err = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        row.rel_err = std::max(row.rel_err, grad_relative_error(a[k], f[k]));
      }
      const auto self = bd_loss_grad(gt, gt, cfg.policy, cfg.divergence).grad.as_array();
      double norm2 = 0.0;
      for (double v : self) norm2 += v * v;
      row.identity_norm = std::sqrt(norm2);
    }
  });

  double max_rel = 0.0, max_identity = 0.0;
  std::size_t aniso = 0;
  for (const auto& row : rows) {
    max_rel = std::max(max_rel, row.rel_err);
    max_identity = std::max(max_identity, row.identity_norm);
    aniso += row.anisotropic;
  }

  ExperimentReport rep;
  rep.command = "grad-check";
  rep.seed = cfg.seed;
  rep.trials = n;
  rep.metrics["max_relative_error"] = max_rel;
  rep.metrics["tolerance"] = 1e-5;
  rep.metrics["anisotropic_pairs"] = aniso;
  rep.metrics["plain_pairs"] = n - aniso;
  rep.metrics["max_identity_gradient_norm"] = max_identity;
  rep.passed = max_rel <= 1e-5 && max_identity <= 1e-8;

  if (!cfg.out.empty()) {
    const auto path = cfg.out / "grad_check.csv";
    auto os = open_csv(path);
    os << "pair,branch,pred_cx,pred_cy,pred_w,pred_h,pred_theta,gt_cx,gt_cy,gt_w,gt_h,gt_theta,"
          "loss,a_cx,a_cy,a_w,a_h,a_theta,fd_cx,fd_cy,fd_w,fd_h,fd_theta,rel_err\n";
    for (std::size_t i = 0; i < n; ++i) {
      const Row& row = rows[i];
      std::string line = std::to_string(i) + (row.anisotropic ? ",agbb" : ",gbb");
      append_box(line, row.pred);
      append_box(line, row.gt);
      line += ',' + fmt(row.analytic.loss);
      for (double v : row.analytic.grad.as_array()) line += ',' + fmt(v);
      for (double v : row.numeric.as_array()) line += ',' + fmt(v);
      line += ',' + fmt(row.rel_err);
      os << line << '\n';
    }
    finish_csv(os, path);
    rep.artifacts.push_back(path);
  }
  return rep;
}

ExperimentReport analyze_dataset(const ExperimentConfig& cfg, const DatasetOptions& opts) {
  validate(cfg.policy);
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& p : opts.paths) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p, ec)) {
      files.push_back(p);
    } else {
      throw Error(ErrorCode::kIo, "no such file or directory: " + p.string());
    }
  }

  std::vector<AnnotationRecord> records;
  std::vector<std::string> diagnostics;
  for (const auto& f : files) {
    std::ifstream is(f, std::ios::binary);
    if (!is) throw Error(ErrorCode::kIo, "cannot read " + f.string());
    std::stringstream ss;
    ss << is.rdbuf();
    auto parsed = parse_dota_annotation_lenient(ss.str());
    for (const auto& d : parsed.diagnostics) {
      diagnostics.push_back(f.string() + ":" + std::to_string(d.line) + ": " + d.message);
    }
    for (auto& rec : parsed.records) {
      if (opts.exclude_difficult && rec.difficult) continue;
      records.push_back(std::move(rec));
    }
  }

  const SquarenessReport sq = squareness_report(records, cfg.policy);
  std::vector<AspectRatioStats> kdes;
  Json kde_meta = Json::array();
  Json skipped = Json::array();
  for (const auto& cat : sq.categories) {
    if (cat.count < 2) {
      skipped.push_back(cat.category);
      continue;
    }
    AspectRatioStats s = aspect_ratio_kde(records, cat.category, opts.bandwidth);
    double integral = 0.0;
    for (std::size_t i = 1; i < s.kde_grid.size(); ++i) {
      integral += 0.5 * (s.kde_grid[i].density + s.kde_grid[i - 1].density) *
                  (s.kde_grid[i].x - s.kde_grid[i - 1].x);
    }
    kde_meta.push_back({{"category", s.category},
                        {"samples", s.ratios.size()},
                        {"bandwidth", s.bandwidth},
                        {"grid_points", s.kde_grid.size()},
                        {"integral", integral}});
    kdes.push_back(std::move(s));
  }

  ExperimentReport rep;
  rep.command = "analyze-dataset";
  rep.seed = cfg.seed;
  rep.trials = records.size();
  rep.metrics["files"] = files.size();
  rep.metrics["records"] = records.size();
  rep.metrics["tau"] = cfg.policy.tau;
  Json cats = Json::array();
  for (const auto& c : sq.categories) {
    cats.push_back({{"category", c.category},
                    {"count", c.count},
                    {"square_like", c.square_like},
                    {"fraction", c.fraction}});
  }
  rep.metrics["squareness"] = cats;
  rep.metrics["kde"] = kde_meta;
  rep.metrics["kde_skipped"] = skipped;
  rep.metrics["diagnostics"] = diagnostics;
  rep.metrics["diagnostic_count"] = diagnostics.size();
  rep.passed = true;  // bad lines are reported, not fatal

  if (!cfg.out.empty()) {
    const auto scatter = cfg.out / "scatter.csv";
    auto os = open_csv(scatter);
    write_scatter_csv(os, sq.points);
    finish_csv(os, scatter);
    const auto kde = cfg.out / "kde.csv";
    auto ok = open_csv(kde);
    write_kde_csv(ok, kdes);
    finish_csv(ok, kde);
    rep.artifacts = {scatter, kde};
  }
  return rep;
}

ExperimentReport pair_metrics(const ObbBox& pred, const ObbBox& gt, const ExperimentConfig& cfg) {
  validate(cfg.policy);
  validate(cfg.divergence);
  auto block = [&](const Gaussian2& p, const Gaussian2& t) {
    const double db = bhattacharyya_distance(p, t, cfg.divergence);
    const double kl = kld(p, t);
    const double gw = gwd(p, t);
    return Json{{"bhattacharyya_distance", db}, {"bd_loss", normalized_loss(db)},
                {"kld", kl}, {"kld_loss", normalized_loss(kl)},
                {"gwd", gw}, {"gwd_loss", normalized_loss(gw)}};
  };
  const double iou = rotated_iou(pred, gt);
  const bool square = is_square_like(gt, cfg.policy);

  ExperimentReport rep;
  rep.command = "iou";
  rep.seed = cfg.seed;
  rep.trials = 1;
  rep.metrics["pred"] = {pred.cx(), pred.cy(), pred.w(), pred.h(), pred.theta()};
  rep.metrics["gt"] = {gt.cx(), gt.cy(), gt.w(), gt.h(), gt.theta()};
  rep.metrics["rotated_iou"] = iou;
  rep.metrics["iou_loss"] = 1.0 - iou;
  rep.metrics["gt_square_like"] = square;
  rep.metrics["gbb"] = block(obb_to_gaussian(pred), obb_to_gaussian(gt));
  if (square) {
    rep.metrics["agbb"] = block(obb_to_anisotropic_gaussian(pred, cfg.policy),
                                obb_to_anisotropic_gaussian(gt, cfg.policy));
  } else {
    rep.metrics["agbb"] = nullptr;
  }
  rep.metrics["lambda"] = cfg.total.lambda;
  rep.metrics["weighted_regression_term"] = cfg.total.lambda * bd_loss(pred, gt, cfg.policy, cfg.divergence);
  rep.passed = true;
  return rep;
}

}  // namespace gbbd
