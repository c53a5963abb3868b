// SPDX-License-Identifier: Apache-2.0
#pragma once

// Desk-scale verification studies behind the CLI. Each command returns a
// summary {command, seed, trials, verdict, metrics} and, when an output
// directory is configured, writes CSV artifacts next to it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbbd/detector_loss.hpp"
#include "gbbd/divergence.hpp"
#include "gbbd/gaussian.hpp"
#include "gbbd/geometry.hpp"
#include "gbbd/rng.hpp"

namespace gbbd {

struct SamplingRanges {
  double center_min = 0.0;
  double center_max = 10.0;
  double size_min = 0.5;
  double size_max = 5.0;
  double angle_min = -1.5707963267948966;
  double angle_max = 1.5707963267948966;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t trials = 1000;
  SamplingRanges ranges;
  std::filesystem::path out;  // empty: no CSV output
  unsigned threads = 0;       // 0: hardware concurrency
  SquareLikePolicy policy;
  DivergenceConfig divergence;
  TotalLossConfig total;
};

/// Throws kInvalidArgument for zero trials or empty/non-positive ranges.
void validate(const ExperimentConfig& cfg);

struct ExperimentReport {
  std::string command;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  bool passed = false;
  nlohmann::ordered_json metrics;
  std::vector<std::filesystem::path> artifacts;

  /// {command, seed, trials, verdict, metrics} rendered deterministically.
  std::string json(int indent = 2) const;
};

/// Raw box parameters as drawn, before long-edge normalization.
struct BoxParams {
  double cx, cy, w, h, theta;
  ObbBox box() const { return ObbBox(cx, cy, w, h, theta); }
};

BoxParams sample_box(CounterRng& rng, const SamplingRanges& ranges);

/// Runs fn(block) for block in [0, blocks) across up to `threads` workers.
void parallel_blocks(std::size_t blocks, unsigned threads,
                     const std::function<void(std::size_t)>& fn);

/// Non-negativity, identity, symmetry, triangle inequality (over `trials`
/// random triples) and scale invariance (over min(trials, 10^4) pairs) for
/// L_BD, L_GWD and L_KLD. Passes iff L_BD holds every property.
ExperimentReport verify_properties(const ExperimentConfig& cfg);

/// Loss alignment against CIoU over `trials` horizontal pairs; half the pairs
/// are forced to overlap.
ExperimentReport compare_losses(const ExperimentConfig& cfg);

/// Square box against its quarter-pi rotation under GBB and AGBB.
ExperimentReport isotropic_demo(const ExperimentConfig& cfg);

/// Forward-mode gradients against central differences on `trials` random
/// pairs, alternating the anisotropic and plain branches.
ExperimentReport grad_check(const ExperimentConfig& cfg);

/// Relative error used by grad_check: |a - f| / max(|f|, floor).
inline constexpr double kGradRelFloor = 1e-6;
double grad_relative_error(double analytic, double numeric);

/// Central differences of L_BD in the prediction's raw parameters. The step is
/// grad_step times the box's long side for positions and sizes, grad_step for
/// the angle.
LossGradient finite_difference_grad(const ObbBox& pred, const ObbBox& gt,
                                    const SquareLikePolicy& policy,
                                    const DivergenceConfig& cfg,
                                    Representation rep = Representation::kAdaptive);

struct DatasetOptions {
  std::vector<std::filesystem::path> paths;  // files, or directories of *.txt
  std::optional<double> bandwidth;
  bool exclude_difficult = false;
};

/// Squareness fractions and aspect-ratio KDEs. Writes scatter.csv and kde.csv
/// into cfg.out when set. Bad lines are reported per file and skipped; a
/// missing path throws kIo.
ExperimentReport analyze_dataset(const ExperimentConfig& cfg,
                                 const DatasetOptions& opts);

/// Every metric for one pair: IoU, D_B, and the normalized losses under GBB,
/// plus AGBB when the ground truth is square-like.
ExperimentReport pair_metrics(const ObbBox& pred, const ObbBox& gt,
                              const ExperimentConfig& cfg);

/// Pearson correlation and mean absolute deviation helpers.
double pearson(std::span<const double> a, std::span<const double> b);
double mean_abs_deviation(std::span<const double> a, std::span<const double> b);

}  // namespace gbbd
