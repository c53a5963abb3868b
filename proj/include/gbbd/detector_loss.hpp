// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gbbd/divergence.hpp"
#include "gbbd/gaussian.hpp"
#include "gbbd/geometry.hpp"

namespace gbbd {

/// Probability clamp applied before the focal-loss logarithm.
inline constexpr double kProbEps = 1e-7;

/// Anchors with per-anchor class probabilities. Each score vector has
/// num_classes + 1 entries; the last entry is background.
struct AnchorBatch {
  std::vector<ObbBox> anchors;
  std::vector<std::vector<double>> class_scores;
};

struct GroundTruthSet {
  std::vector<ObbBox> boxes;
  std::vector<int> labels;  // in [0, num_classes)
};

struct TotalLossConfig {
  double lambda = 2.0;
  double pos_iou_thresh = 0.5;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
};

void validate(const TotalLossConfig& cfg);

struct AnchorAssignment {
  std::vector<std::optional<std::size_t>> matched;  // gt index, or background
  std::size_t num_positive = 0;
};

/// Anchor i is positive iff max_j IoU(A_i, G_j) > pos_iou_thresh; it is
/// matched to the arg-max, lowest index on ties.
AnchorAssignment match_anchors(std::span<const ObbBox> anchors,
                               std::span<const ObbBox> gts,
                               const TotalLossConfig& cfg);

/// -alpha_t (1 - p_t)^gamma ln(p_t), p_t clamped to [kProbEps, 1 - kProbEps].
/// alpha_t is focal_alpha for foreground targets and 1 - focal_alpha for the
/// background slot (the last entry of `scores`).
double focal_loss(std::span<const double> scores, std::size_t true_class,
                  const TotalLossConfig& cfg);

/// Focal term with an explicit alpha_t.
double focal_term(double p_t, double alpha_t, double gamma);

struct AnchorLoss {
  std::optional<std::size_t> matched_gt;
  double classification = 0.0;
  double regression = 0.0;  // L_BD against the matched gt, 0 for background
};

struct TotalLoss {
  double value = 0.0;
  double classification_sum = 0.0;
  double regression_sum = 0.0;
  std::size_t num_positive = 0;
  std::vector<AnchorLoss> per_anchor;
};

/// (1/N_pos) (sum_i focal(C_i) + lambda sum_{j in pos} L_BD(A_j, G_j)),
/// with N_pos = 0 treated as a divisor of 1. Sums are order-independent, so
/// permuting the anchors leaves the result bit-identical.
TotalLoss total_loss(const AnchorBatch& batch, const GroundTruthSet& gts,
                     const SquareLikePolicy& policy,
                     const DivergenceConfig& dcfg, const TotalLossConfig& cfg);

/// Pairwise summation of the values sorted ascending; independent of the
/// input order.
double stable_sum(std::vector<double> values);

}  // namespace gbbd
