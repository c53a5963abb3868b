// SPDX-License-Identifier: Apache-2.0
#include "gbbd/detector_loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gbbd/error.hpp"

namespace gbbd {

namespace {

double pairwise(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise(v.first(half)) + pairwise(v.subspan(half));
}

}  // namespace

void validate(const TotalLossConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be non-negative");
  }
  if (!(cfg.pos_iou_thresh > 0.0 && cfg.pos_iou_thresh < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pos_iou_thresh must lie in (0, 1)");
  }
  if (!(cfg.focal_gamma >= 0.0) || !(cfg.focal_alpha >= 0.0 && cfg.focal_alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid focal parameters");
  }
}

double stable_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return pairwise(values);
}

AnchorAssignment match_anchors(std::span<const ObbBox> anchors,
                               std::span<const ObbBox> gts,
                               const TotalLossConfig& cfg) {
  AnchorAssignment out;
  out.matched.resize(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const double iou = rotated_iou(anchors[i], gts[j]);
      if (iou > best) {
        best = iou;
        best_j = j;
      }
    }
    if (!gts.empty() && best > cfg.pos_iou_thresh) {
      out.matched[i] = best_j;
      ++out.num_positive;
    }
  }
  return out;
}

double focal_term(double p_t, double alpha_t, double gamma) {
  const double p = std::clamp(p_t, kProbEps, 1.0 - kProbEps);
  return -alpha_t * std::pow(1.0 - p, gamma) * std::log(p);
}

double focal_loss(std::span<const double> scores, std::size_t true_class,
                  const TotalLossConfig& cfg) {
  if (scores.size() < 2 || true_class >= scores.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "class index " + std::to_string(true_class) +
                    " outside score vector of size " + std::to_string(scores.size()));
  }
  const bool background = true_class + 1 == scores.size();
  const double alpha_t = background ? 1.0 - cfg.focal_alpha : cfg.focal_alpha;
  return focal_term(scores[true_class], alpha_t, cfg.focal_gamma);
}

TotalLoss total_loss(const AnchorBatch& batch, const GroundTruthSet& gts,
                     const SquareLikePolicy& policy,
                     const DivergenceConfig& dcfg, const TotalLossConfig& cfg) {
  validate(cfg);
  validate(policy);
  if (batch.anchors.size() != batch.class_scores.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "anchor and score counts differ");
  }
  if (gts.boxes.size() != gts.labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "gt box and label counts differ");
  }
  for (const auto& scores : batch.class_scores) {
    if (scores.size() != batch.class_scores.front().size()) {
      throw Error(ErrorCode::kInvalidArgument, "ragged class score vectors");
    }
    for (double s : scores) {
      if (!(s >= 0.0 && s <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "class score outside [0, 1]");
      }
    }
  }
  const std::size_t background =
      batch.class_scores.empty() ? 0 : batch.class_scores.front().size() - 1;
  for (int label : gts.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= background) {
      throw Error(ErrorCode::kInvalidArgument,
                  "gt label " + std::to_string(label) + " is not a foreground class");
    }
  }

  const AnchorAssignment assignment = match_anchors(batch.anchors, gts.boxes, cfg);

  TotalLoss out;
  out.num_positive = assignment.num_positive;
  out.per_anchor.resize(batch.anchors.size());
  std::vector<double> cls_terms(batch.anchors.size());
  std::vector<double> reg_terms;
  reg_terms.reserve(assignment.num_positive);
  for (std::size_t i = 0; i < batch.anchors.size(); ++i) {
    AnchorLoss& a = out.per_anchor[i];
    a.matched_gt = assignment.matched[i];
    std::size_t target = background;
    if (a.matched_gt) {
      const std::size_t j = *a.matched_gt;
      target = static_cast<std::size_t>(gts.labels[j]);
      a.regression = bd_loss(batch.anchors[i], gts.boxes[j], policy, dcfg);
      reg_terms.push_back(a.regression);
    }
    a.classification = focal_loss(batch.class_scores[i], target, cfg);
    cls_terms[i] = a.classification;
  }
  out.classification_sum = stable_sum(std::move(cls_terms));
  out.regression_sum = stable_sum(std::move(reg_terms));
  const double divisor =
      out.num_positive == 0 ? 1.0 : static_cast<double>(out.num_positive);
  out.value = (out.classification_sum + cfg.lambda * out.regression_sum) / divisor;
  return out;
}

}  // namespace gbbd
