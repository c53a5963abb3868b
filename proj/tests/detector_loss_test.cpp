// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gbbd/detector_loss.hpp"
#include "gbbd/error.hpp"
#include "oracles.hpp"

namespace gbbd {
namespace {

// Focal term written out independently of the library.
double focal_ref(double p, double alpha_t, double gamma) {
  return -alpha_t * std::pow(1 - p, gamma) * std::log(p);
}

// Horizontal shift giving IoU r between two equal w x h boxes.
double shift_for_iou(double w, double r) { return w * (1 - r) / (1 + r); }

TEST(Focal, ConfidentCorrectIsNearZero) {
  EXPECT_LT(focal_term(1 - kProbEps, 0.25, 2), 1e-15);
  EXPECT_LT(focal_term(1.0, 0.25, 2), 1e-15);
}

TEST(Focal, GammaZeroIsCrossEntropy) {
  for (double p : {0.01, 0.3, 0.5, 0.9}) EXPECT_NEAR(focal_term(p, 1, 0), -std::log(p), 1e-15);
}

TEST(Focal, HalfProbability) {
  EXPECT_NEAR(focal_term(0.5, 0.25, 2), 0.25 * 0.25 * std::log(2.0), 1e-16);
  EXPECT_NEAR(focal_term(0.5, 0.25, 2), 0.04332, 1e-5);
}

TEST(Focal, ClampsZeroProbability) {
  const double v = focal_term(0.0, 0.25, 2);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, focal_ref(kProbEps, 0.25, 2), 1e-12);
}

TEST(Focal, BackgroundSlotUsesComplementaryAlpha) {
  const TotalLossConfig cfg;
  const std::vector<double> scores = {0.2, 0.1, 0.7};
  EXPECT_NEAR(focal_loss(scores, 0, cfg), focal_ref(0.2, 0.25, 2), 1e-15);
  EXPECT_NEAR(focal_loss(scores, 2, cfg), focal_ref(0.7, 0.75, 2), 1e-15);
  EXPECT_THROW(focal_loss(scores, 3, cfg), Error);
}

TEST(MatchAnchors, IdenticalAnchorIsPositive) {
  const std::vector<ObbBox> gts = {ObbBox(0, 0, 4, 2, 0.2)};
  const auto m = match_anchors(gts, gts, TotalLossConfig{});
  ASSERT_TRUE(m.matched[0].has_value());
  EXPECT_EQ(*m.matched[0], 0u);
  EXPECT_EQ(m.num_positive, 1u);
}

TEST(MatchAnchors, DisjointAnchorsAreBackground) {
  const std::vector<ObbBox> gts = {ObbBox(0, 0, 4, 2, 0.2)};
  const std::vector<ObbBox> anchors = {ObbBox(20, 0, 4, 2, 0), ObbBox(0, 20, 1, 1, 0)};
  const auto m = match_anchors(anchors, gts, TotalLossConfig{});
  EXPECT_EQ(m.num_positive, 0u);
  EXPECT_FALSE(m.matched[0] || m.matched[1]);
}

TEST(MatchAnchors, PicksHigherIou) {
  const double w = 4, h = 2;
  const ObbBox anchor(0, 0, w, h, 0);
  const ObbBox near(shift_for_iou(w, 0.6), 0, w, h, 0);
  const ObbBox far(-shift_for_iou(w, 0.55), 0, w, h, 0);
  const oracle::Rect ra{0, 0, w, h, 0};
  EXPECT_NEAR(oracle::raster_iou(ra, {near.cx(), 0, w, h, 0}, 1000000), 0.6, 2e-3);
  EXPECT_NEAR(oracle::raster_iou(ra, {far.cx(), 0, w, h, 0}, 1000000), 0.55, 2e-3);
  EXPECT_NEAR(rotated_iou(anchor, near), 0.6, 1e-12);
  EXPECT_NEAR(rotated_iou(anchor, far), 0.55, 1e-12);

  const std::vector<ObbBox> anchors = {anchor};
  const std::vector<ObbBox> first = {near, far};
  const std::vector<ObbBox> second = {far, near};
  EXPECT_EQ(*match_anchors(anchors, first, TotalLossConfig{}).matched[0], 0u);
  EXPECT_EQ(*match_anchors(anchors, second, TotalLossConfig{}).matched[0], 1u);
}

TEST(MatchAnchors, ThresholdIsStrict) {
  const ObbBox anchor(0, 0, 4, 2, 0);
  const std::vector<ObbBox> gts = {ObbBox(shift_for_iou(4, 0.5), 0, 4, 2, 0)};
  const std::vector<ObbBox> anchors = {anchor};
  TotalLossConfig cfg;
  cfg.pos_iou_thresh = rotated_iou(anchor, gts[0]);
  EXPECT_EQ(match_anchors(anchors, gts, cfg).num_positive, 0u);
}

TEST(TotalLoss, PerfectSingleAnchorIsNearZero) {
  const ObbBox b(1, 1, 4, 2, 0.3);
  const AnchorBatch batch{{b}, {{1.0, 0.0}}};
  const GroundTruthSet gts{{b}, {0}};
  const TotalLoss t = total_loss(batch, gts, {}, {}, {});
  EXPECT_EQ(t.num_positive, 1u);
  EXPECT_LT(t.value, 1e-12);
  EXPECT_GE(t.value, 0.0);
}

TEST(TotalLoss, ZeroLambdaIsNormalizedFocal) {
  const ObbBox gt(0, 0, 4, 2, 0);
  const AnchorBatch batch{{ObbBox(0.3, 0, 4, 2, 0), ObbBox(0.2, 0.1, 4, 2, 0.05), ObbBox(30, 0, 1, 1, 0)},
                          {{0.6, 0.4}, {0.7, 0.3}, {0.2, 0.8}}};
  TotalLossConfig cfg;
  cfg.lambda = 0;
  const TotalLoss t = total_loss(batch, {{gt}, {0}}, {}, {}, cfg);
  ASSERT_EQ(t.num_positive, 2u);
  const double focal = focal_ref(0.6, 0.25, 2) + focal_ref(0.7, 0.25, 2) + focal_ref(0.8, 0.75, 2);
  EXPECT_NEAR(t.value, focal / 2, 1e-15);
}

TEST(TotalLoss, ToyBatchMatchesHandAssembly) {
  const SquareLikePolicy policy;
  const ObbBox gt(5, 5, 6, 3, 0.2);
  const ObbBox a0(5.4, 5.2, 5.5, 3.2, 0.25);
  const ObbBox a1(40, 40, 6, 3, 0);
  const AnchorBatch batch{{a0, a1}, {{0.7, 0.2, 0.1}, {0.05, 0.15, 0.8}}};
  const GroundTruthSet gts{{gt}, {0}};
  TotalLossConfig cfg;
  cfg.lambda = 2;
  const TotalLoss t = total_loss(batch, gts, policy, {}, cfg);
  ASSERT_EQ(t.num_positive, 1u);
  const double hand = focal_ref(0.7, 0.25, 2) + focal_ref(0.8, 0.75, 2) + 2 * bd_loss(a0, gt, policy);
  EXPECT_NEAR(t.value, hand, 1e-10);
  EXPECT_NEAR(t.per_anchor[0].regression, bd_loss(a0, gt, policy), 0.0);
  EXPECT_EQ(t.per_anchor[1].regression, 0.0);
  EXPECT_FALSE(t.per_anchor[1].matched_gt.has_value());
}

TEST(TotalLoss, BackgroundOnlyBatchDividesByOne) {
  const AnchorBatch batch{{ObbBox(0, 0, 1, 1, 0)}, {{0.3, 0.7}}};
  const GroundTruthSet gts{{ObbBox(50, 50, 1, 1, 0)}, {0}};
  const TotalLoss t = total_loss(batch, gts, {}, {}, {});
  EXPECT_EQ(t.num_positive, 0u);
  EXPECT_NEAR(t.value, focal_ref(0.7, 0.75, 2), 1e-15);
}

TEST(TotalLoss, RejectsInconsistentInput) {
  const ObbBox b(0, 0, 1, 1, 0);
  EXPECT_THROW(total_loss({{b}, {}}, {{b}, {0}}, {}, {}, {}), Error);
  EXPECT_THROW(total_loss({{b}, {{0.5, 0.5}}}, {{b}, {1}}, {}, {}, {}), Error);
  EXPECT_THROW(total_loss({{b}, {{1.5, 0.5}}}, {{b}, {0}}, {}, {}, {}), Error);
  TotalLossConfig bad;
  bad.pos_iou_thresh = 1.0;
  EXPECT_THROW(total_loss({{b}, {{0.5, 0.5}}}, {{b}, {0}}, {}, {}, bad), Error);
}

struct RandomBatch {
  AnchorBatch batch;
  GroundTruthSet gts;
};

RandomBatch random_batch(oracle::Gen& gen, int anchors, int classes) {
  RandomBatch r;
  for (int g = 0; g < 3; ++g) {
    r.gts.boxes.emplace_back(gen.uniform(0, 20), gen.uniform(0, 20), gen.uniform(2, 6), gen.uniform(2, 6),
                             gen.uniform(-1.5, 1.5));
    r.gts.labels.push_back(g % classes);
  }
  for (int i = 0; i < anchors; ++i) {
    const ObbBox& g = r.gts.boxes[i % 3];
    r.batch.anchors.emplace_back(g.cx() + gen.uniform(-1, 1), g.cy() + gen.uniform(-1, 1),
                                 g.w() * gen.uniform(0.8, 1.2), g.h() * gen.uniform(0.8, 1.2),
                                 g.theta() + gen.uniform(-0.2, 0.2));
    std::vector<double> s(classes + 1);
    for (double& v : s) v = gen.uniform(0, 1);
    r.batch.class_scores.push_back(std::move(s));
  }
  return r;
}

TEST(TotalLossProperties, NonNegative) {
  oracle::Gen gen(21);
  for (int i = 0; i < 200; ++i) {
    const RandomBatch r = random_batch(gen, 12, 3);
    EXPECT_GE(total_loss(r.batch, r.gts, {}, {}, {}).value, 0.0);
  }
}

TEST(TotalLossProperties, LambdaLinear) {
  oracle::Gen gen(22);
  for (int i = 0; i < 200; ++i) {
    const RandomBatch r = random_batch(gen, 12, 3);
    TotalLossConfig c1, c2;
    c1.lambda = 1.5;
    c2.lambda = 3.0;
    const TotalLoss t1 = total_loss(r.batch, r.gts, {}, {}, c1);
    const TotalLoss t2 = total_loss(r.batch, r.gts, {}, {}, c2);
    ASSERT_GT(t1.num_positive, 0u);
    const double n = static_cast<double>(t1.num_positive);
    EXPECT_EQ(t1.regression_sum, t2.regression_sum);
    EXPECT_EQ(t1.classification_sum, t2.classification_sum);
    EXPECT_EQ(2.0 * (c1.lambda * t1.regression_sum), c2.lambda * t2.regression_sum);
    EXPECT_NEAR(t2.value - t1.value, c1.lambda * t1.regression_sum / n, 1e-12);
  }
}

TEST(TotalLossProperties, PermutationInvariant) {
  oracle::Gen gen(23);
  for (int i = 0; i < 200; ++i) {
    RandomBatch r = random_batch(gen, 15, 4);
    const double before = total_loss(r.batch, r.gts, {}, {}, {}).value;
    std::vector<std::size_t> order(r.batch.anchors.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen.engine());
    AnchorBatch shuffled;
    for (std::size_t k : order) {
      shuffled.anchors.push_back(r.batch.anchors[k]);
      shuffled.class_scores.push_back(r.batch.class_scores[k]);
    }
    EXPECT_EQ(total_loss(shuffled, r.gts, {}, {}, {}).value, before);
  }
}

TEST(StableSum, OrderIndependent) {
  std::vector<double> v = {1e16, 1.0, -1e16, 3.5, 1e-3, 2.25, 7.0, 0.1, 0.2, 0.3};
  const double s = stable_sum(v);
  std::reverse(v.begin(), v.end());
  EXPECT_EQ(stable_sum(v), s);
}

}  // namespace
}  // namespace gbbd
