// SPDX-License-Identifier: Apache-2.0
#include "gbbd/gbbd.h"

#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "gbbd/dataset.hpp"
#include "gbbd/detector_loss.hpp"
#include "gbbd/divergence.hpp"
#include "gbbd/error.hpp"
#include "gbbd/experiments.hpp"

struct gbbd_experiment {
  gbbd::ExperimentConfig cfg;
};

struct gbbd_report {
  gbbd::ExperimentReport report;
  std::string json;
  std::vector<std::string> artifacts;
};

struct gbbd_annotations {
  std::vector<gbbd::AnnotationRecord> records;
};

namespace {

thread_local std::string g_last_error;

gbbd_status to_status(gbbd::ErrorCode code) {
  switch (code) {
    case gbbd::ErrorCode::kInvalidArgument: return GBBD_ERR_INVALID_ARGUMENT;
    case gbbd::ErrorCode::kInvalidPolicy: return GBBD_ERR_INVALID_POLICY;
    case gbbd::ErrorCode::kSingularCovariance: return GBBD_ERR_SINGULAR_COVARIANCE;
    case gbbd::ErrorCode::kParse: return GBBD_ERR_PARSE;
    case gbbd::ErrorCode::kDegenerate: return GBBD_ERR_DEGENERATE;
    case gbbd::ErrorCode::kInsufficientData: return GBBD_ERR_INSUFFICIENT_DATA;
    case gbbd::ErrorCode::kIo: return GBBD_ERR_IO;
  }
  return GBBD_ERR_INTERNAL;
}

gbbd_status fail(gbbd_status status, const char* what) {
  g_last_error = what;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
gbbd_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    return GBBD_OK;
  } catch (const gbbd::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(GBBD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GBBD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GBBD_ERR_INTERNAL, "unknown error");
  }
}

#define GBBD_REQUIRE(cond)                                                  \
  do {                                                                      \
    if (!(cond)) return fail(GBBD_ERR_INVALID_ARGUMENT, "null argument: " #cond); \
  } while (0)

gbbd::ObbBox to_box(const gbbd_obb& b) { return gbbd::ObbBox(b.cx, b.cy, b.w, b.h, b.theta); }

gbbd_obb from_box(const gbbd::ObbBox& b) { return {b.cx(), b.cy(), b.w(), b.h(), b.theta()}; }

gbbd::SquareLikePolicy policy_of(const gbbd_params& p) { return {p.tau, p.delta}; }
gbbd::DivergenceConfig divergence_of(const gbbd_params& p) { return {p.alpha, p.grad_step}; }
gbbd::TotalLossConfig total_of(const gbbd_params& p) {
  return {p.lambda, p.pos_iou_thresh, p.focal_gamma, p.focal_alpha};
}

gbbd_status wrap_report(gbbd::ExperimentReport&& rep, gbbd_report** out) {
  auto* r = new gbbd_report{std::move(rep), {}, {}};
  r->json = r->report.json();
  for (const auto& a : r->report.artifacts) r->artifacts.push_back(a.string());
  *out = r;
  return GBBD_OK;
}

template <class Fn>
gbbd_status run(const gbbd_experiment* exp, gbbd_report** out, Fn&& fn) {
  GBBD_REQUIRE(exp);
  GBBD_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { wrap_report(fn(exp->cfg), out); });
}

}  // namespace

extern "C" {

const char* gbbd_version(void) { return "0.1.0"; }

const char* gbbd_status_string(gbbd_status status) {
  switch (status) {
    case GBBD_OK: return "ok";
    case GBBD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GBBD_ERR_INVALID_POLICY: return "invalid policy";
    case GBBD_ERR_SINGULAR_COVARIANCE: return "singular covariance";
    case GBBD_ERR_PARSE: return "parse error";
    case GBBD_ERR_DEGENERATE: return "degenerate geometry";
    case GBBD_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case GBBD_ERR_IO: return "i/o error";
    case GBBD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* gbbd_last_error(void) { return g_last_error.c_str(); }

void gbbd_params_default(gbbd_params* params) {
  if (!params) return;
  const gbbd::SquareLikePolicy policy;
  const gbbd::DivergenceConfig div;
  const gbbd::TotalLossConfig total;
  *params = {div.alpha,          policy.delta,      policy.tau,        total.lambda,
             total.pos_iou_thresh, total.focal_gamma, total.focal_alpha, div.grad_step};
}

gbbd_status gbbd_normalize_obb(gbbd_obb* box) {
  GBBD_REQUIRE(box);
  return guarded([&] { *box = from_box(to_box(*box)); });
}

gbbd_status gbbd_rotated_iou(const gbbd_obb* a, const gbbd_obb* b, double* out) {
  GBBD_REQUIRE(a && b && out);
  return guarded([&] { *out = gbbd::rotated_iou(to_box(*a), to_box(*b)); });
}

gbbd_status gbbd_bhattacharyya_distance(const gbbd_params* params, const gbbd_obb* pred,
                                        const gbbd_obb* gt, double* out) {
  GBBD_REQUIRE(params && pred && gt && out);
  return guarded([&] {
    const auto [p, t] = gbbd::gaussian_for_pair(to_box(*pred), to_box(*gt), policy_of(*params));
    *out = gbbd::bhattacharyya_distance(p, t, divergence_of(*params));
  });
}

gbbd_status gbbd_bd_loss(const gbbd_params* params, const gbbd_obb* pred, const gbbd_obb* gt,
                         double* out) {
  GBBD_REQUIRE(params && pred && gt && out);
  return guarded([&] {
    *out = gbbd::bd_loss(to_box(*pred), to_box(*gt), policy_of(*params), divergence_of(*params));
  });
}

gbbd_status gbbd_bd_loss_grad(const gbbd_params* params, const gbbd_obb* pred,
                              const gbbd_obb* gt, double* loss, double grad[5]) {
  GBBD_REQUIRE(params && pred && gt && loss && grad);
  return guarded([&] {
    const auto r = gbbd::bd_loss_grad(to_box(*pred), to_box(*gt), policy_of(*params),
                                      divergence_of(*params));
    *loss = r.loss;
    const auto g = r.grad.as_array();
    for (int k = 0; k < 5; ++k) grad[k] = g[k];
  });
}

gbbd_status gbbd_total_loss(const gbbd_params* params, const gbbd_obb* anchors,
                            const double* scores, size_t n_anchors, size_t n_scores,
                            const gbbd_obb* gts, const int* labels, size_t n_gts,
                            double* total, size_t* num_positive) {
  GBBD_REQUIRE(params && total);
  GBBD_REQUIRE(n_anchors == 0 || (anchors && scores));
  GBBD_REQUIRE(n_gts == 0 || (gts && labels));
  return guarded([&] {
    gbbd::AnchorBatch batch;
    for (size_t i = 0; i < n_anchors; ++i) {
      batch.anchors.push_back(to_box(anchors[i]));
      batch.class_scores.emplace_back(scores + i * n_scores, scores + (i + 1) * n_scores);
    }
    gbbd::GroundTruthSet set;
    for (size_t j = 0; j < n_gts; ++j) {
      set.boxes.push_back(to_box(gts[j]));
      set.labels.push_back(labels[j]);
    }
    const auto r = gbbd::total_loss(batch, set, policy_of(*params), divergence_of(*params),
                                    total_of(*params));
    *total = r.value;
    if (num_positive) *num_positive = r.num_positive;
  });
}

gbbd_status gbbd_annotations_parse(const char* text, size_t len, gbbd_annotations** out) {
  GBBD_REQUIRE(out);
  GBBD_REQUIRE(text || len == 0);
  *out = nullptr;
  return guarded([&] {
    auto records = gbbd::parse_dota_annotation(std::string_view(text ? text : "", len));
    *out = new gbbd_annotations{std::move(records)};
  });
}

size_t gbbd_annotations_count(const gbbd_annotations* ann) {
  return ann ? ann->records.size() : 0;
}

const char* gbbd_annotations_category(const gbbd_annotations* ann, size_t index) {
  if (!ann || index >= ann->records.size()) return nullptr;
  return ann->records[index].category.c_str();
}

int gbbd_annotations_difficult(const gbbd_annotations* ann, size_t index) {
  if (!ann || index >= ann->records.size()) return -1;
  return ann->records[index].difficult ? 1 : 0;
}

gbbd_status gbbd_annotations_obb(const gbbd_annotations* ann, size_t index, gbbd_obb* out) {
  GBBD_REQUIRE(ann && out);
  if (index >= ann->records.size()) return fail(GBBD_ERR_INVALID_ARGUMENT, "index out of range");
  return guarded([&] { *out = from_box(gbbd::quad_to_obb(ann->records[index])); });
}

void gbbd_annotations_destroy(gbbd_annotations* ann) { delete ann; }

gbbd_status gbbd_experiment_create(const gbbd_params* params, gbbd_experiment** out) {
  GBBD_REQUIRE(out);
  *out = nullptr;
  gbbd_params p;
  gbbd_params_default(&p);
  if (params) p = *params;
  return guarded([&] {
    auto exp = std::make_unique<gbbd_experiment>();
    exp->cfg.policy = policy_of(p);
    exp->cfg.divergence = divergence_of(p);
    exp->cfg.total = total_of(p);
    gbbd::validate(exp->cfg);
    *out = exp.release();
  });
}

void gbbd_experiment_destroy(gbbd_experiment* exp) { delete exp; }

gbbd_status gbbd_experiment_set_seed(gbbd_experiment* exp, uint64_t seed) {
  GBBD_REQUIRE(exp);
  exp->cfg.seed = seed;
  return GBBD_OK;
}

gbbd_status gbbd_experiment_set_trials(gbbd_experiment* exp, uint64_t trials) {
  GBBD_REQUIRE(exp);
  if (trials < 1) return fail(GBBD_ERR_INVALID_ARGUMENT, "trials must be >= 1");
  exp->cfg.trials = static_cast<std::size_t>(trials);
  return GBBD_OK;
}

gbbd_status gbbd_experiment_set_threads(gbbd_experiment* exp, unsigned threads) {
  GBBD_REQUIRE(exp);
  exp->cfg.threads = threads;
  return GBBD_OK;
}

gbbd_status gbbd_experiment_set_output_dir(gbbd_experiment* exp, const char* dir) {
  GBBD_REQUIRE(exp);
  exp->cfg.out = dir ? std::filesystem::path(dir) : std::filesystem::path();
  return GBBD_OK;
}

gbbd_status gbbd_experiment_set_sampling(gbbd_experiment* exp, double center_min,
                                         double center_max, double size_min, double size_max,
                                         double angle_min, double angle_max) {
  GBBD_REQUIRE(exp);
  return guarded([&] {
    gbbd::ExperimentConfig cfg = exp->cfg;
    cfg.ranges = {center_min, center_max, size_min, size_max, angle_min, angle_max};
    gbbd::validate(cfg);
    exp->cfg = cfg;
  });
}

gbbd_status gbbd_run_verify_properties(const gbbd_experiment* exp, gbbd_report** out) {
  return run(exp, out, gbbd::verify_properties);
}

gbbd_status gbbd_run_compare_losses(const gbbd_experiment* exp, gbbd_report** out) {
  return run(exp, out, gbbd::compare_losses);
}

gbbd_status gbbd_run_isotropic_demo(const gbbd_experiment* exp, gbbd_report** out) {
  return run(exp, out, gbbd::isotropic_demo);
}

gbbd_status gbbd_run_grad_check(const gbbd_experiment* exp, gbbd_report** out) {
  return run(exp, out, gbbd::grad_check);
}

gbbd_status gbbd_run_analyze_dataset(const gbbd_experiment* exp, const char* const* paths,
                                     size_t n_paths, double bandwidth, int exclude_difficult,
                                     gbbd_report** out) {
  GBBD_REQUIRE(n_paths == 0 || paths);
  gbbd::DatasetOptions opts;
  for (size_t i = 0; i < n_paths; ++i) {
    GBBD_REQUIRE(paths[i]);
    opts.paths.emplace_back(paths[i]);
  }
  if (bandwidth > 0.0) opts.bandwidth = bandwidth;
  opts.exclude_difficult = exclude_difficult != 0;
  return run(exp, out, [&](const gbbd::ExperimentConfig& cfg) {
    return gbbd::analyze_dataset(cfg, opts);
  });
}

gbbd_status gbbd_run_pair_metrics(const gbbd_experiment* exp, const gbbd_obb* pred,
                                  const gbbd_obb* gt, gbbd_report** out) {
  GBBD_REQUIRE(pred && gt);
  return run(exp, out, [&](const gbbd::ExperimentConfig& cfg) {
    return gbbd::pair_metrics(to_box(*pred), to_box(*gt), cfg);
  });
}

const char* gbbd_report_json(const gbbd_report* report) {
  return report ? report->json.c_str() : nullptr;
}

const char* gbbd_report_command(const gbbd_report* report) {
  return report ? report->report.command.c_str() : nullptr;
}

int gbbd_report_passed(const gbbd_report* report) {
  return report && report->report.passed ? 1 : 0;
}

size_t gbbd_report_artifact_count(const gbbd_report* report) {
  return report ? report->artifacts.size() : 0;
}

const char* gbbd_report_artifact(const gbbd_report* report, size_t index) {
  if (!report || index >= report->artifacts.size()) return nullptr;
  return report->artifacts[index].c_str();
}

void gbbd_report_destroy(gbbd_report* report) { delete report; }

}  // extern "C"
