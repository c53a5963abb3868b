/* SPDX-License-Identifier: Apache-2.0 */
#ifndef GBBD_GBBD_H_
#define GBBD_GBBD_H_

/*
 * C interface to the Gaussian bounding-box / Bhattacharyya loss library.
 *
 * Every fallible call returns a gbbd_status. On failure a message describing
 * the error is available from gbbd_last_error() on the calling thread until
 * the next failing call on that thread. Opaque handles are created by
 * *_create / gbbd_run_* and released by the matching *_destroy.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(GBBD_BUILDING_LIBRARY)
#define GBBD_API __attribute__((visibility("default")))
#else
#define GBBD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gbbd_status {
  GBBD_OK = 0,
  GBBD_ERR_INVALID_ARGUMENT = 1,
  GBBD_ERR_INVALID_POLICY = 2,
  GBBD_ERR_SINGULAR_COVARIANCE = 3,
  GBBD_ERR_PARSE = 4,
  GBBD_ERR_DEGENERATE = 5,
  GBBD_ERR_INSUFFICIENT_DATA = 6,
  GBBD_ERR_IO = 7,
  GBBD_ERR_INTERNAL = 99
} gbbd_status;

/* Oriented box; any positive (w, h) and any theta are accepted and
 * normalized to the long-edge convention. */
typedef struct gbbd_obb {
  double cx, cy, w, h, theta;
} gbbd_obb;

typedef struct gbbd_params {
  double alpha;          /* Mahalanobis multiplier, default 3 */
  double delta;          /* anisotropic divisor, default 5 */
  double tau;            /* square-like ratio threshold, default 1.1 */
  double lambda;         /* regression weight, default 2 */
  double pos_iou_thresh; /* anchor matching threshold, default 0.5 */
  double focal_gamma;    /* default 2 */
  double focal_alpha;    /* default 0.25 */
  double grad_step;      /* relative finite-difference step, default 1e-5 */
} gbbd_params;

typedef struct gbbd_experiment gbbd_experiment;
typedef struct gbbd_report gbbd_report;
typedef struct gbbd_annotations gbbd_annotations;

GBBD_API const char* gbbd_version(void);
GBBD_API const char* gbbd_status_string(gbbd_status status);
GBBD_API const char* gbbd_last_error(void);

GBBD_API void gbbd_params_default(gbbd_params* params);

/* Geometry and losses. `pred` is the prediction, `gt` the ground truth. */
GBBD_API gbbd_status gbbd_normalize_obb(gbbd_obb* box);
GBBD_API gbbd_status gbbd_rotated_iou(const gbbd_obb* a, const gbbd_obb* b,
                                      double* out);
GBBD_API gbbd_status gbbd_bhattacharyya_distance(const gbbd_params* params,
                                                 const gbbd_obb* pred,
                                                 const gbbd_obb* gt,
                                                 double* out);
GBBD_API gbbd_status gbbd_bd_loss(const gbbd_params* params,
                                  const gbbd_obb* pred, const gbbd_obb* gt,
                                  double* out);
/* grad receives d/d(cx, cy, w, h, theta) of the normalized prediction. */
GBBD_API gbbd_status gbbd_bd_loss_grad(const gbbd_params* params,
                                       const gbbd_obb* pred,
                                       const gbbd_obb* gt, double* loss,
                                       double grad[5]);

/* Detector total loss. `scores` is n_anchors x n_scores row-major; the last
 * column is background and labels index the first n_scores - 1 columns. */
GBBD_API gbbd_status gbbd_total_loss(const gbbd_params* params,
                                     const gbbd_obb* anchors,
                                     const double* scores, size_t n_anchors,
                                     size_t n_scores, const gbbd_obb* gts,
                                     const int* labels, size_t n_gts,
                                     double* total, size_t* num_positive);

/* DOTA annotations. Parsing is strict; a parse error names the line. */
GBBD_API gbbd_status gbbd_annotations_parse(const char* text, size_t len,
                                            gbbd_annotations** out);
GBBD_API size_t gbbd_annotations_count(const gbbd_annotations* ann);
GBBD_API const char* gbbd_annotations_category(const gbbd_annotations* ann,
                                               size_t index);
GBBD_API int gbbd_annotations_difficult(const gbbd_annotations* ann,
                                        size_t index);
GBBD_API gbbd_status gbbd_annotations_obb(const gbbd_annotations* ann,
                                          size_t index, gbbd_obb* out);
GBBD_API void gbbd_annotations_destroy(gbbd_annotations* ann);

/* Experiment configuration. */
GBBD_API gbbd_status gbbd_experiment_create(const gbbd_params* params,
                                            gbbd_experiment** out);
GBBD_API void gbbd_experiment_destroy(gbbd_experiment* exp);
GBBD_API gbbd_status gbbd_experiment_set_seed(gbbd_experiment* exp,
                                              uint64_t seed);
GBBD_API gbbd_status gbbd_experiment_set_trials(gbbd_experiment* exp,
                                                uint64_t trials);
GBBD_API gbbd_status gbbd_experiment_set_threads(gbbd_experiment* exp,
                                                 unsigned threads);
/* NULL or "" disables CSV output. */
GBBD_API gbbd_status gbbd_experiment_set_output_dir(gbbd_experiment* exp,
                                                    const char* dir);
GBBD_API gbbd_status gbbd_experiment_set_sampling(
    gbbd_experiment* exp, double center_min, double center_max,
    double size_min, double size_max, double angle_min, double angle_max);

/* Experiment commands. On success *out holds a report the caller destroys. */
GBBD_API gbbd_status gbbd_run_verify_properties(const gbbd_experiment* exp,
                                                gbbd_report** out);
GBBD_API gbbd_status gbbd_run_compare_losses(const gbbd_experiment* exp,
                                             gbbd_report** out);
GBBD_API gbbd_status gbbd_run_isotropic_demo(const gbbd_experiment* exp,
                                             gbbd_report** out);
GBBD_API gbbd_status gbbd_run_grad_check(const gbbd_experiment* exp,
                                         gbbd_report** out);
/* bandwidth <= 0 selects Scott's rule. */
GBBD_API gbbd_status gbbd_run_analyze_dataset(const gbbd_experiment* exp,
                                              const char* const* paths,
                                              size_t n_paths, double bandwidth,
                                              int exclude_difficult,
                                              gbbd_report** out);
GBBD_API gbbd_status gbbd_run_pair_metrics(const gbbd_experiment* exp,
                                           const gbbd_obb* pred,
                                           const gbbd_obb* gt,
                                           gbbd_report** out);

/* Report accessors. Strings are owned by the report. */
GBBD_API const char* gbbd_report_json(const gbbd_report* report);
GBBD_API const char* gbbd_report_command(const gbbd_report* report);
GBBD_API int gbbd_report_passed(const gbbd_report* report);
GBBD_API size_t gbbd_report_artifact_count(const gbbd_report* report);
GBBD_API const char* gbbd_report_artifact(const gbbd_report* report,
                                          size_t index);
GBBD_API void gbbd_report_destroy(gbbd_report* report);

#ifdef __cplusplus
}
#endif

#endif /* GBBD_GBBD_H_ */
