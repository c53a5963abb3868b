// SPDX-License-Identifier: Apache-2.0
//
// gbbd: experiment harness over the C library interface.
//
//   gbbd verify-properties --trials 1000000 --seed 7 --out results/
//   gbbd compare-losses --trials 1000 --out results/
//   gbbd isotropic-demo
//   gbbd grad-check --trials 1000
//   gbbd analyze-dataset labels/ --out results/
//   gbbd iou 0,0,2,2,0 0,0,2,2,0.785398
//
// Every command prints a JSON summary on stdout (and writes <command>.json
// into --out when given). Exit status: 0 pass, 1 failed verdict, 2 error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gbbd/gbbd.h"

namespace {

struct Options {
  uint64_t seed = 0;
  uint64_t trials = 0;
  unsigned threads = 0;
  std::string out;
  double center_min = 0.0, center_max = 10.0;
  double size_min = 0.5, size_max = 5.0;
  double bandwidth = 0.0;
  bool exclude_difficult = false;
  std::vector<std::string> paths;
  std::string box_a, box_b;
};

struct ExperimentDeleter {
  void operator()(gbbd_experiment* e) const { gbbd_experiment_destroy(e); }
};
struct ReportDeleter {
  void operator()(gbbd_report* r) const { gbbd_report_destroy(r); }
};
using ExperimentPtr = std::unique_ptr<gbbd_experiment, ExperimentDeleter>;
using ReportPtr = std::unique_ptr<gbbd_report, ReportDeleter>;

int report_error(gbbd_status s) {
  std::fprintf(stderr, "gbbd: %s: %s\n", gbbd_status_string(s), gbbd_last_error());
  return 2;
}

bool parse_box(const std::string& text, gbbd_obb* box) {
  std::stringstream ss(text);
  double v[5];
  for (int i = 0; i < 5; ++i) {
    std::string tok;
    if (!std::getline(ss, tok, ',')) return false;
    try {
      std::size_t used = 0;
      v[i] = std::stod(tok, &used);
      if (used != tok.size()) return false;
    } catch (const std::exception&) {
      return false;
    }
  }
  std::string rest;
  if (std::getline(ss, rest, ',')) return false;
  *box = {v[0], v[1], v[2], v[3], v[4]};
  return true;
}

int finish(const Options& opt, gbbd_report* report) {
  const char* json = gbbd_report_json(report);
  std::printf("%s\n", json);
  if (!opt.out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opt.out, ec);
    const std::string path = opt.out + "/" + gbbd_report_command(report) + ".json";
    std::ofstream os(path, std::ios::binary);
    os << json << '\n';
    if (!os) {
      std::fprintf(stderr, "gbbd: cannot write %s\n", path.c_str());
      return 2;
    }
  }
  for (size_t i = 0; i < gbbd_report_artifact_count(report); ++i) {
    std::fprintf(stderr, "wrote %s\n", gbbd_report_artifact(report, i));
  }
  return gbbd_report_passed(report) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian bounding-box / Bhattacharyya loss experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  gbbd_params params;
  gbbd_params_default(&params);

  app.add_option("--seed", opt.seed, "Generator seed");
  auto* trials_opt = app.add_option("--trials", opt.trials, "Number of random trials");
  app.add_option("--out", opt.out, "Output directory for CSV and JSON artifacts");
  app.add_option("--threads", opt.threads, "Worker threads (0: all cores)");
  app.add_option("--tau", params.tau, "Square-like aspect-ratio threshold")->capture_default_str();
  app.add_option("--delta", params.delta, "Anisotropic scaling divisor")->capture_default_str();
  app.add_option("--alpha", params.alpha, "Mahalanobis-term multiplier")->capture_default_str();
  app.add_option("--lambda", params.lambda, "Regression weight in the detector loss")
      ->capture_default_str();
  app.add_option("--center-min", opt.center_min, "Lower bound of sampled centers")
      ->capture_default_str();
  app.add_option("--center-max", opt.center_max, "Upper bound of sampled centers")
      ->capture_default_str();
  app.add_option("--size-min", opt.size_min, "Lower bound of sampled sizes")->capture_default_str();
  app.add_option("--size-max", opt.size_max, "Upper bound of sampled sizes")->capture_default_str();

  auto* verify = app.add_subcommand("verify-properties",
                                    "Metric and scale-invariance checks for L_BD, L_GWD, L_KLD");
  auto* compare = app.add_subcommand("compare-losses", "Loss alignment with CIoU on horizontal pairs");
  auto* iso = app.add_subcommand("isotropic-demo", "Square box vs its quarter-pi rotation");
  auto* grad = app.add_subcommand("grad-check", "Analytic vs finite-difference L_BD gradients");
  auto* dataset = app.add_subcommand("analyze-dataset", "Squareness and aspect-ratio KDE of DOTA labels");
  dataset->add_option("paths", opt.paths, "Label files or directories of *.txt")->required();
  dataset->add_option("--bandwidth", opt.bandwidth, "KDE bandwidth (default: Scott's rule)");
  dataset->add_flag("--exclude-difficult", opt.exclude_difficult, "Drop difficult-flagged objects");
  auto* iou = app.add_subcommand("iou", "All metrics for one box pair");
  iou->add_option("pred", opt.box_a, "Predicted box cx,cy,w,h,theta")->required();
  iou->add_option("gt", opt.box_b, "Ground-truth box cx,cy,w,h,theta")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // help and version requests exit 0; usage errors share the error code
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  gbbd_experiment* raw = nullptr;
  if (gbbd_status s = gbbd_experiment_create(&params, &raw); s != GBBD_OK) return report_error(s);
  ExperimentPtr exp(raw);

  const bool grad_or_compare = grad->parsed() || compare->parsed();
  uint64_t trials = opt.trials;
  if (trials_opt->count() == 0) trials = verify->parsed() ? 1000000 : (grad_or_compare ? 1000 : 1);

  gbbd_status s = gbbd_experiment_set_seed(exp.get(), opt.seed);
  if (s == GBBD_OK) s = gbbd_experiment_set_trials(exp.get(), trials);
  if (s == GBBD_OK) s = gbbd_experiment_set_threads(exp.get(), opt.threads);
  if (s == GBBD_OK) s = gbbd_experiment_set_output_dir(exp.get(), opt.out.c_str());
  if (s == GBBD_OK) {
    s = gbbd_experiment_set_sampling(exp.get(), opt.center_min, opt.center_max, opt.size_min,
                                     opt.size_max, -1.5707963267948966, 1.5707963267948966);
  }
  if (s != GBBD_OK) return report_error(s);

  gbbd_report* report = nullptr;
  if (verify->parsed()) {
    s = gbbd_run_verify_properties(exp.get(), &report);
  } else if (compare->parsed()) {
    s = gbbd_run_compare_losses(exp.get(), &report);
  } else if (iso->parsed()) {
    s = gbbd_run_isotropic_demo(exp.get(), &report);
  } else if (grad->parsed()) {
    s = gbbd_run_grad_check(exp.get(), &report);
  } else if (dataset->parsed()) {
    std::vector<const char*> paths;
    for (const auto& p : opt.paths) paths.push_back(p.c_str());
    s = gbbd_run_analyze_dataset(exp.get(), paths.data(), paths.size(), opt.bandwidth,
                                 opt.exclude_difficult ? 1 : 0, &report);
  } else if (iou->parsed()) {
    gbbd_obb a, b;
    if (!parse_box(opt.box_a, &a) || !parse_box(opt.box_b, &b)) {
      std::fprintf(stderr, "gbbd iou: boxes must be five comma-separated numbers cx,cy,w,h,theta\n\n%s",
                   iou->help().c_str());
      return 2;
    }
    s = gbbd_run_pair_metrics(exp.get(), &a, &b, &report);
  }
  if (s != GBBD_OK) return report_error(s);
  ReportPtr owned(report);
  return finish(opt, owned.get());
}
