// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

#include "gbbd/dual.hpp"
#include "gbbd/error.hpp"
#include "gbbd/gaussian.hpp"
#include "gbbd/geometry.hpp"

namespace gbbd {

/// Determinant floor below which a covariance counts as singular.
inline constexpr double kDetEps = 1e-24;

struct DivergenceConfig {
  double alpha = 3.0;       // Mahalanobis-term multiplier
  double grad_step = 1e-5;  // relative central-difference step (verification)
};

/// Throws kInvalidArgument unless alpha > 0 and 0 < grad_step < 1e-2.
void validate(const DivergenceConfig& cfg);

/// Partial derivatives of a scalar loss w.r.t. the predicted box's
/// (cx, cy, w, h, theta), taken in the box's normalized parameters.
struct LossGradient {
  double d_cx = 0.0, d_cy = 0.0, d_w = 0.0, d_h = 0.0, d_theta = 0.0;

  std::array<double, 5> as_array() const { return {d_cx, d_cy, d_w, d_h, d_theta}; }
};

struct LossAndGradient {
  double loss = 0.0;
  LossGradient grad;
};

namespace detail {

template <class T>
T bhattacharyya(const BasicGaussian2<T>& p, const BasicGaussian2<T>& t,
                double alpha) {
  using std::log;
  BasicSym2<T> avg;
  avg.xx = (p.cov.xx + t.cov.xx) / 2.0;
  avg.xy = (p.cov.xy + t.cov.xy) / 2.0;
  avg.yy = (p.cov.yy + t.cov.yy) / 2.0;
  const T det = avg.det();
  const T det_p = p.cov.det();
  const T det_t = t.cov.det();
  if (!(value_of(det) > kDetEps) || !(value_of(det_p) > kDetEps) ||
      !(value_of(det_t) > kDetEps)) {
    throw Error(ErrorCode::kSingularCovariance,
                "Bhattacharyya distance: covariance determinant below floor");
  }
  const T dx = p.mx - t.mx;
  const T dy = p.my - t.my;
  // d^T avg^{-1} d through the adjugate
  const T maha = (avg.yy * dx * dx - 2.0 * avg.xy * dx * dy + avg.xx * dy * dy) / det;
  const T shape = 0.5 * (log(det) - 0.5 * log(det_p) - 0.5 * log(det_t));
  T d = (alpha / 8.0) * maha + shape;
  if (value_of(d) < 0.0) d = T(0.0);  // rounding below the true minimum
  return d;
}

template <class T>
T distance_to_loss(const T& d) {
  using std::sqrt;
  return 1.0 - 1.0 / (1.0 + sqrt(d));
}

}  // namespace detail

/// D_B = alpha/8 (mu_p - mu_t)^T S^{-1} (mu_p - mu_t)
///       + 1/2 ln(det S / sqrt(det S_p det S_t)),  S = (S_p + S_t) / 2.
/// Throws kSingularCovariance when a determinant is <= kDetEps.
double bhattacharyya_distance(const Gaussian2& p, const Gaussian2& t,
                              const DivergenceConfig& cfg = {});

/// 1 - 1/(1 + sqrt(d)): maps a distance in [0, inf) onto [0, 1).
double normalized_loss(double distance);

double bd_loss(const Gaussian2& p, const Gaussian2& t,
               const DivergenceConfig& cfg = {});

/// D_KL(N_p || N_t). Asymmetric.
double kld(const Gaussian2& p, const Gaussian2& t);

/// Squared 2-Wasserstein distance between the two Gaussians.
double gwd(const Gaussian2& p, const Gaussian2& t);

double kld_loss(const Gaussian2& p, const Gaussian2& t);
double gwd_loss(const Gaussian2& p, const Gaussian2& t);

/// Principal square root of a 2x2 SPD matrix:
/// (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A)).
Sym2 sqrtm_spd(const Sym2& a);

/// L_BD of gaussian_for_pair(pred, gt) and its gradient in the prediction's
/// parameters, by forward-mode differentiation through the whole pipeline.
/// The representation branch is fixed by the ground truth.
LossAndGradient bd_loss_grad(const ObbBox& pred, const ObbBox& gt,
                             const SquareLikePolicy& policy,
                             const DivergenceConfig& cfg = {},
                             Representation rep = Representation::kAdaptive);

/// L_BD of gaussian_for_pair(pred, gt) without derivatives.
double bd_loss(const ObbBox& pred, const ObbBox& gt,
               const SquareLikePolicy& policy, const DivergenceConfig& cfg = {},
               Representation rep = Representation::kAdaptive);

}  // namespace gbbd
