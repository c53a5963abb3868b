// SPDX-License-Identifier: Apache-2.0
#include "gbbd/gaussian.hpp"

#include <algorithm>
#include <cmath>

#include "gbbd/error.hpp"

namespace gbbd {

std::pair<double, double> eigenvalues(const Sym2& m) {
  const double half_tr = 0.5 * (m.xx + m.yy);
  const double r = std::hypot(0.5 * (m.xx - m.yy), m.xy);
  return {half_tr - r, half_tr + r};
}

double frobenius_distance(const Sym2& a, const Sym2& b) {
  const double dxx = a.xx - b.xx;
  const double dxy = a.xy - b.xy;
  const double dyy = a.yy - b.yy;
  return std::sqrt(dxx * dxx + 2 * dxy * dxy + dyy * dyy);
}

double frobenius_norm(const Sym2& a) { return frobenius_distance(a, Sym2{}); }

void validate(const Gaussian2& g) {
  const bool finite = std::isfinite(g.mx) && std::isfinite(g.my) &&
                      std::isfinite(g.cov.xx) && std::isfinite(g.cov.xy) &&
                      std::isfinite(g.cov.yy);
  if (!finite) throw Error(ErrorCode::kInvalidArgument, "non-finite Gaussian");
  const auto [lo, hi] = eigenvalues(g.cov);
  if (!(lo > 1e-12 * hi) || !(lo > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "covariance is not positive definite");
  }
}

void validate(const SquareLikePolicy& policy) {
  if (!(policy.tau >= 1.0)) {
    throw Error(ErrorCode::kInvalidPolicy, "square-like threshold tau must be >= 1");
  }
  if (!(policy.delta > 1.0) || !std::isfinite(policy.delta)) {
    throw Error(ErrorCode::kInvalidPolicy,
                "anisotropic divisor delta must be > 1");
  }
}

Gaussian2 obb_to_gaussian(const ObbBox& box) {
  return detail::plain_gaussian(box.cx(), box.cy(), box.w(), box.h(),
                                box.theta());
}

bool is_square_like(const ObbBox& box, const SquareLikePolicy& policy) {
  return std::max(box.w(), box.h()) / std::min(box.w(), box.h()) <= policy.tau;
}

Gaussian2 obb_to_anisotropic_gaussian(const ObbBox& box,
                                      const SquareLikePolicy& policy) {
  validate(policy);
  return detail::anisotropic_gaussian(box.cx(), box.cy(), box.w(), box.h(),
                                      box.theta(), policy.delta);
}

std::pair<Gaussian2, Gaussian2> gaussian_for_pair(const ObbBox& pred,
                                                  const ObbBox& gt,
                                                  const SquareLikePolicy& policy,
                                                  Representation rep) {
  validate(policy);
  if (rep == Representation::kAdaptive && is_square_like(gt, policy)) {
    return {obb_to_anisotropic_gaussian(pred, policy),
            obb_to_anisotropic_gaussian(gt, policy)};
  }
  return {obb_to_gaussian(pred), obb_to_gaussian(gt)};
}

Gaussian2 transform(const Gaussian2& g, double m00, double m01, double m10,
                    double m11) {
  Gaussian2 r;
  r.mx = m00 * g.mx + m01 * g.my;
  r.my = m10 * g.mx + m11 * g.my;
  // (M S)
  const double a = m00 * g.cov.xx + m01 * g.cov.xy;
  const double b = m00 * g.cov.xy + m01 * g.cov.yy;
  const double c = m10 * g.cov.xx + m11 * g.cov.xy;
  const double d = m10 * g.cov.xy + m11 * g.cov.yy;
  // (M S) M^T
  r.cov.xx = a * m00 + b * m01;
  r.cov.xy = a * m10 + b * m11;
  r.cov.yy = c * m10 + d * m11;
  return r;
}

}  // namespace gbbd
