// SPDX-License-Identifier: Apache-2.0
#include "gbbd/divergence.hpp"

#include <algorithm>
#include <cmath>

#include "gbbd/dual.hpp"

namespace gbbd {

namespace {

void require_spd(const Sym2& m, const char* what) {
  if (!(m.det() > kDetEps) || !(m.xx > 0.0)) {
    throw Error(ErrorCode::kSingularCovariance,
                std::string(what) + ": covariance determinant below floor");
  }
}

}  // namespace

void validate(const DivergenceConfig& cfg) {
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  }
  if (!(cfg.grad_step > 0.0) || !(cfg.grad_step < 1e-2)) {
    throw Error(ErrorCode::kInvalidArgument, "grad_step must lie in (0, 1e-2)");
  }
}

double bhattacharyya_distance(const Gaussian2& p, const Gaussian2& t,
                              const DivergenceConfig& cfg) {
  return detail::bhattacharyya(p, t, cfg.alpha);
}

double normalized_loss(double distance) {
  return detail::distance_to_loss(std::max(distance, 0.0));
}

double bd_loss(const Gaussian2& p, const Gaussian2& t,
               const DivergenceConfig& cfg) {
  return normalized_loss(bhattacharyya_distance(p, t, cfg));
}

double kld(const Gaussian2& p, const Gaussian2& t) {
  require_spd(t.cov, "KLD");
  require_spd(p.cov, "KLD");
  const Sym2& st = t.cov;
  const Sym2& sp = p.cov;
  const double det_t = st.det();
  const double det_p = sp.det();
  const double dx = p.mx - t.mx;
  const double dy = p.my - t.my;
  const double maha = (st.yy * dx * dx - 2 * st.xy * dx * dy + st.xx * dy * dy) / det_t;
  const double tr = (st.yy * sp.xx - 2 * st.xy * sp.xy + st.xx * sp.yy) / det_t;
  const double d = 0.5 * maha + 0.5 * tr - 0.5 * std::log(det_p / det_t) - 1.0;
  return std::max(d, 0.0);
}

Sym2 sqrtm_spd(const Sym2& a) {
  const double s = std::sqrt(std::max(a.det(), 0.0));
  const double t = std::sqrt(a.trace() + 2 * s);
  return {(a.xx + s) / t, a.xy / t, (a.yy + s) / t};
}

double gwd(const Gaussian2& p, const Gaussian2& t) {
  require_spd(p.cov, "GWD");
  require_spd(t.cov, "GWD");
  const Sym2 r = sqrtm_spd(p.cov);
  const Sym2& b = t.cov;
  // m = r b r, symmetric since r and b are
  const double rb_xx = r.xx * b.xx + r.xy * b.xy;
  const double rb_xy = r.xx * b.xy + r.xy * b.yy;
  const double rb_yx = r.xy * b.xx + r.yy * b.xy;
  const double rb_yy = r.xy * b.xy + r.yy * b.yy;
  const Sym2 m{rb_xx * r.xx + rb_xy * r.xy, rb_xx * r.xy + rb_xy * r.yy,
               rb_yx * r.xy + rb_yy * r.yy};
  const double cross_term = sqrtm_spd(m).trace();
  const double dx = p.mx - t.mx;
  const double dy = p.my - t.my;
  const double d = dx * dx + dy * dy + p.cov.trace() + t.cov.trace() - 2 * cross_term;
  return std::max(d, 0.0);
}

double kld_loss(const Gaussian2& p, const Gaussian2& t) {
  return normalized_loss(kld(p, t));
}

double gwd_loss(const Gaussian2& p, const Gaussian2& t) {
  return normalized_loss(gwd(p, t));
}

double bd_loss(const ObbBox& pred, const ObbBox& gt,
               const SquareLikePolicy& policy, const DivergenceConfig& cfg,
               Representation rep) {
  const auto [p, t] = gaussian_for_pair(pred, gt, policy, rep);
  return bd_loss(p, t, cfg);
}

LossAndGradient bd_loss_grad(const ObbBox& pred, const ObbBox& gt,
                             const SquareLikePolicy& policy,
                             const DivergenceConfig& cfg, Representation rep) {
  validate(policy);
  validate(cfg);
  using D = Dual<5>;
  const D cx = D::variable(pred.cx(), 0);
  const D cy = D::variable(pred.cy(), 1);
  const D w = D::variable(pred.w(), 2);
  const D h = D::variable(pred.h(), 3);
  const D th = D::variable(pred.theta(), 4);

  const bool anisotropic =
      rep == Representation::kAdaptive && is_square_like(gt, policy);
  BasicGaussian2<D> p;
  BasicGaussian2<D> t;
  if (anisotropic) {
    p = detail::anisotropic_gaussian(cx, cy, w, h, th, policy.delta);
    t = detail::anisotropic_gaussian(D(gt.cx()), D(gt.cy()), D(gt.w()),
                                     D(gt.h()), D(gt.theta()), policy.delta);
  } else {
    p = detail::plain_gaussian(cx, cy, w, h, th);
    t = detail::plain_gaussian(D(gt.cx()), D(gt.cy()), D(gt.w()), D(gt.h()),
                               D(gt.theta()));
  }
  const D loss = detail::distance_to_loss(detail::bhattacharyya(p, t, cfg.alpha));

  LossAndGradient out;
  out.loss = loss.val;
  out.grad = {loss.d[0], loss.d[1], loss.d[2], loss.d[3], loss.d[4]};
  return out;
}

}  // namespace gbbd
