// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>

#include "gbbd/geometry.hpp"

namespace gbbd {

/// Symmetric 2x2 matrix stored as its three distinct entries.
template <class T>
struct BasicSym2 {
  T xx{}, xy{}, yy{};

  T det() const { return xx * yy - xy * xy; }
  T trace() const { return xx + yy; }
};

template <class T>
struct BasicGaussian2 {
  T mx{}, my{};
  BasicSym2<T> cov;
};

using Sym2 = BasicSym2<double>;
using Gaussian2 = BasicGaussian2<double>;

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
std::pair<double, double> eigenvalues(const Sym2& m);

/// Frobenius norm of a - b.
double frobenius_distance(const Sym2& a, const Sym2& b);
double frobenius_norm(const Sym2& a);

/// Throws kInvalidArgument unless the Gaussian is finite with a positive
/// definite covariance.
void validate(const Gaussian2& g);

/// Square-like gating and anisotropic scaling parameters.
/// tau >= 1 bounds the long/short ratio treated as square-like; delta > 1
/// divides cos(4 theta) in the scaled eigenvalues.
struct SquareLikePolicy {
  double tau = 1.1;
  double delta = 5.0;
};

/// Throws kInvalidPolicy for tau < 1 or delta <= 1.
void validate(const SquareLikePolicy& policy);

/// Which Gaussian construction a pair goes through.
enum class Representation {
  kPlain,     // always R S^2 R^T
  kAdaptive,  // anisotropic for both boxes when the ground truth is square-like
};

// Generic constructions, shared by the value path and the dual-number
// gradient path. Parameters are taken raw, without long-edge normalization.
namespace detail {

template <class T>
BasicGaussian2<T> plain_gaussian(const T& cx, const T& cy, const T& w,
                                 const T& h, const T& theta) {
  using std::cos;
  using std::sin;
  const T c = cos(theta);
  const T s = sin(theta);
  const T a = w * w / 4.0;  // variance along the w edge
  const T b = h * h / 4.0;
  BasicGaussian2<T> g;
  g.mx = cx;
  g.my = cy;
  g.cov.xx = a * c * c + b * s * s;
  g.cov.xy = (a - b) * c * s;
  g.cov.yy = a * s * s + b * c * c;
  return g;
}

// Sigma^{1/2} = R(4t) diag(h'/2, w'/2) R(4t)^T with
// h' = h (1 + cos4t / delta), w' = w (1 - cos4t / delta).
template <class T>
BasicGaussian2<T> anisotropic_gaussian(const T& cx, const T& cy, const T& w,
                                       const T& h, const T& theta,
                                       double delta) {
  using std::cos;
  using std::sin;
  const T phi = 4.0 * theta;
  const T c = cos(phi);
  const T s = sin(phi);
  const T hp = h * (1.0 + c / delta);
  const T wp = w * (1.0 - c / delta);
  const T a = hp * hp / 4.0;  // first axis carries h'
  const T b = wp * wp / 4.0;
  BasicGaussian2<T> g;
  g.mx = cx;
  g.my = cy;
  g.cov.xx = a * c * c + b * s * s;
  g.cov.xy = (a - b) * c * s;
  g.cov.yy = a * s * s + b * c * c;
  return g;
}

}  // namespace detail

/// mean (cx, cy), covariance R(theta) diag(w^2/4, h^2/4) R(theta)^T.
Gaussian2 obb_to_gaussian(const ObbBox& box);

/// max(w,h)/min(w,h) <= tau.
bool is_square_like(const ObbBox& box, const SquareLikePolicy& policy);

/// Anisotropically scaled Gaussian for square-like boxes; see
/// detail::anisotropic_gaussian. Throws kInvalidPolicy if delta <= 1.
Gaussian2 obb_to_anisotropic_gaussian(const ObbBox& box,
                                      const SquareLikePolicy& policy);

/// Converts a (prediction, ground truth) pair. Under kAdaptive, both boxes are
/// scaled anisotropically when the ground truth is square-like; the
/// prediction's shape never changes the branch.
std::pair<Gaussian2, Gaussian2> gaussian_for_pair(
    const ObbBox& pred, const ObbBox& gt, const SquareLikePolicy& policy,
    Representation rep = Representation::kAdaptive);

/// Transforms a Gaussian by x -> M x: (M mu, M Sigma M^T). M is row-major.
Gaussian2 transform(const Gaussian2& g, double m00, double m01, double m10,
                    double m11);

}  // namespace gbbd
