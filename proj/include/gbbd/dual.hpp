// SPDX-License-Identifier: Apache-2.0
#pragma once

// Forward-mode dual numbers carrying N partial derivatives at once.
// Only the operations the loss pipeline needs are provided.

#include <array>
#include <cmath>
#include <cstddef>

namespace gbbd {

template <std::size_t N>
struct Dual {
  double val = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double v) : val(v) {}  // NOLINT: constants promote implicitly

  static constexpr Dual variable(double v, std::size_t index) {
    Dual x(v);
    x.d[index] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    val += o.val;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    val -= o.val;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.val + val * o.d[i];
    val *= o.val;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.val;
    const double q = val * inv;
    for (std::size_t i = 0; i < N; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
    val = q;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
  friend Dual operator-(Dual a) {
    a.val = -a.val;
    for (auto& x : a.d) x = -x;
    return a;
  }

  friend bool operator<(const Dual& a, const Dual& b) { return a.val < b.val; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.val <= b.val; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.val > b.val; }
};

namespace detail {
// f(x) with f'(x) given: chain rule over all partials.
template <std::size_t N>
Dual<N> chain(const Dual<N>& x, double fx, double dfx) {
  Dual<N> r(fx);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = dfx * x.d[i];
  return r;
}
}  // namespace detail

template <std::size_t N>
Dual<N> sqrt(const Dual<N>& x) {
  const double s = std::sqrt(x.val);
  // The minimum of a sqrt-of-square is a kink; report the zero subgradient.
  return detail::chain(x, s, s > 0.0 ? 0.5 / s : 0.0);
}

template <std::size_t N>
Dual<N> log(const Dual<N>& x) {
  return detail::chain(x, std::log(x.val), 1.0 / x.val);
}

template <std::size_t N>
Dual<N> sin(const Dual<N>& x) {
  return detail::chain(x, std::sin(x.val), std::cos(x.val));
}

template <std::size_t N>
Dual<N> cos(const Dual<N>& x) {
  return detail::chain(x, std::cos(x.val), -std::sin(x.val));
}

inline double value_of(double x) { return x; }
template <std::size_t N>
double value_of(const Dual<N>& x) {
  return x.val;
}

}  // namespace gbbd
