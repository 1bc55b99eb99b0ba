#pragma once

// Smooth surrogates for min/max, the C^{r+1} ramp used to blend
// perception frames, and iterated Lie derivatives along a vector field.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "cbfnav/jet.hpp"

namespace cbfnav {

// Sharpness knobs for the three log-sum-exp layers: kappa blends
// perception frames over time, epsilon composes the barrier candidates,
// rho fuses one frame's obstacle terms.
struct SharpnessParams {
  double kappa = 30.0;
  double epsilon = 10.0;
  double rho = 30.0;
};

namespace detail {

// Indices of z sorted ascending by value.  Soft extrema traverse terms
// in this order, which makes the result independent of the caller's
// argument order (bitwise, for real-valued lists).
template <class T>
void sorted_by_value(std::span<const T> z, std::vector<std::uint32_t>& idx) {
  idx.resize(z.size());
  for (std::uint32_t i = 0; i < z.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    return value_of(z[a]) < value_of(z[b]);
  });
}

}  // namespace detail

// softmin_k(z) = -(1/k) log sum_i exp(-k z_i).
// Always evaluated with the smallest element shifted out, so every
// exponent is <= 0 regardless of scale.  Bounds (N = z.size()):
//   min z - log(N)/k <= softmin(z) <= min z.
template <class T>
T softmin(std::span<const T> z, double kappa) {
  if (z.empty()) throw std::invalid_argument("softmin: empty argument list");
  if (!(kappa > 0.0)) throw std::invalid_argument("softmin: kappa must be positive");
  static thread_local std::vector<std::uint32_t> idx;
  detail::sorted_by_value(z, idx);
  const T& m = z[idx.front()];
  using std::exp;
  using std::log;
  // Smallest terms first: idx is ascending in z, so descending in exp(-k(z-m)).
  T sum = exp((z[idx.back()] - m) * (-kappa));
  for (std::size_t i = z.size() - 1; i-- > 0;) sum += exp((z[idx[i]] - m) * (-kappa));
  return m - log(sum) / kappa;
}

// softmax_k(z) = (1/k) log sum_i exp(k z_i) - log(N)/k.
// The -log(N)/k shift makes softmax(c,...,c) = c exactly.  Bounds:
//   max z - log(N)/k <= softmax(z) <= max z.
template <class T>
T softmax(std::span<const T> z, double kappa) {
  if (z.empty()) throw std::invalid_argument("softmax: empty argument list");
  if (!(kappa > 0.0)) throw std::invalid_argument("softmax: kappa must be positive");
  static thread_local std::vector<std::uint32_t> idx;
  detail::sorted_by_value(z, idx);
  const T& m = z[idx.back()];
  using std::exp;
  using std::log;
  T sum = exp((z[idx.front()] - m) * kappa);
  for (std::size_t i = 1; i < z.size(); ++i) sum += exp((z[idx[i]] - m) * kappa);
  return m + (log(sum) - std::log(double(z.size()))) / kappa;
}

template <class T>
T softmin(const std::vector<T>& z, double kappa) {
  return softmin(std::span<const T>(z.data(), z.size()), kappa);
}
template <class T>
T softmax(const std::vector<T>& z, double kappa) {
  return softmax(std::span<const T>(z.data(), z.size()), kappa);
}
inline double softmin(std::initializer_list<double> z, double kappa) {
  return softmin(std::span<const double>(z.begin(), z.size()), kappa);
}
inline double softmax(std::initializer_list<double> z, double kappa) {
  return softmax(std::span<const double>(z.begin(), z.size()), kappa);
}

/* ------------------------------------------------------- smoothstep */

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  // Arguments stay small enough that the product is an exact integer.
  return std::round(r);
}

// Ramp from 0 to 1 over t in [0, 1/nu] whose derivatives of orders
// 1..r+1 vanish at both ends:
//   eta(t) = (nu t)^{r+2} sum_{j=0}^{r+1} C(r+1+j,j) C(2r+3,r+1-j) (-nu t)^j.
// Branches are picked by value, so jets across the junctions see the
// one-sided expansion; by construction both sides agree through order r+1.
template <class T>
T smoothstep_eta(const T& t, int r, double nu) {
  if (r < 0) throw std::invalid_argument("smoothstep_eta: r must be >= 0");
  if (!(nu > 0.0)) throw std::invalid_argument("smoothstep_eta: nu must be positive");
  const double tv = value_of(t);
  if (tv < 0.0) return constant_like(t, 0.0);
  if (tv * nu >= 1.0) return constant_like(t, 1.0);
  const T s = t * nu;
  // Horner over j of C(r+1+j,j) C(2r+3,r+1-j) (-s)^j.
  T p = constant_like(t, binomial(2 * r + 2, r + 1) * binomial(2 * r + 3, 0) *
                             ((r + 1) % 2 == 0 ? 1.0 : -1.0));
  for (int j = r; j >= 0; --j) {
    const double aj = binomial(r + 1 + j, j) * binomial(2 * r + 3, r + 1 - j) *
                      (j % 2 == 0 ? 1.0 : -1.0);
    p = p * s + aj;
  }
  T lead = s;
  for (int i = 1; i < r + 2; ++i) lead = lead * s;
  return lead * p;
}

/* --------------------------------------------------- Lie derivative */

// order-th iterated Lie derivative of fn along field at x, from the
// Taylor expansion of fn composed with the flow of x' = field(x).
template <std::size_t N, class Field, class Fn>
double lie_derivative(Field&& field, Fn&& fn, const std::array<double, N>& x, int order) {
  if (order < 1 || order > kMaxJetOrder)
    throw std::invalid_argument("lie_derivative: order out of range");
  const std::array<Jet<double>, N> y = flow_series<double, N>(x, field, order);
  const Jet<double> g = fn(y);
  double fact = 1.0;
  for (int i = 2; i <= order; ++i) fact *= double(i);
  return g.c[order] * fact;
}

}  // namespace cbfnav
