#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace epsassoc {

// Standard normal density.
template <typename Scalar>
inline Scalar norm_pdf(Scalar x) {
  constexpr Scalar inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<Scalar> / std::numbers::sqrt2_v<Scalar>;
  return inv_sqrt_2pi * std::exp(Scalar(-0.5) * x * x);
}

template <typename Scalar>
inline Scalar log_norm_pdf(Scalar x) {
  constexpr Scalar half_log_2pi = Scalar(0.91893853320467274178032973640562);
  return -half_log_2pi - Scalar(0.5) * x * x;
}

// Standard normal cdf through the complementary error function, so both
// tails keep full relative precision.
template <typename Scalar>
inline Scalar norm_cdf(Scalar x) {
  if (std::isnan(x)) return x;
  return Scalar(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

// log Phi(x), finite for every finite x.
template <typename Scalar>
inline Scalar log_norm_cdf(Scalar x) {
  if (x == -std::numeric_limits<Scalar>::infinity()) return x;
  if (x > Scalar(0)) {
    return std::log1p(-Scalar(0.5) * std::erfc(x / std::numbers::sqrt2_v<Scalar>));
  }
  if (x > Scalar(-35)) {
    return std::log(Scalar(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Scalar>));
  }
  // Mills ratio asymptotic series, accurate to machine precision for x < -35.
  const Scalar r = Scalar(1) / (x * x);
  const Scalar series = Scalar(1) - r * (Scalar(1) - Scalar(3) * r * (Scalar(1) - Scalar(5) * r * (Scalar(1) - Scalar(7) * r)));
  return log_norm_pdf(x) - std::log(-x) + std::log(series);
}

// log(exp(a) + exp(b)) without overflow; either argument may be -inf.
template <typename Scalar>
inline Scalar log_add_exp(Scalar a, Scalar b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<Scalar>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

// Upper tail of chi-square with integer degrees of freedom. Throws on t < 0.
double chi2_sf(double t, int df);

// log of chi2_sf, stays finite when the tail probability underflows.
double chi2_log_sf(double t, int df);

// Inverse of norm_cdf on (0, 1).
double norm_quantile(double p);

}  // namespace epsassoc
