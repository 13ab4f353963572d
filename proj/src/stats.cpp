#include "epsassoc/stats.hpp"

#include <stdexcept>
#include <string>

namespace epsassoc {

double chi2_log_sf(double t, int df) {
  if (df < 1) throw std::invalid_argument("chi2_sf: df must be a positive integer, got " + std::to_string(df));
  if (!(t >= 0.0)) throw std::invalid_argument("chi2_sf: statistic must be >= 0, got " + std::to_string(t));
  if (std::isinf(t)) return -std::numeric_limits<double>::infinity();

  const double x = 0.5 * t;
  const double log_x = std::log(x);  // -inf at x == 0, handled per branch
  const int m = df / 2;
  double acc = -std::numeric_limits<double>::infinity();

  if (df % 2 == 0) {
    // Q(m, x) = exp(-x) * sum_{k<m} x^k / k!
    for (int k = 0; k < m; ++k) {
      const double term = (k == 0) ? -x : -x + k * log_x - std::lgamma(k + 1.0);
      acc = log_add_exp(acc, term);
    }
    return acc;
  }

  // Q(m + 1/2, x) = erfc(sqrt x) + exp(-x) * sum_{k=1..m} x^(k-1/2) / Gamma(k+1/2)
  acc = std::log(2.0) + log_norm_cdf(-std::sqrt(t));
  if (x > 0.0) {
    for (int k = 1; k <= m; ++k) {
      acc = log_add_exp(acc, -x + (k - 0.5) * log_x - std::lgamma(k + 0.5));
    }
  }
  return std::min(acc, 0.0);
}

double chi2_sf(double t, int df) {
  return std::exp(chi2_log_sf(t, df));
}

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("norm_quantile: p must lie in [0, 1]");
  }
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  for (int iter = 0; iter < 2; ++iter) {
    const double e = (x < 0.0) ? norm_cdf(x) - p : (1.0 - p) - norm_cdf(-x);
    const double u = e / norm_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace epsassoc
