#pragma once

// Reference implementations used to check the library. Nothing here calls
// into pmlkit numerics: special functions are series/continued fractions in
// long double, and leakage is maximised from the joint precision matrix.

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Regularised lower incomplete gamma P(a, x).
inline long double gamma_p(long double a, long double x) {
  if (x <= 0.0L) return 0.0L;
  const long double log_prefactor = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0L) {
    long double term = 1.0L / a;
    long double sum = term;
    for (int k = 1; k < 100000; ++k) {
      term *= x / (a + k);
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-21L) break;
    }
    return sum * std::exp(log_prefactor);
  }
  // Lentz continued fraction for Q(a, x).
  const long double tiny = 1e-300L;
  long double b = x + 1.0L - a;
  long double c = 1.0L / tiny;
  long double d = 1.0L / b;
  long double h = d;
  for (int i = 1; i < 100000; ++i) {
    const long double an = -i * (i - a);
    b += 2.0L;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0L / d;
    const long double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0L) < 1e-21L) break;
  }
  return 1.0L - std::exp(log_prefactor) * h;
}

inline double chi2_cdf(double x, int k) { return static_cast<double>(gamma_p(0.5L * k, 0.5L * x)); }

inline double chi2_quantile(double p, int k) {
  long double lo = 0.0L;
  long double hi = 1.0L;
  while (gamma_p(0.5L * k, 0.5L * hi) < p) hi *= 2.0L;
  for (int i = 0; i < 400; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (gamma_p(0.5L * k, 0.5L * mid) < p ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

// Phi(x) = (1 + sign(x) P(1/2, x^2 / 2)) / 2.
inline double normal_cdf(double x) {
  const long double half = 0.5L * gamma_p(0.5L, 0.5L * static_cast<long double>(x) * x);
  return static_cast<double>(x >= 0 ? 0.5L + half : 0.5L - half);
}

inline double kappa(double epsilon, double delta, int l, int n) {
  return std::exp((0.5 * chi2_quantile(1.0 - delta, l) - epsilon) / n);
}

inline double scalar_lyapunov(double a, double q) { return q / (1.0 - a * a); }

struct ScalarRiccati {
  double p_minus;
  double p;
};

// Positive root of c^2 P^2 + (theta (1 - a^2) - q c^2) P - q theta = 0.
inline ScalarRiccati scalar_dare(double a, double c, double q, double theta) {
  const long double b = static_cast<long double>(theta) * (1.0L - static_cast<long double>(a) * a) -
                        static_cast<long double>(q) * c * c;
  const long double cc = static_cast<long double>(c) * c;
  const long double disc = b * b + 4.0L * cc * q * theta;
  const long double p_minus = (-b + std::sqrt(disc)) / (2.0L * cc);
  const long double p = p_minus * theta / (cc * p_minus + theta);
  return {static_cast<double>(p_minus), static_cast<double>(p)};
}

// Gaussian mechanism privacy profile in terms of the oracle normal CDF.
inline double dp_profile(double epsilon, double r) {
  return normal_cdf(0.5 * r - epsilon / r) - std::exp(epsilon) * normal_cdf(-0.5 * r - epsilon / r);
}

inline double logdet(const Matrix& m) {
  Eigen::LDLT<Matrix> ldlt(m);
  return ldlt.vectorD().array().log().sum();
}

// sup_x log p(x | y) / p(x) with the posterior normalised by det(Gamma) and
// the prior by det(Sigma_XX), i.e. log det Sigma_XX - log det Gamma plus the
// maximised quadratic. The posterior precision is read off the inverse of the
// full joint covariance.
inline double leakage(const Vector& mu_x, const Vector& mu_y, const Matrix& sxx, const Matrix& sxy,
                      const Matrix& syy, const Vector& y) {
  const Eigen::Index n = sxx.rows();
  const Eigen::Index m = syy.rows();
  Matrix joint(n + m, n + m);
  joint << sxx, sxy, sxy.transpose(), syy;
  const Matrix precision = joint.inverse();
  const Matrix lxx = precision.topLeftCorner(n, n);
  const Matrix lxy = precision.topRightCorner(n, m);
  const Vector post_mean = mu_x - lxx.ldlt().solve(lxy * (y - mu_y));
  const Matrix prior_precision = sxx.inverse();

  // Maximise -1/2 (x - post_mean)' lxx (x - post_mean) + 1/2 (x - mu_x)' prior_precision (x - mu_x).
  const Matrix hessian = lxx - prior_precision;
  const Vector rhs = lxx * post_mean - prior_precision * mu_x;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(1e-9);
  cod.compute(hessian);
  const Vector x = cod.solve(rhs);
  const double quad = -0.5 * (x - post_mean).dot(lxx * (x - post_mean)) +
                      0.5 * (x - mu_x).dot(prior_precision * (x - mu_x));
  const double logdet_gamma = -logdet(lxx);
  return logdet(sxx) - logdet_gamma + quad;
}

}  // namespace oracle
