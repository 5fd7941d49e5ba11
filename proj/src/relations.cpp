#include "pmlkit/relations.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pmlkit {

namespace {

constexpr double kRatioLo = 1e-12;
constexpr double kRatioHi = 1e6;
constexpr double kDpCheckSlack = 1e-12;

}  // namespace

DpBudget DpBudget::make(double epsilon_dp, double delta_dp, double zeta) {
  require(std::isfinite(epsilon_dp) && epsilon_dp >= 0.0, ErrorKind::Domain, "epsilon_dp must be finite and >= 0");
  require(delta_dp > 0.0 && delta_dp < 1.0, ErrorKind::Domain, "delta_dp must lie in (0,1)");
  require(std::isfinite(zeta) && zeta > 0.0, ErrorKind::Domain, "zeta must be positive");
  return DpBudget{epsilon_dp, delta_dp, zeta};
}

MiBudget MiBudget::make(double epsilon_mi) {
  require(std::isfinite(epsilon_mi) && epsilon_mi > 0.0, ErrorKind::Domain, "epsilon_mi must be positive");
  return MiBudget{epsilon_mi};
}

double phi(double epsilon_dp, double r) {
  require(r > 0.0 && !std::isnan(r), ErrorKind::Domain, "phi ratio must be positive");
  require(std::isfinite(epsilon_dp), ErrorKind::Domain, "phi epsilon must be finite");
  if (std::isinf(r)) return 1.0;
  const double a = 0.5 * r - epsilon_dp / r;
  const double b = -0.5 * r - epsilon_dp / r;
  const double value = std_normal_cdf(a) - std::exp(epsilon_dp + log_std_normal_cdf(b));
  return std::clamp(value, 0.0, 1.0);
}

double phi_inverse(double epsilon_dp, double delta_dp) {
  require(delta_dp > 0.0 && delta_dp < 1.0, ErrorKind::Domain, "delta_dp must lie in (0,1)");
  double lo = std::log(kRatioLo);
  double hi = std::log(kRatioHi);
  require(phi(epsilon_dp, kRatioLo) <= delta_dp && phi(epsilon_dp, kRatioHi) >= delta_dp, ErrorKind::NoRoot,
          "delta_dp is outside the range of phi on the search bracket");
  for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (phi(epsilon_dp, std::exp(mid)) < delta_dp ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

bool dp_check(const Matrix& c, const SymMatrix& theta, const DpBudget& dp) {
  require(c.rows() == theta.dim(), ErrorKind::DimensionMismatch, "C rows must match Theta");
  Eigen::LLT<Matrix> llt(theta.matrix());
  require(llt.info() == Eigen::Success, ErrorKind::NotPositiveDefinite, "Theta must be positive definite");
  const SymMatrix sensitivity(c.transpose() * llt.solve(c));
  const double bound = phi_inverse(dp.epsilon_dp, dp.delta_dp) / dp.zeta;
  return max_eig_sym(sensitivity) <= bound * bound + kDpCheckSlack;
}

double pml_to_dp(const PrivacyBudget& b, const SymMatrix& sigma_xx, double zeta, double delta_dp) {
  require(sigma_xx.dim() == b.n, ErrorKind::DimensionMismatch, "sigma_xx dimension differs from budget n");
  require(zeta > 0.0 && std::isfinite(zeta), ErrorKind::Domain, "zeta must be positive");
  require(delta_dp > 0.0 && delta_dp < 1.0, ErrorKind::Domain, "delta_dp must lie in (0,1)");
  kappa(b);  // feasibility
  const double lambda_min = min_eig_sym(sigma_xx);
  require(lambda_min > 0.0, ErrorKind::NotPositiveDefinite, "sigma_xx must be positive definite");
  // kappa^n = exp(n log kappa) = exp(1/2 F^-1 - epsilon).
  const double kappa_n = std::exp(static_cast<double>(b.n) * log_kappa(b));
  const double required_ratio = zeta / std::sqrt(kappa_n * lambda_min);

  auto satisfied = [&](double eps) { return phi(eps, required_ratio) <= delta_dp; };
  if (satisfied(0.0)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (!satisfied(hi)) {
    lo = hi;
    hi *= 2.0;
    require(hi < 1e6, ErrorKind::NoRoot, "no epsilon_dp below 1e6 satisfies the DP inequality");
  }
  for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (satisfied(mid) ? hi : lo) = mid;
  }
  return hi;
}

double dp_to_pml(const DpBudget& dp, const SymMatrix& sigma_xx, int l, double delta) {
  require(l >= 1, ErrorKind::Domain, "rank l must be >= 1");
  require(delta > 0.0 && delta < 1.0, ErrorKind::Domain, "delta must lie in (0,1)");
  const double ratio = phi_inverse(dp.epsilon_dp, dp.delta_dp) / dp.zeta;
  const Eigen::Index n = sigma_xx.dim();
  const SymMatrix inflated(Matrix::Identity(n, n) + ratio * ratio * sigma_xx.matrix());
  return 0.5 * chi2_quantile(1.0 - delta, l) + logdet_psd(inflated);
}

double mutual_information(const SymMatrix& sigma_xx, const Matrix& c, const SymMatrix& theta) {
  require(c.cols() == sigma_xx.dim() && c.rows() == theta.dim(), ErrorKind::DimensionMismatch,
          "C must be m x n for Theta (m x m) and sigma_xx (n x n)");
  logdet_psd(sigma_xx);
  const Matrix whiten = sym_inv_sqrt(theta).matrix();
  const Matrix snr = whiten * c * sigma_xx.matrix() * c.transpose() * whiten;
  return 0.5 * logdet_psd(SymMatrix(Matrix::Identity(theta.dim(), theta.dim()) + snr));
}

double mutual_information_state_form(const SymMatrix& sigma_xx, const Matrix& c, const SymMatrix& theta) {
  require(c.cols() == sigma_xx.dim() && c.rows() == theta.dim(), ErrorKind::DimensionMismatch,
          "C must be m x n for Theta (m x m) and sigma_xx (n x n)");
  Eigen::LLT<Matrix> theta_llt(theta.matrix());
  require(theta_llt.info() == Eigen::Success, ErrorKind::NotPositiveDefinite, "Theta must be positive definite");
  const SymMatrix information(sym_inverse(sigma_xx).matrix() + c.transpose() * theta_llt.solve(c));
  return 0.5 * (logdet_psd(sigma_xx) + logdet_psd(information));
}

double pml_to_mi(const PrivacyBudget& b) {
  kappa(b);  // feasibility
  return -0.5 * static_cast<double>(b.n) * log_kappa(b);
}

double mi_to_pml(const MiBudget& mi, int l, int n, double delta) {
  require(n >= 1 && l >= 1, ErrorKind::Domain, "l and n must be >= 1");
  require(delta > 0.0 && delta < 1.0, ErrorKind::Domain, "delta must lie in (0,1)");
  return 2.0 * mi.epsilon_mi + 0.5 * chi2_quantile(1.0 - delta, l);
}

bool mi_pml_equivalence(const SymMatrix& sigma_xx, const Matrix& c, const SymMatrix& theta, const PrivacyBudget& b) {
  require(b.n == sigma_xx.dim(), ErrorKind::DimensionMismatch, "budget n differs from sigma_xx dimension");
  const auto rank = static_cast<int>(numerical_rank(c));
  require(rank == b.l, ErrorKind::RankMismatch,
          "budget rank l=" + std::to_string(b.l) + " differs from rank(C)=" + std::to_string(rank));
  const double information = mutual_information(sigma_xx, c, theta);
  // n log kappa = 1/2 F^-1 - epsilon
  return -2.0 * information + kPrivacySlack >= half_quantile(b) - b.epsilon;
}

}  // namespace pmlkit
