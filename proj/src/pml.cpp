#include "pmlkit/pml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pmlkit {

namespace {

Eigen::LLT<Matrix> cholesky(const SymMatrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m.matrix());
  require(llt.info() == Eigen::Success, ErrorKind::NotPositiveDefinite, std::string(what) + " is not positive definite");
  return llt;
}

// Keeps exactly `rank` singular triplets so the chi-square degree always
// matches the rank recorded on the joint law.
CompactSvd svd_with_rank(const Matrix& m, Eigen::Index rank) {
  CompactSvd svd = compact_svd(m);
  if (svd.rank() == rank) return svd;
  Eigen::BDCSVD<Matrix> full(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return CompactSvd{full.matrixU().leftCols(rank), full.singularValues().head(rank), full.matrixV().leftCols(rank)};
}

}  // namespace

JointGaussian::JointGaussian(Vector mu_x, Vector mu_y, SymMatrix sigma_xx, Matrix sigma_xy, SymMatrix sigma_yy)
    : mu_x_(std::move(mu_x)),
      mu_y_(std::move(mu_y)),
      sigma_xx_(std::move(sigma_xx)),
      sigma_xy_(std::move(sigma_xy)),
      sigma_yy_(std::move(sigma_yy)),
      l_(0) {
  require(mu_x_.size() == sigma_xx_.dim(), ErrorKind::DimensionMismatch, "mu_x and sigma_xx dimensions differ");
  require(mu_y_.size() == sigma_yy_.dim(), ErrorKind::DimensionMismatch, "mu_y and sigma_yy dimensions differ");
  require(sigma_xy_.rows() == sigma_xx_.dim() && sigma_xy_.cols() == sigma_yy_.dim(), ErrorKind::DimensionMismatch,
          "sigma_xy must be n x m");
  require(mu_x_.allFinite() && mu_y_.allFinite() && sigma_xy_.allFinite(), ErrorKind::Domain,
          "joint Gaussian has non-finite entries");

  // PD joint <=> Sigma_XX PD and the output-side Schur complement PD. No
  // relative floor: designed noise adds only jitter in directions the
  // mechanism does not reveal.
  const Eigen::LLT<Matrix> sxx_llt(sigma_xx_.matrix());
  require(sxx_llt.info() == Eigen::Success && min_eig_sym(sigma_xx_) > 0.0, ErrorKind::NotPositiveDefinite,
          "joint covariance is not positive definite (sigma_xx is singular)");
  const SymMatrix psi(sigma_yy_.matrix() - sigma_xy_.transpose() * sxx_llt.solve(sigma_xy_));
  const double lambda_min = min_eig_sym(psi);
  require(Eigen::LLT<Matrix>(psi.matrix()).info() == Eigen::Success && lambda_min > 0.0,
          ErrorKind::NotPositiveDefinite,
          "joint covariance is not positive definite (output Schur complement min eigenvalue " +
              std::to_string(lambda_min) + ")");

  l_ = static_cast<int>(numerical_rank(sigma_xy_));
  require(l_ > 0, ErrorKind::ZeroMatrix, "cross covariance sigma_xy has rank 0 (X and Y independent)");
}

PrivacyBudget PrivacyBudget::make(double epsilon, double delta, int l, int n) {
  require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorKind::Domain, "epsilon must be finite and nonnegative");
  require(delta > 0.0 && delta < 1.0, ErrorKind::Domain, "delta must lie in (0,1)");
  require(l >= 1 && n >= 1, ErrorKind::Domain, "budget rank l and dimension n must be >= 1");
  return PrivacyBudget{epsilon, delta, l, n};
}

PmlComponents pml_components(const JointGaussian& j) {
  const Matrix& sxy = j.sigma_xy();
  const auto sxx_llt = cholesky(j.sigma_xx(), "sigma_xx");
  const auto syy_llt = cholesky(j.sigma_yy(), "sigma_yy");

  const Matrix sxx_inv_sxy = sxx_llt.solve(sxy);  // n x m
  const Matrix syy_inv_sxyt = syy_llt.solve(sxy.transpose());  // m x n

  const SymMatrix gamma(j.sigma_xx().matrix() - sxy * syy_inv_sxyt);
  const SymMatrix lambda(sxy.transpose() * sxx_inv_sxy);
  const SymMatrix psi(j.sigma_yy().matrix() - lambda.matrix());

  const double logdet_gamma = logdet_psd(gamma);
  logdet_psd(psi);  // throws when the output-side complement is not PD
  const double logdet_sxx = logdet_psd(j.sigma_xx());

  const Matrix psi_inv_half = sym_inv_sqrt(psi).matrix();
  const Matrix psi_half = sym_sqrt(psi).matrix();
  CompactSvd svd = svd_with_rank(psi_inv_half * sxx_inv_sxy.transpose(), j.l());

  const Matrix projected = psi_half * svd.u;
  SymMatrix weight(projected * projected.transpose() + lambda.matrix());

  return PmlComponents{gamma, psi, std::move(svd), std::move(weight), logdet_sxx, logdet_gamma};
}

LeakageModel::LeakageModel(const JointGaussian& j) : joint_(j), components_(pml_components(j)) {
  const auto syy_llt = cholesky(j.sigma_yy(), "sigma_yy");
  const Matrix left = syy_llt.solve(components_.weight.matrix());
  xi_form_ = syy_llt.solve(left.transpose());
  xi_form_ = 0.5 * (xi_form_ + xi_form_.transpose()).eval();
}

double LeakageModel::xi(const Vector& y) const {
  require(y.size() == joint_.m(), ErrorKind::DimensionMismatch, "observation has wrong dimension");
  const Vector d = y - joint_.mu_y();
  return std::max(0.0, d.dot(xi_form_ * d));
}

double pml_leakage(const JointGaussian& j, const Vector& y) { return LeakageModel(j).leakage(y); }

double xi_statistic(const JointGaussian& j, const Vector& y) { return LeakageModel(j).xi(y); }

double exact_privacy_prob(const JointGaussian& j, double epsilon) {
  require(!std::isnan(epsilon), ErrorKind::Domain, "epsilon is NaN");
  if (std::isinf(epsilon)) return epsilon > 0 ? 1.0 : 0.0;
  const PmlComponents c = pml_components(j);
  const double arg = 2.0 * epsilon - 2.0 * c.logdet_sigma_xx + 2.0 * c.logdet_gamma;
  // Below the cancellation error of the three terms the argument is zero.
  const double scale = std::abs(epsilon) + std::abs(c.logdet_sigma_xx) + std::abs(c.logdet_gamma);
  if (arg <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, 2.0 * scale)) return 0.0;
  return chi2_cdf(arg, j.l());
}

bool check_pml_privacy(const JointGaussian& j, const PrivacyBudget& b) {
  require(b.l == j.l(), ErrorKind::RankMismatch,
          "budget rank l=" + std::to_string(b.l) + " differs from joint rank l=" + std::to_string(j.l()));
  require(b.n == j.n(), ErrorKind::DimensionMismatch, "budget dimension n differs from the private dimension");
  const PmlComponents c = pml_components(j);
  return half_quantile(b) <= b.epsilon - c.min_leakage() + kPrivacySlack;
}

double half_quantile(const PrivacyBudget& b) { return 0.5 * chi2_quantile(1.0 - b.delta, b.l); }

bool necessary_condition(const PrivacyBudget& b) { return half_quantile(b) < b.epsilon; }

double log_kappa(const PrivacyBudget& b) { return (half_quantile(b) - b.epsilon) / static_cast<double>(b.n); }

double kappa(const PrivacyBudget& b) {
  const double lk = log_kappa(b);
  require(lk < 0.0, ErrorKind::NecessaryConditionViolated,
          "necessary condition 1/2 F^-1_{chi2_l}(1-delta) < epsilon fails: 1/2 F^-1 = " +
              std::to_string(half_quantile(b)) + ", epsilon = " + std::to_string(b.epsilon));
  return std::exp(lk);
}

PmlOracleValue pml_oracle_numeric(const JointGaussian& j, const Vector& y) {
  require(y.size() == j.m(), ErrorKind::DimensionMismatch, "observation has wrong dimension");
  const Matrix& sxy = j.sigma_xy();
  const auto syy_llt = cholesky(j.sigma_yy(), "sigma_yy");

  // Posterior N(mu_x + shift, gamma) and prior N(mu_x, sigma_xx).
  const Vector shift = sxy * syy_llt.solve(y - j.mu_y());
  const SymMatrix gamma(j.sigma_xx().matrix() - sxy * syy_llt.solve(sxy.transpose()));
  const auto gamma_llt = cholesky(gamma, "posterior covariance");
  const auto sxx_llt = cholesky(j.sigma_xx(), "sigma_xx");
  const Eigen::Index n = j.n();
  const Matrix gamma_inv = gamma_llt.solve(Matrix::Identity(n, n));
  const Matrix sxx_inv = sxx_llt.solve(Matrix::Identity(n, n));

  // log ratio in d = x - mu_x:  -1/2 |d - shift|^2_{Gamma^-1} + 1/2 |d|^2_{Sigma^-1}.
  // Stationarity (Gamma^-1 - Sigma^-1) d = Gamma^-1 shift; least-squares solve.
  const SymMatrix hessian(gamma_inv - sxx_inv);
  const Vector rhs = gamma_inv * shift;
  Eigen::SelfAdjointEigenSolver<Matrix> es(hessian.matrix());
  const Vector& lambda = es.eigenvalues();
  const double cutoff = 1e-10 * lambda.cwiseAbs().maxCoeff();
  Vector inv_lambda = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda(i) > cutoff) inv_lambda(i) = 1.0 / lambda(i);
  }
  const Vector d = es.eigenvectors() * inv_lambda.asDiagonal() * (es.eigenvectors().transpose() * rhs);

  const Vector r = d - shift;
  const double quad = -0.5 * r.dot(gamma_inv * r) + 0.5 * d.dot(sxx_inv * d);
  const double log_ratio_det = logdet_psd(j.sigma_xx()) - logdet_psd(gamma);
  return PmlOracleValue{log_ratio_det + quad, 0.5 * log_ratio_det + quad};
}

}  // namespace pmlkit
