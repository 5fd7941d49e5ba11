#include "pmlkit/mechanism.hpp"

#include <cmath>
#include <string>

namespace pmlkit {

namespace {

void require_positive_definite(const SymMatrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m.matrix());
  require(llt.info() == Eigen::Success, ErrorKind::NotPositiveDefinite, std::string(what) + " must be positive definite");
}

void check_budget(const PrivacyBudget& b, Eigen::Index n, int l) {
  require(b.n == n, ErrorKind::DimensionMismatch,
          "budget dimension n=" + std::to_string(b.n) + " differs from private dimension " + std::to_string(n));
  require(b.l == l, ErrorKind::RankMismatch,
          "budget rank l=" + std::to_string(b.l) + " differs from mechanism rank " + std::to_string(l));
}

void check_theta(const SymMatrix& theta, Eigen::Index m) {
  require(theta.dim() == m, ErrorKind::DimensionMismatch, "Theta must be m x m");
}

// kappa / (1 - kappa), with 1 - kappa evaluated without cancellation.
double noise_ratio(const PrivacyBudget& b) {
  const double k = kappa(b);
  return k / -std::expm1(std::log(k));
}

}  // namespace

GaussianMechanismSpec::GaussianMechanismSpec(Vector mu_x, Vector mu_z, SymMatrix sigma_xx, Matrix sigma_xz,
                                             SymMatrix sigma_zz)
    : mu_x_(std::move(mu_x)),
      mu_z_(std::move(mu_z)),
      sigma_xx_(std::move(sigma_xx)),
      sigma_xz_(std::move(sigma_xz)),
      sigma_zz_(std::move(sigma_zz)),
      l_(0) {
  const Eigen::Index n = sigma_xx_.dim();
  const Eigen::Index m = sigma_zz_.dim();
  require(mu_x_.size() == n && mu_z_.size() == m, ErrorKind::DimensionMismatch, "mechanism means have wrong dimension");
  require(sigma_xz_.rows() == n && sigma_xz_.cols() == m, ErrorKind::DimensionMismatch, "sigma_xz must be n x m");
  require_positive_definite(sigma_xx_, "sigma_xx");

  Matrix joint(n + m, n + m);
  joint << sigma_xx_.matrix(), sigma_xz_, sigma_xz_.transpose(), sigma_zz_.matrix();
  require(certify_psd(SymMatrix(joint)).valid(), ErrorKind::NotPsd, "joint covariance of (X, Z) is not PSD");

  l_ = static_cast<int>(numerical_rank(sigma_xz_));
  require(l_ > 0, ErrorKind::ZeroMatrix, "sigma_xz has rank 0");
}

LinearMechanismSpec::LinearMechanismSpec(Vector mu_x, SymMatrix sigma_xx, Matrix c)
    : mu_x_(std::move(mu_x)), sigma_xx_(std::move(sigma_xx)), c_(std::move(c)), l_(0) {
  require(mu_x_.size() == sigma_xx_.dim(), ErrorKind::DimensionMismatch, "mu_x and sigma_xx dimensions differ");
  require(c_.cols() == sigma_xx_.dim() && c_.rows() > 0, ErrorKind::DimensionMismatch, "C must be m x n");
  require(c_.allFinite(), ErrorKind::Domain, "C has non-finite entries");
  require_positive_definite(sigma_xx_, "sigma_xx");
  l_ = static_cast<int>(numerical_rank(c_));
  require(l_ > 0, ErrorKind::ZeroMatrix, "C must be nonzero");
}

LinearMechanismSpec::LinearMechanismSpec(SymMatrix sigma_xx, Matrix c)
    : LinearMechanismSpec(Vector::Zero(sigma_xx.dim()), sigma_xx, std::move(c)) {}

GaussianMechanismSpec LinearMechanismSpec::as_general() const {
  const Matrix sxz = sigma_xx_.matrix() * c_.transpose();
  return GaussianMechanismSpec(mu_x_, c_ * mu_x_, sigma_xx_, sxz, SymMatrix(c_ * sxz));
}

SymMatrix design_theta_general(const GaussianMechanismSpec& spec, const PrivacyBudget& b, const ThetaPolicy& policy) {
  require(policy.jitter > 0.0, ErrorKind::Domain, "jitter must be positive");
  check_budget(b, spec.n(), spec.l());
  const double k = kappa(b);
  const Eigen::LLT<Matrix> sxx_llt(spec.sigma_xx().matrix());
  const Matrix& sxz = spec.sigma_xz();
  const Matrix explained = sxz.transpose() * sxx_llt.solve(sxz);
  const SymMatrix deficit(explained / -std::expm1(std::log(k)) - spec.sigma_zz().matrix());
  const Eigen::Index m = spec.m();

  if (policy.variant == ThetaVariant::ScaledIdentity) {
    const double level = std::max(max_eig_sym(deficit), 0.0) + policy.jitter;
    return SymMatrix(level * Matrix::Identity(m, m));
  }
  return SymMatrix(psd_part(deficit).matrix() + policy.jitter * Matrix::Identity(m, m));
}

SymMatrix design_theta_linear(const LinearMechanismSpec& spec, const PrivacyBudget& b, const ThetaPolicy& policy) {
  require(policy.jitter > 0.0, ErrorKind::Domain, "jitter must be positive");
  check_budget(b, spec.n(), spec.l());
  const double ratio = noise_ratio(b);
  const SymMatrix signal(spec.c() * spec.sigma_xx().matrix() * spec.c().transpose());
  const Eigen::Index m = spec.m();

  if (policy.variant == ThetaVariant::ScaledIdentity) {
    const double level = ratio * max_eig_sym(signal) + policy.jitter;
    return SymMatrix(level * Matrix::Identity(m, m));
  }
  return SymMatrix(ratio * signal.matrix() + policy.jitter * Matrix::Identity(m, m));
}

bool verify_lmi(const GaussianMechanismSpec& spec, const SymMatrix& theta, const PrivacyBudget& b) {
  check_theta(theta, spec.m());
  const double k = kappa(b);
  const Eigen::Index n = spec.n();
  const Eigen::Index m = spec.m();
  Matrix block(n + m, n + m);
  block << (1.0 - k) * spec.sigma_xx().matrix(), spec.sigma_xz(), spec.sigma_xz().transpose(),
      theta.matrix() + spec.sigma_zz().matrix();
  return certify_psd(SymMatrix(block)).valid();
}

bool verify_lmi(const LinearMechanismSpec& spec, const SymMatrix& theta, const PrivacyBudget& b) {
  return verify_lmi(spec.as_general(), theta, b);
}

JointGaussian mechanism_joint(const GaussianMechanismSpec& spec, const SymMatrix& theta) {
  check_theta(theta, spec.m());
  require_positive_definite(theta, "Theta");
  return JointGaussian(spec.mu_x(), spec.mu_z(), spec.sigma_xx(), spec.sigma_xz(),
                       SymMatrix(spec.sigma_zz().matrix() + theta.matrix()));
}

JointGaussian mechanism_joint(const LinearMechanismSpec& spec, const SymMatrix& theta) {
  check_theta(theta, spec.m());
  require_positive_definite(theta, "Theta");
  const Matrix& c = spec.c();
  const Matrix sxy = spec.sigma_xx().matrix() * c.transpose();
  return JointGaussian(spec.mu_x(), c * spec.mu_x(), spec.sigma_xx(), sxy,
                       SymMatrix(c * sxy + theta.matrix()));
}

PrivacyBudget budget_for(const GaussianMechanismSpec& spec, double epsilon, double delta) {
  return PrivacyBudget::make(epsilon, delta, spec.l(), static_cast<int>(spec.n()));
}

PrivacyBudget budget_for(const LinearMechanismSpec& spec, double epsilon, double delta) {
  return PrivacyBudget::make(epsilon, delta, spec.l(), static_cast<int>(spec.n()));
}

}  // namespace pmlkit
