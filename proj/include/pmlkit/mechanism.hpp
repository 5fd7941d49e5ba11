#pragma once

// Noise covariance synthesis for Gaussian mechanisms Y = Z + V, V ~ N(0, Theta).

#include <optional>

#include "pmlkit/pml.hpp"

namespace pmlkit {

/// Private X jointly Gaussian with the pre-noise release Z.
///
/// The joint covariance of (X, Z) only needs to be PSD (Z = X is allowed);
/// Sigma_XX must be positive definite and Sigma_XZ nonzero.
class GaussianMechanismSpec {
 public:
  GaussianMechanismSpec(Vector mu_x, Vector mu_z, SymMatrix sigma_xx, Matrix sigma_xz, SymMatrix sigma_zz);

  const Vector& mu_x() const { return mu_x_; }
  const Vector& mu_z() const { return mu_z_; }
  const SymMatrix& sigma_xx() const { return sigma_xx_; }
  const Matrix& sigma_xz() const { return sigma_xz_; }
  const SymMatrix& sigma_zz() const { return sigma_zz_; }
  int l() const { return l_; }
  Eigen::Index n() const { return sigma_xx_.dim(); }
  Eigen::Index m() const { return sigma_zz_.dim(); }

 private:
  Vector mu_x_;
  Vector mu_z_;
  SymMatrix sigma_xx_;
  Matrix sigma_xz_;
  SymMatrix sigma_zz_;
  int l_;
};

/// Linear Gaussian mechanism Y = C X + V.
class LinearMechanismSpec {
 public:
  LinearMechanismSpec(Vector mu_x, SymMatrix sigma_xx, Matrix c);
  LinearMechanismSpec(SymMatrix sigma_xx, Matrix c);

  const Vector& mu_x() const { return mu_x_; }
  const SymMatrix& sigma_xx() const { return sigma_xx_; }
  const Matrix& c() const { return c_; }
  int l() const { return l_; }
  Eigen::Index n() const { return sigma_xx_.dim(); }
  Eigen::Index m() const { return c_.rows(); }

  /// Sigma_XZ = Sigma_XX C^T, Sigma_ZZ = C Sigma_XX C^T.
  GaussianMechanismSpec as_general() const;

 private:
  Vector mu_x_;
  SymMatrix sigma_xx_;
  Matrix c_;
  int l_;
};

enum class ThetaVariant { Boundary, ScaledIdentity };

struct ThetaPolicy {
  ThetaVariant variant = ThetaVariant::Boundary;
  double jitter = 1e-12;
};

SymMatrix design_theta_general(const GaussianMechanismSpec& spec, const PrivacyBudget& b, const ThetaPolicy& policy = {});
SymMatrix design_theta_linear(const LinearMechanismSpec& spec, const PrivacyBudget& b, const ThetaPolicy& policy = {});

/// PSD test of [[(1-kappa) Sigma_XX, Sigma_XZ], [Sigma_XZ^T, Theta + Sigma_ZZ]].
bool verify_lmi(const GaussianMechanismSpec& spec, const SymMatrix& theta, const PrivacyBudget& b);
bool verify_lmi(const LinearMechanismSpec& spec, const SymMatrix& theta, const PrivacyBudget& b);

JointGaussian mechanism_joint(const GaussianMechanismSpec& spec, const SymMatrix& theta);
JointGaussian mechanism_joint(const LinearMechanismSpec& spec, const SymMatrix& theta);

/// Budget whose l and n are taken from the mechanism.
PrivacyBudget budget_for(const GaussianMechanismSpec& spec, double epsilon, double delta);
PrivacyBudget budget_for(const LinearMechanismSpec& spec, double epsilon, double delta);

}  // namespace pmlkit
