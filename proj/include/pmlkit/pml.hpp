#pragma once

// Pointwise maximal leakage of a jointly Gaussian private/public pair and
// exact (epsilon, delta)-PML privacy verification.

#include "pmlkit/gauss_core.hpp"

namespace pmlkit {

/// Absolute slack on the log scale when deciding the privacy inequality, so
/// mechanisms designed exactly on the boundary are not rejected by rounding.
inline constexpr double kPrivacySlack = 1e-10;

/// Joint law of private X (n) and public Y (m) with a positive definite
/// covariance and a nonzero cross covariance of numerical rank l.
class JointGaussian {
 public:
  JointGaussian(Vector mu_x, Vector mu_y, SymMatrix sigma_xx, Matrix sigma_xy, SymMatrix sigma_yy);

  const Vector& mu_x() const { return mu_x_; }
  const Vector& mu_y() const { return mu_y_; }
  const SymMatrix& sigma_xx() const { return sigma_xx_; }
  const Matrix& sigma_xy() const { return sigma_xy_; }
  const SymMatrix& sigma_yy() const { return sigma_yy_; }
  Eigen::Index n() const { return mu_x_.size(); }
  Eigen::Index m() const { return mu_y_.size(); }
  int l() const { return l_; }

 private:
  Vector mu_x_;
  Vector mu_y_;
  SymMatrix sigma_xx_;
  Matrix sigma_xy_;
  SymMatrix sigma_yy_;
  int l_;
};

struct PmlComponents {
  SymMatrix gamma;   // posterior covariance of X given Y
  SymMatrix psi;     // output-side Schur complement
  CompactSvd svd;    // of Psi^{-1/2} Sigma_XY^T Sigma_XX^{-1}
  SymMatrix weight;  // Psi^{1/2} U U^T Psi^{1/2} + Sigma_XY^T Sigma_XX^{-1} Sigma_XY
  double logdet_sigma_xx;
  double logdet_gamma;

  /// The leakage floor log det Sigma_XX - log det Gamma, attained at y = mu_Y.
  double min_leakage() const { return logdet_sigma_xx - logdet_gamma; }
};

struct PrivacyBudget {
  double epsilon;
  double delta;
  int l;
  int n;

  /// Validates ranges: epsilon >= 0 finite, delta in (0,1), l and n >= 1.
  static PrivacyBudget make(double epsilon, double delta, int l, int n);
};

PmlComponents pml_components(const JointGaussian& j);

/// Precomputed evaluator for repeated leakage queries on one joint law.
class LeakageModel {
 public:
  explicit LeakageModel(const JointGaussian& j);

  const JointGaussian& joint() const { return joint_; }
  const PmlComponents& components() const { return components_; }

  double xi(const Vector& y) const;
  double leakage(const Vector& y) const { return components_.min_leakage() + 0.5 * xi(y); }

 private:
  JointGaussian joint_;
  PmlComponents components_;
  Matrix xi_form_;  // Sigma_YY^{-1} W Sigma_YY^{-1}
};

double pml_leakage(const JointGaussian& j, const Vector& y);
double xi_statistic(const JointGaussian& j, const Vector& y);
double exact_privacy_prob(const JointGaussian& j, double epsilon);
bool check_pml_privacy(const JointGaussian& j, const PrivacyBudget& b);

/// Half the chi-square (1 - delta) quantile with l degrees of freedom.
double half_quantile(const PrivacyBudget& b);
bool necessary_condition(const PrivacyBudget& b);
/// log kappa, defined for every budget (no feasibility requirement).
double log_kappa(const PrivacyBudget& b);
/// kappa in (0,1); throws NecessaryConditionViolated otherwise.
double kappa(const PrivacyBudget& b);

struct PmlOracleValue {
  double full_logdet_convention;  // posterior normalised by 1/det(Gamma)
  double half_logdet_convention;  // standard 1/det(Gamma)^{1/2} normalisation
};

/// Maximises the posterior-to-prior log density ratio over x directly from
/// the two Gaussian densities, without the closed form.
PmlOracleValue pml_oracle_numeric(const JointGaussian& j, const Vector& y);

}  // namespace pmlkit
