#pragma once

// Discrete-time LTI Gaussian systems X+ = A X + W, Y = C X + V: Lyapunov
// priors, Kalman recursion, steady-state covariance and PML error bounds.

#include <string>
#include <vector>

#include "pmlkit/pml.hpp"

namespace pmlkit {

/// Spectral-radius margin below 1 required for Schur stability.
inline constexpr double kSchurMargin = 1e-10;

class LtiSystem {
 public:
  /// Requires A Schur stable, Q and Theta positive definite. A rank-deficient
  /// C is accepted and recorded in warnings().
  LtiSystem(Matrix a, Matrix c, SymMatrix q, SymMatrix theta);

  const Matrix& a() const { return a_; }
  const Matrix& c() const { return c_; }
  const SymMatrix& q() const { return q_; }
  const SymMatrix& theta() const { return theta_; }
  Eigen::Index n() const { return a_.rows(); }
  Eigen::Index m() const { return c_.rows(); }
  /// rank(C); equals m unless C is rank deficient.
  int output_rank() const { return output_rank_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  LtiSystem with_theta(SymMatrix theta) const { return LtiSystem(a_, c_, q_, std::move(theta)); }

 private:
  Matrix a_;
  Matrix c_;
  SymMatrix q_;
  SymMatrix theta_;
  int output_rank_;
  std::vector<std::string> warnings_;
};

struct KalmanState {
  SymMatrix p_minus;  // predicted covariance
  Matrix gain;
  SymMatrix p;        // filtered covariance
};

struct SteadyState {
  SymMatrix p;
  SymMatrix p_minus;
  Matrix gain;
  /// ((P^-)^{-1} + C^T Theta^{-1} C)^{-1}, an independent route to P.
  SymMatrix p_information_form;
  long iterations;
  /// Frobenius norm of the DARE residual in P^-.
  double dare_residual;
};

double spectral_radius(const Matrix& a);
bool is_schur_stable(const Matrix& a);

/// Sigma = A Sigma A^T + Q.
SymMatrix solve_lyapunov(const Matrix& a, const SymMatrix& q);

KalmanState kalman_step(const SymMatrix& p_prev, const LtiSystem& sys);

/// Fixed point of the Kalman covariance recursion started from P_0 = 0.
SteadyState steady_state_covariance(const LtiSystem& sys, long max_iterations = 1'000'000);

/// || P^- - (A P^- A^T + Q - A P^- C^T (C P^- C^T + Theta)^{-1} C P^- A^T) ||_F
double dare_residual(const LtiSystem& sys, const SymMatrix& p_minus);

/// Lower bound on log det P from an (epsilon, delta)-PML budget; m is the
/// chi-square degree (the output dimension).
double pml_error_lower_bound_logdet(const PrivacyBudget& b, const SymMatrix& q, int m);
/// Lower bound on tr P: n plus the log-det bound.
double pml_error_lower_bound_trace(const PrivacyBudget& b, const SymMatrix& q, int m, int n);

/// Linear mechanism (C, Theta) over the stationary prior of the system.
JointGaussian stationary_mechanism_joint(const LtiSystem& sys);

/// Smallest epsilon at which the stationary mechanism is (epsilon, delta)-PML
/// private: 1/2 F^-1_{chi2_l}(1-delta) + log det Sigma_XX - log det Gamma.
double tightest_epsilon(const LtiSystem& sys, double delta);

}  // namespace pmlkit
