#pragma once

// Privacy-aware fusion of N LTI subsystems: Ybar = sum_i L_i Y_i, with
// per-subsystem noise designed from each subsystem's PML budget.

#include <optional>
#include <vector>

#include "pmlkit/lti.hpp"
#include "pmlkit/mechanism.hpp"

namespace pmlkit {

/// c_floor used by scalar_joint_design when the caller does not pick one.
inline constexpr double kDefaultNoiseFloor = 1e-6;

class Subsystem {
 public:
  /// Theta, when given, only has to be PSD so noiseless releases can be
  /// simulated; system() needs it positive definite.
  Subsystem(Matrix a, Matrix c, SymMatrix q, Matrix weight, PrivacyBudget budget,
            std::optional<SymMatrix> theta = std::nullopt);

  const Matrix& a() const { return a_; }
  const Matrix& c() const { return c_; }
  const SymMatrix& q() const { return q_; }
  const Matrix& weight() const { return weight_; }
  const PrivacyBudget& budget() const { return budget_; }
  const std::optional<SymMatrix>& theta() const { return theta_; }
  Eigen::Index n() const { return a_.rows(); }
  Eigen::Index m() const { return c_.rows(); }

  /// Stationary prior Sigma_XX solving the Lyapunov equation.
  SymMatrix prior() const { return solve_lyapunov(a_, q_); }
  LtiSystem system() const;
  Subsystem with_theta(SymMatrix theta) const;

 private:
  Matrix a_;
  Matrix c_;
  SymMatrix q_;
  Matrix weight_;
  PrivacyBudget budget_;
  std::optional<SymMatrix> theta_;
};

class AggregationNetwork {
 public:
  AggregationNetwork(std::vector<Subsystem> subsystems, Eigen::Index output_dim);

  const std::vector<Subsystem>& subsystems() const { return subsystems_; }
  Eigen::Index output_dim() const { return output_dim_; }
  std::size_t size() const { return subsystems_.size(); }

 private:
  std::vector<Subsystem> subsystems_;
  Eigen::Index output_dim_;
};

SymMatrix subsystem_prior(const Matrix& a, const SymMatrix& q);

/// Boundary noise (kappa / (1 - kappa)) C Sigma C^T + jitter I.
SymMatrix design_subsystem_noise(const Subsystem& sub, const ThetaPolicy& policy = {});

/// Designs every subsystem, `workers` at a time; the result keeps input order.
AggregationNetwork design_network(const AggregationNetwork& net, const ThetaPolicy& policy = {}, int workers = 1);

/// J = sum_i tr(L_i Theta_i L_i^T).
double accuracy_metric(const AggregationNetwork& net);

struct ScalarDesign {
  double q;
  double sigma;
  double theta;
};

/// Jointly picks process noise q and release noise theta for a scalar
/// subsystem minimising l^2 theta subject to the PML constraint and the
/// floors q, theta >= c_floor.
ScalarDesign scalar_joint_design(double a, double c, double l_weight, const PrivacyBudget& b,
                                 double c_floor = kDefaultNoiseFloor);

/// Ybar = sum_i L_i y_i.
Vector aggregate(const AggregationNetwork& net, const std::vector<Vector>& y_list);

}  // namespace pmlkit
