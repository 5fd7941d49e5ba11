#include "pmlkit/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

namespace pmlkit {

Subsystem::Subsystem(Matrix a, Matrix c, SymMatrix q, Matrix weight, PrivacyBudget budget,
                     std::optional<SymMatrix> theta)
    : a_(std::move(a)),
      c_(std::move(c)),
      q_(std::move(q)),
      weight_(std::move(weight)),
      budget_(budget),
      theta_(std::move(theta)) {
  const Eigen::Index n = a_.rows();
  require(n > 0 && a_.cols() == n, ErrorKind::DimensionMismatch, "A must be square");
  require(c_.cols() == n && c_.rows() > 0, ErrorKind::DimensionMismatch, "C must be m x n");
  require(q_.dim() == n, ErrorKind::DimensionMismatch, "Q must be n x n");
  require(weight_.cols() == c_.rows() && weight_.rows() > 0, ErrorKind::DimensionMismatch,
          "fusion weight L must have m columns");
  require(weight_.allFinite() && a_.allFinite() && c_.allFinite(), ErrorKind::Domain,
          "subsystem matrices must be finite");
  require(is_schur_stable(a_), ErrorKind::NotSchurStable, "subsystem A must be Schur stable");
  require(Eigen::LLT<Matrix>(q_.matrix()).info() == Eigen::Success, ErrorKind::NotPositiveDefinite,
          "subsystem Q must be positive definite");
  require(budget_.n == n, ErrorKind::DimensionMismatch, "budget n differs from the state dimension");
  const auto rank = static_cast<int>(numerical_rank(c_));
  require(budget_.l == rank, ErrorKind::RankMismatch,
          "budget rank l=" + std::to_string(budget_.l) + " differs from rank(C)=" + std::to_string(rank));
  if (theta_) {
    require(theta_->dim() == c_.rows(), ErrorKind::DimensionMismatch, "Theta must be m x m");
    require(certify_psd(*theta_).valid(), ErrorKind::NotPsd, "Theta must be PSD");
  }
}

LtiSystem Subsystem::system() const {
  require(theta_.has_value(), ErrorKind::Domain, "subsystem noise Theta has not been set");
  return LtiSystem(a_, c_, q_, *theta_);
}

Subsystem Subsystem::with_theta(SymMatrix theta) const {
  return Subsystem(a_, c_, q_, weight_, budget_, std::move(theta));
}

AggregationNetwork::AggregationNetwork(std::vector<Subsystem> subsystems, Eigen::Index output_dim)
    : subsystems_(std::move(subsystems)), output_dim_(output_dim) {
  require(!subsystems_.empty(), ErrorKind::Domain, "network needs at least one subsystem");
  require(output_dim_ > 0, ErrorKind::DimensionMismatch, "output dimension must be positive");
  for (std::size_t i = 0; i < subsystems_.size(); ++i) {
    require(subsystems_[i].weight().rows() == output_dim_, ErrorKind::DimensionMismatch,
            "weight of subsystem " + std::to_string(i) + " does not have " + std::to_string(output_dim_) + " rows");
  }
}

SymMatrix subsystem_prior(const Matrix& a, const SymMatrix& q) { return solve_lyapunov(a, q); }

SymMatrix design_subsystem_noise(const Subsystem& sub, const ThetaPolicy& policy) {
  const LinearMechanismSpec spec(sub.prior(), sub.c());
  return design_theta_linear(spec, sub.budget(), policy);
}

AggregationNetwork design_network(const AggregationNetwork& net, const ThetaPolicy& policy, int workers) {
  require(workers >= 1, ErrorKind::Domain, "workers must be >= 1");
  const std::size_t count = net.size();
  std::vector<std::optional<SymMatrix>> thetas(count);
  std::vector<std::exception_ptr> errors(count);

  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < count; i += static_cast<std::size_t>(workers)) {
      try {
        thetas[i] = design_subsystem_noise(net.subsystems()[i], policy);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto pool_size = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  if (pool_size <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < pool_size; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  std::vector<Subsystem> designed;
  designed.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    designed.push_back(net.subsystems()[i].with_theta(*thetas[i]));
  }
  return AggregationNetwork(std::move(designed), net.output_dim());
}

double accuracy_metric(const AggregationNetwork& net) {
  double total = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Subsystem& sub = net.subsystems()[i];
    require(sub.theta().has_value(), ErrorKind::Domain, "subsystem " + std::to_string(i) + " has no Theta");
    total += (sub.weight() * sub.theta()->matrix() * sub.weight().transpose()).trace();
  }
  return total;
}

ScalarDesign scalar_joint_design(double a, double c, double l_weight, const PrivacyBudget& b, double c_floor) {
  require(std::isfinite(c_floor) && c_floor > 0.0, ErrorKind::Domain, "c_floor must be positive");
  require(std::isfinite(a) && std::abs(a) < 1.0 - kSchurMargin, ErrorKind::NotSchurStable, "|a| must be < 1");
  require(std::isfinite(c) && c != 0.0, ErrorKind::ZeroMatrix, "c must be nonzero");
  require(std::isfinite(l_weight), ErrorKind::Domain, "weight must be finite");
  require(b.n == 1 && b.l == 1, ErrorKind::DimensionMismatch, "scalar design needs a budget with n = l = 1");
  const double k = kappa(b);
  const double ratio = k / -std::expm1(std::log(k));
  const double q = c_floor;
  const double sigma = q / (1.0 - a * a);
  const double theta = std::max(ratio * c * c * sigma, c_floor);
  return ScalarDesign{q, sigma, theta};
}

Vector aggregate(const AggregationNetwork& net, const std::vector<Vector>& y_list) {
  require(y_list.size() == net.size(), ErrorKind::DimensionMismatch,
          "expected " + std::to_string(net.size()) + " subsystem outputs, got " + std::to_string(y_list.size()));
  Vector total = Vector::Zero(net.output_dim());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Matrix& weight = net.subsystems()[i].weight();
    require(y_list[i].size() == weight.cols(), ErrorKind::DimensionMismatch,
            "output " + std::to_string(i) + " has the wrong dimension");
    total += weight * y_list[i];
  }
  return total;
}

}  // namespace pmlkit
