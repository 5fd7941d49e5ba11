#pragma once

// Monte Carlo checks of the PML privacy law and trajectory generation for
// LTI systems, Kalman filtering and aggregation networks.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pmlkit/aggregation.hpp"
#include "pmlkit/lti.hpp"

namespace pmlkit {

/// Steps discarded before stationary statistics are taken.
inline constexpr Eigen::Index kBurnIn = 1000;
/// Default trajectory length for exported CSVs.
inline constexpr Eigen::Index kDefaultHorizon = 200;
/// Monte Carlo samples per RNG stream.
inline constexpr Eigen::Index kSamplesPerStream = 4096;

struct Trajectory {
  Matrix states;   // T x n, row k is X_k
  Matrix outputs;  // T x m, row k is Y_k
  std::optional<Matrix> estimates;
  std::vector<SymMatrix> covariances;

  Eigen::Index horizon() const { return states.rows(); }
};

struct McReport {
  long sample_count;
  double violation_rate;
  double ks_statistic;
  /// P[leakage <= epsilon] from the closed form.
  double exact_prob;
  std::uint64_t seed;
};

/// xi statistics of n_samples draws of Y from its marginal. Sample i comes
/// from stream i / kSamplesPerStream, so the result does not depend on workers.
std::vector<double> sample_xi(const JointGaussian& j, long n_samples, std::uint64_t seed, int workers = 1);

/// Estimates P[leakage(Y) > epsilon] and the KS distance of xi against chi2_l.
McReport empirical_violation_rate(const JointGaussian& j, double epsilon, long n_samples, std::uint64_t seed,
                                  int workers = 1);

/// One-sample Kolmogorov-Smirnov distance against chi2_cdf(., l).
double ks_statistic_chi2(std::vector<double> xi_samples, int l);

/// X_{k+1} = A X_k + W_k, Y_k = C X_k + V_k for k < T. Q and Theta only need
/// to be PSD. W and V come from streams 0 and 1 of the seed.
Trajectory simulate_linear(const Matrix& a, const Matrix& c, const SymMatrix& q, const SymMatrix& theta,
                           const Vector& x0, Eigen::Index horizon, std::uint64_t seed);

Trajectory simulate_lti(const LtiSystem& sys, const Vector& x0, Eigen::Index horizon, std::uint64_t seed);
/// X_0 drawn from the stationary law N(0, Sigma_XX) on stream 2.
Trajectory simulate_lti(const LtiSystem& sys, Eigen::Index horizon, std::uint64_t seed);

/// Kalman filter over recorded outputs. (x0_hat, p0) is the estimate before
/// Y_0 arrives, so row k of the estimates uses Y_0..Y_k; p0 = Sigma_XX with
/// x0_hat = 0 reproduces the stationary prior exactly.
Trajectory run_kalman(const LtiSystem& sys, const Matrix& outputs, const Vector& x0_hat, const SymMatrix& p0);

/// Mean of |X_k - Xhat_k|^2 over rows k >= burn_in.
double mean_squared_error(const Matrix& states, const Matrix& estimates, Eigen::Index burn_in = kBurnIn);

struct AggregateTrajectory {
  Matrix true_aggregate;     // T x q, row k is sum_i L_i C_i X_{i,k}
  Matrix private_aggregate;  // T x q, row k is sum_i L_i Y_{i,k}
};

/// Every subsystem needs Theta set; subsystem i draws from streams 3i..3i+2.
AggregateTrajectory simulate_aggregation(const AggregationNetwork& net, Eigen::Index horizon, std::uint64_t seed);

/// Unbiased sample covariance of the rows k >= burn_in.
SymMatrix sample_covariance(const Matrix& rows, Eigen::Index burn_in = 0);

/// One header row, then one line per row of `data` with 17 significant digits.
void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data);
void write_csv_file(const std::string& path, const std::vector<std::string>& header, const Matrix& data);

/// printf %.17g, enough to round-trip any double.
std::string format_double(double value);

}  // namespace pmlkit
