#pragma once

// Dense symmetric kernels, special functions and seeded Gaussian sampling
// shared by every other module.

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "pmlkit/errors.hpp"

namespace pmlkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative asymmetry accepted (and then averaged away) on ingestion.
inline constexpr double kSymmetryTolerance = 1e-12;
/// Singular values at or below this fraction of sigma_max count as zero.
inline constexpr double kRankTolerance = 1e-10;
/// PSD acceptance: min eigenvalue >= -kPsdTolerance * max(1, ||M||).
inline constexpr double kPsdTolerance = 1e-9;

/// Symmetric matrix with a validated, exactly symmetric payload.
class SymMatrix {
 public:
  /// Throws NotSymmetric if max |M - M^T| exceeds 1e-12 relative to
  /// max(1, max |M_ij|); otherwise stores (M + M^T) / 2.
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix scalar(double value);
  static SymMatrix diagonal(const Vector& diag);

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

struct PsdCertificate {
  SymMatrix matrix;
  double min_eigenvalue;
  double tolerance;

  bool valid() const { return min_eigenvalue >= -tolerance; }
};

/// Compact SVD M = U diag(d) V^T keeping only the retained rank.
struct CompactSvd {
  Matrix u;  // m x l, orthonormal columns
  Vector d;  // l, positive and nonincreasing
  Matrix v;  // n x l, orthonormal columns

  Eigen::Index rank() const { return d.size(); }
  Matrix reconstruct() const { return u * d.asDiagonal() * v.transpose(); }
};

/// Deterministic normal-variate stream keyed by (seed, stream_index).
///
/// Independent streams with the same seed are used to partition Monte Carlo
/// work so results do not depend on how many workers process the streams.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_index);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  double normal();
  double uniform();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Special functions.
double chi2_cdf(double q, int dof);
double chi2_quantile(double p, int dof);
double std_normal_cdf(double w);
/// log Phi(w), finite for all finite w.
double log_std_normal_cdf(double w);

// Dense symmetric kernels.
double logdet_psd(const SymMatrix& m);
SymMatrix sym_sqrt(const SymMatrix& m);
/// M^{-1/2} for M positive definite.
SymMatrix sym_inv_sqrt(const SymMatrix& m);
/// M^{-1} for M positive definite, via Cholesky.
SymMatrix sym_inverse(const SymMatrix& m);
CompactSvd compact_svd(const Matrix& m, double rank_tol = kRankTolerance);
/// Numerical rank under the same singular-value threshold as compact_svd;
/// zero for an all-zero matrix.
Eigen::Index numerical_rank(const Matrix& m, double rank_tol = kRankTolerance);
double min_eig_sym(const SymMatrix& m);
double max_eig_sym(const SymMatrix& m);
bool is_psd(const SymMatrix& m, double tol);
/// Certificate using the default tolerance kPsdTolerance * max(1, ||M||_2).
PsdCertificate certify_psd(const SymMatrix& m);
/// Projection onto the PSD cone (negative eigenvalues clamped to zero).
SymMatrix psd_part(const SymMatrix& m);

/// Rows are samples: count x dim.
Matrix gaussian_sample(const Vector& mean, const SymMatrix& cov, RngStream& rng, Eigen::Index count);

}  // namespace pmlkit
