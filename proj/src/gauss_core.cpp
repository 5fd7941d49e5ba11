#include "pmlkit/gauss_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

namespace pmlkit {

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> eigensolve(const SymMatrix& m, bool vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix(), vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorKind::NonConvergence, "symmetric eigensolver did not converge");
  return es;
}

double spectral_norm(const Vector& eigenvalues) { return eigenvalues.cwiseAbs().maxCoeff(); }

}  // namespace

// ---------------------------------------------------------------------------
// SymMatrix

SymMatrix::SymMatrix(const Matrix& m) {
  require(m.rows() > 0, ErrorKind::Domain, "symmetric matrix must have positive dimension");
  require(m.rows() == m.cols(), ErrorKind::DimensionMismatch,
          "symmetric matrix must be square, got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  require(m.allFinite(), ErrorKind::Domain, "symmetric matrix has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  require(asym <= kSymmetryTolerance * scale, ErrorKind::NotSymmetric,
          "asymmetry " + std::to_string(asym) + " exceeds tolerance");
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

SymMatrix SymMatrix::scalar(double value) { return SymMatrix(Matrix::Constant(1, 1, value)); }

SymMatrix SymMatrix::diagonal(const Vector& diag) { return SymMatrix(Matrix(diag.asDiagonal())); }

// ---------------------------------------------------------------------------
// RngStream

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_index) : seed_(seed), stream_index_(stream_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_index), static_cast<std::uint32_t>(stream_index >> 32),
                    0x9e3779b9u};
  engine_.seed(seq);
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() { return uniform_(engine_); }

// ---------------------------------------------------------------------------
// Special functions

double chi2_cdf(double q, int dof) {
  require(dof >= 1, ErrorKind::Domain, "chi2 degrees of freedom must be >= 1");
  require(!std::isnan(q) && q >= 0.0, ErrorKind::Domain, "chi2_cdf argument must be nonnegative");
  if (q == 0.0) return 0.0;
  if (std::isinf(q)) return 1.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * q);
}

double chi2_quantile(double p, int dof) {
  require(p > 0.0 && p < 1.0, ErrorKind::Domain, "chi2_quantile probability must lie in (0,1)");
  require(dof >= 1, ErrorKind::Domain, "chi2 degrees of freedom must be >= 1");
  const double a = 0.5 * dof;
  // Residual in the better-conditioned tail; positive when x is too large.
  const bool upper = p > 0.5;
  auto residual = [&](double x) {
    return upper ? (1.0 - p) - boost::math::gamma_q(a, x) : boost::math::gamma_p(a, x) - p;
  };

  double lo = 0.0;
  double hi = std::max(1.0, a);
  while (residual(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    const double r = residual(x);
    if (r == 0.0) break;
    (r > 0.0 ? hi : lo) = x;
    const double slope = boost::math::gamma_p_derivative(a, x);
    double next = (slope > 0.0 && std::isfinite(slope)) ? x - r / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - x);
    x = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * x || hi - lo <= std::numeric_limits<double>::min()) break;
  }
  return 2.0 * x;
}

double std_normal_cdf(double w) { return 0.5 * std::erfc(-w / std::numbers::sqrt2); }

double log_std_normal_cdf(double w) {
  if (w > -35.0) return std::log(std_normal_cdf(w));
  // Asymptotic expansion of the Mills ratio; remainder below 1e-12 here.
  const double inv2 = 1.0 / (w * w);
  const double series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
  return -0.5 * w * w - std::log(-w) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

// ---------------------------------------------------------------------------
// Dense kernels

double logdet_psd(const SymMatrix& m) {
  Eigen::LLT<Matrix> llt(m.matrix());
  require(llt.info() == Eigen::Success, ErrorKind::NotPositiveDefinite, "Cholesky factorization hit a nonpositive pivot");
  const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
  require((diag.array() > 0.0).all(), ErrorKind::NotPositiveDefinite, "Cholesky factorization hit a nonpositive pivot");
  return 2.0 * diag.array().log().sum();
}

SymMatrix sym_sqrt(const SymMatrix& m) {
  const auto es = eigensolve(m, true);
  const Vector& lambda = es.eigenvalues();
  require(lambda.minCoeff() >= -kPsdTolerance * spectral_norm(lambda), ErrorKind::NotPsd,
          "matrix square root requires a PSD argument, min eigenvalue " + std::to_string(lambda.minCoeff()));
  const Vector root = lambda.cwiseMax(0.0).cwiseSqrt();
  return SymMatrix(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose());
}

SymMatrix sym_inv_sqrt(const SymMatrix& m) {
  const auto es = eigensolve(m, true);
  const Vector& lambda = es.eigenvalues();
  require(lambda.minCoeff() > 0.0, ErrorKind::NotPositiveDefinite, "inverse square root requires a PD argument");
  const Vector root = lambda.cwiseSqrt().cwiseInverse();
  return SymMatrix(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose());
}

SymMatrix sym_inverse(const SymMatrix& m) {
  Eigen::LLT<Matrix> llt(m.matrix());
  require(llt.info() == Eigen::Success, ErrorKind::NotPositiveDefinite, "inverse requires a PD argument");
  return SymMatrix(llt.solve(Matrix::Identity(m.dim(), m.dim())));
}

CompactSvd compact_svd(const Matrix& m, double rank_tol) {
  require(m.size() > 0, ErrorKind::ZeroMatrix, "compact SVD of an empty matrix");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cutoff = rank_tol * sv(0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  require(sv(0) > 0.0 && rank > 0, ErrorKind::ZeroMatrix, "matrix has no singular value above the rank tolerance");
  return CompactSvd{svd.matrixU().leftCols(rank), sv.head(rank), svd.matrixV().leftCols(rank)};
}

Eigen::Index numerical_rank(const Matrix& m, double rank_tol) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  if (!(sv(0) > 0.0)) return 0;
  return (sv.array() > rank_tol * sv(0)).count();
}

double min_eig_sym(const SymMatrix& m) { return eigensolve(m, false).eigenvalues().minCoeff(); }

double max_eig_sym(const SymMatrix& m) { return eigensolve(m, false).eigenvalues().maxCoeff(); }

bool is_psd(const SymMatrix& m, double tol) { return min_eig_sym(m) >= -tol; }

PsdCertificate certify_psd(const SymMatrix& m) {
  const Vector lambda = eigensolve(m, false).eigenvalues();
  const double tol = kPsdTolerance * std::max(1.0, spectral_norm(lambda));
  return PsdCertificate{m, lambda.minCoeff(), tol};
}

SymMatrix psd_part(const SymMatrix& m) {
  const auto es = eigensolve(m, true);
  const Vector clamped = es.eigenvalues().cwiseMax(0.0);
  return SymMatrix(es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose());
}

Matrix gaussian_sample(const Vector& mean, const SymMatrix& cov, RngStream& rng, Eigen::Index count) {
  require(count > 0, ErrorKind::Domain, "sample count must be positive");
  require(mean.size() == cov.dim(), ErrorKind::DimensionMismatch, "mean and covariance dimensions differ");
  const Matrix root = sym_sqrt(cov).matrix();
  const Eigen::Index dim = cov.dim();
  Matrix out(count, dim);
  Vector z(dim);
  for (Eigen::Index row = 0; row < count; ++row) {
    for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.normal();
    out.row(row) = (mean + root * z).transpose();
  }
  return out;
}

}  // namespace pmlkit
