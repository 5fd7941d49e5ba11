#include "pmlkit/lti.hpp"

#include <cmath>
#include <string>

#include "pmlkit/mechanism.hpp"

namespace pmlkit {

namespace {

// Direct Kronecker solve below this size, doubling iteration above it.
constexpr Eigen::Index kKroneckerMaxDim = 50;

SymMatrix symmetrized(const Matrix& m) { return SymMatrix(0.5 * (m + m.transpose())); }

void require_pd(const SymMatrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m.matrix());
  require(llt.info() == Eigen::Success, ErrorKind::NotPositiveDefinite, std::string(what) + " must be positive definite");
}

SymMatrix lyapunov_kronecker(const Matrix& a, const SymMatrix& q) {
  const Eigen::Index n = a.rows();
  const Eigen::Index nn = n * n;
  // vec(A X A^T) = (A kron A) vec(X) with column-major vec.
  Matrix system = Matrix::Identity(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      system.block(i * n, j * n, n, n) -= a(i, j) * a;
    }
  }
  const Vector rhs = Eigen::Map<const Vector>(q.matrix().data(), nn);
  const Vector x = system.partialPivLu().solve(rhs);
  return symmetrized(Eigen::Map<const Matrix>(x.data(), n, n));
}

SymMatrix lyapunov_doubling(const Matrix& a, const SymMatrix& q) {
  Matrix x = q.matrix();
  Matrix power = a;
  for (int iter = 0; iter < 200; ++iter) {
    const Matrix increment = power * x * power.transpose();
    x += increment;
    power = (power * power).eval();
    if (increment.norm() <= 1e-17 * x.norm()) break;
  }
  return symmetrized(x);
}

}  // namespace

LtiSystem::LtiSystem(Matrix a, Matrix c, SymMatrix q, SymMatrix theta)
    : a_(std::move(a)), c_(std::move(c)), q_(std::move(q)), theta_(std::move(theta)), output_rank_(0) {
  const Eigen::Index n = a_.rows();
  require(n > 0 && a_.cols() == n, ErrorKind::DimensionMismatch, "A must be square");
  require(c_.cols() == n && c_.rows() > 0, ErrorKind::DimensionMismatch, "C must be m x n");
  require(q_.dim() == n, ErrorKind::DimensionMismatch, "Q must be n x n");
  require(theta_.dim() == c_.rows(), ErrorKind::DimensionMismatch, "Theta must be m x m");
  require(a_.allFinite() && c_.allFinite(), ErrorKind::Domain, "A and C must be finite");
  require(is_schur_stable(a_), ErrorKind::NotSchurStable,
          "spectral radius of A is " + std::to_string(spectral_radius(a_)) + ", must be < 1");
  require_pd(q_, "Q");
  require_pd(theta_, "Theta");
  output_rank_ = static_cast<int>(numerical_rank(c_));
  if (output_rank_ < c_.rows()) {
    warnings_.push_back("C has rank " + std::to_string(output_rank_) + " < m = " + std::to_string(c_.rows()) +
                        "; chi-square degrees of freedom use rank(C)");
  }
}

double spectral_radius(const Matrix& a) {
  require(a.rows() == a.cols() && a.rows() > 0, ErrorKind::DimensionMismatch, "spectral radius needs a square matrix");
  Eigen::EigenSolver<Matrix> es(a, false);
  require(es.info() == Eigen::Success, ErrorKind::NonConvergence, "eigenvalue computation failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_schur_stable(const Matrix& a) { return spectral_radius(a) < 1.0 - kSchurMargin; }

SymMatrix solve_lyapunov(const Matrix& a, const SymMatrix& q) {
  require(a.rows() == a.cols() && a.rows() == q.dim(), ErrorKind::DimensionMismatch, "A and Q must be n x n");
  require(is_schur_stable(a), ErrorKind::NotSchurStable, "Lyapunov equation needs a Schur stable A");
  require(certify_psd(q).valid(), ErrorKind::NotPsd, "Q must be PSD");
  return a.rows() <= kKroneckerMaxDim ? lyapunov_kronecker(a, q) : lyapunov_doubling(a, q);
}

KalmanState kalman_step(const SymMatrix& p_prev, const LtiSystem& sys) {
  require(p_prev.dim() == sys.n(), ErrorKind::DimensionMismatch, "previous covariance must be n x n");
  const Matrix& a = sys.a();
  const Matrix& c = sys.c();
  const SymMatrix p_minus = symmetrized(a * p_prev.matrix() * a.transpose() + sys.q().matrix());
  const Matrix innovation = c * p_minus.matrix() * c.transpose() + sys.theta().matrix();
  Eigen::LLT<Matrix> llt(innovation);
  require(llt.info() == Eigen::Success, ErrorKind::NotPositiveDefinite, "innovation covariance is singular");
  const Matrix gain = llt.solve(c * p_minus.matrix()).transpose();
  const SymMatrix p = symmetrized(p_minus.matrix() - gain * innovation * gain.transpose());
  return KalmanState{p_minus, gain, p};
}

double dare_residual(const LtiSystem& sys, const SymMatrix& p_minus) {
  const Matrix& a = sys.a();
  const Matrix& c = sys.c();
  const Matrix& pm = p_minus.matrix();
  const Matrix innovation = c * pm * c.transpose() + sys.theta().matrix();
  const Matrix cross = a * pm * c.transpose();
  const Matrix rhs = a * pm * a.transpose() + sys.q().matrix() - cross * innovation.ldlt().solve(cross.transpose());
  return (pm - rhs).norm();
}

SteadyState steady_state_covariance(const LtiSystem& sys, long max_iterations) {
  const Eigen::Index n = sys.n();
  SymMatrix p(Matrix::Zero(n, n));
  for (long iter = 1; iter <= max_iterations; ++iter) {
    KalmanState next = kalman_step(p, sys);
    const double change = (next.p.matrix() - p.matrix()).norm();
    const double scale = std::max(1.0, p.matrix().norm());
    p = next.p;
    if (change <= 1e-12 * scale) {
      const KalmanState final_state = kalman_step(p, sys);
      Eigen::LLT<Matrix> theta_llt(sys.theta().matrix());
      const Matrix information =
          sym_inverse(final_state.p_minus).matrix() + sys.c().transpose() * theta_llt.solve(sys.c());
      SymMatrix info_form = sym_inverse(symmetrized(information));
      const double residual = dare_residual(sys, final_state.p_minus);
      return SteadyState{final_state.p, final_state.p_minus, final_state.gain, std::move(info_form), iter, residual};
    }
  }
  fail(ErrorKind::NonConvergence,
       "Kalman covariance iteration did not converge in " + std::to_string(max_iterations) + " steps");
}

double pml_error_lower_bound_logdet(const PrivacyBudget& b, const SymMatrix& q, int m) {
  require(m >= 1, ErrorKind::Domain, "output dimension m must be >= 1");
  return 0.5 * chi2_quantile(1.0 - b.delta, m) - b.epsilon + logdet_psd(q);
}

double pml_error_lower_bound_trace(const PrivacyBudget& b, const SymMatrix& q, int m, int n) {
  require(n == q.dim(), ErrorKind::DimensionMismatch, "n must equal the dimension of Q");
  return static_cast<double>(n) + pml_error_lower_bound_logdet(b, q, m);
}

JointGaussian stationary_mechanism_joint(const LtiSystem& sys) {
  const LinearMechanismSpec spec(solve_lyapunov(sys.a(), sys.q()), sys.c());
  return mechanism_joint(spec, sys.theta());
}

double tightest_epsilon(const LtiSystem& sys, double delta) {
  require(delta > 0.0 && delta < 1.0, ErrorKind::Domain, "delta must lie in (0,1)");
  const JointGaussian joint = stationary_mechanism_joint(sys);
  const PmlComponents comps = pml_components(joint);
  return 0.5 * chi2_quantile(1.0 - delta, joint.l()) + comps.min_leakage();
}

}  // namespace pmlkit
