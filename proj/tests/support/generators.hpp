#pragma once

// Seeded random instances for property tests.

#include <cmath>
#include <random>

#include "pmlkit/lti.hpp"
#include "pmlkit/mechanism.hpp"

namespace gen {

using pmlkit::Matrix;
using pmlkit::SymMatrix;
using pmlkit::Vector;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

  Matrix gaussian(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Vector gaussian(Eigen::Index size) { return gaussian(size, 1).col(0); }

  /// Q diag(lambda) Q^T with eigenvalues log-uniform in [lo, hi].
  SymMatrix spd(Eigen::Index n, double lo = 0.2, double hi = 5.0) {
    const Eigen::HouseholderQR<Matrix> qr(gaussian(n, n));
    const Matrix q = qr.householderQ();
    Vector lambda(n);
    for (Eigen::Index i = 0; i < n; ++i) lambda(i) = std::exp(uniform(std::log(lo), std::log(hi)));
    return SymMatrix(q * lambda.asDiagonal() * q.transpose());
  }

  /// rows x cols matrix of exact rank `rank`.
  Matrix of_rank(Eigen::Index rows, Eigen::Index cols, Eigen::Index rank) {
    return gaussian(rows, rank) * gaussian(rank, cols);
  }

  /// Y = B X + V with rank(B) = l, so rank(Sigma_XY) = l.
  pmlkit::JointGaussian joint(Eigen::Index n, Eigen::Index m, Eigen::Index l) {
    const SymMatrix sxx = spd(n);
    const Matrix b = of_rank(m, n, l);
    const SymMatrix noise = spd(m);
    const Matrix sxy = sxx.matrix() * b.transpose();
    return pmlkit::JointGaussian(gaussian(n), gaussian(m), sxx, sxy,
                                 SymMatrix(b * sxy + noise.matrix()));
  }

  pmlkit::JointGaussian joint(int max_dim = 6) {
    const int n = integer(1, max_dim);
    const int m = integer(1, max_dim);
    const int l = integer(1, std::min(n, m));
    return joint(n, m, l);
  }

  /// Random matrix rescaled to spectral radius rho.
  Matrix stable(Eigen::Index n, double rho) {
    const Matrix a = gaussian(n, n);
    return a * (rho / pmlkit::spectral_radius(a));
  }

  pmlkit::LtiSystem system(Eigen::Index n, Eigen::Index m) {
    return pmlkit::LtiSystem(stable(n, uniform(0.1, 0.95)), gaussian(m, n), spd(n), spd(m));
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gen
