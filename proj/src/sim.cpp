#include "pmlkit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

namespace pmlkit {

namespace {

Vector standard_normal(RngStream& rng, Eigen::Index dim) {
  Vector z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.normal();
  return z;
}

Trajectory simulate_from_streams(const Matrix& a, const Matrix& c, const SymMatrix& q, const SymMatrix& theta,
                                 const Vector& x0, Eigen::Index horizon, std::uint64_t seed,
                                 std::uint64_t stream_base) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = c.rows();
  require(horizon >= 1, ErrorKind::Domain, "horizon must be >= 1");
  require(a.cols() == n && c.cols() == n && q.dim() == n && theta.dim() == m && x0.size() == n,
          ErrorKind::DimensionMismatch, "simulation inputs have inconsistent dimensions");
  const Matrix q_root = sym_sqrt(q).matrix();
  const Matrix theta_root = sym_sqrt(theta).matrix();
  RngStream process(seed, stream_base);
  RngStream measurement(seed, stream_base + 1);

  Trajectory traj{Matrix(horizon, n), Matrix(horizon, m), std::nullopt, {}};
  Vector x = x0;
  for (Eigen::Index k = 0; k < horizon; ++k) {
    traj.states.row(k) = x.transpose();
    traj.outputs.row(k) = (c * x + theta_root * standard_normal(measurement, m)).transpose();
    x = a * x + q_root * standard_normal(process, n);
  }
  return traj;
}

Vector stationary_initial_state(const SymMatrix& sigma, std::uint64_t seed, std::uint64_t stream) {
  RngStream rng(seed, stream);
  return sym_sqrt(sigma).matrix() * standard_normal(rng, sigma.dim());
}

}  // namespace

std::vector<double> sample_xi(const JointGaussian& j, long n_samples, std::uint64_t seed, int workers) {
  require(n_samples >= 1, ErrorKind::Domain, "n_samples must be positive");
  require(workers >= 1, ErrorKind::Domain, "workers must be >= 1");
  const LeakageModel model(j);
  std::vector<double> xi(static_cast<std::size_t>(n_samples));
  const long chunk = kSamplesPerStream;
  const long chunks = (n_samples + chunk - 1) / chunk;

  auto work = [&](long first) {
    for (long c = first; c < chunks; c += workers) {
      const long begin = c * chunk;
      const long count = std::min(chunk, n_samples - begin);
      RngStream rng(seed, static_cast<std::uint64_t>(c));
      const Matrix ys = gaussian_sample(j.mu_y(), j.sigma_yy(), rng, count);
      for (long i = 0; i < count; ++i) {
        xi[static_cast<std::size_t>(begin + i)] = model.xi(ys.row(i).transpose());
      }
    }
  };
  const long pool_size = std::min<long>(workers, chunks);
  if (pool_size <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (long w = 0; w < pool_size; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  return xi;
}

McReport empirical_violation_rate(const JointGaussian& j, double epsilon, long n_samples, std::uint64_t seed,
                                  int workers) {
  require(n_samples >= 1000, ErrorKind::Domain, "n_samples must be >= 1000");
  require(!std::isnan(epsilon), ErrorKind::Domain, "epsilon must not be NaN");
  const std::vector<double> xi = sample_xi(j, n_samples, seed, workers);
  const double floor = pml_components(j).min_leakage();
  long violations = 0;
  for (double v : xi) {
    if (floor + 0.5 * v > epsilon) ++violations;
  }
  return McReport{n_samples, static_cast<double>(violations) / static_cast<double>(n_samples),
                  ks_statistic_chi2(xi, j.l()), exact_privacy_prob(j, epsilon), seed};
}

double ks_statistic_chi2(std::vector<double> xi_samples, int l) {
  require(!xi_samples.empty(), ErrorKind::Domain, "KS statistic needs at least one sample");
  require(l >= 1, ErrorKind::Domain, "degrees of freedom must be >= 1");
  for (double v : xi_samples) require(v >= 0.0, ErrorKind::Domain, "xi samples must be nonnegative");
  std::sort(xi_samples.begin(), xi_samples.end());
  const auto total = static_cast<double>(xi_samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xi_samples.size(); ++i) {
    const double f = chi2_cdf(xi_samples[i], l);
    d = std::max({d, f - static_cast<double>(i) / total, static_cast<double>(i + 1) / total - f});
  }
  return d;
}

Trajectory simulate_linear(const Matrix& a, const Matrix& c, const SymMatrix& q, const SymMatrix& theta,
                           const Vector& x0, Eigen::Index horizon, std::uint64_t seed) {
  return simulate_from_streams(a, c, q, theta, x0, horizon, seed, 0);
}

Trajectory simulate_lti(const LtiSystem& sys, const Vector& x0, Eigen::Index horizon, std::uint64_t seed) {
  return simulate_from_streams(sys.a(), sys.c(), sys.q(), sys.theta(), x0, horizon, seed, 0);
}

Trajectory simulate_lti(const LtiSystem& sys, Eigen::Index horizon, std::uint64_t seed) {
  const Vector x0 = stationary_initial_state(solve_lyapunov(sys.a(), sys.q()), seed, 2);
  return simulate_lti(sys, x0, horizon, seed);
}

Trajectory run_kalman(const LtiSystem& sys, const Matrix& outputs, const Vector& x0_hat, const SymMatrix& p0) {
  require(outputs.cols() == sys.m(), ErrorKind::DimensionMismatch, "outputs must have m columns");
  require(x0_hat.size() == sys.n() && p0.dim() == sys.n(), ErrorKind::DimensionMismatch,
          "initial estimate must be n-dimensional");
  const Eigen::Index horizon = outputs.rows();
  Trajectory traj{Matrix(0, sys.n()), outputs, Matrix(horizon, sys.n()), {}};
  traj.covariances.reserve(static_cast<std::size_t>(horizon));
  Vector estimate = x0_hat;
  SymMatrix p = p0;
  for (Eigen::Index k = 0; k < horizon; ++k) {
    KalmanState step = kalman_step(p, sys);
    const Vector predicted = sys.a() * estimate;
    estimate = predicted + step.gain * (outputs.row(k).transpose() - sys.c() * predicted);
    traj.estimates->row(k) = estimate.transpose();
    p = std::move(step.p);
    traj.covariances.push_back(p);
  }
  return traj;
}

double mean_squared_error(const Matrix& states, const Matrix& estimates, Eigen::Index burn_in) {
  require(states.rows() == estimates.rows() && states.cols() == estimates.cols(), ErrorKind::DimensionMismatch,
          "states and estimates must have the same shape");
  require(burn_in >= 0 && burn_in < states.rows(), ErrorKind::Domain, "burn-in leaves no samples");
  const Eigen::Index count = states.rows() - burn_in;
  return (states.bottomRows(count) - estimates.bottomRows(count)).squaredNorm() / static_cast<double>(count);
}

AggregateTrajectory simulate_aggregation(const AggregationNetwork& net, Eigen::Index horizon, std::uint64_t seed) {
  require(horizon >= 1, ErrorKind::Domain, "horizon must be >= 1");
  AggregateTrajectory out{Matrix::Zero(horizon, net.output_dim()), Matrix::Zero(horizon, net.output_dim())};
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Subsystem& sub = net.subsystems()[i];
    require(sub.theta().has_value(), ErrorKind::Domain, "subsystem " + std::to_string(i) + " has no Theta");
    const std::uint64_t base = 3 * static_cast<std::uint64_t>(i);
    const Vector x0 = stationary_initial_state(sub.prior(), seed, base + 2);
    const Trajectory traj = simulate_from_streams(sub.a(), sub.c(), sub.q(), *sub.theta(), x0, horizon, seed, base);
    out.true_aggregate += traj.states * (sub.weight() * sub.c()).transpose();
    out.private_aggregate += traj.outputs * sub.weight().transpose();
  }
  return out;
}

SymMatrix sample_covariance(const Matrix& rows, Eigen::Index burn_in) {
  require(burn_in >= 0 && rows.rows() - burn_in >= 2, ErrorKind::Domain, "sample covariance needs two rows");
  const Matrix kept = rows.bottomRows(rows.rows() - burn_in);
  const Matrix centered = kept.rowwise() - kept.colwise().mean();
  return SymMatrix((centered.transpose() * centered) / static_cast<double>(kept.rows() - 1));
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data) {
  require(static_cast<Eigen::Index>(header.size()) == data.cols(), ErrorKind::DimensionMismatch,
          "CSV header size differs from column count");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index col = 0; col < data.cols(); ++col) out << (col ? "," : "") << format_double(data(r, col));
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const std::vector<std::string>& header, const Matrix& data) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Domain, "cannot open " + path + " for writing");
  write_csv(out, header, data);
}

}  // namespace pmlkit
