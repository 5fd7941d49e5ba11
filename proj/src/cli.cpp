#include "pmlkit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmlkit/aggregation.hpp"
#include "pmlkit/lti.hpp"
#include "pmlkit/mechanism.hpp"
#include "pmlkit/relations.hpp"
#include "pmlkit/sim.hpp"

namespace pmlkit::cli {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void schema_error(const std::string& what) { fail(ErrorKind::Schema, what); }

// ---- config reading -------------------------------------------------------

const Json& member(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) schema_error("missing '" + key + "' in " + where);
  return obj.at(key);
}

const Json* optional_member(const Json& obj, const std::string& key) {
  if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return nullptr;
  return &obj.at(key);
}

double read_number(const Json& v, const std::string& where) {
  if (!v.is_number()) schema_error(where + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) schema_error(where + " must be finite");
  return x;
}

long read_count(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) schema_error(where + " must be a nonnegative integer");
  return static_cast<long>(v.get<long long>());
}

Matrix read_matrix(const Json& v, const std::string& where) {
  if (v.is_number()) return Matrix::Constant(1, 1, read_number(v, where));
  if (!v.is_array() || v.empty()) schema_error(where + " must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (!v[0].is_array() || v[0].empty()) schema_error(where + " must be a nonempty array of rows");
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      schema_error(where + " is not rectangular");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = read_number(row[static_cast<std::size_t>(c)], where);
    }
  }
  return m;
}

Vector read_vector(const Json& v, const std::string& where) {
  if (v.is_number()) return Vector::Constant(1, read_number(v, where));
  if (!v.is_array() || v.empty()) schema_error(where + " must be a nonempty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = read_number(v[i], where);
  return out;
}

SymMatrix read_sym(const Json& v, const std::string& where) {
  const Matrix m = read_matrix(v, where);
  if (m.rows() != m.cols()) schema_error(where + " must be square");
  return SymMatrix(m);
}

struct BudgetInput {
  double epsilon;
  double delta;
};

BudgetInput read_budget(const Json& v, const std::string& where) {
  const double epsilon = read_number(member(v, "epsilon", where), where + ".epsilon");
  const double delta = read_number(member(v, "delta", where), where + ".delta");
  if (epsilon < 0.0) schema_error(where + ".epsilon must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) schema_error(where + ".delta must lie in (0,1)");
  return BudgetInput{epsilon, delta};
}

JointGaussian read_joint_section(const Json& v) {
  const SymMatrix sxx = read_sym(member(v, "sigma_xx", "joint"), "joint.sigma_xx");
  const SymMatrix syy = read_sym(member(v, "sigma_yy", "joint"), "joint.sigma_yy");
  const Matrix sxy = read_matrix(member(v, "sigma_xy", "joint"), "joint.sigma_xy");
  const Json* mu_x = optional_member(v, "mu_x");
  const Json* mu_y = optional_member(v, "mu_y");
  if (sxy.rows() != sxx.dim() || sxy.cols() != syy.dim()) schema_error("joint.sigma_xy must be n x m");
  return JointGaussian(mu_x ? read_vector(*mu_x, "joint.mu_x") : Vector::Zero(sxx.dim()),
                       mu_y ? read_vector(*mu_y, "joint.mu_y") : Vector::Zero(syy.dim()), sxx, sxy, syy);
}

struct MechanismInput {
  std::optional<LinearMechanismSpec> linear;
  std::optional<GaussianMechanismSpec> general;
};

MechanismInput read_mechanism(const Json& v) {
  const std::string type = v.contains("type") && v.at("type").is_string() ? v.at("type").get<std::string>() : "";
  const SymMatrix sxx = read_sym(member(v, "sigma_xx", "mechanism"), "mechanism.sigma_xx");
  const Json* mu_x_json = optional_member(v, "mu_x");
  const Vector mu_x = mu_x_json ? read_vector(*mu_x_json, "mechanism.mu_x") : Vector::Zero(sxx.dim());
  MechanismInput out;
  if (type == "linear") {
    out.linear.emplace(mu_x, sxx, read_matrix(member(v, "C", "mechanism"), "mechanism.C"));
  } else if (type == "general") {
    const SymMatrix szz = read_sym(member(v, "sigma_zz", "mechanism"), "mechanism.sigma_zz");
    const Json* mu_z_json = optional_member(v, "mu_z");
    out.general.emplace(mu_x, mu_z_json ? read_vector(*mu_z_json, "mechanism.mu_z") : Vector::Zero(szz.dim()), sxx,
                        read_matrix(member(v, "sigma_xz", "mechanism"), "mechanism.sigma_xz"), szz);
  } else {
    schema_error("mechanism.type must be \"linear\" or \"general\"");
  }
  return out;
}

// The joint law comes from a "joint" section, or from "mechanism" plus "theta"
// (which is how a design report is fed back in).
JointGaussian read_joint(const Json& cfg) {
  if (const Json* joint = optional_member(cfg, "joint")) return read_joint_section(*joint);
  if (optional_member(cfg, "mechanism") && optional_member(cfg, "theta")) {
    const MechanismInput mech = read_mechanism(cfg.at("mechanism"));
    const SymMatrix theta = read_sym(cfg.at("theta"), "theta");
    return mech.linear ? mechanism_joint(*mech.linear, theta) : mechanism_joint(*mech.general, theta);
  }
  schema_error("config needs a 'joint' section or 'mechanism' with 'theta'");
}

LtiSystem read_system(const Json& v) {
  const Matrix a = read_matrix(member(v, "A", "system"), "system.A");
  const Matrix c = read_matrix(member(v, "C", "system"), "system.C");
  const SymMatrix q = read_sym(member(v, "Q", "system"), "system.Q");
  const SymMatrix theta = read_sym(member(v, "Theta", "system"), "system.Theta");
  if (a.rows() != a.cols() || c.cols() != a.rows() || q.dim() != a.rows() || theta.dim() != c.rows()) {
    schema_error("system matrices have inconsistent shapes");
  }
  return LtiSystem(a, c, q, theta);
}

struct SimInput {
  std::optional<std::uint64_t> seed;
  long samples = kDefaultSamples;
  Eigen::Index horizon = kDefaultHorizon;
  int workers = 1;
};

SimInput read_sim(const Json& cfg) {
  SimInput sim;
  const Json* v = optional_member(cfg, "sim");
  if (!v) return sim;
  if (!v->is_object()) schema_error("sim must be an object");
  if (const Json* s = optional_member(*v, "seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0)) {
      schema_error("sim.seed must be a nonnegative integer");
    }
    sim.seed = s->get<std::uint64_t>();
  }
  if (const Json* s = optional_member(*v, "samples")) {
    sim.samples = read_count(*s, "sim.samples");
    if (sim.samples < 1000) schema_error("sim.samples must be >= 1000");
  }
  if (const Json* s = optional_member(*v, "horizon")) {
    sim.horizon = read_count(*s, "sim.horizon");
    if (sim.horizon < 1) schema_error("sim.horizon must be >= 1");
  }
  if (const Json* s = optional_member(*v, "workers")) {
    sim.workers = static_cast<int>(read_count(*s, "sim.workers"));
    if (sim.workers < 1) schema_error("sim.workers must be >= 1");
  }
  return sim;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const SimInput& sim) {
  if (flag) return *flag;
  if (sim.seed) return *sim.seed;
  if (const char* env = std::getenv(kSeedEnv)) {
    const std::string text(env);
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (text.empty() || used != text.size() || text[0] == '-') {
      schema_error(std::string(kSeedEnv) + " must be a nonnegative integer");
    }
    return value;
  }
  return kDefaultSeed;
}

Json parse_config(const std::string& path, std::istream& in) {
  std::string text;
  if (path.empty() || path == "-") {
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    std::ifstream file(path);
    if (!file) schema_error("cannot read config file " + path);
    text.assign(std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>());
  }
  Json cfg;
  try {
    cfg = Json::parse(text);
  } catch (const Json::parse_error& e) {
    schema_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object()) schema_error("config must be a JSON object");
  return cfg;
}

// ---- report writing -------------------------------------------------------

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const SymMatrix& m) { return to_json(m.matrix()); }

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json budget_json(const PrivacyBudget& b) {
  return Json{{"epsilon", b.epsilon}, {"delta", b.delta}, {"l", b.l}, {"n", b.n}};
}

Json new_report(const std::string& command, const Json& inputs) {
  Json report;
  report["command"] = command;
  report["inputs"] = inputs;
  report["derived"] = Json::object();
  report["checks"] = Json::object();
  return report;
}

void finish_report(Json& report, std::uint64_t seed, std::ostream& out) {
  report["provenance"] = Json{{"toolkit", "pmlkit"}, {"version", kVersion}, {"seed", seed}};
  out << report.dump(2) << '\n';
}

Json warnings_json(const std::vector<std::string>& warnings) {
  Json out = Json::array();
  for (const auto& w : warnings) out.push_back(w);
  return out;
}

// ---- commands -------------------------------------------------------------

void cmd_pml_eval(const Json& cfg, std::uint64_t seed, std::ostream& out) {
  const BudgetInput bi = read_budget(member(cfg, "budget", "config"), "budget");
  const Json* y_json = optional_member(cfg, "y");
  const JointGaussian j = read_joint(cfg);
  const PrivacyBudget b = PrivacyBudget::make(bi.epsilon, bi.delta, j.l(), static_cast<int>(j.n()));
  const PmlComponents comps = pml_components(j);

  Json report = new_report("pml-eval", cfg);
  Json& d = report["derived"];
  d["n"] = j.n();
  d["m"] = j.m();
  d["l"] = j.l();
  d["gamma"] = to_json(comps.gamma);
  d["psi"] = to_json(comps.psi);
  d["weight"] = to_json(comps.weight);
  d["logdet_sigma_xx"] = comps.logdet_sigma_xx;
  d["logdet_gamma"] = comps.logdet_gamma;
  d["min_leakage"] = comps.min_leakage();
  d["half_quantile"] = half_quantile(b);
  d["tightest_epsilon"] = half_quantile(b) + comps.min_leakage();
  d["kappa"] = necessary_condition(b) ? Json(kappa(b)) : Json(nullptr);
  d["exact_prob"] = exact_privacy_prob(j, b.epsilon);
  if (y_json) {
    const Vector y = read_vector(*y_json, "y");
    d["y"] = to_json(y);
    d["xi"] = xi_statistic(j, y);
    d["leakage"] = pml_leakage(j, y);
  }
  Json& c = report["checks"];
  c["necessary_condition"] = necessary_condition(b);
  c["pml_private"] = check_pml_privacy(j, b);
  c["pass"] = c["pml_private"];
  finish_report(report, seed, out);
}

void cmd_design(const Json& cfg, const std::string& policy_name, std::uint64_t seed, std::ostream& out) {
  ThetaPolicy policy;
  if (policy_name == "scaled-identity") {
    policy.variant = ThetaVariant::ScaledIdentity;
  } else if (policy_name != "boundary") {
    schema_error("--policy must be boundary or scaled-identity");
  }
  const BudgetInput bi = read_budget(member(cfg, "budget", "config"), "budget");
  const MechanismInput mech = read_mechanism(member(cfg, "mechanism", "config"));
  const PrivacyBudget b = mech.linear ? budget_for(*mech.linear, bi.epsilon, bi.delta)
                                      : budget_for(*mech.general, bi.epsilon, bi.delta);
  const double k = kappa(b);

  SymMatrix theta = mech.linear ? design_theta_linear(*mech.linear, b, policy)
                                : design_theta_general(*mech.general, b, policy);
  const bool lmi = mech.linear ? verify_lmi(*mech.linear, theta, b) : verify_lmi(*mech.general, theta, b);
  const JointGaussian j = mech.linear ? mechanism_joint(*mech.linear, theta) : mechanism_joint(*mech.general, theta);
  const bool pml_ok = check_pml_privacy(j, b);

  Json report = new_report("design", cfg);
  Json& d = report["derived"];
  d["policy"] = policy_name;
  d["budget"] = budget_json(b);
  d["kappa"] = k;
  d["noise_ratio"] = k / -std::expm1(std::log(k));
  d["theta"] = to_json(theta);
  d["min_leakage"] = pml_components(j).min_leakage();
  d["exact_prob"] = exact_privacy_prob(j, b.epsilon);
  Json& c = report["checks"];
  c["necessary_condition"] = true;
  c["lmi"] = lmi;
  c["pml_private"] = pml_ok;
  c["pass"] = lmi && pml_ok;
  finish_report(report, seed, out);
}

struct ConvertFlags {
  std::string from;
  std::string to;
  std::optional<double> epsilon, delta, epsilon_dp, delta_dp, zeta, epsilon_mi, sigma_xx;
  std::optional<int> l, n;
  std::string config;
};

template <typename T>
T need(const std::optional<T>& v, const std::string& flag) {
  if (!v) schema_error("conversion needs --" + flag);
  return *v;
}

void cmd_convert(const ConvertFlags& f, std::istream& in, std::uint64_t seed, std::ostream& out) {
  const std::vector<std::string> kinds{"pml", "dp", "mi"};
  auto known = [&](const std::string& k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };
  if (!known(f.from) || !known(f.to)) schema_error("--from and --to must be pml, dp or mi");

  Json inputs = Json::object();
  std::optional<SymMatrix> sigma;
  if (!f.config.empty()) {
    const Json cfg = parse_config(f.config, in);
    inputs["config"] = cfg;
    if (const Json* s = optional_member(cfg, "sigma_xx")) sigma = read_sym(*s, "sigma_xx");
  }
  const int n_default = sigma ? static_cast<int>(sigma->dim()) : 1;
  const int n = f.n.value_or(n_default);
  const int l = f.l.value_or(1);
  if (n < 1 || l < 1) schema_error("--n and --l must be >= 1");
  if (f.sigma_xx) {
    if (*f.sigma_xx <= 0.0) schema_error("--sigma-xx must be positive");
    sigma = SymMatrix(*f.sigma_xx * Matrix::Identity(n, n));
  }
  if (sigma && sigma->dim() != n) schema_error("sigma_xx dimension differs from --n");
  auto need_sigma = [&]() -> const SymMatrix& {
    if (!sigma) schema_error("conversion needs --sigma-xx or a config with sigma_xx");
    return *sigma;
  };
  auto need_delta = [&](const std::optional<double>& v, const std::string& flag) {
    const double x = need(v, flag);
    if (!(x > 0.0 && x < 1.0)) schema_error("--" + flag + " must lie in (0,1)");
    return x;
  };

  Json report = new_report("convert", inputs);
  Json& d = report["derived"];
  Json& c = report["checks"];
  d["from"] = f.from;
  d["to"] = f.to;
  Json steps = Json::array();

  // Every conversion goes through a PML budget.
  double epsilon = 0.0;
  double delta = 0.0;
  if (f.from == "pml") {
    epsilon = need(f.epsilon, "epsilon");
    delta = need_delta(f.delta, "delta");
  } else if (f.from == "mi") {
    const MiBudget mi = MiBudget::make(need(f.epsilon_mi, "epsilon-mi"));
    delta = need_delta(f.delta, "delta");
    epsilon = mi_to_pml(mi, l, n, delta);
    steps.push_back(Json{{"step", "mi->pml"},
                         {"relation", "epsilon = 2 epsilon_mi + 1/2 F^-1_{chi2_l}(1-delta)"},
                         {"epsilon_mi", mi.epsilon_mi},
                         {"half_quantile", 0.5 * chi2_quantile(1.0 - delta, l)},
                         {"epsilon", epsilon}});
  } else {
    const DpBudget dp = DpBudget::make(need(f.epsilon_dp, "epsilon-dp"), need_delta(f.delta_dp, "delta-dp"),
                                       need(f.zeta, "zeta"));
    delta = need_delta(f.delta, "delta");
    const double r = phi_inverse(dp.epsilon_dp, dp.delta_dp);
    epsilon = dp_to_pml(dp, need_sigma(), l, delta);
    steps.push_back(Json{{"step", "dp->pml"},
                         {"relation", "epsilon = 1/2 F^-1_{chi2_l}(1-delta) + log det(I + (phi^-1 / zeta)^2 Sigma_XX)"},
                         {"phi_inverse", r},
                         {"epsilon", epsilon}});
  }
  if (epsilon < 0.0) schema_error("--epsilon must be >= 0");
  const PrivacyBudget b = PrivacyBudget::make(epsilon, delta, l, n);
  d["pml"] = budget_json(b);

  if (f.to == "mi") {
    const double k = kappa(b);
    const double epsilon_mi = pml_to_mi(b);
    steps.push_back(Json{{"step", "pml->mi"},
                         {"relation", "epsilon_mi = -(n/2) log kappa"},
                         {"kappa", k},
                         {"epsilon_mi", epsilon_mi}});
    d["epsilon_mi"] = epsilon_mi;
    c["feasible"] = true;
  } else if (f.to == "dp") {
    const double delta_dp = need_delta(f.delta_dp, "delta-dp");
    const double zeta = need(f.zeta, "zeta");
    const double epsilon_dp = pml_to_dp(b, need_sigma(), zeta, delta_dp);
    const double kappa_n = std::exp(static_cast<double>(b.n) * log_kappa(b));
    const double ratio = zeta / std::sqrt(kappa_n * min_eig_sym(need_sigma()));
    steps.push_back(Json{{"step", "pml->dp"},
                         {"relation", "phi(epsilon_dp, zeta / sqrt(kappa^n lambda_min(Sigma_XX))) <= delta_dp"},
                         {"ratio", ratio},
                         {"phi", phi(epsilon_dp, ratio)},
                         {"delta_dp", delta_dp},
                         {"epsilon_dp", epsilon_dp}});
    d["epsilon_dp"] = epsilon_dp;
    d["delta_dp"] = delta_dp;
    c["feasible"] = true;
  } else {
    d["epsilon"] = b.epsilon;
    c["feasible"] = necessary_condition(b);
  }
  d["steps"] = std::move(steps);
  finish_report(report, seed, out);
}

std::vector<std::string> indexed(const std::string& name, Eigen::Index count) {
  if (count == 1) return {name};
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= count; ++i) out.push_back(name + "_" + std::to_string(i));
  return out;
}

void cmd_kalman(const Json& cfg, const std::string& csv_path, std::optional<std::uint64_t> seed_flag,
                std::ostream& out) {
  const SimInput sim = read_sim(cfg);
  const std::uint64_t seed = resolve_seed(seed_flag, sim);
  const Json* budget_json_in = optional_member(cfg, "budget");
  const std::optional<BudgetInput> bi =
      budget_json_in ? std::optional<BudgetInput>(read_budget(*budget_json_in, "budget")) : std::nullopt;
  const double delta = bi ? bi->delta : kDefaultKalmanDelta;
  const double budget_epsilon = bi ? bi->epsilon : 0.0;
  const LtiSystem sys = read_system(member(cfg, "system", "config"));

  const SteadyState ss = steady_state_covariance(sys);
  const double logdet_p = logdet_psd(ss.p);
  const double trace_p = ss.p.matrix().trace();
  const double eps_star = tightest_epsilon(sys, delta);
  const int m = sys.output_rank();
  const auto n = static_cast<int>(sys.n());
  const PrivacyBudget b = PrivacyBudget::make(eps_star, delta, m, n);
  const double bound_logdet = pml_error_lower_bound_logdet(b, sys.q(), m);
  const double bound_trace = pml_error_lower_bound_trace(b, sys.q(), m, n);

  Json report = new_report("kalman", cfg);
  Json& d = report["derived"];
  d["sigma_xx"] = to_json(solve_lyapunov(sys.a(), sys.q()));
  d["p"] = to_json(ss.p);
  d["p_minus"] = to_json(ss.p_minus);
  d["gain"] = to_json(ss.gain);
  d["iterations"] = ss.iterations;
  d["dare_residual"] = ss.dare_residual;
  d["logdet_p"] = logdet_p;
  d["trace_p"] = trace_p;
  d["delta"] = delta;
  d["tightest_epsilon"] = eps_star;
  d["bound_logdet"] = bound_logdet;
  d["bound_trace"] = bound_trace;
  d["margin_logdet"] = logdet_p - bound_logdet;
  d["margin_trace"] = trace_p - bound_trace;
  if (!sys.warnings().empty()) report["warnings"] = warnings_json(sys.warnings());
  Json& c = report["checks"];
  c["logdet_bound"] = logdet_p - bound_logdet >= -1e-9;
  c["trace_bound"] = trace_p - bound_trace >= -1e-9;
  if (bi) c["pml_private_at_budget"] = eps_star <= budget_epsilon + kPrivacySlack;

  if (!csv_path.empty()) {
    const Trajectory traj = simulate_lti(sys, sim.horizon, seed);
    const Trajectory est =
        run_kalman(sys, traj.outputs, Vector::Zero(sys.n()), solve_lyapunov(sys.a(), sys.q()));
    const Eigen::Index horizon = traj.horizon();
    Matrix data(horizon, 1 + 2 * sys.n() + sys.m() + 1);
    for (Eigen::Index k = 0; k < horizon; ++k) {
      data(k, 0) = static_cast<double>(k);
      data.block(k, 1, 1, sys.n()) = traj.states.row(k);
      data.block(k, 1 + sys.n(), 1, sys.m()) = traj.outputs.row(k);
      data.block(k, 1 + sys.n() + sys.m(), 1, sys.n()) = est.estimates->row(k);
      data(k, data.cols() - 1) = est.covariances[static_cast<std::size_t>(k)].matrix().trace();
    }
    std::vector<std::string> header{"k"};
    for (const auto& group : {indexed("x", sys.n()), indexed("y", sys.m()), indexed("xhat", sys.n())}) {
      header.insert(header.end(), group.begin(), group.end());
    }
    header.push_back(sys.n() == 1 ? "p" : "trace_p");
    write_csv_file(csv_path, header, data);
    report["outputs"] = Json{{"csv", csv_path}, {"horizon", horizon}};
  }
  finish_report(report, seed, out);
}

void cmd_aggregate(const Json& cfg, const std::string& policy_name, const std::string& out_dir,
                   std::optional<std::uint64_t> seed_flag, std::ostream& out) {
  ThetaPolicy policy;
  if (policy_name == "scaled-identity") {
    policy.variant = ThetaVariant::ScaledIdentity;
  } else if (policy_name != "boundary") {
    schema_error("--policy must be boundary or scaled-identity");
  }
  const SimInput sim = read_sim(cfg);
  const std::uint64_t seed = resolve_seed(seed_flag, sim);
  const Json& net_json = member(cfg, "network", "config");
  const Json& subs_json = member(net_json, "subsystems", "network");
  const Json& weights_json = member(net_json, "weights", "network");
  if (!subs_json.is_array() || subs_json.empty()) schema_error("network.subsystems must be a nonempty array");
  if (!weights_json.is_array() || weights_json.size() != subs_json.size()) {
    schema_error("network.weights must hold one matrix per subsystem");
  }

  std::vector<Subsystem> subs;
  Eigen::Index output_dim = 0;
  for (std::size_t i = 0; i < subs_json.size(); ++i) {
    const std::string where = "network.subsystems[" + std::to_string(i) + "]";
    const Json& s = subs_json[i];
    const Matrix a = read_matrix(member(s, "A", where), where + ".A");
    const Matrix c = read_matrix(member(s, "C", where), where + ".C");
    const SymMatrix q = read_sym(member(s, "Q", where), where + ".Q");
    const BudgetInput bi = read_budget(member(s, "budget", where), where + ".budget");
    const Matrix weight = read_matrix(weights_json[i], "network.weights[" + std::to_string(i) + "]");
    if (a.rows() != a.cols() || c.cols() != a.rows() || q.dim() != a.rows() || weight.cols() != c.rows()) {
      schema_error(where + " matrices have inconsistent shapes");
    }
    if (i == 0) output_dim = weight.rows();
    const auto l = static_cast<int>(numerical_rank(c));
    if (l == 0) fail(ErrorKind::ZeroMatrix, where + ".C has rank 0");
    subs.emplace_back(a, c, q, weight, PrivacyBudget::make(bi.epsilon, bi.delta, l, static_cast<int>(a.rows())));
  }
  const AggregationNetwork designed =
      design_network(AggregationNetwork(std::move(subs), output_dim), policy, sim.workers);

  Json report = new_report("aggregate", cfg);
  Json& d = report["derived"];
  Json per = Json::array();
  bool all_private = true;
  for (const Subsystem& sub : designed.subsystems()) {
    const SymMatrix prior = sub.prior();
    const JointGaussian j = mechanism_joint(LinearMechanismSpec(prior, sub.c()), *sub.theta());
    const bool ok = check_pml_privacy(j, sub.budget());
    all_private = all_private && ok;
    per.push_back(Json{{"budget", budget_json(sub.budget())},
                       {"sigma_xx", to_json(prior)},
                       {"kappa", kappa(sub.budget())},
                       {"theta", to_json(*sub.theta())},
                       {"pml_private", ok}});
  }
  d["policy"] = policy_name;
  d["subsystems"] = std::move(per);
  const double accuracy = accuracy_metric(designed);
  d["accuracy_metric"] = accuracy;

  if (optional_member(cfg, "sim") || !out_dir.empty()) {
    const AggregateTrajectory traj = simulate_aggregation(designed, sim.horizon, seed);
    const Matrix error = traj.private_aggregate - traj.true_aggregate;
    Json s{{"horizon", sim.horizon}};
    if (sim.horizon >= 2) s["error_variance_trace"] = sample_covariance(error).matrix().trace();
    d["simulation"] = std::move(s);
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      const Eigen::Index q = designed.output_dim();
      Matrix data(sim.horizon, 1 + 2 * q);
      for (Eigen::Index k = 0; k < sim.horizon; ++k) data(k, 0) = static_cast<double>(k);
      data.middleCols(1, q) = traj.true_aggregate;
      data.middleCols(1 + q, q) = traj.private_aggregate;
      std::vector<std::string> header{"k"};
      for (const auto& group : {indexed("true", q), indexed("private", q)}) {
        header.insert(header.end(), group.begin(), group.end());
      }
      const std::string path = (std::filesystem::path(out_dir) / "aggregate.csv").string();
      write_csv_file(path, header, data);
      report["outputs"] = Json{{"csv", path}};
    }
  }
  Json& c = report["checks"];
  c["all_pml_private"] = all_private;
  c["pass"] = all_private;
  finish_report(report, seed, out);
}

void cmd_verify(const Json& cfg, std::optional<std::uint64_t> seed_flag, std::ostream& out) {
  member(cfg, "sim", "config");
  const SimInput sim = read_sim(cfg);
  const std::uint64_t seed = resolve_seed(seed_flag, sim);
  const BudgetInput bi = read_budget(member(cfg, "budget", "config"), "budget");
  const JointGaussian j = read_joint(cfg);
  const PrivacyBudget b = PrivacyBudget::make(bi.epsilon, bi.delta, j.l(), static_cast<int>(j.n()));

  const McReport mc = empirical_violation_rate(j, b.epsilon, sim.samples, seed, sim.workers);
  const auto count = static_cast<double>(mc.sample_count);
  const double delta_margin = 4.0 * std::sqrt(b.delta * (1.0 - b.delta) / count);
  const double p_exact = 1.0 - mc.exact_prob;
  const double exact_margin = 4.0 * std::sqrt(p_exact * (1.0 - p_exact) / count);

  Json report = new_report("verify", cfg);
  Json& d = report["derived"];
  d["samples"] = mc.sample_count;
  d["violation_rate"] = mc.violation_rate;
  d["exact_violation_prob"] = p_exact;
  d["ks_statistic"] = mc.ks_statistic;
  d["delta_tolerance"] = b.delta + delta_margin;
  d["seed"] = mc.seed;
  Json& c = report["checks"];
  c["pml_private"] = check_pml_privacy(j, b);
  c["violation_within_delta"] = mc.violation_rate <= b.delta + delta_margin;
  c["violation_matches_exact"] = std::abs(mc.violation_rate - p_exact) <= exact_margin;
  c["ks_below_0.01"] = mc.ks_statistic < 0.01;
  c["pass"] = c["violation_within_delta"].get<bool>() && c["ks_below_0.01"].get<bool>();
  finish_report(report, seed, out);
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema:
      return kExitSchema;
    case ErrorKind::NecessaryConditionViolated:
      return kExitInfeasible;
    case ErrorKind::NotSchurStable:
      return kExitUnstable;
    default:
      return kExitNumerical;
  }
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pointwise maximal leakage toolkit for Gaussian mechanisms and LTI systems.\n"
               "Reports are JSON on stdout. Seeds come from --seed, sim.seed in the config,\n"
               "the " + std::string(kSeedEnv) + " environment variable, or default to " +
                   std::to_string(kDefaultSeed) + ", in that order.",
               "pmlkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed_flag;
  app.add_option("--seed", seed_flag, "Random seed for sim-backed commands");

  std::string config;
  std::string policy = "boundary";
  std::string csv_path;
  std::string out_dir;
  ConvertFlags conv;

  auto* pml_eval = app.add_subcommand("pml-eval", "Leakage, exact privacy probability and pass/fail for a joint law");
  pml_eval->add_option("config", config, "Config path, '-' or omitted for stdin");
  auto* design = app.add_subcommand("design", "Design the release noise Theta for a mechanism and budget");
  design->add_option("config", config, "Config path, '-' or omitted for stdin");
  design->add_option("--policy", policy, "boundary or scaled-identity")->check(CLI::IsMember({"boundary", "scaled-identity"}));
  auto* convert = app.add_subcommand("convert", "Convert between PML, DP and MI budgets");
  convert->add_option("config", conv.config, "Optional config holding sigma_xx");
  convert->add_option("--from", conv.from, "pml, dp or mi")->required()->check(CLI::IsMember({"pml", "dp", "mi"}));
  convert->add_option("--to", conv.to, "pml, dp or mi")->required()->check(CLI::IsMember({"pml", "dp", "mi"}));
  convert->add_option("--epsilon", conv.epsilon, "PML epsilon");
  convert->add_option("--delta", conv.delta, "PML delta");
  convert->add_option("--l", conv.l, "rank l (default 1)");
  convert->add_option("--n", conv.n, "private dimension n (default dim sigma_xx or 1)");
  convert->add_option("--epsilon-dp", conv.epsilon_dp, "DP epsilon");
  convert->add_option("--delta-dp", conv.delta_dp, "DP delta");
  convert->add_option("--zeta", conv.zeta, "DP adjacency radius");
  convert->add_option("--epsilon-mi", conv.epsilon_mi, "MI budget");
  convert->add_option("--sigma-xx", conv.sigma_xx, "Prior covariance sigma * I_n");
  auto* kalman = app.add_subcommand("kalman", "Steady-state Kalman covariance and PML error bounds");
  kalman->add_option("config", config, "Config path, '-' or omitted for stdin");
  kalman->add_option("--csv", csv_path, "Write a simulated trajectory (k,x,y,xhat,p) to this file");
  auto* aggregate_cmd = app.add_subcommand("aggregate", "Design subsystem noise for a fusion network");
  aggregate_cmd->add_option("config", config, "Config path, '-' or omitted for stdin");
  aggregate_cmd->add_option("--policy", policy, "boundary or scaled-identity")
      ->check(CLI::IsMember({"boundary", "scaled-identity"}));
  aggregate_cmd->add_option("--out", out_dir, "Directory for aggregate.csv");
  auto* verify = app.add_subcommand("verify", "Monte Carlo check of the privacy law");
  verify->add_option("config", config, "Config path, '-' or omitted for stdin");

  std::vector<std::string> argv_store{"pmlkit"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitSchema;
  }

  try {
    if (pml_eval->parsed()) {
      const Json cfg = parse_config(config, in);
      cmd_pml_eval(cfg, resolve_seed(seed_flag, read_sim(cfg)), out);
    } else if (design->parsed()) {
      const Json cfg = parse_config(config, in);
      cmd_design(cfg, policy, resolve_seed(seed_flag, read_sim(cfg)), out);
    } else if (convert->parsed()) {
      cmd_convert(conv, in, resolve_seed(seed_flag, SimInput{}), out);
    } else if (kalman->parsed()) {
      cmd_kalman(parse_config(config, in), csv_path, seed_flag, out);
    } else if (aggregate_cmd->parsed()) {
      cmd_aggregate(parse_config(config, in), policy, out_dir, seed_flag, out);
    } else if (verify->parsed()) {
      cmd_verify(parse_config(config, in), seed_flag, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const Json::exception& e) {
    err << "error (schema): " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace pmlkit::cli
