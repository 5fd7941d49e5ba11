#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "pmlkit/cli.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
  Json report() const { return Json::parse(out); }
};

Result run(const std::vector<std::string>& args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out;
  std::ostringstream err;
  const int code = pmlkit::cli::run(args, in, out, err);
  return Result{code, out.str(), err.str()};
}

Result run_json(const std::vector<std::string>& args, const Json& cfg) { return run(args, cfg.dump()); }

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("pmlkit_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// X ~ N(0,1), Y = X + V with V ~ N(0,1).
const Json kScalarJoint = Json::parse(R"({"joint": {"sigma_xx": 1, "sigma_xy": 1, "sigma_yy": 2}})");

Json scalar_network(double q) {
  Json subs = Json::array();
  Json weights = Json::array();
  for (double eps : {6.0, 7.0, 8.0}) {
    subs.push_back(Json{{"A", 0.75}, {"C", 1}, {"Q", q}, {"budget", {{"epsilon", eps}, {"delta", 0.001}}}});
    weights.push_back(1.0 / 3.0);
  }
  return Json{{"network", {{"subsystems", subs}, {"weights", weights}}}};
}

}  // namespace

TEST_CASE("pml-eval on the scalar joint law") {
  Json cfg = kScalarJoint;
  cfg["budget"] = {{"epsilon", std::log(2.0) + 0.5 * 3.841458820694124}, {"delta", 0.05}};
  cfg["y"] = 2.0;
  const Result r = run_json({"pml-eval"}, cfg);
  REQUIRE(r.code == 0);
  const Json rep = r.report();
  CHECK(rep["command"] == "pml-eval");
  CHECK(rep["inputs"] == cfg);
  CHECK(rep["derived"]["xi"].get<double>() == doctest::Approx(2.0));
  CHECK(rep["derived"]["leakage"].get<double>() == doctest::Approx(std::log(2.0) + 1.0));
  CHECK(rep["derived"]["exact_prob"].get<double>() == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(rep["derived"]["min_leakage"].get<double>() == doctest::Approx(std::log(2.0)));
  CHECK(rep["checks"]["pml_private"] == true);
  CHECK(rep["checks"]["pass"] == true);
  CHECK(rep["provenance"]["toolkit"] == "pmlkit");
  CHECK(rep["provenance"]["version"] == pmlkit::cli::kVersion);

  cfg["budget"]["epsilon"] = 1.5;
  const Json fail_rep = run_json({"pml-eval"}, cfg).report();
  CHECK(fail_rep["checks"]["pass"] == false);
  CHECK(fail_rep["derived"]["kappa"].is_null());
}

TEST_CASE("design then evaluate round trip") {
  const Json cfg = Json::parse(R"({"mechanism": {"type": "linear", "sigma_xx": [[2, 0.5], [0.5, 1]],
      "C": [[1, 0], [1, 1]]}, "budget": {"epsilon": 9, "delta": 0.01}})");
  for (const std::string policy : {"boundary", "scaled-identity"}) {
    const Result d = run_json({"design", "--policy", policy}, cfg);
    REQUIRE(d.code == 0);
    const Json rep = d.report();
    CHECK(rep["checks"]["lmi"] == true);
    CHECK(rep["checks"]["pml_private"] == true);
    CHECK(rep["derived"]["policy"] == policy);
    Json eval{{"mechanism", rep["inputs"]["mechanism"]}, {"theta", rep["derived"]["theta"]},
              {"budget", rep["inputs"]["budget"]}};
    const Result e = run_json({"pml-eval"}, eval);
    REQUIRE(e.code == 0);
    CHECK(e.report()["checks"]["pass"] == true);
  }
}

TEST_CASE("design reports the scalar boundary") {
  const Json cfg = Json::parse(R"({"mechanism": {"type": "linear", "sigma_xx": 6.4, "C": 1},
      "budget": {"epsilon": 6, "delta": 0.001}})");
  const Json rep = run_json({"design"}, cfg).report();
  CHECK(rep["derived"]["theta"][0][0].get<double>() == doctest::Approx(8.028333331829634).epsilon(1e-10));
  CHECK(rep["derived"]["kappa"].get<double>() == doctest::Approx(0.5564283238535059).epsilon(1e-12));
}

TEST_CASE("design on a general mechanism") {
  const Json cfg = Json::parse(R"({"mechanism": {"type": "general", "sigma_xx": [[1, 0.2], [0.2, 1]],
      "sigma_xz": [[0.5], [0.3]], "sigma_zz": 1}, "budget": {"epsilon": 6, "delta": 0.01}})");
  const Result r = run_json({"design"}, cfg);
  REQUIRE(r.code == 0);
  CHECK(r.report()["checks"]["pass"] == true);
}

TEST_CASE("convert between budgets") {
  const Result mi = run({"convert", "--from", "pml", "--to", "mi", "--epsilon", "6", "--delta", "0.001"});
  REQUIRE(mi.code == 0);
  CHECK(mi.report()["derived"]["epsilon_mi"].get<double>() == doctest::Approx(0.29310845733431723).epsilon(1e-12));
  CHECK(mi.report()["derived"]["steps"].size() == 1);

  const Result back = run({"convert", "--from", "mi", "--to", "pml", "--epsilon-mi", "0.29310845733431723",
                           "--delta", "0.001"});
  REQUIRE(back.code == 0);
  CHECK(back.report()["derived"]["epsilon"].get<double>() == doctest::Approx(6.0).epsilon(1e-12));

  const Result dp = run({"convert", "--from", "dp", "--to", "pml", "--epsilon-dp", "0", "--delta-dp",
                         "0.38292492254802624", "--zeta", "1", "--sigma-xx", "1", "--delta", "0.05"});
  REQUIRE(dp.code == 0);
  CHECK(dp.report()["derived"]["epsilon"].get<double>() == doctest::Approx(2.6138765909070073).epsilon(1e-9));

  const Result to_dp = run({"convert", "--from", "pml", "--to", "dp", "--epsilon", "6", "--delta", "0.001",
                            "--delta-dp", "0.01", "--zeta", "1", "--sigma-xx", "1"});
  REQUIRE(to_dp.code == 0);
  const Json step = to_dp.report()["derived"]["steps"][0];
  CHECK(step["phi"].get<double>() <= 0.01 + 1e-12);

  const Result with_cfg = run({"convert", "-", "--from", "dp", "--to", "pml", "--epsilon-dp", "0", "--delta-dp",
                               "0.38292492254802624", "--zeta", "1", "--delta", "0.05"},
                              R"({"sigma_xx": 1})");
  REQUIRE(with_cfg.code == 0);
  CHECK(with_cfg.report()["derived"]["epsilon"].get<double>() == doctest::Approx(2.6138765909070073).epsilon(1e-9));
}

TEST_CASE("convert errors") {
  CHECK(run({"convert", "--from", "pml", "--to", "mi", "--epsilon", "1", "--delta", "0.001"}).code ==
        pmlkit::cli::kExitInfeasible);
  CHECK(run({"convert", "--from", "pml", "--to", "mi", "--epsilon", "6"}).code == pmlkit::cli::kExitSchema);
  CHECK(run({"convert", "--from", "pml", "--to", "xx"}).code == pmlkit::cli::kExitSchema);
  CHECK(run({"convert", "--from", "dp", "--to", "pml", "--epsilon-dp", "0", "--delta-dp", "0.3", "--zeta", "1",
             "--delta", "0.05"})
            .code == pmlkit::cli::kExitSchema);
}

TEST_CASE("kalman report and bounds") {
  const Json cfg = Json::parse(R"({"system": {"A": 0.75, "C": 1, "Q": 0.4, "Theta": 1}})");
  const Result r = run_json({"kalman"}, cfg);
  REQUIRE(r.code == 0);
  const Json rep = r.report();
  CHECK(rep["derived"]["p_minus"][0][0].get<double>() == doctest::Approx(0.613983405550868653583).epsilon(1e-12));
  CHECK(rep["derived"]["p"][0][0].get<double>() == doctest::Approx(0.380414943201544247612).epsilon(1e-12));
  CHECK(rep["derived"]["delta"].get<double>() == pmlkit::cli::kDefaultKalmanDelta);
  CHECK(rep["checks"]["logdet_bound"] == true);
  CHECK(rep["checks"]["trace_bound"] == true);
  CHECK_FALSE(rep.contains("warnings"));

  Json with_budget = cfg;
  with_budget["budget"] = {{"epsilon", 10}, {"delta", 0.001}};
  CHECK(run_json({"kalman"}, with_budget).report()["checks"]["pml_private_at_budget"] == true);
  with_budget["budget"]["epsilon"] = 6;
  CHECK(run_json({"kalman"}, with_budget).report()["checks"]["pml_private_at_budget"] == false);
}

TEST_CASE("kalman CSV export") {
  const fs::path dir = scratch_dir();
  const Json cfg = Json::parse(R"({"system": {"A": 0.75, "C": 1, "Q": 0.4, "Theta": 1}, "sim": {"horizon": 30}})");
  const std::string csv = (dir / "traj.csv").string();
  const Result r = run_json({"kalman", "--csv", csv, "--seed", "5"}, cfg);
  REQUIRE(r.code == 0);
  const std::string text = slurp(csv);
  CHECK(text.rfind("k,x,y,xhat,p\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 31);
  CHECK(r.report()["provenance"]["seed"] == 5);
  CHECK(r.report()["outputs"]["horizon"] == 30);

  const Json multi = Json::parse(R"({"system": {"A": [[0.5, 0.1], [0, 0.3]], "C": [[1, 0]], "Q": [[1, 0], [0, 1]],
      "Theta": 1}, "sim": {"horizon": 5}})");
  REQUIRE(run_json({"kalman", "--csv", csv}, multi).code == 0);
  CHECK(slurp(csv).rfind("k,x_1,x_2,y,xhat_1,xhat_2,trace_p\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("kalman warns on rank-deficient C") {
  const Json cfg = Json::parse(R"({"system": {"A": [[0.5, 0], [0, 0.5]], "C": [[1, 1], [2, 2]],
      "Q": [[1, 0], [0, 1]], "Theta": [[1, 0], [0, 1]]}})");
  const Result r = run_json({"kalman"}, cfg);
  REQUIRE(r.code == 0);
  CHECK(r.report()["warnings"].size() == 1);
}

TEST_CASE("aggregate on the scalar network") {
  const Result r = run_json({"aggregate"}, scalar_network(0.4));
  REQUIRE(r.code == 0);
  const Json rep = r.report();
  const double expected[] = {1.1469047616899477, 0.23532328459787621, 0.0744566342950625};
  for (int i = 0; i < 3; ++i) {
    const Json& s = rep["derived"]["subsystems"][static_cast<std::size_t>(i)];
    CHECK(s["theta"][0][0].get<double>() == doctest::Approx(expected[i]).epsilon(1e-9));
    CHECK(s["pml_private"] == true);
  }
  CHECK(rep["derived"]["accuracy_metric"].get<double>() ==
        doctest::Approx((expected[0] + expected[1] + expected[2]) / 9.0).epsilon(1e-9));
  CHECK_FALSE(rep["derived"].contains("simulation"));
  CHECK(rep["checks"]["pass"] == true);
}

TEST_CASE("aggregate with one subsystem and unit weight") {
  const Json cfg = Json::parse(R"({"network": {"subsystems": [{"A": 0.5, "C": 1, "Q": 1,
      "budget": {"epsilon": 7, "delta": 0.001}}], "weights": [1]}})");
  const Json rep = run_json({"aggregate"}, cfg).report();
  CHECK(rep["derived"]["accuracy_metric"].get<double>() ==
        rep["derived"]["subsystems"][0]["theta"][0][0].get<double>());
}

TEST_CASE("aggregate simulation and CSV") {
  const fs::path dir = scratch_dir();
  Json cfg = scalar_network(0.4);
  cfg["sim"] = {{"seed", 3}, {"horizon", 20000}};
  const Result r = run_json({"aggregate", "--out", dir.string()}, cfg);
  REQUIRE(r.code == 0);
  const Json rep = r.report();
  const double j = rep["derived"]["accuracy_metric"].get<double>();
  CHECK(std::abs(rep["derived"]["simulation"]["error_variance_trace"].get<double>() - j) < 0.05 * j);
  CHECK(slurp(dir / "aggregate.csv").rfind("k,true,private\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("schema errors exit with code 2") {
  Json missing = scalar_network(0.4);
  missing["network"].erase("weights");
  CHECK(run_json({"aggregate"}, missing).code == pmlkit::cli::kExitSchema);
  CHECK(run({"pml-eval"}, "not json").code == pmlkit::cli::kExitSchema);
  CHECK(run({"pml-eval"}, "[1, 2]").code == pmlkit::cli::kExitSchema);
  CHECK(run_json({"pml-eval"}, kScalarJoint).code == pmlkit::cli::kExitSchema);
  CHECK(run({"pml-eval", "/nonexistent/config.json"}).code == pmlkit::cli::kExitSchema);
  CHECK(run({"bogus"}).code == pmlkit::cli::kExitSchema);
  CHECK(run({}).code == pmlkit::cli::kExitSchema);
  const Json ragged = Json::parse(R"({"system": {"A": [[0.5, 0], [0]], "C": 1, "Q": 1, "Theta": 1}})");
  CHECK(run_json({"kalman"}, ragged).code == pmlkit::cli::kExitSchema);
  Json bad_sim = kScalarJoint;
  bad_sim["budget"] = {{"epsilon", 3}, {"delta", 0.05}};
  bad_sim["sim"] = {{"samples", 10}};
  CHECK(run_json({"verify"}, bad_sim).code == pmlkit::cli::kExitSchema);
}

TEST_CASE("numerical, infeasible and unstable exits") {
  const Json unstable = Json::parse(R"({"system": {"A": 1.5, "C": 1, "Q": 1, "Theta": 1}})");
  const Result u = run_json({"kalman"}, unstable);
  CHECK(u.code == pmlkit::cli::kExitUnstable);
  CHECK(u.err.find("spectral radius") != std::string::npos);
  const Json infeasible = Json::parse(R"({"mechanism": {"type": "linear", "sigma_xx": 1, "C": 1},
      "budget": {"epsilon": 1, "delta": 0.001}})");
  CHECK(run_json({"design"}, infeasible).code == pmlkit::cli::kExitInfeasible);
  const Json singular = Json::parse(R"({"joint": {"sigma_xx": 1, "sigma_xy": 1, "sigma_yy": 1},
      "budget": {"epsilon": 5, "delta": 0.01}})");
  CHECK(run_json({"pml-eval"}, singular).code == pmlkit::cli::kExitNumerical);
}

TEST_CASE("help and version") {
  const Result h = run({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("pml-eval") != std::string::npos);
  const Result v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(pmlkit::cli::kVersion) != std::string::npos);
}

TEST_CASE("verify passes for designed noise and fails for shrunk noise") {
  const Json design_cfg = Json::parse(R"({"mechanism": {"type": "linear", "sigma_xx": [[2, 0.5], [0.5, 1]],
      "C": [[1, 0], [1, 1]]}, "budget": {"epsilon": 6, "delta": 0.05}})");
  const Json d = run_json({"design"}, design_cfg).report();
  Json cfg{{"mechanism", design_cfg["mechanism"]}, {"theta", d["derived"]["theta"]},
           {"budget", design_cfg["budget"]}, {"sim", {{"seed", 17}, {"samples", 100000}, {"workers", 2}}}};
  const Result ok = run_json({"verify"}, cfg);
  REQUIRE(ok.code == 0);
  const Json rep = ok.report();
  CHECK(rep["checks"]["pass"] == true);
  CHECK(rep["checks"]["violation_matches_exact"] == true);
  CHECK(rep["derived"]["violation_rate"].get<double>() <= 0.05 + 0.003);
  CHECK(rep["derived"]["seed"] == 17);

  Json shrunk = cfg;
  for (auto& row : shrunk["theta"]) {
    for (auto& v : row) v = v.get<double>() / 10.0;
  }
  const Json bad = run_json({"verify"}, shrunk).report();
  CHECK(bad["checks"]["pass"] == false);
  CHECK(bad["checks"]["pml_private"] == false);
  CHECK(bad["derived"]["violation_rate"].get<double>() > 0.1);
}

TEST_CASE("outputs are byte-identical across runs") {
  Json cfg = kScalarJoint;
  cfg["budget"] = {{"epsilon", 3}, {"delta", 0.05}};
  cfg["sim"] = {{"seed", 9}, {"samples", 20000}, {"workers", 3}};
  CHECK(run_json({"verify"}, cfg).out == run_json({"verify"}, cfg).out);
  const Json a = run_json({"verify"}, cfg).report();
  Json cfg1 = cfg;
  cfg1["sim"]["workers"] = 1;
  const Json b = run_json({"verify"}, cfg1).report();
  CHECK(a["derived"] == b["derived"]);

  Json agg = scalar_network(0.4);
  agg["sim"] = {{"seed", 2}, {"horizon", 500}};
  CHECK(run_json({"aggregate"}, agg).out == run_json({"aggregate"}, agg).out);
}

TEST_CASE("seed precedence") {
  Json cfg = kScalarJoint;
  cfg["budget"] = {{"epsilon", 3}, {"delta", 0.05}};
  cfg["sim"] = {{"samples", 1000}};
  ::unsetenv(pmlkit::cli::kSeedEnv);
  CHECK(run_json({"verify"}, cfg).report()["provenance"]["seed"] == pmlkit::cli::kDefaultSeed);
  ::setenv(pmlkit::cli::kSeedEnv, "44", 1);
  const Json env = run_json({"verify"}, cfg).report();
  CHECK(env["provenance"]["seed"] == 44);
  Json with_seed = cfg;
  with_seed["sim"]["seed"] = 45;
  CHECK(run_json({"verify"}, with_seed).report()["provenance"]["seed"] == 45);
  CHECK(run_json({"verify", "--seed", "46"}, with_seed).report()["provenance"]["seed"] == 46);
  CHECK(run_json({"--seed", "47", "verify"}, with_seed).report()["provenance"]["seed"] == 47);
  Json explicit_44 = cfg;
  explicit_44["sim"]["seed"] = 44;
  CHECK(run_json({"verify"}, explicit_44).report()["derived"] == env["derived"]);
  ::setenv(pmlkit::cli::kSeedEnv, "abc", 1);
  CHECK(run_json({"verify"}, cfg).code == pmlkit::cli::kExitSchema);
  ::unsetenv(pmlkit::cli::kSeedEnv);
}
