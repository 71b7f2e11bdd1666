// pathflow: sample path measures, transport them, interpolate, verify.
//
// Exit codes: 0 success, 2 validation error, 3 solver failure,
// 4 verification failure.

#include "pathflow/bundle_io.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/ot_solver.hpp"
#include "pathflow/path_space.hpp"
#include "pathflow/transport_geometry.hpp"
#include "pathflow/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace pathflow;

namespace {

constexpr int kReportFormat = 1;

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerification = 4;

struct RunConfig {
  std::string group = "torus";
  int dim = 2;
  int grid = 16;
  int atoms = 8;
  double p = 2.0;
  std::string solver = "exact";
  double epsilon = 1e-2;
  int max_iter = 100000;
  double tol = 1e-9;
  std::uint64_t seed = 1;
  std::string loops;  // empty: open paths
  std::string lambdas = "0,0.25,0.5,0.75,1";
  std::string src, tgt;
  std::string suite = "all";
  int instances = 5;
  std::string out;

  GroupTag tag() const { return GroupTag::parse(group, dim); }
};

void validate(const RunConfig& c) {
  if (c.grid < 4) throw ValidationError("--grid must be >= 4");
  if (c.atoms < 1) throw ValidationError("--atoms must be >= 1");
  if (c.dim < 1) throw ValidationError("--dim must be >= 1");
  if (!(c.p > 1.0 && c.p <= 10.0)) throw ValidationError("--p must lie in (1, 10]");
  if (c.solver != "exact" && c.solver != "sinkhorn") throw ValidationError("--solver must be exact or sinkhorn");
  if (c.solver == "sinkhorn" && !(c.epsilon > 0.0)) throw ValidationError("--epsilon must be positive");
  c.tag();
}

ordered_json config_json(const RunConfig& c, const std::string& command) {
  ordered_json j;
  j["command"] = command;
  if (command == "sample" || command == "verify") {
    j["group"] = {{"tag", c.group}, {"dim", c.dim}};
    j["grid"] = c.grid;
    j["atoms"] = c.atoms;
    j["seed"] = c.seed;
  }
  if (command == "sample") j["loops"] = c.loops.empty() ? ordered_json(nullptr) : ordered_json(c.loops);
  if (command == "transport" || command == "interpolate") {
    j["src"] = c.src;
    j["tgt"] = c.tgt;
  }
  if (command == "transport") {
    j["p"] = c.p;
    j["solver"] = c.solver;
    if (c.solver == "sinkhorn") {
      j["epsilon"] = c.epsilon;
      j["max_iter"] = c.max_iter;
      j["tol"] = c.tol;
    }
  }
  if (command == "interpolate") j["p"] = 2.0;
  if (command == "verify") {
    j["p"] = c.p;
    j["suite"] = c.suite;
    j["instances"] = c.instances;
  }
  j["out"] = c.out;
  j["threads"] = worker_threads();
  return j;
}

void emit(const ordered_json& report, const fs::path& file) {
  const std::string text = report.dump(2) + "\n";
  if (file.empty()) {
    std::cout << text;
  } else {
    write_text(file, text);
  }
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad lambda '" + item + "'");
    }
    if (used != item.size()) throw ValidationError("bad lambda '" + item + "'");
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("--lambdas is empty");
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_sample(const RunConfig& c) {
  validate(c);
  if (c.out.empty()) throw ValidationError("sample needs --out");
  const GroupTag tag = c.tag();
  std::mt19937_64 rng(c.seed);
  std::vector<DiscretePath> paths;
  paths.reserve(static_cast<std::size_t>(c.atoms));
  if (c.loops.empty()) {
    for (int i = 0; i < c.atoms; ++i) paths.push_back(sample_brownian_path(tag, c.grid, rng));
  } else {
    const LoopMethod method = parse_loop_method(c.loops);
    for (int i = 0; i < c.atoms; ++i) paths.push_back(sample_loop(tag, c.grid, rng, method));
  }
  write_bundle(c.out, EmpiricalMeasure::uniform(std::move(paths)));
  return 0;
}

int cmd_transport(const RunConfig& c) {
  validate(c);
  if (c.out.empty()) throw ValidationError("transport needs --out (a directory)");
  const EmpiricalMeasure src = read_bundle(c.src);
  const EmpiricalMeasure tgt = read_bundle(c.tgt);
  const CostMatrix cost = cost_matrix(src, tgt, c.p);

  Coupling coupling;
  DualPotentials dual;
  double primal = 0.0;
  ordered_json solver_info;
  if (c.solver == "exact") {
    const ExactSolution sol = solve_exact(cost, src.weights(), tgt.weights());
    coupling = sol.coupling;
    primal = sol.value;
    dual = dual_from_primal(cost, coupling);
    solver_info = {{"method", sol.assignment.empty() ? "transportation-simplex" : "assignment"}};
  } else {
    const SinkhornResult sol = solve_sinkhorn(cost, src.weights(), tgt.weights(), c.epsilon, c.max_iter, c.tol);
    coupling = sol.coupling;
    primal = sol.value;
    dual = sol.potentials;
    solver_info = {{"method", "sinkhorn"},
                   {"iterations", sol.iterations},
                   {"marginal_violation", sol.marginal_violation}};
  }
  const double dual_value = dual.value(src.weights(), tgt.weights());
  const LipschitzReport lip = lipschitz_check(dual.phi, src, c.p, diameter(src.tag()));

  fs::create_directories(c.out);
  write_text(fs::path(c.out) / "coupling.csv", coupling_csv(coupling));
  write_text(fs::path(c.out) / "potentials.json", potentials_json(dual));

  ordered_json report;
  report["format_version"] = kReportFormat;
  report["config"] = config_json(c, "transport");
  report["solver"] = solver_info;
  report["primal_value"] = primal;
  report["dual_value"] = dual_value;
  report["gap"] = primal - dual_value;
  report["wasserstein"] = std::pow(std::max(primal, 0.0), 1.0 / c.p);
  report["dual_feasibility_violation"] = dual.max_violation(cost);
  report["lipschitz"] = {{"max_ratio", lip.max_ratio}, {"bound", lip.bound}, {"passed", lip.passed}};
  emit(report, fs::path(c.out) / "report.json");
  return 0;
}

int cmd_interpolate(const RunConfig& c) {
  if (c.out.empty()) throw ValidationError("interpolate needs --out (a directory)");
  const std::vector<double> lambdas = parse_lambdas(c.lambdas);
  const EmpiricalMeasure src = read_bundle(c.src);
  const EmpiricalMeasure tgt = read_bundle(c.tgt);
  const double w = std::sqrt(std::max(solve_exact(cost_matrix(src, tgt, 2.0), src.weights(), tgt.weights()).value, 0.0));
  const InterpolationResult res = interpolate_schedule(src, tgt, lambdas);

  fs::create_directories(c.out);
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < res.lambdas.size(); ++i) {
    const double l = res.lambdas[i];
    const std::string name = "bundle_" + std::to_string(i) + ".json";
    write_bundle(fs::path(c.out) / name, res.measures[i]);
    // lambda = 0 (or a degenerate W2 = 0) reports ratio 1 and distance 0.
    const bool degenerate = l == 0.0 || w == 0.0;
    rows.push_back({{"lambda", l},
                    {"bundle", name},
                    {"distance", l == 0.0 ? 0.0 : res.distances[i]},
                    {"ratio", degenerate ? 1.0 : res.distances[i] / (l * w)}});
  }
  ordered_json report;
  report["format_version"] = kReportFormat;
  report["config"] = config_json(c, "interpolate");
  report["w2"] = w;
  report["schedule"] = rows;
  emit(report, fs::path(c.out) / "report.json");
  return 0;
}

int cmd_verify(const RunConfig& c) {
  validate(c);
  VerifyConfig vc;
  vc.tag = c.tag();
  vc.grid = c.grid;
  vc.atoms = c.atoms;
  vc.p = c.p;
  vc.seed = c.seed;
  vc.instances = c.instances;
  const auto reports = run_suites(c.suite, vc);

  bool ok = true;
  ordered_json suites = ordered_json::array();
  for (const auto& r : reports) {
    ordered_json checks = ordered_json::array();
    for (const auto& chk : r.checks) {
      checks.push_back({{"name", chk.name},
                        {"measured", chk.measured},
                        {"threshold", chk.threshold},
                        {"slack", chk.threshold - chk.measured},
                        {"passed", chk.passed}});
    }
    suites.push_back({{"suite", r.suite}, {"passed", r.passed()}, {"checks", checks}, {"notes", r.notes}});
    ok = ok && r.passed();
    std::cerr << (r.passed() ? "PASS " : "FAIL ") << r.suite << "\n";
  }
  ordered_json report;
  report["format_version"] = kReportFormat;
  report["config"] = config_json(c, "verify");
  report["passed"] = ok;
  report["suites"] = suites;
  emit(report, c.out);
  return ok ? 0 : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathflow: optimal transport between measures on path spaces of Lie groups"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_group = [&](CLI::App* sub) {
    sub->add_option("--group", cfg.group, "torus, so3 or heisenberg")->capture_default_str();
    sub->add_option("--dim", cfg.dim, "torus dimension or Heisenberg n")->capture_default_str();
    sub->add_option("--grid", cfg.grid, "grid size N")->capture_default_str();
    sub->add_option("--atoms", cfg.atoms, "atoms per measure")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
  };

  auto* sample = app.add_subcommand("sample", "sample a uniform path bundle");
  add_group(sample);
  sample->add_option("--loops", cfg.loops, "sample loops: torus-bridge or geodesic-correction");
  sample->add_option("--out", cfg.out, "bundle file")->required();

  auto* transport = app.add_subcommand("transport", "solve the Kantorovich problem between two bundles");
  transport->add_option("--src", cfg.src, "source bundle")->required();
  transport->add_option("--tgt", cfg.tgt, "target bundle")->required();
  transport->add_option("--p", cfg.p, "cost exponent")->capture_default_str();
  transport->add_option("--solver", cfg.solver, "exact or sinkhorn")->capture_default_str();
  transport->add_option("--epsilon", cfg.epsilon, "Sinkhorn regularization")->capture_default_str();
  transport->add_option("--max-iter", cfg.max_iter, "Sinkhorn sweep limit")->capture_default_str();
  transport->add_option("--tol", cfg.tol, "Sinkhorn L1 marginal tolerance")->capture_default_str();
  transport->add_option("--out", cfg.out, "output directory")->required();

  auto* interpolate = app.add_subcommand("interpolate", "displacement interpolation along the W2 plan");
  interpolate->add_option("--src", cfg.src, "source bundle")->required();
  interpolate->add_option("--tgt", cfg.tgt, "target bundle")->required();
  interpolate->add_option("--lambdas", cfg.lambdas, "comma-separated values in [0, 1]")->capture_default_str();
  interpolate->add_option("--out", cfg.out, "output directory")->required();

  auto* verify = app.add_subcommand("verify", "run verification suites");
  add_group(verify);
  verify->add_option("--p", cfg.p, "cost exponent")->capture_default_str();
  verify->add_option("--suite", cfg.suite, "suite name or 'all'")->capture_default_str();
  verify->add_option("--instances", cfg.instances, "seeded instances per suite")->capture_default_str();
  verify->add_option("--out", cfg.out, "report file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*sample) return cmd_sample(cfg);
    if (*transport) return cmd_transport(cfg);
    if (*interpolate) return cmd_interpolate(cfg);
    return cmd_verify(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  }
}
