#include "pathflow/verify.hpp"

#include "pathflow/errors.hpp"
#include "pathflow/ot_solver.hpp"
#include "pathflow/path_space.hpp"
#include "pathflow/transport_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>

namespace pathflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Tracker {
  std::string name;
  double threshold;
  double worst = 0.0;

  void observe(double x) { worst = std::max(worst, std::isnan(x) ? kInf : x); }
  CheckResult result() const { return {name, worst, threshold, worst <= threshold}; }
};

void require_metric_group(const VerifyConfig& cfg, const char* suite) {
  if (cfg.tag.kind == GroupKind::Heisenberg) {
    throw ValidationError(std::string("suite '") + suite + "' needs a torus or so3 group");
  }
}

EmpiricalMeasure brownian_measure(const GroupTag& tag, int grid, int atoms, std::mt19937_64& rng, bool uniform) {
  std::vector<DiscretePath> paths;
  for (int i = 0; i < atoms; ++i) paths.push_back(sample_brownian_path(tag, grid, rng));
  if (uniform) return EmpiricalMeasure::uniform(std::move(paths));
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Eigen::VectorXd w(atoms);
  for (auto& x : w) x = u(rng);
  return {std::move(paths), w / w.sum()};
}

// Smooth directions h(t) = sum_m c_m sin(m pi t / 2) on the grid, h(0) = 0.
std::vector<CameronMartinVector> smooth_directions(int grid, int dim, int count, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<CameronMartinVector> out;
  for (int c = 0; c < count; ++c) {
    std::vector<AlgebraElement> coeff(3, AlgebraElement(dim));
    for (auto& v : coeff)
      for (auto& x : v) x = normal(rng);
    std::vector<AlgebraElement> values;
    for (int k = 0; k <= grid; ++k) {
      const double t = static_cast<double>(k) / grid;
      AlgebraElement h = AlgebraElement::Zero(dim);
      for (int m = 0; m < 3; ++m) h += std::sin((m + 1) * std::numbers::pi * t / 2.0) * coeff[m];
      values.push_back(k == 0 ? AlgebraElement::Zero(dim) : h);
    }
    out.emplace_back(std::move(values), false);
  }
  return out;
}

// max_a |fd_a - pred_a| / max_a |pred_a|; nullopt when a perturbed path
// switches to a different active target.
std::optional<double> directional_error(const CTransformPotential& phi, const DiscretePath& gamma,
                                        std::size_t active, const std::vector<CameronMartinVector>& dirs,
                                        double step) {
  const DiscretePath& target = phi.targets()[active];
  double num = 0.0, den = 0.0;
  for (const auto& h : dirs) {
    const DiscretePath plus = perturb(gamma, h, step);
    const DiscretePath minus = perturb(gamma, h, -step);
    if (phi.argmin(plus) != active || phi.argmin(minus) != active) return std::nullopt;
    const double fd = (phi(plus) - phi(minus)) / (2.0 * step);
    const double pred = first_variation(gamma, target, h, phi.p());
    num = std::max(num, std::abs(fd - pred));
    den = std::max(den, std::abs(pred));
  }
  return num / std::max(den, 1e-300);
}

SuiteReport suite_duality(const VerifyConfig& cfg) {
  require_metric_group(cfg, "duality");
  SuiteReport rep{"duality", {}, {}};
  Tracker gap{"relative duality gap", 1e-8};
  Tracker feas{"dual feasibility violation", 1e-9};
  Tracker marg{"primal marginal violation", 1e-12};
  for (int r = 0; r < cfg.instances; ++r) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(r));
    const bool uniform = r % 2 == 0;
    const auto src = brownian_measure(cfg.tag, cfg.grid, cfg.atoms, rng, uniform);
    const auto tgt = brownian_measure(cfg.tag, cfg.grid, cfg.atoms, rng, uniform);
    const CostMatrix cost = cost_matrix(src, tgt, cfg.p);
    const ExactSolution sol = solve_exact(cost, src.weights(), tgt.weights());
    const DualPotentials dual = dual_from_primal(cost, sol.coupling);
    const double dv = dual.value(src.weights(), tgt.weights());
    gap.observe(std::abs(sol.value - dv) / std::max(std::abs(sol.value), 1e-300));
    feas.observe(dual.max_violation(cost) / (1.0 + cost.entries.maxCoeff()));
    marg.observe(sol.coupling.marginal_violation());
  }
  rep.checks = {gap.result(), feas.result(), marg.result()};
  return rep;
}

SuiteReport suite_lipschitz(const VerifyConfig& cfg) {
  require_metric_group(cfg, "lipschitz");
  SuiteReport rep{"lipschitz", {}, {}};
  Tracker excess{"pairwise excess over the Lipschitz bound", 1e-9};
  for (int r = 0; r < cfg.instances; ++r) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(r));
    const auto src = brownian_measure(cfg.tag, cfg.grid, cfg.atoms, rng, true);
    const auto tgt = brownian_measure(cfg.tag, cfg.grid, cfg.atoms, rng, true);
    const CostMatrix cost = cost_matrix(src, tgt, cfg.p);
    const ExactSolution sol = solve_exact(cost, src.weights(), tgt.weights());
    const DualPotentials dual = dual_from_primal(cost, sol.coupling);
    excess.observe(std::max(0.0, lipschitz_check(dual.phi, src, cfg.p, diameter(cfg.tag)).max_excess));
  }
  rep.checks = {excess.result()};
  return rep;
}

SuiteReport suite_geodesic_ode(const VerifyConfig& cfg) {
  SuiteReport rep{"geodesic-ode", {}, {}};
  Tracker err{"so3 ODE endpoint vs exp", 1e-6};
  const GroupTag so3 = GroupTag::so3();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < 4 * cfg.instances; ++r) {
    AlgebraElement x(3);
    for (auto& c : x) c = normal(rng);
    x *= 2.0 * unit(rng) / x.norm();
    const GroupElement start = random_element(so3, rng);
    const auto curve = integrate_geodesic(start, x, 1000);
    err.observe(distance(curve.back(), mul(start, exp_alg(so3, x))));
  }
  rep.checks = {err.result()};
  return rep;
}

SuiteReport suite_gradient_identity(const VerifyConfig& cfg) {
  require_metric_group(cfg, "gradient-identity");
  SuiteReport rep{"gradient-identity", {}, {}};
  Tracker coarse{"relative error at step 1e-4", 1e-2};
  Tracker refine{"error growth from step 1e-4 to 1e-5 above the 1e-7 rounding floor", 0.0};
  int skipped = 0;

  auto check = [&](const CTransformPotential& phi, const DiscretePath& gamma, std::size_t active,
                   std::mt19937_64& rng) {
    if (phi.argmin(gamma) != active || has_cut_pair(gamma, phi.targets()[active])) {
      ++skipped;
      return;
    }
    const auto dirs = smooth_directions(gamma.grid_size(), gamma.tag().algebra_dim(), 6, rng);
    const auto e4 = directional_error(phi, gamma, active, dirs, 1e-4);
    const auto e5 = directional_error(phi, gamma, active, dirs, 1e-5);
    if (!e4 || !e5) {
      ++skipped;
      return;
    }
    coarse.observe(*e4);
    // Central differences can already sit at the rounding floor at 1e-4.
    refine.observe(*e5 <= 1e-7 ? 0.0 : *e5 - *e4);
  };

  for (int r = 0; r < cfg.instances; ++r) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(r));
    // Dirac target.
    const DiscretePath gamma = sample_brownian_path(cfg.tag, cfg.grid, rng);
    const DiscretePath sigma = sample_brownian_path(cfg.tag, cfg.grid, rng);
    check(CTransformPotential({sigma}, Eigen::VectorXd::Zero(1), cfg.p), gamma, 0, rng);

    // Strict assignment.
    const auto src = brownian_measure(cfg.tag, cfg.grid, cfg.atoms, rng, true);
    const auto tgt = brownian_measure(cfg.tag, cfg.grid, cfg.atoms, rng, true);
    const CostMatrix cost = cost_matrix(src, tgt, cfg.p);
    const ExactSolution sol = solve_exact(cost, src.weights(), tgt.weights());
    const DualPotentials dual = strict_dual_from_primal(cost, sol.coupling);
    const CTransformPotential phi(tgt.support(), dual.psi, cfg.p);
    for (int i = 0; i < cfg.atoms; ++i) {
      check(phi, src.support()[static_cast<std::size_t>(i)], static_cast<std::size_t>(sol.assignment[i]), rng);
    }
  }
  rep.checks = {coarse.result(), refine.result()};
  rep.notes.push_back("skipped " + std::to_string(skipped) + " atoms without a strict active target");
  return rep;
}

SuiteReport suite_explicit_map(const VerifyConfig& cfg) {
  SuiteReport rep{"explicit-map", {}, {}};
  const GroupTag tag = cfg.tag.kind == GroupKind::Torus ? cfg.tag : GroupTag::torus(2);
  const int grid = std::max(cfg.grid, 8);
  Tracker err{"reconstruction error at interior nodes", 1e-3};
  Tracker mono{"error growth as the step halves above the 1e-9 rounding floor", 0.0};
  const std::vector<double> steps{1e-3, 5e-4, 2.5e-4, 1.25e-4};
  for (int r = 0; r < cfg.instances; ++r) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(r));
    const DiscretePath gamma = sample_brownian_path(tag, grid, rng);
    const DiscretePath sigma = sample_brownian_path(tag, grid, rng);
    if (has_cut_pair(gamma, sigma)) continue;
    const CTransformPotential phi({sigma}, Eigen::VectorXd::Zero(1), 2.0);
    const auto basis = hat_basis(grid, tag.algebra_dim(), false);
    double prev = kInf;
    for (double s : steps) {
      const DiscretePath rec = reconstruct_map(potential_gradient(phi, gamma, basis, s).gradient, gamma);
      double e = 0.0;
      for (int k = 1; k < grid; ++k) e = std::max(e, distance(rec[k], sigma[k]));
      err.observe(e);
      mono.observe(e <= 1e-9 ? 0.0 : e - prev);
      prev = e;
    }
  }
  rep.checks = {err.result(), mono.result()};
  return rep;
}

SuiteReport suite_reconstruction(const VerifyConfig& cfg) {
  require_metric_group(cfg, "reconstruction");
  SuiteReport rep{"reconstruction", {}, {}};
  Tracker endpoint{"v(0) exp(V) vs identity", 1e-8};
  Tracker pair{"v(0) vs gamma2^-1 gamma1", 1e-8};
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = cfg.tag.algebra_dim();
  for (int r = 0; r < 4 * cfg.instances; ++r) {
    AlgebraElement v(d);
    for (auto& c : v) c = normal(rng);
    v *= 0.99 * std::numbers::pi * unit(rng) / v.norm();
    const GroupElement v0 = reconstruct_geodesic_from_V(cfg.tag, v, 1000).front();
    endpoint.observe(distance(mul(v0, exp_alg(cfg.tag, v)), GroupElement::identity(cfg.tag)));
  }
  for (int r = 0; r < cfg.instances; ++r) {
    const DiscretePath g1 = sample_brownian_path(cfg.tag, cfg.grid, rng);
    const DiscretePath g2 = sample_brownian_path(cfg.tag, cfg.grid, rng);
    if (has_cut_pair(g1, g2)) continue;
    const DisplacementField field = displacement_field(g1, g2);
    for (int k = 0; k <= cfg.grid; ++k) {
      const GroupElement v0 = reconstruct_geodesic_from_V(cfg.tag, field.vectors[k], 1000).front();
      pair.observe(distance(v0, mul(inv(g2[k]), g1[k])));
    }
  }
  rep.checks = {endpoint.result(), pair.result()};
  return rep;
}

SuiteReport suite_distance_chain(const VerifyConfig& cfg) {
  require_metric_group(cfg, "distance-chain");
  SuiteReport rep{"distance-chain", {}, {}};
  Tracker l2{"d_L2 - d_uniform", 1e-9};
  Tracker cm{"d_uniform - d_CM", 1e-9};
  std::mt19937_64 rng(cfg.seed);
  const int grid = 4 * std::max(1, cfg.grid / 4);
  for (int r = 0; r < 20 * cfg.instances; ++r) {
    const DiscretePath a = random_piecewise_geodesic(cfg.tag, grid, 4, 1.5, rng);
    const DiscretePath b = random_piecewise_geodesic(cfg.tag, grid, 4, 1.5, rng);
    const double du = d_uniform(a, b);
    l2.observe(d_L2(a, b) - du);
    cm.observe(du - d_CM(a, b));
  }
  rep.checks = {l2.result(), cm.result()};
  return rep;
}

SuiteReport suite_path_scaling(const VerifyConfig& cfg) {
  require_metric_group(cfg, "path-scaling");
  SuiteReport rep{"path-scaling", {}, {}};
  Tracker err{"|d_L2(g1, u) - lambda d_L2(g1, g2)|", 1e-10};
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < 20 * cfg.instances; ++r) {
    const DiscretePath a = sample_brownian_path(cfg.tag, cfg.grid, rng);
    const DiscretePath b = sample_brownian_path(cfg.tag, cfg.grid, rng);
    if (has_cut_pair(a, b)) continue;
    const double lambda = unit(rng);
    err.observe(std::abs(d_L2(a, interpolate_path(a, b, lambda)) - lambda * d_L2(a, b)));
  }
  rep.checks = {err.result()};
  return rep;
}

SuiteReport suite_interpolation(const VerifyConfig& cfg) {
  require_metric_group(cfg, "interpolation");
  SuiteReport rep{"interpolation", {}, {}};
  Tracker fwd{"|W2(nu0, nu_l) - l W2| / W2", 1e-8};
  Tracker bwd{"|W2(nu_l, nu1) - (1 - l) W2| / W2", 1e-8};
  int skipped = 0;
  for (int r = 0; r < cfg.instances; ++r) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(r));
    const auto src = brownian_measure(cfg.tag, cfg.grid, cfg.atoms, rng, true);
    const auto tgt = brownian_measure(cfg.tag, cfg.grid, cfg.atoms, rng, true);
    const CostMatrix cost = cost_matrix(src, tgt, 2.0);
    const ExactSolution sol = solve_exact(cost, src.weights(), tgt.weights());
    bool cut = false;
    for (std::size_t i = 0; i < src.size(); ++i)
      for (std::size_t j = 0; j < tgt.size(); ++j)
        if (sol.coupling.plan(i, j) > 0.0 && has_cut_pair(src.support()[i], tgt.support()[j])) cut = true;
    if (cut) {
      ++skipped;
      continue;
    }
    const double w = std::sqrt(sol.value);
    for (double l : {0.25, 0.5, 0.75}) {
      const auto mid = interpolate_measure(src, tgt, sol.coupling, l);
      const double d0 = std::sqrt(solve_exact(cost_matrix(src, mid, 2.0), src.weights(), mid.weights()).value);
      const double d1 = std::sqrt(solve_exact(cost_matrix(mid, tgt, 2.0), mid.weights(), tgt.weights()).value);
      fwd.observe(std::abs(d0 - l * w) / w);
      bwd.observe(std::abs(d1 - (1.0 - l) * w) / w);
    }
  }
  rep.checks = {fwd.result(), bwd.result()};
  if (skipped > 0) rep.notes.push_back("skipped " + std::to_string(skipped) + " instances with a cut pair");
  return rep;
}

SuiteReport suite_heisenberg(const VerifyConfig& cfg) {
  SuiteReport rep{"heisenberg", {}, {}};
  Tracker endpoint{"endpoint vs (0, 0, t)", 1e-10};
  Tracker speed{"| |horizontal velocity| - 1 |", 1e-10};
  Tracker horizontal{"horizontality residual", 1e-10};
  const int n = cfg.tag.kind == GroupKind::Heisenberg ? cfg.tag.dim : 2;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int r = 0; r < 4 * cfg.instances; ++r) {
    Eigen::VectorXd a(n), b(n);
    for (auto& x : a) x = normal(rng);
    for (auto& x : b) x = normal(rng);
    const double norm = std::sqrt(a.squaredNorm() + b.squaredNorm());
    a /= norm;
    b /= norm;
    for (double t : {0.1, 1.0, 4.0}) {
      const HeisenbergGeodesicParams prm{a, b, 2.0 * std::numbers::pi, std::sqrt(std::numbers::pi * t)};
      Eigen::VectorXd expect = Eigen::VectorXd::Zero(2 * n + 1);
      expect(2 * n) = t;
      endpoint.observe((heisenberg_geodesic(prm, prm.r).coords() - expect).cwiseAbs().maxCoeff());
      for (int k = 0; k < 100; ++k) {
        const double s = prm.r * k / 99.0;
        const Eigen::VectorXd vel = heisenberg_geodesic_velocity(prm, s);
        const Eigen::VectorXd pos = heisenberg_geodesic(prm, s).coords();
        speed.observe(std::abs(vel.head(2 * n).norm() - 1.0));
        const double lift =
            2.0 * (pos.segment(n, n).dot(vel.head(n)) - pos.head(n).dot(vel.segment(n, n)));
        horizontal.observe(std::abs(vel(2 * n) - lift));
      }
    }
  }
  rep.checks = {endpoint.result(), speed.result(), horizontal.result()};
  return rep;
}

SuiteReport suite_reversibility(const VerifyConfig& cfg) {
  require_metric_group(cfg, "reversibility");
  SuiteReport rep{"reversibility", {}, {}};
  Tracker mismatch{"atoms with S(T(i)) != i", 0.0};
  int skipped = 0;
  const LoopMethod target_method =
      cfg.tag.kind == GroupKind::Torus ? LoopMethod::TorusBridge : LoopMethod::GeodesicCorrection;
  for (int r = 0; r < cfg.instances; ++r) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(r));
    std::vector<DiscretePath> a, b;
    for (int i = 0; i < cfg.atoms; ++i) a.push_back(sample_loop(cfg.tag, cfg.grid, rng, LoopMethod::GeodesicCorrection));
    for (int i = 0; i < cfg.atoms; ++i) b.push_back(sample_loop(cfg.tag, cfg.grid, rng, target_method));
    const CostMatrix cost = cost_matrix(EmpiricalMeasure::uniform(a), EmpiricalMeasure::uniform(b), cfg.p);
    const Assignment fwd = solve_assignment(cost.entries);
    const Eigen::MatrixXd back_cost = cost.entries.transpose();
    const Assignment back = solve_assignment(back_cost);
    if (assignment_margin(cost.entries, fwd) < 1e-9 || assignment_margin(back_cost, back) < 1e-9) {
      ++skipped;
      continue;
    }
    int bad = 0;
    for (int i = 0; i < cfg.atoms; ++i) bad += back.row_to_col[fwd.row_to_col[i]] != i;
    mismatch.observe(bad);
  }
  rep.checks = {mismatch.result()};
  if (skipped > 0) rep.notes.push_back("skipped " + std::to_string(skipped) + " non-strict instances");
  return rep;
}

using SuiteFn = SuiteReport (*)(const VerifyConfig&);

const std::map<std::string, SuiteFn>& registry() {
  static const std::map<std::string, SuiteFn> suites{
      {"distance-chain", suite_distance_chain},
      {"duality", suite_duality},
      {"explicit-map", suite_explicit_map},
      {"geodesic-ode", suite_geodesic_ode},
      {"gradient-identity", suite_gradient_identity},
      {"heisenberg", suite_heisenberg},
      {"interpolation", suite_interpolation},
      {"lipschitz", suite_lipschitz},
      {"path-scaling", suite_path_scaling},
      {"reconstruction", suite_reconstruction},
      {"reversibility", suite_reversibility},
  };
  return suites;
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> suite_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

SuiteReport run_suite(const std::string& name, const VerifyConfig& config) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw ValidationError("unknown suite '" + name + "'");
  if (config.grid < 4) throw ValidationError("grid must be >= 4");
  if (config.atoms < 1) throw ValidationError("atoms must be >= 1");
  if (!(config.p > 1.0 && config.p <= 10.0)) throw ValidationError("exponent p must lie in (1, 10]");
  if (config.instances < 1) throw ValidationError("instances must be >= 1");
  return it->second(config);
}

std::vector<SuiteReport> run_suites(const std::string& name, const VerifyConfig& config) {
  if (name != "all") return {run_suite(name, config)};
  std::vector<SuiteReport> out;
  for (const auto& n : suite_names()) {
    // Suites that need a metric are skipped on the Heisenberg group.
    if (config.tag.kind == GroupKind::Heisenberg && n != "heisenberg" && n != "geodesic-ode" &&
        n != "explicit-map") {
      continue;
    }
    out.push_back(run_suite(n, config));
  }
  return out;
}

}  // namespace pathflow
