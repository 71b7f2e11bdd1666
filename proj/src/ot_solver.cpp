#include "pathflow/ot_solver.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <queue>
#include <thread>

namespace pathflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_uniform(const Eigen::VectorXd& w) {
  const double target = 1.0 / static_cast<double>(w.size());
  return ((w.array() - target).abs() <= 1e-15).all();
}

void require_shapes(const CostMatrix& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  validate_weights(a, cost.rows(), "source");
  validate_weights(b, cost.cols(), "target");
}

double log_sum_exp(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

}  // namespace

double Coupling::marginal_violation() const {
  const double rows = (plan.rowwise().sum() - source_weights).cwiseAbs().maxCoeff();
  const double cols = (plan.colwise().sum().transpose() - target_weights).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

double DualPotentials::value(const Eigen::VectorXd& source_weights, const Eigen::VectorXd& target_weights) const {
  return phi.dot(source_weights) + psi.dot(target_weights);
}

double DualPotentials::max_violation(const CostMatrix& cost) const {
  double worst = -kInf;
  for (Eigen::Index i = 0; i < cost.rows(); ++i)
    for (Eigen::Index j = 0; j < cost.cols(); ++j) worst = std::max(worst, phi(i) + psi(j) - cost(i, j));
  return worst;
}

void validate_weights(const Eigen::VectorXd& weights, Eigen::Index expected_size, const char* which) {
  if (weights.size() != expected_size) {
    throw ValidationError(std::string(which) + " weights do not match the cost matrix");
  }
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw ValidationError(std::string(which) + " weights must be non-negative");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-9) {
    throw ValidationError(std::string(which) + " weights are not normalized");
  }
}

// ---------------------------------------------------------------------------
// Cost assembly

int worker_threads() {
  const char* env = std::getenv("PATHFLOW_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return std::max(1, n);
}

Eigen::MatrixXd distance_matrix(const EmpiricalMeasure& src, const EmpiricalMeasure& tgt) {
  if (src.grid_size() != tgt.grid_size() || !(src.tag() == tgt.tag())) {
    throw ValidationError("source and target measures live on different grids");
  }
  const auto n = static_cast<Eigen::Index>(src.size());
  const auto m = static_cast<Eigen::Index>(tgt.size());
  Eigen::MatrixXd d(n, m);
  const int workers = static_cast<int>(std::min<Eigen::Index>(worker_threads(), n));

  auto fill_rows = [&](int offset) {
    for (Eigen::Index i = offset; i < n; i += workers)
      for (Eigen::Index j = 0; j < m; ++j) d(i, j) = d_L2(src.support()[i], tgt.support()[j]);
  };
  if (workers <= 1) {
    fill_rows(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w);
  }
  return d;
}

CostMatrix cost_matrix(const EmpiricalMeasure& src, const EmpiricalMeasure& tgt, double p) {
  if (!(p > 1.0 && p <= 10.0)) throw ValidationError("exponent p must lie in (1, 10]");
  return {distance_matrix(src, tgt).array().pow(p).matrix(), p};
}

// ---------------------------------------------------------------------------
// Assignment

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (n == 0 || cost.cols() != n) throw ValidationError("assignment needs a non-empty square cost matrix");

  // 1-based shortest augmenting path with potentials; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.row_to_col[match[j] - 1] = j - 1;
  out.u.resize(n);
  out.v.resize(n);
  for (int i = 0; i < n; ++i) {
    out.u(i) = u[i + 1];
    out.v(i) = v[i + 1];
    out.total_cost += cost(i, out.row_to_col[i]);
  }
  return out;
}

double assignment_margin(const Eigen::MatrixXd& cost, const Assignment& optimum) {
  const auto n = cost.rows();
  if (n <= 1) return kInf;
  // Every other permutation avoids at least one optimal edge.
  const double big = 2.0 * cost.cwiseAbs().sum() + 1.0;
  double second = kInf;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd banned = cost;
    banned(i, optimum.row_to_col[i]) = big;
    second = std::min(second, solve_assignment(banned).total_cost);
  }
  return second - optimum.total_cost;
}

// ---------------------------------------------------------------------------
// Transportation simplex

ExactSolution solve_transportation_simplex(const CostMatrix& cost, const Eigen::VectorXd& source_weights,
                                           const Eigen::VectorXd& target_weights) {
  require_shapes(cost, source_weights, target_weights);
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const int nodes = n + m;  // rows 0..n-1, columns n..n+m-1

  struct Cell {
    int i, j;
    double flow;
  };
  std::vector<Cell> basis;
  basis.reserve(static_cast<std::size_t>(nodes) - 1);

  // Northwest corner start: n + m - 1 cells forming a spanning tree.
  {
    Eigen::VectorXd supply = source_weights;
    Eigen::VectorXd demand = target_weights;
    int i = 0, j = 0;
    while (true) {
      const double q = std::min(supply(i), demand(j));
      basis.push_back({i, j, q});
      supply(i) -= q;
      demand(j) -= q;
      if (i == n - 1 && j == m - 1) break;
      if (j == m - 1 || (i < n - 1 && supply(i) <= demand(j))) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double scale = 1.0 + cost.entries.cwiseAbs().maxCoeff();
  const double reduced_tol = 1e-12 * scale;
  Eigen::VectorXd u(n), v(m);
  std::vector<std::vector<int>> adj(nodes);
  std::vector<int> parent_edge(nodes), parent_node(nodes);

  auto rebuild_adjacency = [&] {
    for (auto& a : adj) a.clear();
    for (int e = 0; e < static_cast<int>(basis.size()); ++e) {
      adj[basis[e].i].push_back(e);
      adj[n + basis[e].j].push_back(e);
    }
  };
  auto other_end = [&](int e, int node) { return node < n ? n + basis[e].j : basis[e].i; };

  const int max_pivots = 50 * nodes * nodes + 1000;
  for (int pivot = 0;; ++pivot) {
    if (pivot > max_pivots) throw SolverError("transportation simplex exceeded pivot limit", kInf);
    rebuild_adjacency();

    // Potentials with u_0 = 0 and u_i + v_j = c_ij on the tree.
    {
      std::vector<char> seen(nodes, 0);
      std::queue<int> q;
      q.push(0);
      seen[0] = 1;
      u(0) = 0.0;
      while (!q.empty()) {
        const int node = q.front();
        q.pop();
        for (int e : adj[node]) {
          const int next = other_end(e, node);
          if (seen[next]) continue;
          seen[next] = 1;
          const double c = cost(basis[e].i, basis[e].j);
          if (next >= n) {
            v(next - n) = c - u(basis[e].i);
          } else {
            u(next) = c - v(basis[e].j);
          }
          q.push(next);
        }
      }
    }

    // Bland's rule: first cell in row-major order with negative reduced cost.
    int enter_i = -1, enter_j = -1;
    for (int i = 0; i < n && enter_i < 0; ++i)
      for (int j = 0; j < m; ++j) {
        if (cost(i, j) - u(i) - v(j) < -reduced_tol) {
          enter_i = i;
          enter_j = j;
          break;
        }
      }
    if (enter_i < 0) break;

    // Tree path from column node back to the row node.
    std::fill(parent_edge.begin(), parent_edge.end(), -1);
    std::fill(parent_node.begin(), parent_node.end(), -1);
    {
      std::queue<int> q;
      q.push(enter_i);
      parent_node[enter_i] = enter_i;
      while (!q.empty()) {
        const int node = q.front();
        q.pop();
        if (node == n + enter_j) break;
        for (int e : adj[node]) {
          const int next = other_end(e, node);
          if (parent_node[next] >= 0) continue;
          parent_node[next] = node;
          parent_edge[next] = e;
          q.push(next);
        }
      }
    }
    std::vector<int> path;  // edges starting at the column end
    for (int node = n + enter_j; node != enter_i; node = parent_node[node]) path.push_back(parent_edge[node]);

    // Signs alternate -, +, -, ... starting next to the entering cell's column.
    double theta = kInf;
    int leave = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell& c = basis[path[k]];
      const bool better = c.flow < theta ||
                          (c.flow == theta && leave >= 0 &&
                           c.i * m + c.j < basis[leave].i * m + basis[leave].j);
      if (better) {
        theta = c.flow;
        leave = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      Cell& c = basis[path[k]];
      c.flow += (k % 2 == 0) ? -theta : theta;
      if (c.flow < 0.0) c.flow = 0.0;
    }
    basis[leave] = {enter_i, enter_j, theta};
  }

  ExactSolution out;
  out.coupling.source_weights = source_weights;
  out.coupling.target_weights = target_weights;
  out.coupling.plan = Eigen::MatrixXd::Zero(n, m);
  for (const Cell& c : basis) {
    if (c.flow > 1e-15) out.coupling.plan(c.i, c.j) += c.flow;
  }
  out.value = (out.coupling.plan.array() * cost.entries.array()).sum();
  return out;
}

ExactSolution solve_exact(const CostMatrix& cost, const Eigen::VectorXd& source_weights,
                          const Eigen::VectorXd& target_weights) {
  require_shapes(cost, source_weights, target_weights);
  const auto n = cost.rows();
  if (n != cost.cols() || !is_uniform(source_weights) || !is_uniform(target_weights)) {
    return solve_transportation_simplex(cost, source_weights, target_weights);
  }
  const Assignment a = solve_assignment(cost.entries);
  ExactSolution out;
  out.coupling.source_weights = source_weights;
  out.coupling.target_weights = target_weights;
  out.coupling.plan = Eigen::MatrixXd::Zero(n, n);
  const double mass = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) out.coupling.plan(i, a.row_to_col[i]) = mass;
  out.value = a.total_cost * mass;
  out.assignment = a.row_to_col;
  return out;
}

// ---------------------------------------------------------------------------
// Sinkhorn

SinkhornResult solve_sinkhorn(const CostMatrix& cost, const Eigen::VectorXd& source_weights,
                              const Eigen::VectorXd& target_weights, double epsilon, int max_iter,
                              double tol) {
  require_shapes(cost, source_weights, target_weights);
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
  const auto n = cost.rows();
  const auto m = cost.cols();
  const Eigen::ArrayXd log_a = source_weights.array().log();
  const Eigen::ArrayXd log_b = target_weights.array().log();
  const Eigen::MatrixXd& c = cost.entries;

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd plan(n, m);
  double violation = kInf;

  // One sweep at regularization eps; returns the L1 column violation.
  auto sweep = [&](double eps) {
    for (Eigen::Index j = 0; j < m; ++j) {
      g(j) = eps * log_b(j) - eps * log_sum_exp((f - c.col(j)) / eps);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      f(i) = eps * log_a(i) - eps * log_sum_exp((g - c.row(i).transpose()) / eps);
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) plan(i, j) = std::exp((f(i) + g(j) - c(i, j)) / eps);
    return (plan.colwise().sum().transpose() - target_weights).cwiseAbs().sum();
  };

  // Epsilon scaling: warm-start from coarser regularizations, halving down to
  // the target. The sweep budget is shared across stages.
  int it = 0;
  const double range = c.maxCoeff() - c.minCoeff();
  for (double eps = range; eps > 2.0 * epsilon && it < max_iter; eps *= 0.5) {
    for (int k = 0; k < 200 && it < max_iter; ++k, ++it) {
      violation = sweep(eps);
      if (violation <= std::max(tol, 1e-6)) break;
    }
  }
  for (; it < max_iter; ++it) {
    violation = sweep(epsilon);
    if (violation <= tol) break;
  }
  if (violation > tol) {
    throw SolverError("sinkhorn did not converge, marginal violation " + std::to_string(violation), violation);
  }

  SinkhornResult out;
  out.coupling = {plan, source_weights, target_weights};
  out.value = (plan.array() * c.array()).sum();
  out.iterations = std::min(it + 1, max_iter);
  out.marginal_violation = violation;

  DualPotentials pot;
  pot.p = cost.p;
  pot.psi = g;
  pot.phi = c_transform(pot.psi, cost, TransformDirection::ToSource);
  const double shift = pot.phi(0);
  pot.phi.array() -= shift;
  pot.psi.array() += shift;
  out.potentials = std::move(pot);
  return out;
}

// ---------------------------------------------------------------------------
// Duals

Eigen::VectorXd c_transform(const Eigen::VectorXd& potential, const CostMatrix& cost,
                            TransformDirection direction) {
  if (direction == TransformDirection::ToSource) {
    if (potential.size() != cost.cols()) throw ValidationError("potential does not match target support");
    Eigen::VectorXd out(cost.rows());
    for (Eigen::Index i = 0; i < cost.rows(); ++i) out(i) = (cost.entries.row(i).transpose() - potential).minCoeff();
    return out;
  }
  if (potential.size() != cost.rows()) throw ValidationError("potential does not match source support");
  Eigen::VectorXd out(cost.cols());
  for (Eigen::Index j = 0; j < cost.cols(); ++j) out(j) = (cost.entries.col(j) - potential).minCoeff();
  return out;
}

namespace {

// Returns false when the constraint system has a negative cycle.
bool shortest_path_labels(const CostMatrix& cost, const Coupling& coupling, double slack,
                          Eigen::VectorXd& row_label, Eigen::VectorXd& col_label) {
  const auto n = cost.rows();
  const auto m = cost.cols();
  const double tol = 1e-13 * (1.0 + cost.entries.cwiseAbs().maxCoeff());
  row_label = Eigen::VectorXd::Zero(n);
  col_label = Eigen::VectorXd::Zero(m);
  const auto passes = n + m + 1;
  for (Eigen::Index pass = 0; pass < passes; ++pass) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        const bool support = coupling.plan(i, j) > 0.0;
        const double via_row = row_label(i) + cost(i, j) - (support ? 0.0 : slack);
        if (via_row < col_label(j) - tol) {
          col_label(j) = via_row;
          changed = true;
        }
        if (support) {
          const double via_col = col_label(j) - cost(i, j);
          if (via_col < row_label(i) - tol) {
            row_label(i) = via_col;
            changed = true;
          }
        }
      }
    if (!changed) return true;
  }
  return false;
}

}  // namespace

DualPotentials dual_from_primal(const CostMatrix& cost, const Coupling& coupling, double slack) {
  if (coupling.plan.rows() != cost.rows() || coupling.plan.cols() != cost.cols()) {
    throw ValidationError("coupling does not match the cost matrix");
  }
  if (!(slack >= 0.0)) throw ValidationError("slack must be non-negative");

  // Labels d with d(col_j) <= d(row_i) + c_ij everywhere and equality on the
  // plan's support; phi_i = -d(row_i), psi_j = d(col_j). Bellman-Ford from a
  // virtual source attached to every node handles disconnected supports.
  Eigen::VectorXd row_label, col_label;
  if (!shortest_path_labels(cost, coupling, slack, row_label, col_label) && slack > 0.0) {
    shortest_path_labels(cost, coupling, 0.0, row_label, col_label);
  }

  DualPotentials out;
  out.p = cost.p;
  out.psi = col_label;
  out.phi = c_transform(out.psi, cost, TransformDirection::ToSource);
  const double shift = out.phi(0);
  out.phi.array() -= shift;
  out.psi.array() += shift;
  return out;
}

DualPotentials strict_dual_from_primal(const CostMatrix& cost, const Coupling& coupling) {
  Eigen::VectorXd rows, cols;
  double lo = 0.0;
  double hi = cost.entries.maxCoeff() - cost.entries.minCoeff() + 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (shortest_path_labels(cost, coupling, mid, rows, cols)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return dual_from_primal(cost, coupling, lo);
}

double lipschitz_constant(double p, double diameter) {
  if (p == 2.0) return 2.0 * diameter;
  return p * std::pow(diameter, p - 1.0);
}

LipschitzReport lipschitz_check(const Eigen::VectorXd& phi, const EmpiricalMeasure& src, double p,
                                double diameter) {
  if (static_cast<std::size_t>(phi.size()) != src.size()) throw ValidationError("phi does not match the source");
  LipschitzReport report;
  report.bound = lipschitz_constant(p, diameter);
  report.max_excess = -kInf;
  const auto n = src.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) {
      const double d = d_L2(src.support()[i], src.support()[k]);
      const double diff = std::abs(phi(static_cast<Eigen::Index>(i)) - phi(static_cast<Eigen::Index>(k)));
      report.max_excess = std::max(report.max_excess, diff - report.bound * d);
      if (d > 1e-14) report.max_ratio = std::max(report.max_ratio, diff / d);
    }
  if (n < 2) report.max_excess = 0.0;
  report.passed = report.max_excess <= 1e-9;
  return report;
}

}  // namespace pathflow
