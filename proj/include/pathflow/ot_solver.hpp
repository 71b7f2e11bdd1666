#pragma once

#include "pathflow/path_space.hpp"

#include <Eigen/Dense>

#include <vector>

namespace pathflow {

// c_ij = d_L2(src_i, tgt_j)^p.
struct CostMatrix {
  Eigen::MatrixXd entries;
  double p = 2.0;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries(i, j); }
};

struct Coupling {
  Eigen::MatrixXd plan;
  Eigen::VectorXd source_weights;
  Eigen::VectorXd target_weights;

  // Largest absolute deviation of a row or column sum from its marginal.
  double marginal_violation() const;
};

struct DualPotentials {
  Eigen::VectorXd phi;  // on the source support
  Eigen::VectorXd psi;  // on the target support
  double p = 2.0;

  double value(const Eigen::VectorXd& source_weights, const Eigen::VectorXd& target_weights) const;
  // max_ij (phi_i + psi_j - c_ij); feasible when <= 0 up to rounding.
  double max_violation(const CostMatrix& cost) const;
};

// Worker count for cost assembly, from PATHFLOW_THREADS (default 1).
int worker_threads();

// Matrix of d_L2(src_i, tgt_j), assembled row-striped across worker threads.
Eigen::MatrixXd distance_matrix(const EmpiricalMeasure& src, const EmpiricalMeasure& tgt);
// Requires 1 < p <= 10.
CostMatrix cost_matrix(const EmpiricalMeasure& src, const EmpiricalMeasure& tgt, double p);

// Hungarian-type shortest augmenting path solver for square assignment
// problems. Ties go to the lowest column index.
struct Assignment {
  std::vector<int> row_to_col;
  double total_cost = 0.0;  // sum_i c(i, row_to_col[i])
  Eigen::VectorXd u;        // row duals
  Eigen::VectorXd v;        // column duals, u_i + v_j <= c_ij
};
Assignment solve_assignment(const Eigen::MatrixXd& cost);

// Cost gap between the optimal assignment and the best assignment that
// differs from it; +inf for 1x1 problems.
double assignment_margin(const Eigen::MatrixXd& cost, const Assignment& optimum);

struct ExactSolution {
  Coupling coupling;
  double value = 0.0;
  // Filled when the instance was solved as an assignment problem.
  std::vector<int> assignment;
};

// Exact Kantorovich optimum. Uniform equal-size marginals are solved as an
// assignment problem, anything else with the transportation simplex.
ExactSolution solve_exact(const CostMatrix& cost, const Eigen::VectorXd& source_weights,
                          const Eigen::VectorXd& target_weights);

// Transportation (network) simplex on the complete bipartite graph.
ExactSolution solve_transportation_simplex(const CostMatrix& cost, const Eigen::VectorXd& source_weights,
                                           const Eigen::VectorXd& target_weights);

struct SinkhornResult {
  Coupling coupling;
  double value = 0.0;  // sum plan_ij c_ij
  DualPotentials potentials;
  int iterations = 0;
  double marginal_violation = 0.0;
};

// Log-domain Sinkhorn. Throws SolverError when the column marginals are not
// within `tol` (L1) after `max_iter` sweeps.
SinkhornResult solve_sinkhorn(const CostMatrix& cost, const Eigen::VectorXd& source_weights,
                              const Eigen::VectorXd& target_weights, double epsilon, int max_iter,
                              double tol);

enum class TransformDirection {
  ToSource,  // phi_i = min_j c_ij - psi_j
  ToTarget,  // psi_j = min_i c_ij - phi_i
};

Eigen::VectorXd c_transform(const Eigen::VectorXd& potential, const CostMatrix& cost,
                            TransformDirection direction);

// Potentials from complementary slackness on the support of an optimal plan
// (shortest-path labels), tightened by phi = psi^c and shifted to phi_0 = 0.
// With slack > 0 the labels are asked to keep phi_i + psi_j <= c_ij - slack off
// the support, which makes every source atom's minimizer in psi^c unique; if
// that system is infeasible the plain labels are returned.
DualPotentials dual_from_primal(const CostMatrix& cost, const Coupling& coupling, double slack = 0.0);
// dual_from_primal with the largest feasible slack, found by bisection.
DualPotentials strict_dual_from_primal(const CostMatrix& cost, const Coupling& coupling);

struct LipschitzReport {
  double max_ratio = 0.0;  // max |phi_i - phi_k| / d_L2(src_i, src_k)
  double bound = 0.0;
  double max_excess = 0.0;  // max |phi_i - phi_k| - bound * d
  bool passed = true;
};

// 2D for p = 2, p D^(p-1) in general.
double lipschitz_constant(double p, double diameter);
LipschitzReport lipschitz_check(const Eigen::VectorXd& phi, const EmpiricalMeasure& src, double p,
                                double diameter);

void validate_weights(const Eigen::VectorXd& weights, Eigen::Index expected_size, const char* which);

}  // namespace pathflow
