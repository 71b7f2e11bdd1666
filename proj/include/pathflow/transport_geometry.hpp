#pragma once

#include "pathflow/ot_solver.hpp"
#include "pathflow/path_space.hpp"

#include <vector>

namespace pathflow {

// Per-node constant body velocity of the minimizing geodesic from gamma1(t_k)
// to gamma2(t_k): exp(V_k) = gamma1(t_k)^-1 gamma2(t_k), |V_k| = rho.
struct DisplacementField {
  std::vector<AlgebraElement> vectors;

  int grid_size() const { return static_cast<int>(vectors.size()) - 1; }
};

DisplacementField displacement_field(const DiscretePath& gamma1, const DiscretePath& gamma2);

// True when some node pair sits within `tol` of the cut locus.
bool has_cut_pair(const DiscretePath& gamma1, const DiscretePath& gamma2, double tol = 1e-6);

// u^lambda(t_k) = gamma1(t_k) exp(lambda V_k).
DiscretePath interpolate_path(const DiscretePath& gamma1, const DiscretePath& gamma2, double lambda);

// Atoms u^lambda(src_i, tgt_j) weighted by plan_ij over the plan's support.
EmpiricalMeasure interpolate_measure(const EmpiricalMeasure& src, const EmpiricalMeasure& tgt,
                                     const Coupling& plan, double lambda);

struct InterpolationResult {
  std::vector<double> lambdas;
  std::vector<EmpiricalMeasure> measures;
  std::vector<double> distances;  // W_2(nu_0, nu_lambda)
};

// Displacement interpolation along an exact p = 2 plan; lambdas are sorted.
InterpolationResult interpolate_schedule(const EmpiricalMeasure& src, const EmpiricalMeasure& tgt,
                                         std::vector<double> lambdas);

// phi(gamma) = min_j d_L2(gamma, sigma_j)^p - psi_j.
class CTransformPotential {
 public:
  CTransformPotential(std::vector<DiscretePath> targets, Eigen::VectorXd psi, double p);

  double operator()(const DiscretePath& gamma) const;
  // Index of the minimizing target (lowest index on ties).
  std::size_t argmin(const DiscretePath& gamma) const;

  const std::vector<DiscretePath>& targets() const { return targets_; }
  const Eigen::VectorXd& psi() const { return psi_; }
  double p() const { return p_; }

 private:
  std::vector<DiscretePath> targets_;
  Eigen::VectorXd psi_;
  double p_;
};

// gamma(t_k) exp(eps h(t_k)).
DiscretePath perturb(const DiscretePath& gamma, const CameronMartinVector& h, double eps);

// Interior-node hat functions times the algebra basis, (N - 1) d vectors.
std::vector<CameronMartinVector> hat_basis(int grid_size, int algebra_dim, bool loop);

struct PotentialGradient {
  std::vector<double> directional;  // central differences, one per basis vector
  std::vector<double> richardson_gap;  // |D(step) - D(2 step)| per basis vector
  CameronMartinVector gradient;     // representer in span(basis) under <.,.>_H
};

PotentialGradient potential_gradient(const CTransformPotential& phi, const DiscretePath& gamma1,
                                     const std::vector<CameronMartinVector>& basis, double step = 1e-4);

// -p d^(p-2) sum_k w_k <V_k, h(t_k)> with d = d_L2(gamma1, gamma2).
double first_variation(const DiscretePath& gamma1, const DiscretePath& gamma2, const CameronMartinVector& h,
                       double p);

// V_k = 1/2 N^2 (g_{k+1} - 2 g_k + g_{k-1}) on interior nodes.
DisplacementField displacement_from_gradient(const CameronMartinVector& gradient);

// gamma1(t_k) exp(1/2 d^2/dt^2 gradient(t_k)); endpoints are not recovered
// (t = 0 is the identity, t = 1 copies the last interior value, or the
// identity for loop gradients).
DiscretePath reconstruct_map(const CameronMartinVector& gradient, const DiscretePath& gamma1);

// Integrates dv = v V ds backward from v(1) = e. The returned curve is indexed
// by s_k = k / steps, so front() is v(0) = exp(-V).
std::vector<GroupElement> reconstruct_geodesic_from_V(const GroupTag& tag, const AlgebraElement& v,
                                                      int steps);

// Smooth plateau: 1 on [t0 - eps, t0 + eps], 0 outside [t0 - 2 eps, t0 + 2 eps].
double plateau_bump(double t, double t0, double eps);

struct MollifierEstimate {
  std::vector<double> eps;
  std::vector<AlgebraElement> estimates;  // one per eps
  AlgebraElement limit;                   // estimate at the smallest eps
};

// Localized trapezoidal averages of the field against h_eps, clipped to [0, 1].
MollifierEstimate mollifier_extract(const DisplacementField& field, double t0, const std::vector<double>& eps);
// Same average computed from a gradient field: -1/2 <g, h_eps e_i>_H / int h_eps.
MollifierEstimate mollifier_extract(const CameronMartinVector& gradient, double t0,
                                    const std::vector<double>& eps);

}  // namespace pathflow
