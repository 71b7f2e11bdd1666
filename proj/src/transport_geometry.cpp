#include "pathflow/transport_geometry.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pathflow {

// ---------------------------------------------------------------------------
// Displacement and interpolation

DisplacementField displacement_field(const DiscretePath& gamma1, const DiscretePath& gamma2) {
  require_same_grid(gamma1, gamma2);
  DisplacementField field;
  field.vectors.reserve(gamma1.points().size());
  for (int k = 0; k <= gamma1.grid_size(); ++k) {
    field.vectors.push_back(log_group(mul(inv(gamma1[k]), gamma2[k])));
  }
  return field;
}

bool has_cut_pair(const DiscretePath& gamma1, const DiscretePath& gamma2, double tol) {
  require_same_grid(gamma1, gamma2);
  for (int k = 0; k <= gamma1.grid_size(); ++k) {
    if (near_cut_locus(mul(inv(gamma1[k]), gamma2[k]), tol)) return true;
  }
  return false;
}

DiscretePath interpolate_path(const DiscretePath& gamma1, const DiscretePath& gamma2, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
  const DisplacementField field = displacement_field(gamma1, gamma2);
  const GroupTag& tag = gamma1.tag();
  std::vector<GroupElement> pts;
  pts.reserve(field.vectors.size());
  for (int k = 0; k <= gamma1.grid_size(); ++k) {
    pts.push_back(mul(gamma1[k], exp_alg(tag, lambda * field.vectors[k])));
  }
  return DiscretePath(std::move(pts));
}

EmpiricalMeasure interpolate_measure(const EmpiricalMeasure& src, const EmpiricalMeasure& tgt,
                                     const Coupling& plan, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
  const auto n = static_cast<Eigen::Index>(src.size());
  const auto m = static_cast<Eigen::Index>(tgt.size());
  if (plan.plan.rows() != n || plan.plan.cols() != m) throw ValidationError("plan does not match the measures");
  if ((plan.plan.rowwise().sum() - src.weights()).cwiseAbs().maxCoeff() > 1e-9 ||
      (plan.plan.colwise().sum().transpose() - tgt.weights()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ValidationError("plan marginals do not match the measures");
  }

  std::vector<DiscretePath> support;
  std::vector<double> weights;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      if (plan.plan(i, j) <= 0.0) continue;
      support.push_back(interpolate_path(src.support()[i], tgt.support()[j], lambda));
      weights.push_back(plan.plan(i, j));
    }
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  w /= w.sum();
  return {std::move(support), std::move(w)};
}

InterpolationResult interpolate_schedule(const EmpiricalMeasure& src, const EmpiricalMeasure& tgt,
                                         std::vector<double> lambdas) {
  for (double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
  }
  std::sort(lambdas.begin(), lambdas.end());
  const ExactSolution plan = solve_exact(cost_matrix(src, tgt, 2.0), src.weights(), tgt.weights());

  InterpolationResult out;
  out.lambdas = lambdas;
  for (double l : lambdas) {
    EmpiricalMeasure mid = interpolate_measure(src, tgt, plan.coupling, l);
    const ExactSolution d = solve_exact(cost_matrix(src, mid, 2.0), src.weights(), mid.weights());
    out.distances.push_back(std::sqrt(std::max(d.value, 0.0)));
    out.measures.push_back(std::move(mid));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Potentials and their gradients

CTransformPotential::CTransformPotential(std::vector<DiscretePath> targets, Eigen::VectorXd psi, double p)
    : targets_(std::move(targets)), psi_(std::move(psi)), p_(p) {
  if (targets_.empty()) throw ValidationError("potential needs at least one target");
  if (static_cast<std::size_t>(psi_.size()) != targets_.size()) throw ValidationError("psi does not match targets");
  if (!(p_ > 1.0 && p_ <= 10.0)) throw ValidationError("exponent p must lie in (1, 10]");
}

double CTransformPotential::operator()(const DiscretePath& gamma) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < targets_.size(); ++j) {
    best = std::min(best, std::pow(d_L2(gamma, targets_[j]), p_) - psi_(static_cast<Eigen::Index>(j)));
  }
  return best;
}

std::size_t CTransformPotential::argmin(const DiscretePath& gamma) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t j = 0; j < targets_.size(); ++j) {
    const double v = std::pow(d_L2(gamma, targets_[j]), p_) - psi_(static_cast<Eigen::Index>(j));
    if (v < best) {
      best = v;
      arg = j;
    }
  }
  return arg;
}

DiscretePath perturb(const DiscretePath& gamma, const CameronMartinVector& h, double eps) {
  if (h.grid_size() != gamma.grid_size() || h.algebra_dim() != gamma.tag().algebra_dim()) {
    throw ValidationError("perturbation does not match the path");
  }
  const GroupTag& tag = gamma.tag();
  std::vector<GroupElement> pts;
  pts.reserve(gamma.points().size());
  pts.push_back(gamma[0]);
  for (int k = 1; k <= gamma.grid_size(); ++k) pts.push_back(mul(gamma[k], exp_alg(tag, eps * h[k])));
  return DiscretePath(std::move(pts));
}

std::vector<CameronMartinVector> hat_basis(int grid_size, int algebra_dim, bool loop) {
  if (grid_size < 2) throw ValidationError("hat basis needs grid size >= 2");
  std::vector<CameronMartinVector> basis;
  basis.reserve(static_cast<std::size_t>(grid_size - 1) * algebra_dim);
  for (int k = 1; k < grid_size; ++k)
    for (int a = 0; a < algebra_dim; ++a) {
      std::vector<AlgebraElement> values(static_cast<std::size_t>(grid_size) + 1, AlgebraElement::Zero(algebra_dim));
      values[k](a) = 1.0;
      basis.emplace_back(std::move(values), loop);
    }
  return basis;
}

PotentialGradient potential_gradient(const CTransformPotential& phi, const DiscretePath& gamma1,
                                     const std::vector<CameronMartinVector>& basis, double step) {
  if (!(step >= 1e-12)) throw ValidationError("finite-difference step must be >= 1e-12");
  if (basis.empty()) throw ValidationError("gradient basis is empty");

  const auto count = static_cast<Eigen::Index>(basis.size());
  PotentialGradient out{{}, {}, CameronMartinVector::zero(gamma1.grid_size(), gamma1.tag().algebra_dim(),
                                                          basis.front().loop())};
  Eigen::VectorXd rhs(count);
  for (Eigen::Index a = 0; a < count; ++a) {
    const auto& h = basis[static_cast<std::size_t>(a)];
    const double d1 = (phi(perturb(gamma1, h, step)) - phi(perturb(gamma1, h, -step))) / (2.0 * step);
    const double d2 = (phi(perturb(gamma1, h, 2.0 * step)) - phi(perturb(gamma1, h, -2.0 * step))) / (4.0 * step);
    out.directional.push_back(d1);
    out.richardson_gap.push_back(std::abs(d1 - d2));
    rhs(a) = d1;
  }

  Eigen::MatrixXd gram(count, count);
  for (Eigen::Index a = 0; a < count; ++a)
    for (Eigen::Index b = a; b < count; ++b) {
      gram(a, b) = gram(b, a) =
          CameronMartinVector::inner(basis[static_cast<std::size_t>(a)], basis[static_cast<std::size_t>(b)]);
    }
  const Eigen::VectorXd coeff = gram.ldlt().solve(rhs);

  std::vector<AlgebraElement> values = basis.front().values();
  for (auto& v : values) v.setZero();
  for (Eigen::Index a = 0; a < count; ++a) {
    const auto& h = basis[static_cast<std::size_t>(a)];
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += coeff(a) * h[k];
  }
  out.gradient = CameronMartinVector(std::move(values), basis.front().loop());
  return out;
}

double first_variation(const DiscretePath& gamma1, const DiscretePath& gamma2, const CameronMartinVector& h,
                       double p) {
  const DisplacementField field = displacement_field(gamma1, gamma2);
  const int n = gamma1.grid_size();
  if (h.grid_size() != n) throw ValidationError("perturbation does not match the path");
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) acc += trapezoid_weight(k, n) * field.vectors[k].dot(h[k]);
  if (acc == 0.0) return 0.0;
  return -p * std::pow(d_L2(gamma1, gamma2), p - 2.0) * acc;
}

// ---------------------------------------------------------------------------
// Reconstruction

DisplacementField displacement_from_gradient(const CameronMartinVector& gradient) {
  const int n = gradient.grid_size();
  if (n < 4) throw ValidationError("reconstruction needs grid size >= 4");
  DisplacementField field;
  field.vectors.assign(static_cast<std::size_t>(n) + 1, AlgebraElement::Zero(gradient.algebra_dim()));
  const double scale = 0.5 * static_cast<double>(n) * n;
  for (int k = 1; k < n; ++k) {
    field.vectors[k] = scale * (gradient[k + 1] - 2.0 * gradient[k] + gradient[k - 1]);
  }
  if (!gradient.loop()) field.vectors[n] = field.vectors[n - 1];
  return field;
}

DiscretePath reconstruct_map(const CameronMartinVector& gradient, const DiscretePath& gamma1) {
  if (gradient.grid_size() != gamma1.grid_size() || gradient.algebra_dim() != gamma1.tag().algebra_dim()) {
    throw ValidationError("gradient does not match the path");
  }
  const DisplacementField field = displacement_from_gradient(gradient);
  const GroupTag& tag = gamma1.tag();
  std::vector<GroupElement> pts;
  pts.reserve(gamma1.points().size());
  pts.push_back(gamma1[0]);
  for (int k = 1; k <= gamma1.grid_size(); ++k) pts.push_back(mul(gamma1[k], exp_alg(tag, field.vectors[k])));
  return DiscretePath(std::move(pts));
}

std::vector<GroupElement> reconstruct_geodesic_from_V(const GroupTag& tag, const AlgebraElement& v, int steps) {
  if (v.size() != tag.algebra_dim() || !v.allFinite()) throw ValidationError("V must be a finite algebra element");
  std::vector<GroupElement> curve =
      integrate_body_velocity(GroupElement::identity(tag), [&](double) { return v; }, 1.0, 0.0, steps);
  std::reverse(curve.begin(), curve.end());
  return curve;
}

// ---------------------------------------------------------------------------
// Mollifier

double plateau_bump(double t, double t0, double eps) {
  const double r = std::abs(t - t0);
  if (r <= eps) return 1.0;
  if (r >= 2.0 * eps) return 0.0;
  const double s = (r - eps) / eps;
  const double a = std::exp(-1.0 / s);
  const double b = std::exp(-1.0 / (1.0 - s));
  return b / (a + b);
}

namespace {

void require_eps(const std::vector<double>& eps) {
  if (eps.empty()) throw ValidationError("eps sequence is empty");
  for (double e : eps) {
    if (!(e > 0.0)) throw ValidationError("eps must be positive");
  }
}

}  // namespace

MollifierEstimate mollifier_extract(const DisplacementField& field, double t0, const std::vector<double>& eps) {
  require_eps(eps);
  const int n = field.grid_size();
  if (n < 1) throw ValidationError("field needs at least two nodes");
  if (!(t0 >= 0.0 && t0 <= 1.0)) throw ValidationError("t0 must lie in [0, 1]");
  MollifierEstimate out;
  for (double e : eps) {
    AlgebraElement acc = AlgebraElement::Zero(field.vectors.front().size());
    double mass = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double w = trapezoid_weight(k, n) * plateau_bump(static_cast<double>(k) / n, t0, e);
      acc += w * field.vectors[k];
      mass += w;
    }
    if (mass <= 0.0) throw ValidationError("mollifier window contains no grid nodes");
    out.eps.push_back(e);
    out.estimates.push_back(acc / mass);
  }
  const auto smallest = std::min_element(out.eps.begin(), out.eps.end()) - out.eps.begin();
  out.limit = out.estimates[static_cast<std::size_t>(smallest)];
  return out;
}

MollifierEstimate mollifier_extract(const CameronMartinVector& gradient, double t0, const std::vector<double>& eps) {
  require_eps(eps);
  const int n = gradient.grid_size();
  const int d = gradient.algebra_dim();
  if (!(t0 >= 0.0 && t0 <= 1.0)) throw ValidationError("t0 must lie in [0, 1]");
  MollifierEstimate out;
  for (double e : eps) {
    // h_eps restricted to interior nodes so that it lies in H_0.
    std::vector<double> bump(static_cast<std::size_t>(n) + 1, 0.0);
    double mass = 0.0;
    for (int k = 1; k < n; ++k) {
      bump[k] = plateau_bump(static_cast<double>(k) / n, t0, e);
      mass += bump[k] / n;
    }
    if (mass <= 0.0) throw ValidationError("mollifier window contains no interior grid nodes");
    AlgebraElement est(d);
    for (int a = 0; a < d; ++a) {
      std::vector<AlgebraElement> values(static_cast<std::size_t>(n) + 1, AlgebraElement::Zero(d));
      for (int k = 1; k < n; ++k) values[k](a) = bump[k];
      const CameronMartinVector h(std::move(values), gradient.loop());
      est(a) = -0.5 * CameronMartinVector::inner(gradient, h) / mass;
    }
    out.eps.push_back(e);
    out.estimates.push_back(std::move(est));
  }
  const auto smallest = std::min_element(out.eps.begin(), out.eps.end()) - out.eps.begin();
  out.limit = out.estimates[static_cast<std::size_t>(smallest)];
  return out;
}

}  // namespace pathflow
