#pragma once

#include "pathflow/lie_group.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pathflow {

// Path on G sampled at t_k = k / N, k = 0..N, starting at the identity.
class DiscretePath {
 public:
  explicit DiscretePath(std::vector<GroupElement> points);

  int grid_size() const { return static_cast<int>(points_.size()) - 1; }
  const GroupTag& tag() const { return points_.front().tag(); }
  const std::vector<GroupElement>& points() const { return points_; }
  const GroupElement& operator[](std::size_t k) const { return points_[k]; }
  double time(int k) const { return static_cast<double>(k) / grid_size(); }

  bool operator==(const DiscretePath& other) const;

 protected:
  std::vector<GroupElement> points_;
};

// A path that also returns to the identity at t = 1.
class DiscreteLoop : public DiscretePath {
 public:
  // Endpoints must be the identity within `endpoint_tol` (coordinate max-norm);
  // the last point is then stored as the exact identity.
  explicit DiscreteLoop(std::vector<GroupElement> points, double endpoint_tol = 0.0);
};

// Algebra-valued function on the grid, h(0) = 0 (and h(1) = 0 for loops).
class CameronMartinVector {
 public:
  CameronMartinVector(std::vector<AlgebraElement> values, bool loop);
  static CameronMartinVector zero(int grid_size, int algebra_dim, bool loop);

  int grid_size() const { return static_cast<int>(values_.size()) - 1; }
  int algebra_dim() const { return static_cast<int>(values_.front().size()); }
  bool loop() const { return loop_; }
  const std::vector<AlgebraElement>& values() const { return values_; }
  const AlgebraElement& operator[](std::size_t k) const { return values_[k]; }

  // <h1, h2>_H = sum_k N <h1(t_{k+1}) - h1(t_k), h2(t_{k+1}) - h2(t_k)>
  static double inner(const CameronMartinVector& a, const CameronMartinVector& b);
  double norm() const { return std::sqrt(inner(*this, *this)); }

 private:
  std::vector<AlgebraElement> values_;
  bool loop_;
};

// Finitely supported probability measure on paths.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::vector<DiscretePath> support, Eigen::VectorXd weights);
  static EmpiricalMeasure uniform(std::vector<DiscretePath> support);

  std::size_t size() const { return support_.size(); }
  int grid_size() const { return support_.front().grid_size(); }
  const GroupTag& tag() const { return support_.front().tag(); }
  const std::vector<DiscretePath>& support() const { return support_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  // Merges atoms whose paths are identical, keeping first-occurrence order.
  EmpiricalMeasure merged() const;

 private:
  std::vector<DiscretePath> support_;
  Eigen::VectorXd weights_;
};

// Trapezoidal weights on the uniform grid: 1/(2N) at the ends, 1/N inside.
double trapezoid_weight(int k, int grid_size);

void require_same_grid(const DiscretePath& a, const DiscretePath& b);

double d_uniform(const DiscretePath& a, const DiscretePath& b);
double d_L2(const DiscretePath& a, const DiscretePath& b);
// Discrete Cameron-Martin distance: energy of v = a^-1 b from its increments.
double d_CM(const DiscretePath& a, const DiscretePath& b);

// Pointwise left translation (ell * gamma)(t_k) = ell(t_k) gamma(t_k).
DiscretePath left_translate(const DiscretePath& ell, const DiscretePath& gamma);

// Path through the given knots at t = 0, 1/K, ..., 1, joined by minimizing
// geodesics and sampled on a grid of size N (a multiple of K).
DiscretePath piecewise_geodesic(const std::vector<GroupElement>& knots, int grid_size);

// Haar-distributed for the torus and SO3; standard Gaussian coordinates on
// the Heisenberg group.
GroupElement random_element(const GroupTag& tag, std::mt19937_64& rng);
// Knots start at the identity; each subsequent knot is the previous one times
// exp(X) with X uniform in the ball of radius `max_step`.
DiscretePath random_piecewise_geodesic(const GroupTag& tag, int grid_size, int segments, double max_step,
                                       std::mt19937_64& rng);

// gamma(t_{k+1}) = gamma(t_k) exp(sqrt(1/N) xi_k), xi_k standard Gaussian.
DiscretePath sample_brownian_path(const GroupTag& tag, int grid_size, std::mt19937_64& rng);
DiscretePath sample_brownian_path(const GroupTag& tag, int grid_size, std::uint64_t seed);
// Same recursion driven by explicit increments xi_0..xi_{N-1}.
DiscretePath brownian_path_from_increments(const GroupTag& tag, const std::vector<AlgebraElement>& xi);

enum class LoopMethod { TorusBridge, GeodesicCorrection };
LoopMethod parse_loop_method(const std::string& name);
std::string loop_method_name(LoopMethod method);

DiscreteLoop sample_loop(const GroupTag& tag, int grid_size, std::uint64_t seed, LoopMethod method);
DiscreteLoop sample_loop(const GroupTag& tag, int grid_size, std::mt19937_64& rng, LoopMethod method);
// gamma(t_k) exp(-t_k log gamma(1)); endpoint exact.
DiscreteLoop geodesic_correction(const DiscretePath& path);

// Green kernel of the loop Cameron-Martin space: min(s, t) - s t.
double green_kernel(double s, double t);

// F(ell) = f(ell(theta_1), ..., ell(theta_m)). `gradient`, when provided,
// returns for each slot i the left-trivialized gradient ell(theta_i)^-1 d_i f.
struct CylindricalFunction {
  std::vector<double> times;
  std::function<double(std::span<const GroupElement>)> value;
  std::function<std::vector<AlgebraElement>(std::span<const GroupElement>)> gradient;
};

// Central differences of f along right perturbations g exp(eps e_a).
std::vector<AlgebraElement> cylindrical_gradient_fd(const CylindricalFunction& f,
                                                    std::span<const GroupElement> points,
                                                    double step = 1e-5);

// h(t_k) = sum_i grad_i G(theta_i, t_k).
CameronMartinVector cylindrical_gradient(const CylindricalFunction& f, const DiscretePath& loop);

}  // namespace pathflow
