#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace pathflow {

// Tangent vector at the identity, as coefficients in a fixed orthonormal
// basis of the Lie algebra. The algebra norm is the Euclidean norm.
using AlgebraElement = Eigen::VectorXd;

enum class GroupKind { Torus, SO3, Heisenberg };

struct GroupTag {
  GroupKind kind = GroupKind::Torus;
  int dim = 1;  // circles for the torus, n for Heisenberg(n), 3 for SO3

  static GroupTag torus(int d);
  static GroupTag so3();
  static GroupTag heisenberg(int n);
  // Inverse of name(); throws ValidationError on an unknown name.
  static GroupTag parse(const std::string& name, int dim);

  int algebra_dim() const;
  std::string name() const;

  friend bool operator==(const GroupTag&, const GroupTag&) = default;
};

// A point on one of the supported groups.
//
// Storage is a flat coordinate vector whose meaning depends on the tag:
//   Torus(d)       d angles, each in [-pi, pi)
//   SO3            the rotation matrix, row-major (9 entries)
//   Heisenberg(n)  (xi_1..xi_n, eta_1..eta_n, t), exponential coordinates
class GroupElement {
 public:
  static GroupElement identity(const GroupTag& tag);
  // Angles are wrapped into [-pi, pi).
  static GroupElement torus(const Eigen::VectorXd& angles);
  static GroupElement so3(const Eigen::Matrix3d& rotation);
  static GroupElement heisenberg(const Eigen::VectorXd& xi, const Eigen::VectorXd& eta, double t);
  // Validating constructor used by deserialization.
  static GroupElement from_coords(const GroupTag& tag, const Eigen::VectorXd& coords);

  const GroupTag& tag() const { return tag_; }
  const Eigen::VectorXd& coords() const { return coords_; }
  Eigen::Matrix3d rotation() const;

  // Exact comparison against the identity representation.
  bool is_identity() const;

 private:
  GroupElement(GroupTag tag, Eigen::VectorXd coords) : tag_(tag), coords_(std::move(coords)) {}

  GroupTag tag_;
  Eigen::VectorXd coords_;
};

double wrap_angle(double x);

GroupElement mul(const GroupElement& g, const GroupElement& h);
GroupElement inv(const GroupElement& g);

GroupElement exp_alg(const GroupTag& tag, const AlgebraElement& x);

// Minimizing logarithm. On the cut locus a deterministic branch is chosen:
// torus angles at pi map to +pi, and an SO3 rotation by pi picks the axis
// whose first non-negligible coordinate is positive.
AlgebraElement log_group(const GroupElement& g);

// rho(g, h) = |log(g^-1 h)|. Not defined on the Heisenberg group.
double distance(const GroupElement& g, const GroupElement& h);

// Supremum of rho over the group: pi * sqrt(d) for Torus(d), pi for SO3.
double diameter(const GroupTag& tag);

// True when g lies within `tol` of the cut locus of the identity.
bool near_cut_locus(const GroupElement& g, double tol);

AlgebraElement Ad(const GroupElement& g, const AlgebraElement& x);
// Lie bracket [x, y].
AlgebraElement ad(const GroupTag& tag, const AlgebraElement& x, const AlgebraElement& y);

// Structure constants and Christoffel symbols of the left-invariant metric
// in which the coordinate basis is orthonormal.
class MetricData {
 public:
  explicit MetricData(const GroupTag& tag);

  const GroupTag& tag() const { return tag_; }
  int dim() const { return dim_; }
  bool ad_invariant() const { return ad_invariant_; }

  // <[e_i, e_j], e_k>
  double structure_constant(int i, int j, int k) const { return c_[index(i, j, k)]; }
  // <nabla_{e_i} e_j, e_k>
  double christoffel(int i, int j, int k) const { return gamma_[index(i, j, k)]; }

  AlgebraElement bracket(const AlgebraElement& a, const AlgebraElement& b) const;
  // Adjoint of ad_a with respect to the algebra inner product, applied to b.
  AlgebraElement ad_adjoint(const AlgebraElement& a, const AlgebraElement& b) const;
  // nabla_A B = 1/2 (ad_A B - ad_A^* B - ad_B^* A)
  AlgebraElement levi_civita(const AlgebraElement& a, const AlgebraElement& b) const;
  // Component k: sum_ij Gamma_ij^k w_i w_j.
  AlgebraElement christoffel_contract(const AlgebraElement& w) const;

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dim_ + j) * dim_ + k;
  }

  GroupTag tag_;
  int dim_;
  bool ad_invariant_ = false;
  std::vector<double> c_;
  std::vector<double> gamma_;
};

AlgebraElement levi_civita(const GroupTag& tag, const AlgebraElement& a, const AlgebraElement& b);

// Solves d/ds g = g * velocity(s) from s0 to s1 with `steps` fourth-order
// Runge-Kutta-Munthe-Kaas steps. Returns steps + 1 points, starting at `start`.
std::vector<GroupElement> integrate_body_velocity(
    const GroupElement& start, const std::function<AlgebraElement(double)>& velocity, double s0,
    double s1, int steps);

// Geodesic with initial body velocity x0 over t in [0, 1]: the Euler-Arnold
// equation dw_k/dt = -sum Gamma_ij^k w_i w_j coupled with d gamma = gamma * w.
// Returns steps + 1 points.
std::vector<GroupElement> integrate_geodesic(const GroupElement& start, const AlgebraElement& x0,
                                             int steps);

// g * exp(lambda * log(g^-1 h)).
GroupElement geodesic_point(const GroupElement& g, const GroupElement& h, double lambda);

// Sub-Riemannian Heisenberg curve with parameter (a + ib, v, r).
struct HeisenbergGeodesicParams {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  double v = 0.0;
  double r = 1.0;

  void validate() const;
};

GroupElement heisenberg_geodesic(const HeisenbergGeodesicParams& params, double s);
// d/ds of the (xi, eta, t) coordinates.
Eigen::VectorXd heisenberg_geodesic_velocity(const HeisenbergGeodesicParams& params, double s);
// Unit-speed curve from the identity to [0, t] along (a + ib, +-2pi, sqrt(pi |t|)).
// Negative t uses v = -2pi.
HeisenbergGeodesicParams heisenberg_vertical_geodesic(const Eigen::VectorXd& a,
                                                      const Eigen::VectorXd& b, double t);

}  // namespace pathflow
