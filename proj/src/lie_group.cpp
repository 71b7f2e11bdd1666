#include "pathflow/lie_group.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pathflow {

namespace {

constexpr double kPi = std::numbers::pi;

void require_same_tag(const GroupElement& g, const GroupElement& h) {
  if (!(g.tag() == h.tag())) {
    throw ValidationError("group tag mismatch: " + g.tag().name() + " vs " + h.tag().name());
  }
}

void require_algebra_dim(const GroupTag& tag, const AlgebraElement& x) {
  if (x.size() != tag.algebra_dim()) {
    throw ValidationError("algebra element has " + std::to_string(x.size()) +
                          " coordinates, expected " + std::to_string(tag.algebra_dim()));
  }
}

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d k;
  k << 0.0, -w(2), w(1),
       w(2), 0.0, -w(0),
       -w(1), w(0), 0.0;
  return k;
}

Eigen::VectorXd to_row_major(const Eigen::Matrix3d& r) {
  Eigen::VectorXd v(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v(3 * i + j) = r(i, j);
  return v;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Eigen::Matrix3d k = hat(w);
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

// First coordinate above the noise floor decides the sign.
Eigen::Vector3d lexicographic_representative(const Eigen::Vector3d& u) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(u(i)) > 1e-12) return u(i) > 0.0 ? u : Eigen::Vector3d(-u);
  }
  return u;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));  // 2 sin(theta) u
  const double s = 0.5 * w.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, c);

  if (theta < 1e-4) return 0.5 * (1.0 + theta * theta / 6.0) * w;
  if (theta < 0.5 * kPi) return (0.5 * theta / s) * w;

  // Near pi the antisymmetric part vanishes; read the axis off
  // (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) u u^T.
  const Eigen::Matrix3d b = 0.5 * (r + r.transpose()) - c * Eigen::Matrix3d::Identity();
  int k = 0;
  b.diagonal().maxCoeff(&k);
  Eigen::Vector3d u = b.col(k) / std::sqrt(std::max(b(k, k), 1e-300));
  u.normalize();
  const double proj = u.dot(w);
  if (std::abs(proj) > 1e-12) {
    if (proj < 0.0) u = -u;
  } else {
    u = lexicographic_representative(u);
  }
  return theta * u;
}

// Heisenberg bracket in exponential coordinates: only the vertical
// component is non-zero, [X, Y]_t = 4 sum_j (eta_j xi'_j - xi_j eta'_j).
AlgebraElement heisenberg_bracket(int n, const AlgebraElement& x, const AlgebraElement& y) {
  AlgebraElement out = AlgebraElement::Zero(2 * n + 1);
  double acc = 0.0;
  for (int j = 0; j < n; ++j) acc += x(n + j) * y(j) - x(j) * y(n + j);
  out(2 * n) = 4.0 * acc;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// GroupTag

GroupTag GroupTag::torus(int d) {
  if (d < 1) throw ValidationError("torus dimension must be >= 1");
  return {GroupKind::Torus, d};
}

GroupTag GroupTag::so3() { return {GroupKind::SO3, 3}; }

GroupTag GroupTag::heisenberg(int n) {
  if (n < 1) throw ValidationError("heisenberg dimension must be >= 1");
  return {GroupKind::Heisenberg, n};
}

GroupTag GroupTag::parse(const std::string& name, int dim) {
  if (name == "torus") return torus(dim);
  if (name == "so3") return so3();
  if (name == "heisenberg") return heisenberg(dim);
  throw ValidationError("unknown group '" + name + "'");
}

int GroupTag::algebra_dim() const {
  switch (kind) {
    case GroupKind::Torus: return dim;
    case GroupKind::SO3: return 3;
    case GroupKind::Heisenberg: return 2 * dim + 1;
  }
  return 0;
}

std::string GroupTag::name() const {
  switch (kind) {
    case GroupKind::Torus: return "torus";
    case GroupKind::SO3: return "so3";
    case GroupKind::Heisenberg: return "heisenberg";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// GroupElement

GroupElement GroupElement::identity(const GroupTag& tag) {
  if (tag.kind == GroupKind::SO3) return {tag, to_row_major(Eigen::Matrix3d::Identity())};
  return {tag, Eigen::VectorXd::Zero(tag.algebra_dim())};
}

GroupElement GroupElement::torus(const Eigen::VectorXd& angles) {
  Eigen::VectorXd wrapped = angles.unaryExpr([](double a) { return wrap_angle(a); });
  return {GroupTag::torus(static_cast<int>(angles.size())), std::move(wrapped)};
}

GroupElement GroupElement::so3(const Eigen::Matrix3d& rotation) {
  if (!rotation.allFinite()) throw ValidationError("rotation has non-finite entries");
  const double orth = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (orth > 1e-10 || std::abs(rotation.determinant() - 1.0) > 1e-10) {
    throw ValidationError("matrix is not a rotation");
  }
  return {GroupTag::so3(), to_row_major(rotation)};
}

GroupElement GroupElement::heisenberg(const Eigen::VectorXd& xi, const Eigen::VectorXd& eta, double t) {
  if (xi.size() != eta.size()) throw ValidationError("heisenberg xi/eta size mismatch");
  const int n = static_cast<int>(xi.size());
  Eigen::VectorXd c(2 * n + 1);
  c << xi, eta, t;
  if (!c.allFinite()) throw ValidationError("heisenberg coordinates must be finite");
  return {GroupTag::heisenberg(n), std::move(c)};
}

GroupElement GroupElement::from_coords(const GroupTag& tag, const Eigen::VectorXd& coords) {
  switch (tag.kind) {
    case GroupKind::Torus: {
      if (coords.size() != tag.dim) throw ValidationError("torus point has wrong size");
      if (!coords.allFinite()) throw ValidationError("torus angles must be finite");
      for (double a : coords) {
        if (a < -kPi || a >= kPi) throw ValidationError("torus angle outside [-pi, pi)");
      }
      return {tag, coords};
    }
    case GroupKind::SO3: {
      if (coords.size() != 9) throw ValidationError("so3 point needs 9 entries");
      Eigen::Matrix3d r;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = coords(3 * i + j);
      return so3(r);
    }
    case GroupKind::Heisenberg: {
      const int n = tag.dim;
      if (coords.size() != 2 * n + 1) throw ValidationError("heisenberg point has wrong size");
      return heisenberg(coords.head(n), coords.segment(n, n), coords(2 * n));
    }
  }
  throw ValidationError("unknown group kind");
}

Eigen::Matrix3d GroupElement::rotation() const {
  if (tag_.kind != GroupKind::SO3) throw ValidationError("rotation() requires an so3 element");
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = coords_(3 * i + j);
  return r;
}

bool GroupElement::is_identity() const { return coords_ == identity(tag_).coords_; }

// ---------------------------------------------------------------------------
// Group operations

double wrap_angle(double x) {
  double y = x - 2.0 * kPi * std::floor((x + kPi) / (2.0 * kPi));
  if (y >= kPi) y -= 2.0 * kPi;
  if (y < -kPi) y += 2.0 * kPi;
  return y;
}

GroupElement mul(const GroupElement& g, const GroupElement& h) {
  require_same_tag(g, h);
  switch (g.tag().kind) {
    case GroupKind::Torus:
      return GroupElement::torus(g.coords() + h.coords());
    case GroupKind::SO3:
      return GroupElement::so3(g.rotation() * h.rotation());
    case GroupKind::Heisenberg: {
      const int n = g.tag().dim;
      const auto& x = g.coords();
      const auto& y = h.coords();
      // [z, t][z', t'] = [z + z', t + t' + 2 Im sum z_j conj(z'_j)]
      double im = 0.0;
      for (int j = 0; j < n; ++j) im += x(n + j) * y(j) - x(j) * y(n + j);
      return GroupElement::heisenberg(x.head(n) + y.head(n), x.segment(n, n) + y.segment(n, n),
                                      x(2 * n) + y(2 * n) + 2.0 * im);
    }
  }
  throw ValidationError("unknown group kind");
}

GroupElement inv(const GroupElement& g) {
  switch (g.tag().kind) {
    case GroupKind::Torus: return GroupElement::torus(-g.coords());
    case GroupKind::SO3: return GroupElement::so3(g.rotation().transpose());
    case GroupKind::Heisenberg: {
      const int n = g.tag().dim;
      return GroupElement::heisenberg(-g.coords().head(n), -g.coords().segment(n, n), -g.coords()(2 * n));
    }
  }
  throw ValidationError("unknown group kind");
}

GroupElement exp_alg(const GroupTag& tag, const AlgebraElement& x) {
  require_algebra_dim(tag, x);
  if (!x.allFinite()) throw ValidationError("algebra element must be finite");
  switch (tag.kind) {
    case GroupKind::Torus: return GroupElement::torus(x);
    case GroupKind::SO3: return GroupElement::so3(so3_exp(x));
    case GroupKind::Heisenberg: {
      const int n = tag.dim;
      return GroupElement::heisenberg(x.head(n), x.segment(n, n), x(2 * n));
    }
  }
  throw ValidationError("unknown group kind");
}

AlgebraElement log_group(const GroupElement& g) {
  switch (g.tag().kind) {
    case GroupKind::Torus: {
      AlgebraElement x = g.coords();
      for (auto& a : x) {
        if (a == -kPi) a = kPi;
      }
      return x;
    }
    case GroupKind::SO3: return so3_log(g.rotation());
    case GroupKind::Heisenberg: return g.coords();
  }
  throw ValidationError("unknown group kind");
}

double distance(const GroupElement& g, const GroupElement& h) {
  require_same_tag(g, h);
  if (g.tag().kind == GroupKind::Heisenberg) {
    throw ValidationError("distance is not available on the heisenberg group");
  }
  // Canonical argument order makes the result symmetric in floating point.
  const auto& a = g.coords();
  const auto& b = h.coords();
  if (a == b) return 0.0;
  const bool swap = std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
  return swap ? log_group(mul(inv(h), g)).norm() : log_group(mul(inv(g), h)).norm();
}

double diameter(const GroupTag& tag) {
  switch (tag.kind) {
    case GroupKind::Torus: return kPi * std::sqrt(static_cast<double>(tag.dim));
    case GroupKind::SO3: return kPi;
    case GroupKind::Heisenberg: break;
  }
  throw ValidationError("the heisenberg group has infinite diameter");
}

bool near_cut_locus(const GroupElement& g, double tol) {
  switch (g.tag().kind) {
    case GroupKind::Torus:
      for (double a : g.coords()) {
        if (kPi - std::abs(a) <= tol) return true;
      }
      return false;
    case GroupKind::SO3:
      return kPi - log_group(g).norm() <= tol;
    case GroupKind::Heisenberg: {
      const int n = g.tag().dim;
      return g.coords().head(2 * n).norm() <= tol && std::abs(g.coords()(2 * n)) > tol;
    }
  }
  return false;
}

AlgebraElement Ad(const GroupElement& g, const AlgebraElement& x) {
  require_algebra_dim(g.tag(), x);
  switch (g.tag().kind) {
    case GroupKind::Torus: return x;
    case GroupKind::SO3: return g.rotation() * Eigen::Vector3d(x);
    case GroupKind::Heisenberg: return x + heisenberg_bracket(g.tag().dim, g.coords(), x);
  }
  throw ValidationError("unknown group kind");
}

AlgebraElement ad(const GroupTag& tag, const AlgebraElement& x, const AlgebraElement& y) {
  require_algebra_dim(tag, x);
  require_algebra_dim(tag, y);
  switch (tag.kind) {
    case GroupKind::Torus: return AlgebraElement::Zero(tag.dim);
    case GroupKind::SO3: return Eigen::Vector3d(x).cross(Eigen::Vector3d(y));
    case GroupKind::Heisenberg: return heisenberg_bracket(tag.dim, x, y);
  }
  throw ValidationError("unknown group kind");
}

// ---------------------------------------------------------------------------
// MetricData

MetricData::MetricData(const GroupTag& tag) : tag_(tag), dim_(tag.algebra_dim()) {
  const std::size_t size = static_cast<std::size_t>(dim_) * dim_ * dim_;
  c_.assign(size, 0.0);
  gamma_.assign(size, 0.0);

  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) {
      const AlgebraElement b = ad(tag, AlgebraElement::Unit(dim_, i), AlgebraElement::Unit(dim_, j));
      for (int k = 0; k < dim_; ++k) c_[index(i, j, k)] = b(k);
    }
  }

  ad_invariant_ = true;
  for (int i = 0; i < dim_ && ad_invariant_; ++i)
    for (int j = 0; j < dim_ && ad_invariant_; ++j)
      for (int k = 0; k < dim_; ++k) {
        if (std::abs(c_[index(i, j, k)] + c_[index(i, k, j)]) > 1e-14) {
          ad_invariant_ = false;
          break;
        }
      }

  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) {
      const AlgebraElement nabla =
          levi_civita(AlgebraElement::Unit(dim_, i), AlgebraElement::Unit(dim_, j));
      for (int k = 0; k < dim_; ++k) gamma_[index(i, j, k)] = nabla(k);
    }
  }
}

AlgebraElement MetricData::bracket(const AlgebraElement& a, const AlgebraElement& b) const {
  AlgebraElement out = AlgebraElement::Zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    if (a(i) == 0.0) continue;
    for (int j = 0; j < dim_; ++j) {
      const double w = a(i) * b(j);
      if (w == 0.0) continue;
      for (int k = 0; k < dim_; ++k) out(k) += w * c_[index(i, j, k)];
    }
  }
  return out;
}

AlgebraElement MetricData::ad_adjoint(const AlgebraElement& a, const AlgebraElement& b) const {
  // <ad_a^* b, e_k> = <b, [a, e_k]> = sum_ij b_i a_j c[j][k][i]
  AlgebraElement out = AlgebraElement::Zero(dim_);
  for (int k = 0; k < dim_; ++k) {
    double acc = 0.0;
    for (int j = 0; j < dim_; ++j) {
      if (a(j) == 0.0) continue;
      for (int i = 0; i < dim_; ++i) acc += b(i) * a(j) * c_[index(j, k, i)];
    }
    out(k) = acc;
  }
  return out;
}

AlgebraElement MetricData::levi_civita(const AlgebraElement& a, const AlgebraElement& b) const {
  require_algebra_dim(tag_, a);
  require_algebra_dim(tag_, b);
  return 0.5 * (bracket(a, b) - ad_adjoint(a, b) - ad_adjoint(b, a));
}

AlgebraElement MetricData::christoffel_contract(const AlgebraElement& w) const {
  AlgebraElement out = AlgebraElement::Zero(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) {
      const double ww = w(i) * w(j);
      if (ww == 0.0) continue;
      for (int k = 0; k < dim_; ++k) out(k) += gamma_[index(i, j, k)] * ww;
    }
  return out;
}

AlgebraElement levi_civita(const GroupTag& tag, const AlgebraElement& a, const AlgebraElement& b) {
  return MetricData(tag).levi_civita(a, b);
}

// ---------------------------------------------------------------------------
// Integration

namespace {

// Left-trivialized inverse derivative of exp truncated at fourth order:
// dexp^{-1}_{-u}(w) = w + 1/2 [u, w] + 1/12 [u, [u, w]].
AlgebraElement dexpinv(const GroupTag& tag, const AlgebraElement& u, const AlgebraElement& w) {
  if (tag.kind == GroupKind::Torus) return w;
  const AlgebraElement uw = ad(tag, u, w);
  return w + 0.5 * uw + ad(tag, u, uw) / 12.0;
}

}  // namespace

std::vector<GroupElement> integrate_body_velocity(
    const GroupElement& start, const std::function<AlgebraElement(double)>& velocity, double s0,
    double s1, int steps) {
  if (steps < 1) throw ValidationError("steps must be >= 1");
  const GroupTag& tag = start.tag();
  const double h = (s1 - s0) / steps;

  std::vector<GroupElement> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(start);
  GroupElement g = start;
  for (int n = 0; n < steps; ++n) {
    const double s = s0 + n * h;
    const AlgebraElement k1 = h * velocity(s);
    const AlgebraElement k2 = h * dexpinv(tag, 0.5 * k1, velocity(s + 0.5 * h));
    const AlgebraElement k3 = h * dexpinv(tag, 0.5 * k2, velocity(s + 0.5 * h));
    const AlgebraElement k4 = h * dexpinv(tag, k3, velocity(s + h));
    g = mul(g, exp_alg(tag, (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0));
    out.push_back(g);
  }
  return out;
}

std::vector<GroupElement> integrate_geodesic(const GroupElement& start, const AlgebraElement& x0,
                                             int steps) {
  if (steps < 1) throw ValidationError("steps must be >= 1");
  const GroupTag& tag = start.tag();
  require_algebra_dim(tag, x0);
  const MetricData metric(tag);
  const double h = 1.0 / steps;
  auto accel = [&](const AlgebraElement& w) -> AlgebraElement { return -metric.christoffel_contract(w); };

  std::vector<GroupElement> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(start);
  GroupElement g = start;
  AlgebraElement w = x0;
  for (int n = 0; n < steps; ++n) {
    // Stage velocities from classical RK4 on the Euler-Arnold equation.
    const AlgebraElement w1 = w;
    const AlgebraElement l1 = h * accel(w1);
    const AlgebraElement w2 = w + 0.5 * l1;
    const AlgebraElement l2 = h * accel(w2);
    const AlgebraElement w3 = w + 0.5 * l2;
    const AlgebraElement l3 = h * accel(w3);
    const AlgebraElement w4 = w + l3;
    const AlgebraElement l4 = h * accel(w4);

    const AlgebraElement k1 = h * w1;
    const AlgebraElement k2 = h * dexpinv(tag, 0.5 * k1, w2);
    const AlgebraElement k3 = h * dexpinv(tag, 0.5 * k2, w3);
    const AlgebraElement k4 = h * dexpinv(tag, k3, w4);

    g = mul(g, exp_alg(tag, (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0));
    w += (l1 + 2.0 * l2 + 2.0 * l3 + l4) / 6.0;
    out.push_back(g);
  }
  return out;
}

GroupElement geodesic_point(const GroupElement& g, const GroupElement& h, double lambda) {
  require_same_tag(g, h);
  return mul(g, exp_alg(g.tag(), lambda * log_group(mul(inv(g), h))));
}

// ---------------------------------------------------------------------------
// Heisenberg curves

void HeisenbergGeodesicParams::validate() const {
  if (a.size() == 0 || a.size() != b.size()) throw ValidationError("a and b must have equal non-zero size");
  const double norm = std::sqrt(a.squaredNorm() + b.squaredNorm());
  if (std::abs(norm - 1.0) > 1e-12) throw ValidationError("|a + ib| must equal 1");
  if (!(r > 0.0)) throw ValidationError("r must be positive");
  if (!std::isfinite(v)) throw ValidationError("v must be finite");
}

GroupElement heisenberg_geodesic(const HeisenbergGeodesicParams& p, double s) {
  p.validate();
  if (p.v == 0.0) return GroupElement::heisenberg(p.a * s, p.b * s, 0.0);
  const double phase = p.v * s / p.r;
  const double scale = p.r / p.v;
  const double one_minus_cos = 1.0 - std::cos(phase);
  const double sin_phase = std::sin(phase);
  const Eigen::VectorXd xi = scale * (p.b * one_minus_cos + p.a * sin_phase);
  const Eigen::VectorXd eta = scale * (-p.a * one_minus_cos + p.b * sin_phase);
  const double t = 2.0 * p.r * p.r / (p.v * p.v) * (phase - sin_phase);
  return GroupElement::heisenberg(xi, eta, t);
}

Eigen::VectorXd heisenberg_geodesic_velocity(const HeisenbergGeodesicParams& p, double s) {
  p.validate();
  const int n = static_cast<int>(p.a.size());
  Eigen::VectorXd out(2 * n + 1);
  if (p.v == 0.0) {
    out << p.a, p.b, 0.0;
    return out;
  }
  const double phase = p.v * s / p.r;
  const double c = std::cos(phase);
  const double sn = std::sin(phase);
  out << p.b * sn + p.a * c, -p.a * sn + p.b * c, 2.0 * p.r / p.v * (1.0 - c);
  return out;
}

HeisenbergGeodesicParams heisenberg_vertical_geodesic(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                                      double t) {
  if (t == 0.0) throw ValidationError("target [0, t] must have t != 0");
  HeisenbergGeodesicParams p{a, b, t > 0.0 ? 2.0 * kPi : -2.0 * kPi, std::sqrt(kPi * std::abs(t))};
  p.validate();
  return p;
}

}  // namespace pathflow
