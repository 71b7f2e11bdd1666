#include "pathflow/path_space.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pathflow {

// ---------------------------------------------------------------------------
// Types

DiscretePath::DiscretePath(std::vector<GroupElement> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ValidationError("a path needs at least two grid points");
  if (!points_.front().is_identity()) throw ValidationError("a path must start at the identity");
  const GroupTag& tag = points_.front().tag();
  for (const auto& g : points_) {
    if (!(g.tag() == tag)) throw ValidationError("path points must share one group tag");
  }
}

bool DiscretePath::operator==(const DiscretePath& other) const {
  if (points_.size() != other.points_.size()) return false;
  if (!(tag() == other.tag())) return false;
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (points_[k].coords() != other.points_[k].coords()) return false;
  }
  return true;
}

DiscreteLoop::DiscreteLoop(std::vector<GroupElement> points, double endpoint_tol)
    : DiscretePath(std::move(points)) {
  GroupElement e = GroupElement::identity(tag());
  const double gap = (points_.back().coords() - e.coords()).cwiseAbs().maxCoeff();
  if (gap > endpoint_tol) throw ValidationError("a loop must end at the identity");
  points_.back() = std::move(e);
}

CameronMartinVector::CameronMartinVector(std::vector<AlgebraElement> values, bool loop)
    : values_(std::move(values)), loop_(loop) {
  if (values_.size() < 2) throw ValidationError("a Cameron-Martin vector needs at least two nodes");
  const auto d = values_.front().size();
  for (const auto& v : values_) {
    if (v.size() != d) throw ValidationError("Cameron-Martin values must share one dimension");
    if (!v.allFinite()) throw ValidationError("Cameron-Martin values must be finite");
  }
  if (!values_.front().isZero(0.0)) throw ValidationError("h(0) must be zero");
  if (loop_ && !values_.back().isZero(0.0)) throw ValidationError("loop h(1) must be zero");
}

CameronMartinVector CameronMartinVector::zero(int grid_size, int algebra_dim, bool loop) {
  return CameronMartinVector(
      std::vector<AlgebraElement>(static_cast<std::size_t>(grid_size) + 1, AlgebraElement::Zero(algebra_dim)),
      loop);
}

double CameronMartinVector::inner(const CameronMartinVector& a, const CameronMartinVector& b) {
  if (a.values_.size() != b.values_.size() || a.algebra_dim() != b.algebra_dim()) {
    throw ValidationError("Cameron-Martin vectors live on different grids");
  }
  const int n = a.grid_size();
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    acc += (a.values_[k + 1] - a.values_[k]).dot(b.values_[k + 1] - b.values_[k]);
  }
  return acc * n;
}

EmpiricalMeasure::EmpiricalMeasure(std::vector<DiscretePath> support, Eigen::VectorXd weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.empty()) throw ValidationError("a measure needs at least one atom");
  if (static_cast<std::size_t>(weights_.size()) != support_.size()) {
    throw ValidationError("weights and support differ in size");
  }
  for (const auto& p : support_) {
    if (p.grid_size() != support_.front().grid_size() || !(p.tag() == support_.front().tag())) {
      throw ValidationError("all atoms must share grid and group");
    }
  }
  if ((weights_.array() <= 0.0).any() || !weights_.allFinite()) {
    throw ValidationError("weights must be positive");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-12) throw ValidationError("weights must sum to 1");
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<DiscretePath> support) {
  const auto n = static_cast<Eigen::Index>(support.size());
  if (n == 0) throw ValidationError("a measure needs at least one atom");
  return {std::move(support), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
}

EmpiricalMeasure EmpiricalMeasure::merged() const {
  std::vector<DiscretePath> support;
  std::vector<double> weights;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    auto it = std::find(support.begin(), support.end(), support_[i]);
    if (it == support.end()) {
      support.push_back(support_[i]);
      weights.push_back(weights_(static_cast<Eigen::Index>(i)));
    } else {
      weights[static_cast<std::size_t>(it - support.begin())] += weights_(static_cast<Eigen::Index>(i));
    }
  }
  return {std::move(support), Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()))};
}

// ---------------------------------------------------------------------------
// Distances

double trapezoid_weight(int k, int grid_size) {
  const double w = 1.0 / grid_size;
  return (k == 0 || k == grid_size) ? 0.5 * w : w;
}

void require_same_grid(const DiscretePath& a, const DiscretePath& b) {
  if (a.grid_size() != b.grid_size()) throw ValidationError("paths live on different grids");
  if (!(a.tag() == b.tag())) throw ValidationError("paths live on different groups");
}

double d_uniform(const DiscretePath& a, const DiscretePath& b) {
  require_same_grid(a, b);
  double best = 0.0;
  for (int k = 0; k <= a.grid_size(); ++k) best = std::max(best, distance(a[k], b[k]));
  return best;
}

double d_L2(const DiscretePath& a, const DiscretePath& b) {
  require_same_grid(a, b);
  const int n = a.grid_size();
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double r = distance(a[k], b[k]);
    acc += trapezoid_weight(k, n) * r * r;
  }
  return std::sqrt(acc);
}

double d_CM(const DiscretePath& a, const DiscretePath& b) {
  require_same_grid(a, b);
  if (a.tag().kind == GroupKind::Heisenberg) {
    throw ValidationError("d_CM is not available on the heisenberg group");
  }
  // Canonical argument order makes the result symmetric in floating point.
  int first_diff = 0;
  while (first_diff <= a.grid_size() && a[first_diff].coords() == b[first_diff].coords()) ++first_diff;
  if (first_diff > a.grid_size()) return 0.0;
  const auto& x = a[first_diff].coords();
  const auto& y = b[first_diff].coords();
  if (std::lexicographical_compare(y.begin(), y.end(), x.begin(), x.end())) return d_CM(b, a);
  const int n = a.grid_size();
  GroupElement prev = mul(inv(a[0]), b[0]);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    GroupElement next = mul(inv(a[k + 1]), b[k + 1]);
    acc += log_group(mul(inv(prev), next)).squaredNorm();
    prev = std::move(next);
  }
  return std::sqrt(acc * n);
}

DiscretePath left_translate(const DiscretePath& ell, const DiscretePath& gamma) {
  require_same_grid(ell, gamma);
  std::vector<GroupElement> pts;
  pts.reserve(gamma.points().size());
  for (int k = 0; k <= gamma.grid_size(); ++k) pts.push_back(mul(ell[k], gamma[k]));
  return DiscretePath(std::move(pts));
}

DiscretePath piecewise_geodesic(const std::vector<GroupElement>& knots, int grid_size) {
  if (knots.size() < 2) throw ValidationError("need at least two knots");
  const int segments = static_cast<int>(knots.size()) - 1;
  if (grid_size % segments != 0) throw ValidationError("grid size must be a multiple of the segment count");
  const int per = grid_size / segments;
  std::vector<GroupElement> pts;
  pts.reserve(static_cast<std::size_t>(grid_size) + 1);
  pts.push_back(knots.front());
  for (int s = 0; s < segments; ++s) {
    const AlgebraElement step = log_group(mul(inv(knots[s]), knots[s + 1]));
    for (int j = 1; j <= per; ++j) {
      pts.push_back(j == per ? knots[s + 1]
                             : mul(knots[s], exp_alg(knots[s].tag(), (static_cast<double>(j) / per) * step)));
    }
  }
  return DiscretePath(std::move(pts));
}

// ---------------------------------------------------------------------------
// Sampling

GroupElement random_element(const GroupTag& tag, std::mt19937_64& rng) {
  switch (tag.kind) {
    case GroupKind::Torus: {
      std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
      Eigen::VectorXd a(tag.dim);
      for (auto& x : a) x = angle(rng);
      return GroupElement::torus(a);
    }
    case GroupKind::SO3: {
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
      q.normalize();
      return GroupElement::so3(q.toRotationMatrix());
    }
    case GroupKind::Heisenberg: {
      std::normal_distribution<double> normal(0.0, 1.0);
      AlgebraElement x(tag.algebra_dim());
      for (auto& c : x) c = normal(rng);
      return exp_alg(tag, x);
    }
  }
  throw ValidationError("unknown group kind");
}

DiscretePath random_piecewise_geodesic(const GroupTag& tag, int grid_size, int segments, double max_step,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int d = tag.algebra_dim();
  std::vector<GroupElement> knots{GroupElement::identity(tag)};
  for (int s = 0; s < segments; ++s) {
    AlgebraElement x(d);
    for (auto& c : x) c = normal(rng);
    x *= max_step * std::pow(unit(rng), 1.0 / d) / x.norm();
    knots.push_back(mul(knots.back(), exp_alg(tag, x)));
  }
  return piecewise_geodesic(knots, grid_size);
}

DiscretePath brownian_path_from_increments(const GroupTag& tag, const std::vector<AlgebraElement>& xi) {
  if (xi.empty()) throw ValidationError("grid size must be >= 1");
  const double scale = std::sqrt(1.0 / static_cast<double>(xi.size()));
  std::vector<GroupElement> pts;
  pts.reserve(xi.size() + 1);
  pts.push_back(GroupElement::identity(tag));
  for (const auto& x : xi) pts.push_back(mul(pts.back(), exp_alg(tag, scale * x)));
  return DiscretePath(std::move(pts));
}

namespace {

std::vector<AlgebraElement> gaussian_increments(int count, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<AlgebraElement> xi(static_cast<std::size_t>(count), AlgebraElement(dim));
  for (auto& x : xi)
    for (int a = 0; a < dim; ++a) x(a) = normal(rng);
  return xi;
}

}  // namespace

DiscretePath sample_brownian_path(const GroupTag& tag, int grid_size, std::mt19937_64& rng) {
  if (grid_size < 1) throw ValidationError("grid size must be >= 1");
  return brownian_path_from_increments(tag, gaussian_increments(grid_size, tag.algebra_dim(), rng));
}

DiscretePath sample_brownian_path(const GroupTag& tag, int grid_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_brownian_path(tag, grid_size, rng);
}

LoopMethod parse_loop_method(const std::string& name) {
  if (name == "torus-bridge") return LoopMethod::TorusBridge;
  if (name == "geodesic-correction") return LoopMethod::GeodesicCorrection;
  throw ValidationError("unknown loop method '" + name + "'");
}

std::string loop_method_name(LoopMethod method) {
  return method == LoopMethod::TorusBridge ? "torus-bridge" : "geodesic-correction";
}

DiscreteLoop geodesic_correction(const DiscretePath& path) {
  const int n = path.grid_size();
  const GroupTag& tag = path.tag();
  const AlgebraElement drift = log_group(path[static_cast<std::size_t>(n)]);
  std::vector<GroupElement> pts;
  pts.reserve(path.points().size());
  for (int k = 0; k <= n; ++k) pts.push_back(mul(path[k], exp_alg(tag, -path.time(k) * drift)));
  return DiscreteLoop(std::move(pts), 1e-12);
}

DiscreteLoop sample_loop(const GroupTag& tag, int grid_size, std::mt19937_64& rng, LoopMethod method) {
  if (grid_size < 2) throw ValidationError("loops need grid size >= 2");
  switch (method) {
    case LoopMethod::TorusBridge: {
      if (tag.kind != GroupKind::Torus) throw ValidationError("torus-bridge requires a torus group");
      const auto xi = gaussian_increments(grid_size, tag.dim, rng);
      const double scale = std::sqrt(1.0 / grid_size);
      // Unwrapped walk W_k, bridge B_k = W_k - t_k W_N.
      std::vector<Eigen::VectorXd> walk(static_cast<std::size_t>(grid_size) + 1, Eigen::VectorXd::Zero(tag.dim));
      for (int k = 0; k < grid_size; ++k) walk[k + 1] = walk[k] + scale * xi[k];
      std::vector<GroupElement> pts;
      pts.reserve(walk.size());
      for (int k = 0; k <= grid_size; ++k) {
        const double t = static_cast<double>(k) / grid_size;
        pts.push_back(GroupElement::torus(walk[k] - t * walk[grid_size]));
      }
      return DiscreteLoop(std::move(pts), 0.0);
    }
    case LoopMethod::GeodesicCorrection:
      return geodesic_correction(sample_brownian_path(tag, grid_size, rng));
  }
  throw ValidationError("unknown loop method");
}

DiscreteLoop sample_loop(const GroupTag& tag, int grid_size, std::uint64_t seed, LoopMethod method) {
  std::mt19937_64 rng(seed);
  return sample_loop(tag, grid_size, rng, method);
}

// ---------------------------------------------------------------------------
// Cylindrical gradient

double green_kernel(double s, double t) { return std::min(s, t) - s * t; }

std::vector<AlgebraElement> cylindrical_gradient_fd(const CylindricalFunction& f,
                                                    std::span<const GroupElement> points, double step) {
  std::vector<GroupElement> work(points.begin(), points.end());
  std::vector<AlgebraElement> grads;
  grads.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const GroupTag& tag = points[i].tag();
    const int d = tag.algebra_dim();
    AlgebraElement g(d);
    for (int a = 0; a < d; ++a) {
      work[i] = mul(points[i], exp_alg(tag, step * AlgebraElement::Unit(d, a)));
      const double fp = f.value(work);
      work[i] = mul(points[i], exp_alg(tag, -step * AlgebraElement::Unit(d, a)));
      const double fm = f.value(work);
      g(a) = (fp - fm) / (2.0 * step);
    }
    work[i] = points[i];
    grads.push_back(std::move(g));
  }
  return grads;
}

CameronMartinVector cylindrical_gradient(const CylindricalFunction& f, const DiscretePath& loop) {
  const int n = loop.grid_size();
  const int d = loop.tag().algebra_dim();
  std::vector<int> nodes;
  std::vector<GroupElement> pts;
  for (double theta : f.times) {
    const double scaled = theta * n;
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-9 || rounded < 0 || rounded > n) {
      throw ValidationError("cylindrical time " + std::to_string(theta) + " is not on the grid");
    }
    nodes.push_back(static_cast<int>(rounded));
    pts.push_back(loop[static_cast<std::size_t>(rounded)]);
  }
  const std::vector<AlgebraElement> grads = f.gradient ? f.gradient(pts) : cylindrical_gradient_fd(f, pts);
  if (grads.size() != pts.size()) throw ValidationError("gradient must have one entry per slot");

  std::vector<AlgebraElement> values(static_cast<std::size_t>(n) + 1, AlgebraElement::Zero(d));
  for (int k = 1; k < n; ++k) {
    const double t = static_cast<double>(k) / n;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      values[k] += green_kernel(static_cast<double>(nodes[i]) / n, t) * grads[i];
    }
  }
  return CameronMartinVector(std::move(values), true);
}

}  // namespace pathflow
