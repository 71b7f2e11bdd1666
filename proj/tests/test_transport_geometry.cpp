#include "pathflow/errors.hpp"
#include "pathflow/transport_geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace pathflow;
using std::numbers::pi;

namespace {

GroupElement angle(double a) { return GroupElement::torus(Eigen::VectorXd::Constant(1, a)); }

DiscretePath shifted(const DiscretePath& p, double c) {
  std::vector<GroupElement> pts;
  const auto dim = p[0].coords().size();
  const auto offset = GroupElement::torus(Eigen::VectorXd::Constant(dim, c));
  for (const auto& g : p.points()) pts.push_back(mul(g, offset));
  pts.front() = GroupElement::torus(Eigen::VectorXd::Zero(dim));
  return DiscretePath(std::move(pts));
}

// -p d^(p-2) sum_k w_k <V_k, h_k> with V_k read off the torus angles directly.
double torus_first_variation(const DiscretePath& g, const DiscretePath& s, const CameronMartinVector& h, double p) {
  const int n = g.grid_size();
  double d2 = 0.0, pair = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 0.5 / n : 1.0 / n;
    Eigen::VectorXd v = s[k].coords() - g[k].coords();
    for (auto& x : v) x = wrap_angle(x);
    d2 += w * v.squaredNorm();
    pair += w * v.dot(h[k]);
  }
  return -p * std::pow(std::sqrt(d2), p - 2.0) * pair;
}

CameronMartinVector smooth_h(int n, int dim, double phase) {
  std::vector<AlgebraElement> v;
  for (int k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / n;
    AlgebraElement x(dim);
    for (int a = 0; a < dim; ++a) x(a) = std::sin((a + 1) * pi * t / 2 + phase * t) * t;
    v.push_back(x);
  }
  return {std::move(v), false};
}

double directional_fd(const CTransformPotential& phi, const DiscretePath& g, const CameronMartinVector& h, double step) {
  return (phi(perturb(g, h, step)) - phi(perturb(g, h, -step))) / (2 * step);
}

}  // namespace

TEST_CASE("displacement field") {
  std::mt19937_64 rng(1);
  const auto g = sample_brownian_path(GroupTag::torus(1), 8, rng);
  for (const auto& v : displacement_field(g, g).vectors) CHECK(v.norm() == 0.0);
  const auto f = displacement_field(g, shifted(g, 0.9));
  CHECK(f.vectors[0].norm() == 0.0);
  for (int k = 1; k <= 8; ++k) CHECK(f.vectors[k](0) == doctest::Approx(0.9));

  for (int trial = 0; trial < 20; ++trial) {
    const auto a = sample_brownian_path(GroupTag::so3(), 16, rng);
    const auto b = sample_brownian_path(GroupTag::so3(), 16, rng);
    const auto field = displacement_field(a, b);
    for (int k = 0; k <= 16; ++k) {
      const Eigen::Matrix3d lhs = exp_alg(GroupTag::so3(), field.vectors[k]).rotation();
      const Eigen::Matrix3d rhs = a[k].rotation().transpose() * b[k].rotation();
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
  CHECK(has_cut_pair(g, shifted(g, pi)));
  CHECK_FALSE(has_cut_pair(g, shifted(g, 1.0)));
}

TEST_CASE("path interpolation") {
  std::mt19937_64 rng(2);
  const auto g = sample_brownian_path(GroupTag::torus(1), 8, rng);
  const auto h = shifted(g, 1.2);
  CHECK(d_uniform(interpolate_path(g, h, 0.0), g) <= 1e-10);
  CHECK(d_uniform(interpolate_path(g, h, 1.0), h) <= 1e-10);
  CHECK(d_uniform(interpolate_path(g, h, 0.5), shifted(g, 0.6)) <= 1e-12);
  CHECK_THROWS_AS(interpolate_path(g, h, 1.5), ValidationError);

  for (int trial = 0; trial < 50; ++trial) {
    const auto a = sample_brownian_path(GroupTag::so3(), 16, rng);
    const auto b = sample_brownian_path(GroupTag::so3(), 16, rng);
    if (has_cut_pair(a, b)) continue;
    const double d = d_L2(a, b);
    for (double l : {0.25, 0.5, 0.75}) {
      const auto u = interpolate_path(a, b, l);
      CHECK(std::abs(d_L2(a, u) - l * d) <= 1e-10);
      CHECK(std::abs(d_L2(u, b) - (1 - l) * d) <= 1e-10);
    }
  }
}

TEST_CASE("measure interpolation") {
  std::mt19937_64 rng(3);
  std::vector<DiscretePath> s, t;
  for (int i = 0; i < 8; ++i) s.push_back(sample_brownian_path(GroupTag::torus(2), 16, rng));
  for (int i = 0; i < 8; ++i) t.push_back(sample_brownian_path(GroupTag::torus(2), 16, rng));
  const auto src = EmpiricalMeasure::uniform(s), tgt = EmpiricalMeasure::uniform(t);
  const auto sol = solve_exact(cost_matrix(src, tgt, 2.0), src.weights(), tgt.weights());

  const auto at0 = interpolate_measure(src, tgt, sol.coupling, 0.0);
  const auto at1 = interpolate_measure(src, tgt, sol.coupling, 1.0);
  CHECK(solve_exact(cost_matrix(src, at0, 2.0), src.weights(), at0.weights()).value <= 1e-20);
  CHECK(solve_exact(cost_matrix(tgt, at1, 2.0), tgt.weights(), at1.weights()).value <= 1e-20);

  const double w = std::sqrt(sol.value);
  const auto mid = interpolate_measure(src, tgt, sol.coupling, 0.5);
  const double half = std::sqrt(solve_exact(cost_matrix(src, mid, 2.0), src.weights(), mid.weights()).value);
  CHECK(std::abs(half - 0.5 * w) <= 1e-8 * w);

  const auto sched = interpolate_schedule(src, tgt, {0.75, 0.0, 0.25});
  CHECK(sched.lambdas == std::vector<double>{0.0, 0.25, 0.75});
  CHECK(sched.distances[0] == doctest::Approx(0.0));
  CHECK(std::abs(sched.distances[2] - 0.75 * w) <= 1e-8 * w);

  Coupling bad = sol.coupling;
  bad.plan(0, 0) += 0.1;
  CHECK_THROWS_AS(interpolate_measure(src, tgt, bad, 0.5), ValidationError);
}

TEST_CASE("first variation matches an independent torus evaluation") {
  std::mt19937_64 rng(4);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto g = sample_brownian_path(GroupTag::torus(2), 16, rng);
    const auto s = sample_brownian_path(GroupTag::torus(2), 16, rng);
    const auto h = smooth_h(16, 2, 0.3);
    CHECK(first_variation(g, s, h, p) == doctest::Approx(torus_first_variation(g, s, h, p)).epsilon(1e-12));
  }
}

TEST_CASE("potential gradient for a Dirac target") {
  std::mt19937_64 rng(5);
  for (double p : {2.0, 3.0, 1.5}) {
    for (auto tag : {GroupTag::torus(2), GroupTag::so3()}) {
      const auto g = sample_brownian_path(tag, 16, rng);
      const auto s = sample_brownian_path(tag, 16, rng);
      REQUIRE_FALSE(has_cut_pair(g, s));
      const CTransformPotential phi({s}, Eigen::VectorXd::Constant(1, 0.4), p);
      CHECK(phi(g) == doctest::Approx(std::pow(d_L2(g, s), p) - 0.4));
      for (double phase : {0.0, 1.0, 2.5}) {
        const auto h = smooth_h(16, tag.algebra_dim(), phase);
        const double exact = first_variation(g, s, h, p);
        const double e3 = std::abs(directional_fd(phi, g, h, 1e-3) - exact);
        const double e4 = std::abs(directional_fd(phi, g, h, 1e-4) - exact);
        CHECK(e4 <= 1e-2 * std::abs(exact));
        CHECK(e4 <= std::max(e3, 1e-9 * std::abs(exact)));
      }
    }
  }

  const auto g = sample_brownian_path(GroupTag::torus(2), 8, rng);
  const CTransformPotential phi({sample_brownian_path(GroupTag::torus(2), 8, rng)}, Eigen::VectorXd::Zero(1), 2.0);
  const auto zero = CameronMartinVector::zero(8, 2, false);
  CHECK(directional_fd(phi, g, zero, 1e-4) == 0.0);
  CHECK(potential_gradient(phi, g, {zero, smooth_h(8, 2, 0.0)}).directional[0] == 0.0);
  CHECK_THROWS_AS(potential_gradient(phi, g, hat_basis(8, 2, false), 1e-13), ValidationError);
}

TEST_CASE("gradient identity at strictly assigned atoms") {
  std::mt19937_64 rng(6);
  for (double p : {1.5, 2.0, 3.0}) {
    std::vector<DiscretePath> s, t;
    for (int i = 0; i < 4; ++i) s.push_back(sample_brownian_path(GroupTag::so3(), 16, rng));
    for (int i = 0; i < 4; ++i) t.push_back(sample_brownian_path(GroupTag::so3(), 16, rng));
    const auto src = EmpiricalMeasure::uniform(s), tgt = EmpiricalMeasure::uniform(t);
    const CostMatrix cost = cost_matrix(src, tgt, p);
    const auto sol = solve_exact(cost, src.weights(), tgt.weights());
    const auto dual = strict_dual_from_primal(cost, sol.coupling);
    const CTransformPotential phi(t, dual.psi, p);
    for (int i = 0; i < 4; ++i) {
      const auto j = static_cast<std::size_t>(sol.assignment[static_cast<std::size_t>(i)]);
      REQUIRE(phi.argmin(s[static_cast<std::size_t>(i)]) == j);
      const auto h = smooth_h(16, 3, 0.7 * i);
      const double exact = first_variation(s[static_cast<std::size_t>(i)], t[j], h, p);
      CHECK(std::abs(directional_fd(phi, s[static_cast<std::size_t>(i)], h, 1e-4) - exact) <=
            1e-2 * std::abs(exact));
    }
  }
}

TEST_CASE("two active targets with a differentiable potential are equidistant") {
  // If phi is differentiable where two targets are active, their first
  // variations coincide, which forces equal d^(p-1) |V|. Duplicate targets
  // give such a tie; a perturbed duplicate breaks differentiability.
  std::mt19937_64 rng(7);
  const double p = 3.0;
  const auto g = sample_brownian_path(GroupTag::torus(2), 16, rng);
  const auto s = sample_brownian_path(GroupTag::torus(2), 16, rng);
  const auto h = smooth_h(16, 2, 0.4);
  const double step = 1e-6;

  const CTransformPotential tie({s, s}, Eigen::VectorXd::Zero(2), p);
  const double right = (tie(perturb(g, h, step)) - tie(g)) / step;
  const double left = (tie(g) - tie(perturb(g, h, -step))) / step;
  CHECK(std::abs(right - left) <= 1e-4 * std::abs(right));
  CHECK(std::pow(d_L2(g, s), 2 * (p - 1)) == std::pow(d_L2(g, tie.targets()[1]), 2 * (p - 1)));

  const auto s2 = shifted(s, 0.3);
  const Eigen::Vector2d psi(0.0, std::pow(d_L2(g, s2), p) - std::pow(d_L2(g, s), p));
  const CTransformPotential kink({s, s2}, psi, p);
  const double r2 = (kink(perturb(g, h, step)) - kink(g)) / step;
  const double l2 = (kink(g) - kink(perturb(g, h, -step))) / step;
  const double gap = std::abs(std::pow(d_L2(g, s), 2 * (p - 1)) - std::pow(d_L2(g, s2), 2 * (p - 1)));
  CHECK(gap > 1e-3);
  CHECK(std::abs(r2 - l2) > 1e-3);
}

TEST_CASE("explicit map reconstruction") {
  SUBCASE("zero gradient returns the source path") {
    std::mt19937_64 rng(8);
    const auto g = sample_brownian_path(GroupTag::so3(), 8, rng);
    const auto rec = reconstruct_map(CameronMartinVector::zero(8, 3, false), g);
    for (int k = 1; k < 8; ++k) CHECK(rec[k].coords() == g[k].coords());
  }
  SUBCASE("constant offset: g(t) = -c t (1 - t) gives V = c") {
    const double c = 0.8;
    const int n = 16;
    std::vector<AlgebraElement> vals;
    for (int k = 0; k <= n; ++k) {
      const double t = static_cast<double>(k) / n;
      vals.push_back(AlgebraElement::Constant(1, -c * t * (1 - t)));
    }
    const auto field = displacement_from_gradient(CameronMartinVector(vals, false));
    for (int k = 1; k < n; ++k) CHECK(std::abs(field.vectors[k](0) - c) <= 1e-6);
  }
  SUBCASE("Dirac target on the torus, N = 32") {
    std::mt19937_64 rng(9);
    const int n = 32;
    const auto g = sample_brownian_path(GroupTag::torus(2), n, rng);
    const auto s = sample_brownian_path(GroupTag::torus(2), n, rng);
    REQUIRE_FALSE(has_cut_pair(g, s));
    const CTransformPotential phi({s}, Eigen::VectorXd::Zero(1), 2.0);
    const auto grad = potential_gradient(phi, g, hat_basis(n, 2, false), 1e-4);
    const auto rec = reconstruct_map(grad.gradient, g);
    for (int k = 1; k < n; ++k) CHECK(distance(rec[k], s[k]) <= 1e-3);
  }
  SUBCASE("short grids are rejected") {
    CHECK_THROWS_AS(displacement_from_gradient(CameronMartinVector::zero(3, 1, false)), ValidationError);
  }
}

TEST_CASE("geodesic reconstruction from V") {
  CHECK(reconstruct_geodesic_from_V(GroupTag::so3(), AlgebraElement::Zero(3), 10).front().is_identity());
  const auto torus = reconstruct_geodesic_from_V(GroupTag::torus(1), AlgebraElement::Constant(1, 0.7), 100);
  CHECK(torus.front().coords()(0) == doctest::Approx(-0.7));
  CHECK(torus.back().is_identity());
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    AlgebraElement v(3);
    for (auto& x : v) x = nd(rng);
    v *= 3.0 / (1.0 + v.norm());
    const auto v0 = reconstruct_geodesic_from_V(GroupTag::so3(), v, 1000).front();
    CHECK(distance(mul(v0, exp_alg(GroupTag::so3(), v)), GroupElement::identity(GroupTag::so3())) <= 1e-8);
  }
}

TEST_CASE("mollifier extraction") {
  const int n = 400;
  auto field_of = [&](auto fn) {
    DisplacementField f;
    for (int k = 0; k <= n; ++k) f.vectors.push_back(AlgebraElement::Constant(1, fn(static_cast<double>(k) / n)));
    return f;
  };
  const std::vector<double> eps{0.1, 0.05, 0.025};

  const auto constant = mollifier_extract(field_of([](double) { return 1.3; }), 0.4, eps);
  for (const auto& e : constant.estimates) CHECK(e(0) == doctest::Approx(1.3).epsilon(1e-14));

  const auto linear = mollifier_extract(field_of([](double t) { return 2.0 * t - 0.5; }), 0.5, eps);
  for (const auto& e : linear.estimates) CHECK(std::abs(e(0) - 0.5) <= 1e-12);

  const auto curved = mollifier_extract(field_of([](double t) { return std::sin(3 * t); }), 0.5, eps);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    CHECK(std::abs(curved.estimates[i](0) - std::sin(1.5)) <= 9.0 * eps[i] * eps[i]);
  }

  const auto edge = mollifier_extract(field_of([](double t) { return std::cos(t); }), 0.0, eps);
  CHECK(std::abs(edge.estimates[2](0) - 1.0) < std::abs(edge.estimates[0](0) - 1.0));
  CHECK(std::abs(edge.limit(0) - 1.0) <= 1e-3);

  SUBCASE("gradient form agrees with the field form") {
    const int m = 64;
    const double c = 0.6;
    std::vector<AlgebraElement> vals;
    for (int k = 0; k <= m; ++k) {
      const double t = static_cast<double>(k) / m;
      vals.push_back(AlgebraElement::Constant(1, -c * t * (1 - t)));
    }
    const auto est = mollifier_extract(CameronMartinVector(vals, false), 0.5, {0.2, 0.1});
    for (const auto& e : est.estimates) CHECK(e(0) == doctest::Approx(c).epsilon(1e-10));
  }
}
