#include "pathflow/bundle_io.hpp"
#include "pathflow/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace pathflow;

namespace {

EmpiricalMeasure sample_measure(const GroupTag& tag, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<DiscretePath> paths;
  for (int i = 0; i < n; ++i) paths.push_back(sample_brownian_path(tag, 12, rng));
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = i + 1.0;
  return {std::move(paths), w / w.sum()};
}

}  // namespace

TEST_CASE("format_double reparses exactly") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(u(rng)));
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("bundle round trip is exact") {
  for (auto tag : {GroupTag::torus(2), GroupTag::so3(), GroupTag::heisenberg(1)}) {
    const auto m = sample_measure(tag, 5, 3);
    const auto back = bundle_from_json(bundle_to_json(m));
    REQUIRE(back.size() == m.size());
    CHECK(back.tag() == m.tag());
    CHECK(back.grid_size() == m.grid_size());
    CHECK(back.weights() == m.weights());
    for (std::size_t i = 0; i < m.size(); ++i)
      for (int k = 0; k <= m.grid_size(); ++k)
        CHECK(back.support()[i][k].coords() == m.support()[i][k].coords());
    CHECK(bundle_to_json(back) == bundle_to_json(m));
  }
}

TEST_CASE("same seed gives byte-identical files") {
  const auto dir = std::filesystem::temp_directory_path() / "pathflow_bundle_test";
  std::filesystem::create_directories(dir);
  write_bundle(dir / "a.json", sample_measure(GroupTag::so3(), 4, 7));
  write_bundle(dir / "b.json", sample_measure(GroupTag::so3(), 4, 7));
  CHECK(read_text(dir / "a.json") == read_text(dir / "b.json"));
  CHECK(read_bundle(dir / "a.json").size() == 4);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_bundle(dir / "missing.json"), ValidationError);
  CHECK_THROWS_AS(write_text(dir / "no" / "such" / "dir.json", "x"), ValidationError);
}

TEST_CASE("schema violations are validation errors") {
  const std::string good = bundle_to_json(sample_measure(GroupTag::torus(1), 2, 1));
  CHECK_NOTHROW(bundle_from_json(good));
  CHECK_THROWS_AS(bundle_from_json("{"), ValidationError);
  CHECK_THROWS_AS(bundle_from_json("{}"), ValidationError);
  CHECK_THROWS_AS(bundle_from_json(R"({"format": 2, "group": {"tag": "torus", "dim": 1}, "grid": 1,
                                       "weights": [1], "paths": [[[0], [0.1]]]})"),
                  ValidationError);
  CHECK_THROWS_AS(bundle_from_json(R"({"format": 1, "group": {"tag": "klein", "dim": 1}, "grid": 1,
                                       "weights": [1], "paths": [[[0], [0.1]]]})"),
                  ValidationError);
  // wrong point count, wrong width, nonzero start, bad weights
  CHECK_THROWS_AS(bundle_from_json(R"({"format": 1, "group": {"tag": "torus", "dim": 1}, "grid": 2,
                                       "weights": [1], "paths": [[[0], [0.1]]]})"),
                  ValidationError);
  CHECK_THROWS_AS(bundle_from_json(R"({"format": 1, "group": {"tag": "torus", "dim": 1}, "grid": 1,
                                       "weights": [1], "paths": [[[0, 0], [0.1, 0]]]})"),
                  ValidationError);
  CHECK_THROWS_AS(bundle_from_json(R"({"format": 1, "group": {"tag": "torus", "dim": 1}, "grid": 1,
                                       "weights": [1], "paths": [[[0.2], [0.1]]]})"),
                  ValidationError);
  CHECK_THROWS_AS(bundle_from_json(R"({"format": 1, "group": {"tag": "torus", "dim": 1}, "grid": 1,
                                       "weights": [0.5], "paths": [[[0], [0.1]]]})"),
                  ValidationError);
  CHECK_THROWS_AS(bundle_from_json(R"({"format": 1, "group": {"tag": "torus", "dim": 1}, "grid": 1,
                                       "weights": ["a"], "paths": [[[0], [0.1]]]})"),
                  ValidationError);
}

TEST_CASE("coupling and potential writers") {
  Coupling c{Eigen::MatrixXd::Zero(2, 3)};
  c.plan(0, 2) = 0.5;
  c.plan(1, 0) = 0.25;
  c.plan(1, 1) = 0.25;
  CHECK(coupling_csv(c) == "i,j,mass\n0,2,0.5\n1,0,0.25\n1,1,0.25\n");

  DualPotentials d{Eigen::Vector2d(0.0, 1.5), Eigen::Vector3d(-1.0, 0.25, 2.0), 2.0};
  CHECK(potentials_json(d) == "{\"p\": 2, \"phi\": [0, 1.5], \"psi\": [-1, 0.25, 2]}\n");
}
