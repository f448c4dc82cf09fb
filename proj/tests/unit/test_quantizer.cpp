#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../support/clouds.hpp"
#include "../support/oracles.hpp"
#include "../support/specs.hpp"
#include "fracquant/error.hpp"
#include "fracquant/quantizer.hpp"

using namespace fracquant;

namespace {

const double kUniformUnit = 1.0 / (2.0 * std::sqrt(3.0));

const PointSet& dense_uniform() {
  static const PointSet cloud = fixtures::uniform_cloud(1000000, 1, 2024);
  return cloud;
}

std::vector<oracle::Point> to_points(const PointSet& cloud) {
  std::vector<oracle::Point> out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    out.emplace_back(cloud[i].begin(), cloud[i].end());
  return out;
}

}  // namespace

TEST_CASE("optimize: uniform n = 1 and n = 2") {
  const auto one = optimize(dense_uniform(), 1, 2.0);
  REQUIRE(one.points.size() == 1);
  CHECK(std::abs(one.points[0][0] - 0.5) < 0.003);
  CHECK(std::abs(one.distortion - 1.0 / std::sqrt(12.0)) < 0.003);

  const auto two = optimize(dense_uniform(), 2, 2.0);
  REQUIRE(two.points.size() == 2);
  CHECK(std::abs(two.points[0][0] - 0.25) < 0.005);
  CHECK(std::abs(two.points[1][0] - 0.75) < 0.005);
  CHECK(std::abs(two.distortion - 1.0 / std::sqrt(48.0)) < 0.003);
  CHECK(two.n_requested == 2);
  CHECK_FALSE(two.n_too_large);
}

TEST_CASE("optimize: Dirac clouds have zero error") {
  PointSet cloud(2);
  for (int i = 0; i < 50; ++i) cloud.push_back(std::vector<double>{0.3, -1.0});
  for (double r : {0.5, 1.0, 2.0, 3.0})
    for (std::size_t n : {1u, 2u, 5u}) {
      const auto cb = optimize(cloud, n, r);
      CHECK(cb.distortion == 0.0);
      CHECK(cb.points.size() == 1);
      CHECK(cb.n_too_large == (n > 1));
    }
  const auto curve = error_curve(cloud, 2.0, {1, 2, 4});
  for (const auto& p : curve.points) CHECK(p.error == 0.0);
}

TEST_CASE("optimize: n distinct points are reproduced exactly") {
  const auto cloud = fixtures::uniform_cloud(7, 2, 3);
  for (double r : {1.0, 2.0}) {
    const auto cb = optimize(cloud, 7, r);
    CHECK(cb.distortion == 0.0);
    CHECK(cb.points.size() == 7);
    CHECK_FALSE(cb.n_too_large);
    CHECK(optimize(cloud, 9, r).n_too_large);
  }
}

TEST_CASE("optimize: argument checks") {
  const auto cloud = fixtures::uniform_cloud(10, 1, 1);
  CHECK_THROWS_AS(optimize(cloud, 0, 2.0), Error);
  CHECK_THROWS_AS(optimize(cloud, 2, 0.0), Error);
  CHECK_THROWS_AS(optimize(PointSet(1), 2, 2.0), Error);
  PointSet bad(1);
  bad.push_back(std::vector<double>{std::nan("")});
  CHECK_THROWS_AS(optimize(bad, 1, 2.0), Error);
}

TEST_CASE("optimize: Lloyd trace is nonincreasing") {
  const auto line = fixtures::uniform_cloud(3000, 1, 8);
  const auto plane = fixtures::uniform_cloud(3000, 2, 9);
  for (const PointSet* cloud : {&line, &plane})
    for (double r : {1.0, 1.5, 2.0, 3.0}) {
      OptimizeOptions opts;
      opts.restarts = 1;
      const auto cb = optimize(*cloud, 9, r, opts);
      REQUIRE(cb.trace.size() >= 2);
      for (std::size_t i = 1; i < cb.trace.size(); ++i)
        CHECK(cb.trace[i] <= cb.trace[i - 1] * (1 + 1e-12));
      CHECK(std::pow(cb.distortion, r) <= cb.trace.back() * (1 + 1e-12));
    }
}

TEST_CASE("optimize: scale and translation equivariance") {
  const auto cloud = fixtures::uniform_cloud(5000, 2, 12);
  for (double r : {1.0, 2.0}) {
    const double base = optimize(cloud, 6, r).distortion;
    const double scaled = optimize(fixtures::transform(cloud, 3.5, 0.0), 6, r).distortion;
    const double moved = optimize(fixtures::transform(cloud, 1.0, -7.25), 6, r).distortion;
    CHECK(scaled / (3.5 * base) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(moved / base == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("optimize: deterministic across thread counts") {
  const auto m = Measure::create(fixtures::cantor());
  const auto cloud = sample(m, 20000, 0, 4).points;
  OptimizeOptions a, b;
  a.threads = 1;
  b.threads = 4;
  for (double r : {1.0, 2.0, 2.5}) {
    const auto x = optimize(cloud, 12, r, a);
    const auto y = optimize(cloud, 12, r, b);
    CHECK(x.points == y.points);
    CHECK(x.distortion == y.distortion);
    CHECK(x.best_restart == y.best_restart);
  }
}

TEST_CASE("optimize: orders below one are flagged stationary") {
  const auto cloud = fixtures::uniform_cloud(2000, 1, 5);
  const auto cb = optimize(cloud, 4, 0.5);
  CHECK(cb.stationary_only);
  CHECK(cb.distortion > 0.0);
  CHECK_FALSE(optimize(cloud, 4, 1.0).stationary_only);
}

TEST_CASE("optimize: small clouds match exhaustive clustering") {
  Rng rng(77);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t dim = 1 + trial % 2;
    const std::size_t m = 6 + rng.below(5);
    const auto cloud = fixtures::uniform_cloud(m, dim, 1000 + trial);
    for (double r : {1.0, 2.0})
      for (std::size_t n : {1u, 2u, 3u}) {
        const double exact = oracle::exhaustive_distortion(to_points(cloud), n, r);
        const double found = std::pow(optimize(cloud, n, r).distortion, r);
        CHECK(found == doctest::Approx(exact).epsilon(1e-9));
      }
  }
}

TEST_CASE("error curve: uniform closed form and monotonicity") {
  const auto curve = error_curve(dense_uniform(), 2.0, {1, 2, 4});
  const double expect[] = {0.2887, 0.1443, 0.0722};
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(curve.points[i].error / expect[i] - 1.0) < 0.03);

  const auto m = Measure::create(fixtures::cantor());
  const auto cloud = sample(m, 20000, 0, 1).points;
  const auto c2 = error_curve(cloud, 2.0, {1, 2, 3, 4, 6, 8, 12, 16});
  for (std::size_t i = 1; i < c2.points.size(); ++i)
    CHECK(c2.points[i].error <= c2.points[i - 1].error);
  CHECK(c2.codebooks.size() == c2.points.size());
  for (std::size_t i = 0; i < c2.points.size(); ++i)
    CHECK(c2.codebooks[i].points.size() <= c2.points[i].n);
}

TEST_CASE("mean power distance and nearest assignment") {
  PointSet cloud(1, {0.0, 1.0, 3.0});
  PointSet code(1, {0.0, 2.0});
  CHECK(mean_power_distance(cloud, code, 2.0) == doctest::Approx((0 + 1 + 1) / 3.0));
  CHECK(mean_power_distance(cloud, code, 1.0) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(mean_power_distance(cloud, PointSet(2, {0.0, 0.0}), 2.0), Error);
}

TEST_CASE("geometric mean error") {
  const auto& cloud = dense_uniform();
  const auto g = geometric_mean_error(cloud, PointSet(1, {0.5}));
  CHECK(std::abs(g.value / (1.0 / (2.0 * std::exp(1.0))) - 1.0) < 0.03);
  CHECK_FALSE(g.hit_floor);

  PointSet small(1, {0.1, 0.4, 0.9});
  const auto hit = geometric_mean_error(small, PointSet(1, {0.4}));
  CHECK(hit.hit_floor);
  CHECK(hit.zero_distance_count == 1);
  CHECK(hit.value < 1e-90);

  const auto cloud2 = fixtures::uniform_cloud(500, 2, 6);
  const PointSet code(2, {0.2, 0.3, 0.7, 0.6});
  const double before = geometric_mean_error(cloud2, code).value;
  const double after = geometric_mean_error(fixtures::transform(cloud2, 1.0, 4.0),
                                            fixtures::transform(code, 1.0, 4.0))
                           .value;
  CHECK(after == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("voronoi diagnostics") {
  const auto& cloud = dense_uniform();
  const auto one = optimize(cloud, 1, 2.0);
  const auto d1 = voronoi_diagnostics(cloud, one.points, 2.0);
  CHECK(d1.lower_ratio == 1.0);
  CHECK(d1.upper_ratio == 1.0);

  const auto two = optimize(cloud, 2, 2.0);
  const auto d2 = voronoi_diagnostics(cloud, two.points, 2.0);
  CHECK(std::abs(d2.lower_ratio - 1.0) < 0.05);
  CHECK(std::abs(d2.upper_ratio - 1.0) < 0.05);

  const auto m = Measure::create(fixtures::period_two());
  const auto c = sample(m, 30000, 0, 2).points;
  const auto cb = optimize(c, 13, 1.5);
  const auto d = voronoi_diagnostics(c, cb.points, 1.5);
  const double total = std::accumulate(d.contributions.begin(), d.contributions.end(), 0.0);
  CHECK(total == doctest::Approx(d.total).epsilon(1e-9));
  CHECK(d.total == doctest::Approx(std::pow(cb.distortion, 1.5)).epsilon(1e-9));
  CHECK(d.min <= d.mean);
  CHECK(d.mean <= d.max);
}

TEST_CASE("point density histogram") {
  const auto& cloud = dense_uniform();
  const Box box{{0.0}, {1.0}};
  const auto big = optimize(cloud, 100, 2.0);
  const auto h = point_density_histogram({big.points}, box, 10);
  REQUIRE(h.per_codebook.size() == 1);
  const auto& mass = h.per_codebook[0].mass;
  CHECK(std::accumulate(mass.begin(), mass.end(), 0.0) == doctest::Approx(1.0));
  for (double v : mass) CHECK(std::abs(v - 0.1) <= 0.02);
  CHECK(std::accumulate(h.pooled.mass.begin(), h.pooled.mass.end(), 0.0) ==
        doctest::Approx(1.0));

  PointSet dirac(1);
  for (int i = 0; i < 20; ++i) dirac.push_back(std::vector<double>{0.37});
  const auto cb = optimize(dirac, 4, 2.0);
  const auto hd = point_density_histogram({cb.points}, box, 10);
  CHECK(std::count_if(hd.pooled.mass.begin(), hd.pooled.mass.end(),
                      [](double v) { return v > 0; }) == 1);
  CHECK(hd.pooled.mass[3] == 1.0);
  CHECK(hd.bin(3).lower[0] == doctest::Approx(0.3));
  CHECK(hd.bin(3).upper[0] == doctest::Approx(0.4));

  const Box plane{{0.0, 0.0}, {1.0, 1.0}};
  const auto h2 = point_density_histogram({PointSet(2, {0.05, 0.95})}, plane, 10);
  CHECK(h2.pooled.mass.size() == 100);
  CHECK_THROWS_AS(point_density_histogram({big.points}, box, 0), Error);
}
