#include <doctest.h>

#include <cmath>

#include "../support/clouds.hpp"
#include "../support/specs.hpp"
#include "fracquant/analysis.hpp"
#include "fracquant/error.hpp"

using namespace fracquant;

namespace {

const double kLog23 = std::log(2.0) / std::log(3.0);

std::vector<CurveSample> power_law(double d, double c, std::size_t last = 1024) {
  std::vector<CurveSample> out;
  for (std::size_t n = 2; n <= last; n *= 2)
    out.emplace_back(n, c * std::pow(double(n), -1.0 / d));
  return out;
}

std::vector<std::size_t> dyadic(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> out;
  for (std::size_t n = lo; n <= hi; n *= 2) out.push_back(n);
  return out;
}

}  // namespace

TEST_CASE("fit: exact power laws") {
  const auto fit = dimension_fit(power_law(kLog23, 1.0));
  CHECK(std::abs(fit.slope - kLog23) < 1e-12);
  CHECK(fit.residual_sum < 1e-20);
  CHECK(fit.dropped == 2);
  CHECK(fit.n_first == 8);
  CHECK(fit.n_last == 1024);
  CHECK(fit.points_used == 8);

  for (double c : {1e-3, 0.7, 42.0})
    CHECK(std::abs(dimension_fit(power_law(2.0, c)).slope - 2.0) < 1e-12);
}

TEST_CASE("fit: invariant under rescaling e") {
  auto curve = power_law(1.3, 1.0);
  for (std::size_t i = 0; i < curve.size(); ++i)
    curve[i].second *= 1.0 + 0.05 * std::sin(double(i));
  const auto base = dimension_fit(curve);
  for (auto& p : curve) p.second *= 17.5;
  CHECK(std::abs(dimension_fit(curve).slope - base.slope) < 1e-12);
}

TEST_CASE("fit: drop is clamped to keep four points") {
  const std::vector<CurveSample> curve{{1, 1.0}, {2, 0.5}, {4, 0.25}, {8, 0.125}, {16, 0.0625}};
  const auto fit = dimension_fit(curve, 3);
  CHECK(fit.points_used == 4);
  CHECK(fit.dropped == 1);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit: rejects bad curves") {
  auto zero = power_law(1.0, 1.0);
  zero[3].second = 0.0;
  try {
    (void)dimension_fit(zero);
    FAIL("expected ZeroError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroError);
  }
  CHECK_THROWS_AS(dimension_fit({{1, 1.0}, {2, 0.5}, {4, 0.3}}), Error);
  auto unordered = power_law(1.0, 1.0);
  std::swap(unordered[2], unordered[3]);
  CHECK_THROWS_AS(dimension_fit(unordered), Error);
}

TEST_CASE("fit: uniform empirical curve has slope one") {
  const auto cloud = fixtures::uniform_cloud(200000, 1, 55);
  const auto curve = error_curve(cloud, 2.0, dyadic(2, 128));
  const auto fit = dimension_fit(curve_samples(curve));
  CHECK(std::abs(fit.slope - 1.0) < 0.05);

  const auto series = coefficient_series(curve_samples(curve), 1.0);
  double lo = 1e300, hi = 0.0;
  for (const auto& [n, v] : series.values)
    if (n >= 8) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  CHECK(hi / lo <= 1.2);
  CHECK(std::abs(series.values.back().second - 1.0 / (2.0 * std::sqrt(3.0))) < 0.01);
  CHECK(series.verdict == "consistent with positive finite coefficient");
}

TEST_CASE("coefficient series: super- and subcritical exponents") {
  const auto curve = power_law(kLog23, 1.0);
  const auto super = coefficient_series(curve, 2 * kLog23);
  const auto sub = coefficient_series(curve, kLog23 / 2);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(super.values[i].second < super.values[i - 1].second);
    CHECK(sub.values[i].second > sub.values[i - 1].second);
  }
  CHECK(sub.verdict == "inconsistent with positive finite coefficient");
  const auto exact = coefficient_series(curve, kLog23);
  CHECK(exact.ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(coefficient_series(curve, 0.0), Error);
}

TEST_CASE("report: needs at least one artifact") {
  try {
    (void)build_report({});
    FAIL("expected EmptyReport");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyReport);
  }
}

TEST_CASE("report: Cantor estimates agree") {
  const auto m = Measure::create(fixtures::cantor());
  ReportInputs in;
  in.theory = solve_dimension(m, 2.0);
  BoundsOptions bo;
  bo.levels = 10;
  in.bounds = bounds_table(m, 2.0, bo);
  const auto cloud = sample(m, 200000, 0, 9).points;
  const auto curve = error_curve(cloud, 2.0, dyadic(2, 256));
  in.fit = dimension_fit(curve_samples(curve));
  in.series = coefficient_series(curve_samples(curve), in.theory->value);
  const auto rep = build_report(in);
  REQUIRE(rep.entry("theoretical_dimension") != nullptr);
  REQUIRE(rep.entry("critical_exponent") != nullptr);
  REQUIRE(rep.entry("fitted_slope") != nullptr);
  for (const char* q : {"theoretical_dimension", "critical_exponent", "fitted_slope"})
    CHECK(std::abs(rep.entry(q)->value - kLog23) < 0.05);
  CHECK(rep.entry("theoretical_dimension")->value == in.theory->value);
  CHECK(rep.entry("theoretical_dimension")->source == "dim-solver");
  CHECK(rep.entry("fitted_slope")->source == "analysis");
  for (const auto& d : rep.discrepancies) CHECK_FALSE(d.flagged);
  CHECK(rep.family == "self_similar");
}

TEST_CASE("report: flags discrepancies beyond tolerance") {
  ReportInputs in;
  DimensionReport theory;
  theory.value = 1.0;
  theory.r = 2.0;
  in.theory = theory;
  FitResult fit;
  fit.slope = 1.2;
  in.fit = fit;
  in.ambient_dim = 1;
  auto rep = build_report(in);
  REQUIRE(rep.discrepancies.size() == 1);
  CHECK(rep.discrepancies[0].flagged);
  in.ambient_dim = 2;
  in.fit->slope = 1.1;
  rep = build_report(in);
  CHECK_FALSE(rep.discrepancies[0].flagged);
  CHECK(rep.discrepancies[0].tolerance == 0.15);
}
