#include <doctest.h>

#include <cmath>
#include <map>

#include "../support/oracles.hpp"
#include "../support/specs.hpp"
#include "fracquant/dim_solver.hpp"
#include "fracquant/error.hpp"

using namespace fracquant;

namespace {

const double kLog23 = std::log(2.0) / std::log(3.0);

std::vector<double> bases(const SelfSimilarSpec& s, double r) {
  std::vector<double> w;
  for (std::size_t i = 0; i < s.maps.size(); ++i)
    w.push_back(s.probs[i] * std::pow(s.maps[i].ratio, r));
  return w;
}

// Newton on sum w^t = 1; shares nothing with the bracketing solvers.
double fixed_point_t(const std::vector<double>& w) {
  double t = 0.5;
  for (int i = 0; i < 200000; ++i) {
    double s = 0.0, ds = 0.0;
    for (double x : w) {
      s += std::pow(x, t);
      ds += std::pow(x, t) * std::log(x);
    }
    const double next = t - (s - 1.0) / ds;
    if (std::abs(next - t) < 1e-16) return next;
    t = next;
  }
  return t;
}

double carpet_oracle(const CarpetSpec& s, double r) {
  const double theta = std::log(double(s.m)) / std::log(double(s.n));
  const double shrink = std::pow(double(s.m), -r);
  std::map<int, double> q;
  for (std::size_t g = 0; g < s.digits.size(); ++g)
    q[s.digits[g].second] += s.probs[g];
  const double t = oracle::illinois(
      [&](double t) {
        double a = 0.0, b = 0.0;
        for (double p : s.probs) a += std::pow(p * shrink, t);
        for (auto [j, mass] : q) b += std::pow(mass * shrink, t);
        return theta * std::log(a) + (1 - theta) * std::log(b);
      },
      1e-9, 1.0 - 1e-12);
  return oracle::dimension_from_t(t, r);
}

}  // namespace

TEST_CASE("self-similar: Cantor natural measure for every order") {
  for (double r : {0.25, 0.5, 1.0, 2.0, 3.0, 7.5}) {
    const auto rep = solve_self_similar(fixtures::cantor(), r);
    CHECK(rep.value == doctest::Approx(kLog23).epsilon(1e-12));
    CHECK(rep.residual < 1e-12);
    CHECK(rep.quantity == "k_r");
  }
}

TEST_CASE("self-similar: (1/4,1/4), (1/3,2/3), r = 1") {
  const auto spec = fixtures::line_spec({0.25, 0.25}, {1.0 / 3, 2.0 / 3});
  const auto rep = solve_self_similar(spec, 1.0);
  const double t = fixed_point_t(bases(spec, 1.0));
  CHECK(rep.t == doctest::Approx(t).epsilon(1e-12));
  CHECK(rep.value == doctest::Approx(oracle::dimension_from_t(t, 1.0)).epsilon(1e-11));
  CHECK(std::abs(rep.t - 0.327) < 5e-4);
  CHECK(std::abs(rep.value - 0.486) < 5e-4);
  CHECK(rep.residual < 1e-12);
}

TEST_CASE("self-similar: uniform closed form") {
  for (std::size_t n : {2u, 3u, 5u})
    for (double c : {0.1, 0.15}) {
      const auto spec = fixtures::line_spec(std::vector<double>(n, c),
                                            std::vector<double>(n, 1.0 / n));
      for (double r : {0.5, 1.0, 2.0})
        CHECK(solve_self_similar(spec, r).value ==
              doctest::Approx(std::log(double(n)) / std::log(1 / c))
                  .epsilon(1e-11));
    }
}

TEST_CASE("self-similar: natural measures collapse to the similarity dimension") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    const auto c = fixtures::random_ratios(rng, n);
    const double d = oracle::power_sum_root(c);
    std::vector<double> p;
    for (double x : c) p.push_back(std::pow(x, d));
    const auto spec = fixtures::line_spec(c, p);
    for (double r : {0.5, 1.0, 2.0, 4.0})
      CHECK(solve_self_similar(spec, r).value ==
            doctest::Approx(d).epsilon(1e-10));
    CHECK(k0_self_similar(spec).value == doctest::Approx(d).epsilon(1e-10));
  }
}

TEST_CASE("self-similar: random specs agree with an independent root finder") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const auto spec = fixtures::line_spec(fixtures::random_ratios(rng, n),
                                          fixtures::random_probs(rng, n));
    const double r = 0.3 + 3.0 * rng.uniform();
    const auto rep = solve_self_similar(spec, r);
    const double t = oracle::power_sum_root(bases(spec, r));
    CHECK(rep.value == doctest::Approx(oracle::dimension_from_t(t, r)).epsilon(1e-10));
    CHECK(rep.residual < 1e-12);
    // Strictly decreasing in t on a 100-point grid.
    double prev = 1e300;
    for (int i = 1; i <= 100; ++i) {
      const double v = self_similar_sum(spec, r, i / 101.0);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("k0: closed forms") {
  CHECK(k0_self_similar(fixtures::cantor()).value ==
        doctest::Approx(kLog23).epsilon(1e-14));
  const auto spec = fixtures::line_spec({0.25, 0.25}, {1.0 / 3, 2.0 / 3});
  const double expected =
      ((1.0 / 3) * std::log(1.0 / 3) + (2.0 / 3) * std::log(2.0 / 3)) /
      std::log(0.25);
  CHECK(k0_self_similar(spec).value == doctest::Approx(expected).epsilon(1e-14));
  CHECK(std::abs(expected - 0.4591) < 1e-4);
  const auto rep = solve_dimension(Measure::create(spec), 0.0);
  CHECK(rep.quantity == "k_0");
}

TEST_CASE("carpet: full uniform grids have dimension 2") {
  for (auto [n, m] : {std::pair{2, 2}, {3, 2}, {5, 3}, {4, 4}})
    for (double r : {0.5, 1.0, 2.0, 5.0}) {
      const auto rep = solve_carpet(fixtures::full_carpet(n, m), r);
      CHECK(rep.value == doctest::Approx(2.0).epsilon(1e-10));
      CHECK(rep.residual < 1e-12);
      const auto v = carpet_conditions(fixtures::full_carpet(n, m), r);
      CHECK(v.condition_a);
      CHECK(v.condition_b);
      CHECK(v.coefficients_guaranteed);
    }
}

TEST_CASE("carpet: theta = 1 reduces to the self-similar equation") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    CarpetSpec c;
    c.n = c.m = 4;
    c.digits = {{0, 0}, {2, 1}, {3, 3}};
    c.probs = fixtures::random_probs(rng, c.digits.size());
    const auto s = fixtures::line_spec({0.25, 0.25, 0.25}, c.probs);
    for (double r : {0.5, 1.0, 2.0})
      CHECK(solve_carpet(c, r).value ==
            doctest::Approx(solve_self_similar(s, r).value).epsilon(1e-10));
  }
}

TEST_CASE("carpet: secant oracle on m = 2, n = 3") {
  CarpetSpec c;
  c.n = 3;
  c.m = 2;
  c.digits = {{0, 0}, {1, 1}, {2, 0}};
  c.probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  const auto rep = solve_carpet(c, 1.0);
  CHECK(rep.value == doctest::Approx(carpet_oracle(c, 1.0)).epsilon(1e-10));
  CHECK(rep.residual < 1e-12);
  REQUIRE(rep.aux("theta") != nullptr);
  CHECK(*rep.aux("theta") == doctest::Approx(kLog23 * 1.0).epsilon(1e-15));

  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    c.probs = fixtures::random_probs(rng, 3);
    const double r = 0.5 + 2.0 * rng.uniform();
    CHECK(solve_carpet(c, r).value ==
          doctest::Approx(carpet_oracle(c, r)).epsilon(1e-10));
    double prev = 1e300;
    for (int i = 1; i <= 100; ++i) {
      const double v = carpet_lhs(c, r, i / 101.0);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("carpet: conditions A and B") {
  CarpetSpec c;
  c.n = 2;
  c.m = 2;
  c.digits = {{0, 0}, {1, 0}, {0, 1}};
  c.probs = {0.25, 0.25, 0.5};
  auto v = carpet_conditions(c, 1.0);
  REQUIRE(v.column_mass.size() == 2);
  CHECK(v.column_mass[0] == doctest::Approx(0.5));
  CHECK(v.column_mass[1] == doctest::Approx(0.5));
  CHECK(v.condition_b);

  c.probs = {0.5, 0.25, 0.25};
  v = carpet_conditions(c, 1.0);
  CHECK(v.column_mass[0] == doctest::Approx(0.75));
  CHECK(v.column_mass[1] == doctest::Approx(0.25));
  CHECK_FALSE(v.condition_b);
  // Row 0 holds two cells of conditional mass 2/3 and 1/3, row 1 a single
  // cell of conditional mass 1: the sums differ for every t in (0,1).
  CHECK_FALSE(v.condition_a);
  REQUIRE(v.condition_a_sums.size() == 2);
  const double t = v.s_r / (v.s_r + 1.0);
  CHECK(v.condition_a_sums[0] ==
        doctest::Approx(std::pow(2.0 / 3, t) + std::pow(1.0 / 3, t)).epsilon(1e-12));
  CHECK(v.condition_a_sums[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("markov: rank-one specs reduce to self-similar") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(3);
    const auto p = fixtures::random_probs(rng, n);
    const auto c = fixtures::random_ratios(rng, n);
    MarkovSpec m;
    m.transition.assign(n, p);
    m.ratios.assign(n, c);
    m.initial = fixtures::random_probs(rng, n);
    m.gap = 0.05;
    const auto s = fixtures::line_spec(c, p);
    const double r = 0.5 + 2.0 * rng.uniform();
    const auto sol = solve_markov(m, r);
    CHECK(sol.report.value ==
          doctest::Approx(solve_self_similar(s, r).value).epsilon(1e-10));
    CHECK(std::abs(markov_psi(m, r, sol.report.t) - 1.0) < 1e-12);
    CHECK(sol.maximal_set_incomparable);
    double prev = 1e300;
    for (int i = 1; i <= 100; ++i) {
      const double s_val = 0.05 * i;
      const double v = markov_psi(m, r, s_val / (s_val + r));
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("markov: two-state uniform chain equals Cantor") {
  for (double r : {0.5, 1.0, 2.0}) {
    const auto sol = solve_markov(fixtures::markov_uniform(1.0 / 3), r);
    CHECK(sol.report.value == doctest::Approx(kLog23).epsilon(1e-10));
  }
}

TEST_CASE("markov: comparable maximal set gives an infinite upper coefficient") {
  const auto sol = solve_markov(fixtures::markov_chain(true), 2.0);
  CHECK_FALSE(sol.maximal_set_incomparable);
  REQUIRE(sol.report.verdict("upper_coefficient") != nullptr);
  CHECK(*sol.report.verdict("upper_coefficient") == "infinite");
  CHECK(*sol.report.verdict("maximal_set") == "comparable");
  std::size_t in_m = 0;
  for (const auto& c : sol.report.components) {
    CHECK(sol.report.value >= c.value - 1e-9);
    in_m += c.in_maximal_set ? 1 : 0;
  }
  CHECK(in_m == 2);

  // Oracle: the H1 block is [[a, a], [b, b]] in A(t), whose Perron root is the
  // trace a + b.
  const double t = sol.report.t;
  const double a = 2 * std::pow(0.5 * std::pow(0.3, 2.0), t);
  const double b = 2 * std::pow((1.0 / 3) * std::pow(0.2, 2.0), t);
  CHECK(oracle::perron_2x2(a / 2, a / 2, b / 2, b / 2) == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("markov: incomparable maximal set gives a finite upper coefficient") {
  const auto sol = solve_markov(fixtures::markov_chain(false), 2.0);
  CHECK(sol.maximal_set_incomparable);
  CHECK(*sol.report.verdict("upper_coefficient") == "finite");
  CHECK(sol.report.value ==
        doctest::Approx(solve_markov(fixtures::markov_chain(true), 2.0).report.value)
            .epsilon(1e-12));
}

TEST_CASE("markov: SCC decomposition invariants") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        a(i, j) = rng.uniform() < 0.25 ? 1.0 : 0.0;
    const auto scc = strongly_connected_components(a);
    std::vector<int> seen(n, 0);
    for (const auto& comp : scc.components)
      for (std::size_t v : comp) ++seen[v];
    for (int s : seen) CHECK(s == 1);
    for (auto [x, y] : scc.dag_edges) CHECK(x < y);
    const std::size_t m = scc.components.size();
    for (std::size_t x = 0; x < m; ++x) {
      CHECK_FALSE(scc.reaches[x][x]);
      for (std::size_t y = 0; y < m; ++y)
        for (std::size_t z = 0; z < m; ++z)
          if (scc.reaches[x][y] && scc.reaches[y][z]) CHECK(scc.reaches[x][z]);
    }
    // Reachability agrees with a Floyd-Warshall closure on vertices.
    std::vector<std::vector<bool>> path(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) path[i][j] = a(i, j) > 0;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (path[i][k] && path[k][j]) path[i][j] = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const auto ci = scc.component_of[i], cj = scc.component_of[j];
        if (ci == cj) {
          if (i != j) CHECK((path[i][j] && path[j][i]));
        } else {
          CHECK(path[i][j] == bool(scc.reaches[ci][cj]));
        }
      }
  }
}

TEST_CASE("moran: identical levels are constant") {
  const std::vector<Pattern> levels(12, Pattern{{1.0 / 3, 1.0 / 3}, {0.5, 0.5}});
  for (bool enumerate : {false, true}) {
    MoranOptions opts;
    opts.enumerate = enumerate;
    const auto seq = moran_dkr_sequence(levels, 2.0, opts);
    REQUIRE(seq.rows.size() == 12);
    for (const auto& row : seq.rows) {
      CHECK(row.value == doctest::Approx(kLog23).epsilon(1e-12));
      CHECK(row.residual < 1e-12);
    }
    CHECK(seq.label == "conjectural diagnostics");
  }
}

TEST_CASE("moran: alternating levels against per-k oracle and enumeration") {
  const Pattern a{{1.0 / 3, 1.0 / 3}, {0.5, 0.5}};
  const Pattern b{{0.25, 0.2, 0.25}, {0.2, 0.5, 0.3}};
  std::vector<Pattern> levels;
  for (int k = 0; k < 10; ++k) levels.push_back(k % 2 ? b : a);
  const double r = 1.5;
  const auto product = moran_dkr_sequence(levels, r);
  MoranOptions opts;
  opts.enumerate = true;
  const auto explicit_sum = moran_dkr_sequence(levels, r, opts);

  std::vector<double> words{1.0};
  for (std::size_t k = 0; k < levels.size(); ++k) {
    std::vector<double> next;
    for (double w : words)
      for (std::size_t j = 0; j < levels[k].ratios.size(); ++j)
        next.push_back(w * levels[k].probs[j] * std::pow(levels[k].ratios[j], r));
    words = std::move(next);
    const double t = oracle::power_sum_root(words);
    CHECK(product.rows[k].value ==
          doctest::Approx(oracle::dimension_from_t(t, r)).epsilon(1e-10));
    CHECK(explicit_sum.rows[k].value ==
          doctest::Approx(product.rows[k].value).epsilon(1e-10));
  }
  CHECK(product.rows[0].value ==
        doctest::Approx(solve_self_similar(fixtures::cantor(), r).value).epsilon(1e-12));
  // Oscillation: odd and even k differ.
  CHECK(std::abs(product.rows[0].value - product.rows[1].value) > 1e-3);
  for (std::size_t k = 0; k < product.rows.size(); ++k) {
    CHECK(product.tail_sup[k] >= product.rows[k].value);
    CHECK(product.tail_inf[k] <= product.rows[k].value);
  }

  MoranOptions capped;
  capped.enumerate = true;
  capped.max_words = 100;
  CHECK_THROWS_AS(moran_dkr_sequence(levels, r, capped), Error);
}

TEST_CASE("multiscale: a single pattern matches self-similar") {
  MultiscaleSpec s;
  s.patterns = {{{0.2, 0.3}, {0.4, 0.6}}};
  const auto rep = solve_multiscale(s, 2.0, 40);
  const auto ss = solve_self_similar(fixtures::line_spec({0.2, 0.3}, {0.4, 0.6}), 2.0);
  CHECK(rep.value == doctest::Approx(ss.value).epsilon(1e-12));
  for (const auto& row : rep.sequence)
    CHECK(row.value == doctest::Approx(ss.value).epsilon(1e-12));
  CHECK(*rep.aux("H_upper_proxy") < 1e-9);
  CHECK(*rep.verdict("G0") == "member");
}

TEST_CASE("multiscale: period two is in G_0") {
  const auto spec = fixtures::period_two();
  const double r = 1.0;
  const auto rep = solve_multiscale(spec, r, 60);
  CHECK(*rep.verdict("G0") == "member");
  CHECK(*rep.aux("G0_sup_discrepancy") == doctest::Approx(0.5));
  CHECK(rep.verdict("G0_coefficients")->find("positive and finite") != std::string::npos);
  CHECK(*rep.verdict("coefficients") == "positive and finite");
  CHECK(rep.residual < 1e-12);

  // chi-weighted limit equation by the secant oracle.
  auto lg = [&](const Pattern& p, double t) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.ratios.size(); ++j)
      s += std::pow(p.probs[j] * std::pow(p.ratios[j], r), t);
    return std::log(s);
  };
  const double t = oracle::illinois(
      [&](double t) { return 0.5 * lg(spec.patterns[0], t) + 0.5 * lg(spec.patterns[1], t); },
      1e-9, 1.0 - 1e-12);
  CHECK(rep.value == doctest::Approx(oracle::dimension_from_t(t, r)).epsilon(1e-10));

  for (const auto& row : rep.sequence) {
    const double k0 = double((row.k + 1) / 2), k1 = double(row.k / 2);
    const double tk = oracle::illinois(
        [&](double t) { return k0 * lg(spec.patterns[0], t) + k1 * lg(spec.patterns[1], t); },
        1e-9, 1.0 - 1e-12);
    CHECK(row.value == doctest::Approx(oracle::dimension_from_t(tk, r)).epsilon(1e-10));
    CHECK(row.residual < 1e-12);
  }
}

TEST_CASE("multiscale: identical weighted multisets give H = 0") {
  MultiscaleSpec s;
  s.patterns = {{{0.2, 0.3, 0.1}, {0.5, 0.3, 0.2}},
                {{0.1, 0.2, 0.3}, {0.2, 0.5, 0.3}}};
  s.sequence = PatternSequence{{1}, {0, 0, 1}};
  const auto rep = solve_multiscale(s, 2.0, 50);
  for (const auto& row : rep.sequence)
    CHECK(row.value == rep.value);
  CHECK(*rep.aux("H_upper_proxy") == 0.0);
}

TEST_CASE("multiscale: frequency-generated omega is reported as inconclusive") {
  MultiscaleSpec s = fixtures::period_two();
  s.sequence.reset();
  s.frequency = std::vector<double>{1.0 / 3, 2.0 / 3};
  const auto rep = solve_multiscale(s, 1.0, 30);
  CHECK(*rep.verdict("G0") == "sampled, inconclusive");
  CHECK(*rep.aux("G0_sup_discrepancy") <= 1.0);
}

TEST_CASE("dispatch: invalid orders") {
  const auto m = Measure::create(fixtures::full_carpet(2, 2));
  CHECK_THROWS_AS(solve_dimension(m, -1.0), Error);
  CHECK_THROWS_AS(solve_dimension(m, 0.0), Error);
  CHECK(solve_dimension(m, 1.0).value == doctest::Approx(2.0));
}
