#include "fracquant/dim_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "fracquant/bisection.hpp"
#include "fracquant/error.hpp"

namespace fracquant {

namespace {

void require_valid(const MeasureSpec& spec) {
  const auto report = validate(spec);
  if (const auto* bad = report.first_failure())
    throw Error(bad->error, bad->name + " failed: " + bad->detail);
}

void require_order(double r) {
  if (!(r > 0.0) || !std::isfinite(r))
    throw Error(ErrorCode::kInvalidArgument, "order r must be > 0");
}

// Bases sorted ascending so that equal multisets sum to identical bits.
std::vector<double> canonical(std::vector<double> bases) {
  std::sort(bases.begin(), bases.end());
  return bases;
}

double power_sum(const std::vector<double>& bases, double t) {
  double s = 0.0;
  for (double a : bases) s += std::pow(a, t);
  return s;
}

std::vector<double> pattern_bases(const Pattern& pattern, double r) {
  std::vector<double> bases;
  for (std::size_t j = 0; j < pattern.ratios.size(); ++j)
    bases.push_back(pattern.probs[j] * std::pow(pattern.ratios[j], r));
  return canonical(std::move(bases));
}

double to_dimension(double t, double r) { return r * t / (1.0 - t); }

std::vector<double> self_similar_bases(const SelfSimilarSpec& spec, double r) {
  std::vector<double> bases;
  for (std::size_t i = 0; i < spec.maps.size(); ++i)
    bases.push_back(spec.probs[i] * std::pow(spec.maps[i].ratio, r));
  return canonical(std::move(bases));
}

struct CarpetBases {
  std::vector<double> cells;
  std::vector<double> columns;
  std::vector<int> column_ids;
  std::vector<double> column_mass;
  double theta = 1.0;
};

CarpetBases carpet_bases(const CarpetSpec& spec, double r) {
  CarpetBases b;
  const double shrink = std::pow(double(spec.m), -r);
  std::map<int, double> q;
  for (std::size_t g = 0; g < spec.digits.size(); ++g) {
    b.cells.push_back(spec.probs[g] * shrink);
    q[spec.digits[g].second] += spec.probs[g];
  }
  for (auto [j, mass] : q) {
    b.column_ids.push_back(j);
    b.column_mass.push_back(mass);
    b.columns.push_back(mass * shrink);
  }
  b.cells = canonical(std::move(b.cells));
  b.columns = canonical(std::move(b.columns));
  b.theta = std::log(double(spec.m)) / std::log(double(spec.n));
  return b;
}

double carpet_log_lhs(const CarpetBases& b, double t) {
  return b.theta * std::log(power_sum(b.cells, t)) +
         (1.0 - b.theta) * std::log(power_sum(b.columns, t));
}

double markov_component_value(const MarkovSpec& spec, double r,
                              const std::vector<std::size_t>& vertices,
                              int* iterations) {
  auto psi = [&](double t) {
    return spectral_radius(markov_matrix(spec, r, t).submatrix(vertices));
  };
  // Psi_H(0) is the Perron root of the 0/1 pattern; at most 1 means
  // Psi_H(s) < 1 for every s > 0.
  if (!(psi(0.0) > 1.0)) return 0.0;
  const auto root =
      bisect_decreasing([&](double t) { return psi(t) - 1.0; });
  if (iterations) *iterations = root.iterations;
  return to_dimension(root.t, r);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::string* DimensionReport::verdict(const std::string& key) const {
  for (const auto& [k, v] : verdicts)
    if (k == key) return &v;
  return nullptr;
}

const double* DimensionReport::aux(const std::string& key) const {
  for (const auto& [k, v] : auxiliary)
    if (k == key) return &v;
  return nullptr;
}

double self_similar_sum(const SelfSimilarSpec& spec, double r, double t) {
  return power_sum(self_similar_bases(spec, r), t);
}

double carpet_lhs(const CarpetSpec& spec, double r, double t) {
  return std::exp(carpet_log_lhs(carpet_bases(spec, r), t));
}

Matrix markov_matrix(const MarkovSpec& spec, double r, double t) {
  const std::size_t n = spec.transition.size();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (spec.transition[i][j] > 0.0)
        a(i, j) = std::pow(
            spec.transition[i][j] * std::pow(spec.ratios[i][j], r), t);
  return a;
}

double markov_psi(const MarkovSpec& spec, double r, double t) {
  return spectral_radius(markov_matrix(spec, r, t));
}

double multiscale_limit_lhs(const std::vector<Pattern>& patterns,
                            const std::vector<double>& chi, double r,
                            double t) {
  double log_lhs = 0.0;
  for (std::size_t i = 0; i < patterns.size(); ++i)
    log_lhs += chi[i] * std::log(power_sum(pattern_bases(patterns[i], r), t));
  return std::exp(log_lhs);
}

DimensionReport solve_self_similar(const SelfSimilarSpec& spec, double r) {
  require_valid(spec);
  require_order(r);
  const auto bases = self_similar_bases(spec, r);
  const auto root = bisect_decreasing(
      [&](double t) { return std::log(power_sum(bases, t)); });
  DimensionReport rep;
  rep.family = Family::kSelfSimilar;
  rep.quantity = "k_r";
  rep.r = r;
  rep.t = root.t;
  rep.value = to_dimension(root.t, r);
  rep.residual = std::abs(power_sum(bases, root.t) - 1.0);
  rep.iterations = root.iterations;
  return rep;
}

DimensionReport k0_self_similar(const SelfSimilarSpec& spec) {
  require_valid(spec);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < spec.maps.size(); ++i) {
    num += spec.probs[i] * std::log(spec.probs[i]);
    den += spec.probs[i] * std::log(spec.maps[i].ratio);
  }
  DimensionReport rep;
  rep.family = Family::kSelfSimilar;
  rep.quantity = "k_0";
  rep.r = 0.0;
  rep.value = num / den;
  rep.auxiliary = {{"entropy_sum", num}, {"log_ratio_sum", den}};
  return rep;
}

DimensionReport solve_carpet(const CarpetSpec& spec, double r) {
  require_valid(spec);
  require_order(r);
  const auto b = carpet_bases(spec, r);
  const auto root =
      bisect_decreasing([&](double t) { return carpet_log_lhs(b, t); });
  DimensionReport rep;
  rep.family = Family::kCarpet;
  rep.quantity = "s_r";
  rep.r = r;
  rep.t = root.t;
  rep.value = to_dimension(root.t, r);
  rep.residual = std::abs(std::exp(carpet_log_lhs(b, root.t)) - 1.0);
  rep.iterations = root.iterations;
  rep.auxiliary.push_back({"theta", b.theta});
  for (std::size_t k = 0; k < b.column_ids.size(); ++k)
    rep.auxiliary.push_back(
        {"q_" + std::to_string(b.column_ids[k]), b.column_mass[k]});
  return rep;
}

CarpetVerdict carpet_conditions(const CarpetSpec& spec, double r) {
  const auto solved = solve_carpet(spec, r);
  const double t = solved.t;
  const auto b = carpet_bases(spec, r);
  CarpetVerdict v;
  v.s_r = solved.value;
  v.columns = b.column_ids;
  v.column_mass = b.column_mass;
  for (std::size_t k = 0; k < b.column_ids.size(); ++k) {
    const int j = b.column_ids[k];
    std::vector<double> ratios;
    for (std::size_t g = 0; g < spec.digits.size(); ++g)
      if (spec.digits[g].second == j)
        ratios.push_back(spec.probs[g] / b.column_mass[k]);
    v.condition_a_sums.push_back(power_sum(canonical(ratios), t));
  }
  auto spread = [](const std::vector<double>& xs) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    return *hi - *lo;
  };
  v.condition_a = spread(v.condition_a_sums) <= kEqualityTolerance;
  v.condition_b = spread(v.column_mass) <= kEqualityTolerance;
  v.coefficients_guaranteed = v.condition_a || v.condition_b;
  return v;
}

MarkovSolution solve_markov(const MarkovSpec& spec, double r) {
  require_valid(spec);
  require_order(r);
  MarkovSolution sol;
  DimensionReport& rep = sol.report;
  rep.family = Family::kMarkov;
  rep.quantity = "s_r";
  rep.r = r;

  const auto root = bisect_decreasing(
      [&](double t) { return markov_psi(spec, r, t) - 1.0; });
  rep.t = root.t;
  rep.value = to_dimension(root.t, r);
  rep.residual = std::abs(markov_psi(spec, r, root.t) - 1.0);
  rep.iterations = root.iterations;

  sol.scc = strongly_connected_components(Matrix(spec.transition));
  std::vector<std::size_t> maximal;
  for (std::size_t c = 0; c < sol.scc.components.size(); ++c) {
    ComponentValue cv;
    cv.vertices = sol.scc.components[c];
    cv.value = sol.scc.trivial[c]
                   ? 0.0
                   : markov_component_value(spec, r, cv.vertices, nullptr);
    cv.in_maximal_set = std::abs(cv.value - rep.value) < kEqualityTolerance;
    if (cv.in_maximal_set) maximal.push_back(c);
    rep.components.push_back(std::move(cv));
  }
  for (std::size_t a = 0; a < maximal.size(); ++a)
    for (std::size_t b = a + 1; b < maximal.size(); ++b)
      if (sol.scc.comparable(maximal[a], maximal[b]))
        sol.maximal_set_incomparable = false;

  rep.auxiliary.push_back({"components", double(sol.scc.components.size())});
  rep.auxiliary.push_back({"maximal_set_size", double(maximal.size())});
  rep.verdicts.push_back({"D_r", "equals s_r"});
  rep.verdicts.push_back({"lower_coefficient", "positive"});
  rep.verdicts.push_back(
      {"maximal_set", sol.maximal_set_incomparable ? "incomparable"
                                                   : "comparable"});
  rep.verdicts.push_back(
      {"upper_coefficient",
       sol.maximal_set_incomparable ? "finite" : "infinite"});
  if (!sol.maximal_set_incomparable)
    rep.notes.push_back(
        "M contains comparable components, so the upper quantization "
        "coefficient is infinite");
  return sol;
}

MoranSequence moran_dkr_sequence(const std::vector<Pattern>& levels, double r,
                                 const MoranOptions& options) {
  require_order(r);
  if (levels.empty())
    throw Error(ErrorCode::kInvalidArgument, "no Moran levels given");
  for (const auto& level : levels) {
    MultiscaleSpec probe;
    probe.patterns = {level};
    probe.gap = 0.5;
    // Only the probability/ratio checks matter here; geometry is free.
    const auto rep = validate(probe);
    for (const auto& c : rep.checks)
      if (!c.passed && c.name != "separation.siblings")
        throw Error(c.error, "Moran level: " + c.name + " failed");
  }

  MoranSequence seq;
  seq.r = r;
  std::vector<std::vector<double>> bases;
  for (const auto& level : levels) bases.push_back(pattern_bases(level, r));

  std::vector<double> words{1.0};  // p_sigma c_sigma^r over Omega_k
  for (std::size_t k = 1; k <= levels.size(); ++k) {
    SequenceRow row;
    row.k = k;
    if (options.enumerate) {
      std::vector<double> next;
      if (words.size() * bases[k - 1].size() > options.max_words)
        throw Error(ErrorCode::kLevelCapExceeded,
                    "card(Omega_" + std::to_string(k) + ") exceeds " +
                        std::to_string(options.max_words));
      next.reserve(words.size() * bases[k - 1].size());
      for (double w : words)
        for (double a : bases[k - 1]) next.push_back(w * a);
      words = canonical(std::move(next));
      const auto root = bisect_decreasing(
          [&](double t) { return std::log(power_sum(words, t)); });
      row.value = to_dimension(root.t, r);
      row.residual = std::abs(power_sum(words, root.t) - 1.0);
    } else {
      auto log_sum = [&](double t) {
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l)
          s += std::log(power_sum(bases[l], t));
        return s;
      };
      const auto root = bisect_decreasing(log_sum);
      row.value = to_dimension(root.t, r);
      row.residual = std::abs(std::exp(log_sum(root.t)) - 1.0);
    }
    seq.rows.push_back(row);
  }

  const std::size_t n = seq.rows.size();
  seq.tail_sup.resize(n);
  seq.tail_inf.resize(n);
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = n; k-- > 0;) {
    hi = std::max(hi, seq.rows[k].value);
    lo = std::min(lo, seq.rows[k].value);
    seq.tail_sup[k] = hi;
    seq.tail_inf[k] = lo;
  }
  seq.upper_proxy = seq.tail_sup[n / 2];
  seq.lower_proxy = seq.tail_inf[n / 2];
  return seq;
}

std::vector<Pattern> moran_levels(const Measure& measure, std::size_t k_max) {
  const auto& spec = std::get<MultiscaleSpec>(measure.spec());
  std::vector<Pattern> levels;
  levels.reserve(k_max);
  for (std::size_t k = 1; k <= k_max; ++k)
    levels.push_back(spec.patterns[measure.pattern_at(k)]);
  return levels;
}

DimensionReport solve_multiscale(const MultiscaleSpec& spec, double r,
                                 std::size_t k_max) {
  return solve_multiscale(Measure::create(spec), r, k_max);
}

DimensionReport solve_multiscale(const Measure& measure, double r,
                                 std::size_t k_max) {
  if (measure.family() != Family::kMultiscale)
    throw Error(ErrorCode::kInvalidArgument, "measure is not multiscale");
  require_order(r);
  if (k_max < 2)
    throw Error(ErrorCode::kInvalidArgument, "k_max must be >= 2");
  const auto& spec = std::get<MultiscaleSpec>(measure.spec());
  const std::size_t m = spec.patterns.size();
  const auto& chi = measure.pattern_frequency();

  std::vector<std::vector<double>> bases;
  for (const auto& p : spec.patterns) bases.push_back(pattern_bases(p, r));
  auto weighted_log = [&](const std::vector<double>& w, double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (w[i] != 0.0) s += w[i] * std::log(power_sum(bases[i], t));
    return s;
  };

  DimensionReport rep;
  rep.family = Family::kMultiscale;
  rep.quantity = "s_r";
  rep.r = r;
  const auto root =
      bisect_decreasing([&](double t) { return weighted_log(chi, t); });
  rep.t = root.t;
  rep.value = to_dimension(root.t, r);
  rep.residual = std::abs(std::exp(weighted_log(chi, root.t)) - 1.0);
  rep.iterations = root.iterations;

  std::vector<double> counts(m, 0.0);
  double discrepancy = 0.0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    counts[measure.pattern_at(k)] += 1.0;
    for (std::size_t i = 0; i < m; ++i)
      discrepancy = std::max(discrepancy, std::abs(counts[i] - double(k) * chi[i]));
    const auto rk =
        bisect_decreasing([&](double t) { return weighted_log(counts, t); });
    SequenceRow row;
    row.k = k;
    row.value = to_dimension(rk.t, r);
    row.k_times_gap = double(k) * std::abs(row.value - rep.value);
    row.residual = std::abs(std::exp(weighted_log(counts, rk.t)) - 1.0);
    rep.sequence.push_back(row);
  }

  // G_0 for eventually periodic omega: N_{k,i} - k chi_i repeats with the
  // period once past the prefix, so one period decides the supremum.
  const bool exact = spec.sequence.has_value() || (m == 1 && !spec.frequency);
  double g0_sup = discrepancy;
  if (exact) {
    std::size_t horizon = 1;
    if (spec.sequence)
      horizon = spec.sequence->prefix.size() + spec.sequence->period.size();
    std::fill(counts.begin(), counts.end(), 0.0);
    g0_sup = 0.0;
    for (std::size_t k = 1; k <= horizon; ++k) {
      counts[measure.pattern_at(k)] += 1.0;
      for (std::size_t i = 0; i < m; ++i)
        g0_sup = std::max(g0_sup, std::abs(counts[i] - double(k) * chi[i]));
    }
  }

  const std::size_t tail_start = (k_max + 1) / 2;
  bool all_ge = true;
  bool all_le = true;
  double h_lo = std::numeric_limits<double>::infinity();
  double h_hi = 0.0;
  for (const auto& row : rep.sequence) {
    if (row.k < tail_start) continue;
    all_ge = all_ge && row.value >= rep.value;
    all_le = all_le && row.value <= rep.value;
    h_lo = std::min(h_lo, row.k_times_gap);
    h_hi = std::max(h_hi, row.k_times_gap);
  }

  rep.auxiliary.push_back({"k_max", double(k_max)});
  rep.auxiliary.push_back({"H_lower_proxy", h_lo});
  rep.auxiliary.push_back({"H_upper_proxy", h_hi});
  rep.auxiliary.push_back({"G0_sup_discrepancy", g0_sup});
  for (std::size_t i = 0; i < m; ++i)
    rep.auxiliary.push_back({"chi_" + std::to_string(i), chi[i]});

  rep.verdicts.push_back({"G0", exact ? "member" : "sampled, inconclusive"});
  rep.verdicts.push_back(
      {"D_r", "D_r exists and equals s_r, independent of omega in G(chi)"});
  rep.verdicts.push_back(
      {"lower_tail", all_ge ? "s_kr >= s_r on horizon tail: lower coefficient "
                              "positive"
                            : "premise not observed on horizon tail"});
  rep.verdicts.push_back(
      {"upper_tail", all_le ? "s_kr <= s_r on horizon tail: upper coefficient "
                              "finite"
                            : "premise not observed on horizon tail"});
  rep.verdicts.push_back(
      {"H_upper",
       exact ? "H-bar finite (omega in G_0): coefficients positive and finite"
             : "H-bar proxy " + fmt_double(h_hi) +
                   " over horizon; finiteness not decidable from finite data"});
  rep.verdicts.push_back(
      {"G0_coefficients", exact ? "omega in G_0(chi): lower and upper "
                                  "coefficients positive and finite"
                                : "G_0 membership inconclusive"});
  rep.verdicts.push_back(
      {"coefficients", exact ? "positive and finite" : "undetermined"});
  rep.notes.push_back("H_r values are finite-horizon proxies over k in [" +
                      std::to_string(tail_start) + ", " +
                      std::to_string(k_max) + "]");
  return rep;
}

DimensionReport solve_dimension(const Measure& measure, double r,
                                const SolveOptions& options) {
  if (r < 0.0) throw Error(ErrorCode::kInvalidArgument, "r must be >= 0");
  const auto& spec = measure.spec();
  switch (measure.family()) {
    case Family::kSelfSimilar: {
      const auto& s = std::get<SelfSimilarSpec>(spec);
      return r == 0.0 ? k0_self_similar(s) : solve_self_similar(s, r);
    }
    case Family::kCarpet: {
      const auto& s = std::get<CarpetSpec>(spec);
      if (r == 0.0)
        throw Error(ErrorCode::kInvalidArgument,
                    "r = 0 is only supported for self-similar measures");
      auto rep = solve_carpet(s, r);
      const auto v = carpet_conditions(s, r);
      rep.verdicts.push_back({"condition_A", v.condition_a ? "true" : "false"});
      rep.verdicts.push_back({"condition_B", v.condition_b ? "true" : "false"});
      rep.verdicts.push_back(
          {"coefficients", v.coefficients_guaranteed
                               ? "positive and finite"
                               : "not covered by (A)/(B); open problem"});
      return rep;
    }
    case Family::kMarkov:
      if (r == 0.0)
        throw Error(ErrorCode::kInvalidArgument,
                    "r = 0 is only supported for self-similar measures");
      return solve_markov(std::get<MarkovSpec>(spec), r).report;
    case Family::kMultiscale:
      if (r == 0.0)
        throw Error(ErrorCode::kInvalidArgument,
                    "r = 0 is only supported for self-similar measures");
      return solve_multiscale(measure, r, options.k_max);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown family");
}

}  // namespace fracquant
