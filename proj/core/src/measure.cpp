#include "fracquant/measure.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "fracquant/parallel.hpp"

namespace fracquant {

namespace {

constexpr double kSumTol = 1e-12;
constexpr double kOrthTol = 1e-12;
constexpr std::size_t kGeneratedLevels = std::size_t{1} << 16;

ValidationCheck check(std::string name, bool passed, double margin,
                      std::string detail, ErrorCode error) {
  return {std::move(name), passed, margin, std::move(detail), error};
}

void check_probability_vector(ValidationReport& report, const std::string& name,
                              const std::vector<double>& probs) {
  double min_p = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double p : probs) {
    min_p = std::min(min_p, p);
    sum += p;
  }
  const bool positive = !probs.empty() && min_p > 0.0;
  report.checks.push_back(check(name + ".positive", positive,
                                probs.empty() ? 0.0 : min_p,
                                "all probabilities > 0",
                                ErrorCode::kNonStochasticMatrix));
  const double err = std::abs(sum - 1.0);
  report.checks.push_back(check(name + ".sum", err <= kSumTol, kSumTol - err,
                                "probabilities sum to 1 within 1e-12",
                                ErrorCode::kNonStochasticMatrix));
}

void check_ratios(ValidationReport& report, const std::string& name,
                  const std::vector<double>& ratios) {
  double margin = std::numeric_limits<double>::infinity();
  for (double c : ratios) margin = std::min({margin, c, 1.0 - c});
  report.checks.push_back(check(name, !ratios.empty() && margin > 0.0, margin,
                                "ratios in (0,1)", ErrorCode::kRatioOutOfRange));
}

// Left-to-right spanning layout on [0,1]: children keep their ratios and
// share the slack equally between neighbours. Returns the common gap.
double spanning_gap(const std::vector<double>& ratios) {
  const double total = std::accumulate(ratios.begin(), ratios.end(), 0.0);
  return ratios.size() < 2 ? 0.0 : (1.0 - total) / double(ratios.size() - 1);
}

void validate_self_similar(const SelfSimilarSpec& s, ValidationReport& report) {
  const std::size_t q = s.dim;
  const std::size_t n = s.maps.size();
  report.checks.push_back(check("maps.count", n >= 2, double(n) - 1.0,
                                "at least two maps", ErrorCode::kInvalidSpec));
  report.checks.push_back(check("probs.count", s.probs.size() == n, 0.0,
                                "one probability per map",
                                ErrorCode::kInvalidSpec));
  const bool box_ok = s.box.lower.size() == q && s.box.upper.size() == q &&
                      q >= 1;
  double box_margin = box_ok ? std::numeric_limits<double>::infinity() : -1.0;
  if (box_ok)
    for (std::size_t k = 0; k < q; ++k)
      box_margin = std::min(box_margin, s.box.upper[k] - s.box.lower[k]);
  report.checks.push_back(check("box", box_ok && box_margin > 0.0, box_margin,
                                "root box has positive extent",
                                ErrorCode::kInvalidSpec));
  if (!report.ok()) return;

  check_probability_vector(report, "probs", s.probs);
  std::vector<double> ratios;
  for (const auto& map : s.maps) ratios.push_back(map.ratio);
  check_ratios(report, "ratios", ratios);

  double orth_err = 0.0;
  bool shapes = true;
  for (const auto& map : s.maps) {
    if (map.translation.size() != q) shapes = false;
    if (map.orthogonal.empty()) continue;
    if (map.orthogonal.size() != q * q) {
      shapes = false;
      continue;
    }
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < q; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < q; ++k)
          dot += map.orthogonal[i * q + k] * map.orthogonal[j * q + k];
        orth_err = std::max(orth_err, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
  }
  report.checks.push_back(check("maps.shape", shapes, 0.0,
                                "translations and rotations match dimension",
                                ErrorCode::kInvalidSpec));
  if (!shapes) return;
  report.checks.push_back(check("maps.orthogonal", orth_err <= kOrthTol,
                                kOrthTol - orth_err, "O O^T = I within 1e-12",
                                ErrorCode::kInvalidSpec));

  std::vector<Box> images;
  double inside = std::numeric_limits<double>::infinity();
  for (const auto& map : s.maps) {
    images.push_back(map.as_affine(q).image(s.box));
    const Box& img = images.back();
    for (std::size_t k = 0; k < q; ++k)
      inside = std::min({inside, img.lower[k] - s.box.lower[k],
                         s.box.upper[k] - img.upper[k]});
  }
  report.checks.push_back(check("images.nested", inside >= -kSumTol, inside,
                                "S_i(J) contained in J",
                                ErrorCode::kSeparationViolation));
  if (s.separation == Separation::kStrong) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        gap = std::min(gap, box_gap(images[i], images[j]));
    report.checks.push_back(check("separation.ssc", gap > 0.0, gap,
                                  "images of J pairwise disjoint",
                                  ErrorCode::kSeparationViolation));
  } else {
    double overlap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        overlap = std::max(overlap, box_overlap(images[i], images[j]));
    const double tol = kSumTol * s.box.diameter();
    report.checks.push_back(check("separation.osc", overlap <= tol, -overlap,
                                  "images of the witness box have disjoint "
                                  "interiors",
                                  ErrorCode::kSeparationViolation));
  }
}

void validate_carpet(const CarpetSpec& s, ValidationReport& report) {
  report.checks.push_back(check("grid", s.m >= 2 && s.m <= s.n,
                                double(s.n - s.m), "2 <= m <= n",
                                ErrorCode::kInvalidSpec));
  report.checks.push_back(check("digits.count", s.digits.size() >= 2,
                                double(s.digits.size()) - 1.0,
                                "card(G) >= 2", ErrorCode::kInvalidSpec));
  bool in_range = true;
  std::set<std::pair<int, int>> seen;
  for (auto [i, j] : s.digits) {
    if (i < 0 || i >= s.n || j < 0 || j >= s.m) in_range = false;
    seen.insert({i, j});
  }
  report.checks.push_back(check("digits.range", in_range, 0.0,
                                "digits within {0..n-1} x {0..m-1}",
                                ErrorCode::kInvalidSpec));
  report.checks.push_back(check("digits.distinct",
                                seen.size() == s.digits.size(), 0.0,
                                "no repeated digit pairs",
                                ErrorCode::kInvalidSpec));
  report.checks.push_back(check("probs.count",
                                s.probs.size() == s.digits.size(), 0.0,
                                "one probability per digit",
                                ErrorCode::kInvalidSpec));
  if (!report.ok()) return;
  check_probability_vector(report, "probs", s.probs);
  report.derived["theta"] = std::log(double(s.m)) / std::log(double(s.n));
}

void validate_markov(const MarkovSpec& s, ValidationReport& report) {
  const std::size_t n = s.transition.size();
  bool shapes = n >= 2 && s.ratios.size() == n && s.initial.size() == n;
  for (std::size_t i = 0; shapes && i < n; ++i)
    shapes = s.transition[i].size() == n && s.ratios[i].size() == n;
  report.checks.push_back(check("shape", shapes, 0.0,
                                "N >= 2 states, square P and ratio matrix, "
                                "initial vector of length N",
                                ErrorCode::kInvalidSpec));
  if (!shapes) return;

  double worst_row = 0.0;
  double min_entry = 0.0;
  for (const auto& row : s.transition) {
    worst_row = std::max(
        worst_row, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
    for (double p : row) min_entry = std::min(min_entry, p);
  }
  report.checks.push_back(check("transition.nonnegative", min_entry >= 0.0,
                                min_entry, "p_ij >= 0",
                                ErrorCode::kNonStochasticMatrix));
  report.checks.push_back(check("transition.rows", worst_row <= kSumTol,
                                kSumTol - worst_row, "rows of P sum to 1",
                                ErrorCode::kNonStochasticMatrix));

  double a1 = std::numeric_limits<double>::infinity();
  std::size_t a1_row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = std::count_if(s.transition[i].begin(),
                                 s.transition[i].end(),
                                 [](double p) { return p > 0.0; });
    if (double(k) - 1.0 < a1) {
      a1 = double(k) - 1.0;
      a1_row = i;
    }
  }
  report.checks.push_back(check(
      "branching", a1 >= 1.0, a1,
      "card{j : p_ij > 0} >= 2 for every row (worst row " +
          std::to_string(a1_row) + ")",
      ErrorCode::kDegenerateRow));

  std::vector<double> used;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (s.transition[i][j] > 0.0) used.push_back(s.ratios[i][j]);
  check_ratios(report, "ratios", used);
  check_probability_vector(report, "initial", s.initial);
  report.checks.push_back(check("gap", s.gap > 0.0 && s.gap < 1.0,
                                std::min(s.gap, 1.0 - s.gap), "t in (0,1)",
                                ErrorCode::kInvalidSpec));
  if (!report.ok()) return;

  // Sibling separation on the interval realization: level-1 cells have gaps equal to their
  // length; deeper siblings use the spanning layout of their parent.
  double margin = 1.0 - s.gap;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> kids;
    for (std::size_t j = 0; j < n; ++j)
      if (s.transition[i][j] > 0.0) kids.push_back(s.ratios[i][j]);
    const double gap = spanning_gap(kids);
    const double largest = *std::max_element(kids.begin(), kids.end());
    margin = std::min(margin, gap - s.gap * largest);
  }
  report.checks.push_back(check("separation.siblings", margin > 0.0, margin,
                                "sibling gap >= t * max sibling diameter, "
                                "relative to the parent length",
                                ErrorCode::kSeparationViolation));
}

std::vector<double> tail_frequency(const PatternSequence& seq, std::size_t m) {
  std::vector<double> freq(m, 0.0);
  for (std::size_t i : seq.period) freq[i] += 1.0;
  for (double& f : freq) f /= double(seq.period.size());
  return freq;
}

void validate_multiscale(const MultiscaleSpec& s, ValidationReport& report) {
  const std::size_t m = s.patterns.size();
  report.checks.push_back(check("patterns.count", m >= 1, double(m),
                                "at least one pattern",
                                ErrorCode::kInvalidSpec));
  if (m == 0) return;
  double c_min = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& pat = s.patterns[i];
    const std::string tag = "pattern[" + std::to_string(i) + "]";
    const bool sized = pat.ratios.size() >= 2 &&
                       pat.probs.size() == pat.ratios.size();
    report.checks.push_back(check(tag + ".shape", sized,
                                  double(pat.ratios.size()) - 1.0,
                                  "N_i >= 2 with matching probabilities",
                                  ErrorCode::kInvalidSpec));
    if (!sized) continue;
    check_probability_vector(report, tag + ".probs", pat.probs);
    check_ratios(report, tag + ".ratios", pat.ratios);
    for (double g : pat.ratios) c_min = std::min(c_min, g);
  }
  report.checks.push_back(check("ratios.lower_bound", c_min > 0.0, c_min,
                                "inf of contraction ratios c > 0",
                                ErrorCode::kRatioOutOfRange));
  report.checks.push_back(check("gap", s.gap > 0.0 && s.gap < 1.0,
                                std::min(s.gap, 1.0 - s.gap), "beta in (0,1)",
                                ErrorCode::kInvalidSpec));

  bool seq_ok = true;
  if (s.sequence) {
    seq_ok = !s.sequence->period.empty();
    for (std::size_t i : s.sequence->prefix) seq_ok = seq_ok && i < m;
    for (std::size_t i : s.sequence->period) seq_ok = seq_ok && i < m;
  } else if (!s.frequency) {
    seq_ok = m == 1;
  }
  report.checks.push_back(check("sequence", seq_ok, 0.0,
                                "omega given as prefix + non-empty period over "
                                "pattern indices, or as a frequency vector",
                                ErrorCode::kInvalidSpec));
  if (s.frequency) {
    report.checks.push_back(check("frequency.count", s.frequency->size() == m,
                                  0.0, "one frequency per pattern",
                                  ErrorCode::kInvalidSpec));
    if (s.frequency->size() == m) {
      check_probability_vector(report, "frequency", *s.frequency);
      if (s.sequence && seq_ok) {
        const auto tail = tail_frequency(*s.sequence, m);
        double err = 0.0;
        for (std::size_t i = 0; i < m; ++i)
          err = std::max(err, std::abs(tail[i] - (*s.frequency)[i]));
        report.checks.push_back(check("frequency.matches_period",
                                      err <= kSumTol, kSumTol - err,
                                      "declared chi equals the frequencies of "
                                      "the periodic tail",
                                      ErrorCode::kFrequencyMismatch));
      }
    }
  }
  if (!report.ok()) return;

  double margin = 1.0;
  for (const auto& pat : s.patterns) {
    const double gap = spanning_gap(pat.ratios);
    const double largest =
        *std::max_element(pat.ratios.begin(), pat.ratios.end());
    margin = std::min(margin, gap - s.gap * largest);
  }
  report.checks.push_back(check("separation.siblings", margin > 0.0, margin,
                                "sibling gap >= beta * max sibling diameter, "
                                "relative to the parent length",
                                ErrorCode::kSeparationViolation));
}

std::uint64_t fnv1a(std::uint64_t h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) {
    h ^= (bits >> (8 * k)) & 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

AffineMap interval_map(double scale, double offset) {
  return AffineMap{1, {scale}, {offset}};
}

}  // namespace

// ---- Box / AffineMap ---------------------------------------------------

double Box::diameter() const {
  double s = 0.0;
  for (std::size_t k = 0; k < lower.size(); ++k) {
    const double d = upper[k] - lower[k];
    s += d * d;
  }
  return lower.size() == 1 ? upper[0] - lower[0] : std::sqrt(s);
}

bool Box::contains(std::span<const double> p, double tol) const {
  for (std::size_t k = 0; k < lower.size(); ++k)
    if (p[k] < lower[k] - tol || p[k] > upper[k] + tol) return false;
  return true;
}

bool Box::contains(const Box& other, double tol) const {
  for (std::size_t k = 0; k < lower.size(); ++k)
    if (other.lower[k] < lower[k] - tol || other.upper[k] > upper[k] + tol)
      return false;
  return true;
}

double box_gap(const Box& a, const Box& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d =
        std::max({0.0, a.lower[k] - b.upper[k], b.lower[k] - a.upper[k]});
    s += d * d;
  }
  return std::sqrt(s);
}

double box_overlap(const Box& a, const Box& b) {
  double extent = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < a.dim(); ++k)
    extent = std::min(extent, std::min(a.upper[k], b.upper[k]) -
                                  std::max(a.lower[k], b.lower[k]));
  if (extent > 0.0) return extent;
  return -box_gap(a, b);
}

AffineMap AffineMap::identity(std::size_t dim) {
  AffineMap m{dim, std::vector<double>(dim * dim, 0.0),
              std::vector<double>(dim, 0.0)};
  for (std::size_t i = 0; i < dim; ++i) m.linear[i * dim + i] = 1.0;
  return m;
}

void AffineMap::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < dim; ++i) {
    double v = offset[i];
    for (std::size_t j = 0; j < dim; ++j) v += linear[i * dim + j] * x[j];
    out[i] = v;
  }
}

AffineMap AffineMap::compose(const AffineMap& inner) const {
  AffineMap out{dim, std::vector<double>(dim * dim, 0.0), offset};
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < dim; ++k)
        v += linear[i * dim + k] * inner.linear[k * dim + j];
      out.linear[i * dim + j] = v;
    }
    for (std::size_t k = 0; k < dim; ++k)
      out.offset[i] += linear[i * dim + k] * inner.offset[k];
  }
  return out;
}

Box AffineMap::image(const Box& box) const {
  Box out{offset, offset};
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double a = linear[i * dim + j] * box.lower[j];
      const double b = linear[i * dim + j] * box.upper[j];
      out.lower[i] += std::min(a, b);
      out.upper[i] += std::max(a, b);
    }
  return out;
}

AffineMap Similitude::as_affine(std::size_t dim) const {
  AffineMap m = AffineMap::identity(dim);
  for (std::size_t i = 0; i < dim * dim; ++i)
    m.linear[i] = ratio * (orthogonal.empty() ? m.linear[i] : orthogonal[i]);
  m.offset = translation;
  return m;
}

// ---- validation ---------------------------------------------------------

std::string_view family_name(Family family) {
  switch (family) {
    case Family::kSelfSimilar: return "self_similar";
    case Family::kCarpet: return "carpet";
    case Family::kMarkov: return "markov";
    case Family::kMultiscale: return "multiscale";
  }
  return "unknown";
}

Family family_of(const MeasureSpec& spec) {
  return static_cast<Family>(spec.index());
}

bool ValidationReport::ok() const { return first_failure() == nullptr; }

const ValidationCheck* ValidationReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.passed) return &c;
  return nullptr;
}

ValidationReport validate(const MeasureSpec& spec) {
  ValidationReport report;
  report.family = family_of(spec);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SelfSimilarSpec>)
          validate_self_similar(s, report);
        else if constexpr (std::is_same_v<T, CarpetSpec>)
          validate_carpet(s, report);
        else if constexpr (std::is_same_v<T, MarkovSpec>)
          validate_markov(s, report);
        else
          validate_multiscale(s, report);
      },
      spec);
  return report;
}

// ---- Measure ------------------------------------------------------------

Measure Measure::create(MeasureSpec spec) {
  auto report = validate(spec);
  if (const auto* bad = report.first_failure())
    throw Error(bad->error, bad->name + " failed: " + bad->detail +
                                " (margin " + std::to_string(bad->margin) +
                                ")");

  Measure m;
  m.family_ = report.family;
  m.report_ = std::make_shared<const ValidationReport>(std::move(report));
  auto add = [&](std::size_t key, std::uint32_t symbol, LocalMap lm) {
    if (m.local_.size() <= key) m.local_.resize(key + 1);
    if (m.local_[key].size() <= symbol) m.local_[key].resize(symbol + 1);
    m.local_[key][symbol] = std::move(lm);
  };

  if (const auto* s = std::get_if<SelfSimilarSpec>(&spec)) {
    m.root_ = s->box;
    for (std::size_t i = 0; i < s->maps.size(); ++i)
      add(0, std::uint32_t(i),
          {s->maps[i].as_affine(s->dim), s->probs[i], s->maps[i].ratio});
  } else if (const auto* s = std::get_if<CarpetSpec>(&spec)) {
    m.root_ = Box{{0.0, 0.0}, {1.0, 1.0}};
    const double sx = 1.0 / s->n;
    const double sy = 1.0 / s->m;
    for (std::size_t g = 0; g < s->digits.size(); ++g) {
      const auto [i, j] = s->digits[g];
      add(0, std::uint32_t(g),
          {AffineMap{2, {sx, 0.0, 0.0, sy}, {i * sx, j * sy}}, s->probs[g],
           sx});
    }
  } else if (const auto* s = std::get_if<MarkovSpec>(&spec)) {
    m.root_ = Box{{0.0}, {1.0}};
    const std::size_t n = s->transition.size();
    const double len = 1.0 / double(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i)
      add(0, std::uint32_t(i),
          {interval_map(len, 2.0 * double(i) * len), s->initial[i], len});
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> kids;
      for (std::size_t j = 0; j < n; ++j)
        if (s->transition[i][j] > 0.0) kids.push_back(s->ratios[i][j]);
      const double gap = spanning_gap(kids);
      double pos = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (s->transition[i][j] <= 0.0) continue;
        const double c = s->ratios[i][j];
        add(i + 1, std::uint32_t(j),
            {interval_map(c, pos), s->transition[i][j], c});
        pos += c + gap;
      }
      if (m.local_.size() <= i + 1) m.local_.resize(i + 2);
      m.local_[i + 1].resize(n);
    }
  } else if (const auto* s = std::get_if<MultiscaleSpec>(&spec)) {
    m.root_ = Box{{0.0}, {1.0}};
    const std::size_t mm = s->patterns.size();
    for (std::size_t i = 0; i < mm; ++i) {
      const auto& pat = s->patterns[i];
      const double gap = spanning_gap(pat.ratios);
      double pos = 0.0;
      for (std::size_t j = 0; j < pat.ratios.size(); ++j) {
        add(i, std::uint32_t(j),
            {interval_map(pat.ratios[j], pos), pat.probs[j], pat.ratios[j]});
        pos += pat.ratios[j] + gap;
      }
    }
    if (s->sequence) {
      m.frequency_ = tail_frequency(*s->sequence, mm);
    } else if (s->frequency) {
      m.frequency_ = *s->frequency;
      // Largest-deficit generator: bounded discrepancy |N_k,i - k chi_i|.
      auto omega = std::make_shared<std::vector<std::uint32_t>>();
      omega->reserve(kGeneratedLevels);
      std::vector<double> counts(mm, 0.0);
      for (std::size_t k = 1; k <= kGeneratedLevels; ++k) {
        std::size_t best = 0;
        double best_deficit = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mm; ++i) {
          const double deficit = double(k) * m.frequency_[i] - counts[i];
          if (deficit > best_deficit) {
            best_deficit = deficit;
            best = i;
          }
        }
        counts[best] += 1.0;
        omega->push_back(std::uint32_t(best));
      }
      m.omega_ = std::move(omega);
    } else {
      m.frequency_ = {1.0};
    }
  }

  m.root_diameter_ = m.root_.diameter();
  m.cumulative_.resize(m.local_.size());
  for (std::size_t key = 0; key < m.local_.size(); ++key) {
    double acc = 0.0;
    for (const auto& lm : m.local_[key]) {
      acc += lm ? lm->mass : 0.0;
      m.cumulative_[key].push_back(acc);
    }
  }
  m.spec_ = std::make_shared<const MeasureSpec>(std::move(spec));
  return m;
}

std::string Measure::identity() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::size_t symbols = 0;
  for (const auto& row : local_)
    for (const auto& lm : row) {
      if (!lm) {
        h = fnv1a(h, -1.0);
        continue;
      }
      ++symbols;
      h = fnv1a(h, lm->mass);
      h = fnv1a(h, lm->ratio);
      for (double v : lm->map.linear) h = fnv1a(h, v);
      for (double v : lm->map.offset) h = fnv1a(h, v);
    }
  for (double v : frequency_) h = fnv1a(h, v);
  if (family_ == Family::kMultiscale)
    for (std::size_t l = 1; l <= 64; ++l) h = fnv1a(h, double(pattern_at(l)));
  std::ostringstream out;
  out << family_name(family_) << ":" << std::hex << h;
  return out.str();
}

std::size_t Measure::pattern_at(std::size_t level) const {
  if (family_ != Family::kMultiscale)
    throw Error(ErrorCode::kInvalidArgument, "pattern_at: not multiscale");
  if (level == 0)
    throw Error(ErrorCode::kInvalidArgument, "pattern_at: levels are 1-based");
  const auto& s = std::get<MultiscaleSpec>(*spec_);
  if (s.sequence) {
    const auto& seq = *s.sequence;
    if (level <= seq.prefix.size()) return seq.prefix[level - 1];
    return seq.period[(level - 1 - seq.prefix.size()) % seq.period.size()];
  }
  if (omega_) {
    if (level > omega_->size())
      throw Error(ErrorCode::kLevelCapExceeded,
                  "generated pattern sequence holds " +
                      std::to_string(omega_->size()) + " levels");
    return (*omega_)[level - 1];
  }
  return 0;
}

const Measure::LocalMap& Measure::local(std::uint32_t key,
                                        std::uint32_t symbol) const {
  if (key >= local_.size() || symbol >= local_[key].size() ||
      !local_[key][symbol])
    throw Error(ErrorCode::kInadmissibleWord,
                "symbol " + std::to_string(symbol) + " not admissible here");
  return *local_[key][symbol];
}

namespace {

std::uint32_t key_for(Family family, const Measure& m, const Word& word) {
  switch (family) {
    case Family::kMarkov:
      return word.empty() ? 0 : word.back() + 1;
    case Family::kMultiscale:
      return std::uint32_t(m.pattern_at(word.size() + 1));
    default:
      return 0;
  }
}

}  // namespace

CylinderNode Measure::root() const {
  CylinderNode node;
  node.record.mass = 1.0;
  node.record.diameter = root_diameter_;
  node.record.box = root_;
  node.map = AffineMap::identity(dim());
  return node;
}

std::vector<std::uint32_t> Measure::allowed(const CylinderNode& node) const {
  const auto key = key_for(family_, *this, node.record.word);
  std::vector<std::uint32_t> out;
  for (std::uint32_t s = 0; s < local_[key].size(); ++s)
    if (local_[key][s]) out.push_back(s);
  return out;
}

std::vector<CylinderNode> Measure::children(const CylinderNode& parent) const {
  const auto key = key_for(family_, *this, parent.record.word);
  std::vector<CylinderNode> out;
  for (std::uint32_t s : allowed(parent)) {
    const LocalMap& lm = local(key, s);
    CylinderNode child;
    child.record.word = parent.record.word;
    child.record.word.push_back(s);
    child.record.mass = parent.record.mass * lm.mass;
    child.map = parent.map.compose(lm.map);
    child.record.box = child.map.image(root_);
    child.record.diameter = family_ == Family::kCarpet
                                ? child.record.box.diameter()
                                : parent.record.diameter * lm.ratio;
    out.push_back(std::move(child));
  }
  return out;
}

CylinderRecord Measure::cylinder(const Word& word) const {
  CylinderNode node = root();
  for (std::uint32_t s : word) {
    const auto key = key_for(family_, *this, node.record.word);
    const LocalMap& lm = local(key, s);
    node.record.word.push_back(s);
    node.record.mass *= lm.mass;
    node.map = node.map.compose(lm.map);
    node.record.diameter = family_ == Family::kCarpet
                               ? 0.0
                               : node.record.diameter * lm.ratio;
  }
  node.record.box = node.map.image(root_);
  if (family_ == Family::kCarpet) node.record.diameter = node.record.box.diameter();
  return node.record;
}

std::vector<double> Measure::coding_map(const Word& word) const {
  AffineMap map = AffineMap::identity(dim());
  Word prefix;
  for (std::uint32_t s : word) {
    map = map.compose(local(key_for(family_, *this, prefix), s).map);
    prefix.push_back(s);
  }
  std::vector<double> out(dim());
  map.apply(root_.lower, out);
  return out;
}

double Measure::min_mass_ratio() const {
  double v = 1.0;
  for (const auto& row : local_)
    for (const auto& lm : row)
      if (lm) v = std::min(v, lm->mass);
  return v;
}

double Measure::min_diameter_ratio() const {
  double v = 1.0;
  for (const auto& row : local_)
    for (const auto& lm : row)
      if (lm) v = std::min(v, lm->ratio);
  return v;
}

double Measure::max_diameter_ratio() const {
  if (family_ == Family::kCarpet) {
    const auto& s = std::get<CarpetSpec>(*spec_);
    return 1.0 / s.m;
  }
  double v = 0.0;
  for (const auto& row : local_)
    for (const auto& lm : row)
      if (lm) v = std::max(v, lm->ratio);
  return v;
}

void Measure::sample_point(Rng& rng, int depth, std::span<double> out) const {
  const std::size_t q = dim();
  std::uint32_t key = 0;
  if (q == 1) {
    double scale = 1.0;
    double offset = 0.0;
    for (int level = 0; level < depth; ++level) {
      if (family_ == Family::kMultiscale)
        key = std::uint32_t(pattern_at(std::size_t(level) + 1));
      const auto& cum = cumulative_[key];
      const double u = rng.uniform() * cum.back();
      std::uint32_t s = 0;
      while (s + 1 < cum.size() && (u >= cum[s] || !local_[key][s])) ++s;
      const LocalMap& lm = *local_[key][s];
      offset += scale * lm.map.offset[0];
      scale *= lm.map.linear[0];
      if (family_ == Family::kMarkov) key = s + 1;
    }
    out[0] = offset + scale * root_.lower[0];
    return;
  }
  AffineMap map = AffineMap::identity(q);
  for (int level = 0; level < depth; ++level) {
    const auto& cum = cumulative_[key];
    const double u = rng.uniform() * cum.back();
    std::uint32_t s = 0;
    while (s + 1 < cum.size() && (u >= cum[s] || !local_[key][s])) ++s;
    map = map.compose(local_[key][s]->map);
  }
  map.apply(root_.lower, out);
}

// ---- enumeration ----------------------------------------------------------

namespace {

// Approximate square of order k of a carpet with n > m: full digits
// g_1..g_l, l = floor(k theta), followed by row digits j_{l+1}..j_k; the cell
// is n^-l wide and m^-k high. Row digits are encoded as |G| + j in words.
struct ApproxSquare {
  Word full;
  std::vector<int> rows;
  double x0 = 0.0;
  double y0 = 0.0;
};

class ApproxSquares {
 public:
  explicit ApproxSquares(const CarpetSpec& s)
      : spec_(s), theta_(std::log(double(s.m)) / std::log(double(s.n))) {
    row_mass_.assign(std::size_t(s.m), 0.0);
    for (std::size_t g = 0; g < s.digits.size(); ++g)
      row_mass_[std::size_t(s.digits[g].second)] += s.probs[g];
    for (int j = 0; j < s.m; ++j)
      if (row_mass_[std::size_t(j)] > 0.0) rows_.push_back(j);
  }

  std::size_t full_depth(std::size_t k) const {
    return std::size_t(std::floor(double(k) * theta_ + 1e-12));
  }

  std::vector<ApproxSquare> children(const ApproxSquare& node) const {
    const std::size_t k = node.full.size() + node.rows.size();
    std::vector<ApproxSquare> heads;
    if (full_depth(k + 1) == node.full.size()) {
      heads.push_back(node);
    } else {
      // The oldest row digit is resolved into a full digit.
      const int row = node.rows.front();
      const double wx = std::pow(double(spec_.n), -double(node.full.size() + 1));
      for (std::size_t g = 0; g < spec_.digits.size(); ++g) {
        if (spec_.digits[g].second != row) continue;
        ApproxSquare h = node;
        h.full.push_back(std::uint32_t(g));
        h.rows.erase(h.rows.begin());
        h.x0 += spec_.digits[g].first * wx;
        heads.push_back(std::move(h));
      }
    }
    const double hy = std::pow(double(spec_.m), -double(k + 1));
    std::vector<ApproxSquare> out;
    for (const auto& h : heads)
      for (int j : rows_) {
        ApproxSquare c = h;
        c.rows.push_back(j);
        c.y0 += j * hy;
        out.push_back(std::move(c));
      }
    return out;
  }

  CylinderRecord record(const ApproxSquare& node) const {
    CylinderRecord rec;
    rec.word = node.full;
    for (int j : node.rows)
      rec.word.push_back(std::uint32_t(spec_.digits.size() + std::size_t(j)));
    rec.mass = 1.0;
    for (std::uint32_t g : node.full) rec.mass *= spec_.probs[g];
    for (int j : node.rows) rec.mass *= row_mass_[std::size_t(j)];
    const std::size_t k = node.full.size() + node.rows.size();
    const double w = std::pow(double(spec_.n), -double(node.full.size()));
    const double h = std::pow(double(spec_.m), -double(k));
    rec.box = Box{{node.x0, node.y0}, {node.x0 + w, node.y0 + h}};
    rec.diameter = rec.box.diameter();
    return rec;
  }

 private:
  const CarpetSpec& spec_;
  double theta_;
  std::vector<double> row_mass_;
  std::vector<int> rows_;
};

Partition carpet_partition(const CarpetSpec& spec, double eps, double r,
                           const PartitionOptions& options) {
  const ApproxSquares squares(spec);
  const double cut = eps * (1.0 - 1e-12);
  Partition out;
  out.threshold = eps;
  out.order = r;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::vector<ApproxSquare> stack = squares.children(ApproxSquare{});
  std::reverse(stack.begin(), stack.end());
  while (!stack.empty()) {
    ApproxSquare node = std::move(stack.back());
    stack.pop_back();
    CylinderRecord rec = squares.record(node);
    const double value = rec.mass * std::pow(rec.diameter, r);
    if (value < cut) {
      lo = std::min(lo, value);
      hi = std::max(hi, value);
      out.cells.push_back(std::move(rec));
      if (out.cells.size() > options.max_cells)
        throw Error(ErrorCode::kThresholdTooSmall,
                    "partition exceeds " + std::to_string(options.max_cells) +
                        " cells");
      continue;
    }
    if (rec.depth() >= options.max_depth)
      throw Error(ErrorCode::kThresholdTooSmall,
                  "word depth would exceed " + std::to_string(options.max_depth));
    auto kids = squares.children(node);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it)
      stack.push_back(std::move(*it));
  }
  out.uniformity = out.cells.empty() ? 1.0 : hi / lo;
  return out;
}

}  // namespace

Partition partition_at_threshold(const Measure& measure, double eps, double r,
                                 const PartitionOptions& options) {
  if (!(r > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "partition order r must be > 0");
  const double root_value =
      std::pow(measure.root_diameter(), r);  // mu(J) = 1
  if (!(eps > 0.0) || eps > root_value * (1.0 + 1e-12))
    throw Error(ErrorCode::kInvalidArgument,
                "threshold must lie in (0, mu(J)|J|^r]");
  if (const auto* carpet = std::get_if<CarpetSpec>(&measure.spec());
      carpet && carpet->n > carpet->m)
    return carpet_partition(*carpet, eps, r, options);
  const double cut = eps * (1.0 - 1e-12);

  Partition out;
  out.threshold = eps;
  out.order = r;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::vector<CylinderNode> stack = measure.children(measure.root());
  std::reverse(stack.begin(), stack.end());
  while (!stack.empty()) {
    CylinderNode node = std::move(stack.back());
    stack.pop_back();
    const double value =
        node.record.mass * std::pow(node.record.diameter, r);
    if (value < cut) {
      lo = std::min(lo, value);
      hi = std::max(hi, value);
      out.cells.push_back(std::move(node.record));
      if (out.cells.size() > options.max_cells)
        throw Error(ErrorCode::kThresholdTooSmall,
                    "partition exceeds " + std::to_string(options.max_cells) +
                        " cells");
      continue;
    }
    if (node.record.depth() >= options.max_depth)
      throw Error(ErrorCode::kThresholdTooSmall,
                  "word depth would exceed " +
                      std::to_string(options.max_depth));
    auto kids = measure.children(node);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it)
      stack.push_back(std::move(*it));
  }
  out.uniformity = out.cells.empty() ? 1.0 : hi / lo;
  return out;
}

std::vector<CylinderRecord> cylinders_at_depth(const Measure& measure,
                                               std::size_t depth,
                                               std::size_t max_cells) {
  std::vector<CylinderNode> level{measure.root()};
  for (std::size_t d = 0; d < depth; ++d) {
    std::vector<CylinderNode> next;
    for (const auto& node : level) {
      auto kids = measure.children(node);
      for (auto& k : kids) next.push_back(std::move(k));
      if (next.size() > max_cells)
        throw Error(ErrorCode::kLevelCapExceeded,
                    "depth " + std::to_string(depth) + " exceeds " +
                        std::to_string(max_cells) + " cylinders");
    }
    level = std::move(next);
  }
  std::vector<CylinderRecord> out;
  out.reserve(level.size());
  for (auto& node : level) out.push_back(std::move(node.record));
  return out;
}

int default_sample_depth(const Measure& measure, double resolution) {
  const double c = measure.max_diameter_ratio();
  const double k = std::log(resolution / measure.root_diameter()) / std::log(c);
  return std::max(1, int(std::floor(k)) + 1);
}

SampleCloud sample(const Measure& measure, std::size_t count, int depth,
                   std::uint64_t seed, unsigned threads) {
  if (count == 0)
    throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 1");
  if (depth <= 0) depth = default_sample_depth(measure);
  SampleCloud cloud;
  cloud.seed = seed;
  cloud.depth = depth;
  cloud.measure_id = measure.identity();
  cloud.points = PointSet(measure.dim());
  cloud.points.resize(count);
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(count, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      Rng rng = Rng::stream(seed, {i});
      measure.sample_point(rng, depth, cloud.points[i]);
    }
  });
  return cloud;
}

}  // namespace fracquant
