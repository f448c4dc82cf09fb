#include "fracquant/io.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "fracquant/error.hpp"

namespace fracquant::io {

namespace {

using Json = nlohmann::ordered_json;

// JSON has no NaN/inf; keep them visible as strings.
Json value(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json values(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(value(x));
  return out;
}

Json points(const PointSet& set) {
  Json out = Json::array();
  for (std::size_t i = 0; i < set.size(); ++i) {
    Json p = Json::array();
    for (double x : set[i]) p.push_back(value(x));
    out.push_back(std::move(p));
  }
  return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string word_text(const Word& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(w[i]);
  }
  return out;
}

std::string box_text(const Box& b) {
  std::string out;
  for (std::size_t k = 0; k < b.dim(); ++k) {
    if (k) out += ';';
    out += number(b.lower[k]) + ":" + number(b.upper[k]);
  }
  return out;
}

Json critical_json(const CriticalExponent& c) {
  Json j;
  j["t_star"] = value(c.t_star);
  j["value"] = value(c.value);
  j["last_difference"] = value(c.last_difference);
  j["differences"] = values(c.differences);
  j["status"] = c.converged ? "converged" : "non-convergent";
  return j;
}

}  // namespace

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

std::string dimension_json(const DimensionReport& r) {
  Json j;
  j["family"] = std::string(family_name(r.family));
  j["quantity"] = r.quantity;
  j["r"] = value(r.r);
  j["value"] = value(r.value);
  j["t"] = value(r.t);
  j["residual"] = value(r.residual);
  j["iterations"] = r.iterations;
  Json aux = Json::object();
  for (const auto& [k, v] : r.auxiliary) aux[k] = value(v);
  j["auxiliary"] = aux;
  Json comps = Json::array();
  for (const auto& c : r.components) {
    Json cj;
    cj["vertices"] = c.vertices;
    cj["value"] = value(c.value);
    cj["in_maximal_set"] = c.in_maximal_set;
    comps.push_back(std::move(cj));
  }
  j["components"] = comps;
  Json verdicts = Json::object();
  for (const auto& [k, v] : r.verdicts) verdicts[k] = v;
  j["verdicts"] = verdicts;
  Json seq = Json::array();
  for (const auto& row : r.sequence) {
    Json sj;
    sj["k"] = row.k;
    sj["value"] = value(row.value);
    sj["k_times_gap"] = value(row.k_times_gap);
    seq.push_back(std::move(sj));
  }
  j["sequences"] = seq;
  j["notes"] = r.notes;
  return dump(j);
}

std::string sequence_csv(const DimensionReport& r) {
  std::string out = "k,s_kr,k_times_gap\n";
  for (const auto& row : r.sequence)
    out += fmt::format("{},{},{}\n", row.k, number(row.value),
                       number(row.k_times_gap));
  return out;
}

std::string validation_json(const ValidationReport& report) {
  Json j;
  j["family"] = std::string(family_name(report.family));
  j["valid"] = report.ok();
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    Json cj;
    cj["name"] = c.name;
    cj["passed"] = c.passed;
    cj["margin"] = value(c.margin);
    cj["detail"] = c.detail;
    if (!c.passed) cj["error"] = std::string(to_string(c.error));
    checks.push_back(std::move(cj));
  }
  j["checks"] = checks;
  Json derived = Json::object();
  for (const auto& [k, v] : report.derived) derived[k] = value(v);
  j["derived"] = derived;
  return dump(j);
}

std::string curve_csv(const ErrorCurve& curve) {
  std::string out = "n,e,iterations,restarts_used\n";
  for (const auto& p : curve.points)
    out += fmt::format("{},{},{},{}\n", p.n, number(p.error), p.iterations,
                       p.restarts_used);
  return out;
}

std::string curve_json(const ErrorCurve& curve) {
  Json j;
  j["r"] = value(curve.order);
  Json rows = Json::array();
  for (const auto& p : curve.points) {
    Json row;
    row["n"] = p.n;
    row["e"] = value(p.error);
    row["iterations"] = p.iterations;
    row["restarts_used"] = p.restarts_used;
    if (p.n_too_large) row["warning"] = "n exceeds distinct samples";
    if (p.carried) row["carried"] = true;
    rows.push_back(std::move(row));
  }
  j["curve"] = rows;
  return dump(j);
}

std::string codebooks_json(const ErrorCurve& curve) {
  Json j;
  j["r"] = value(curve.order);
  Json books = Json::array();
  for (const auto& b : curve.codebooks) {
    Json bj;
    bj["n"] = b.n_requested;
    bj["size"] = b.points.size();
    bj["distortion"] = value(b.distortion);
    bj["iterations"] = b.iterations;
    bj["best_restart"] = b.best_restart;
    if (b.n_too_large) bj["warning"] = "n exceeds distinct samples";
    if (b.stationary_only) bj["note"] = "r < 1: stationary point only";
    bj["points"] = points(b.points);
    books.push_back(std::move(bj));
  }
  j["codebooks"] = books;
  return dump(j);
}

std::string histogram_csv(const PointDensity& density) {
  std::string out = "bin_low,bin_high,mass\n";
  for (std::size_t i = 0; i < density.pooled.mass.size(); ++i) {
    const Box b = density.bin(i);
    std::string lo, hi;
    for (std::size_t k = 0; k < b.dim(); ++k) {
      if (k) {
        lo += ';';
        hi += ';';
      }
      lo += number(b.lower[k]);
      hi += number(b.upper[k]);
    }
    out += fmt::format("{},{},{}\n", lo, hi, number(density.pooled.mass[i]));
  }
  return out;
}

std::string voronoi_csv(const std::vector<std::size_t>& n,
                        const std::vector<VoronoiDiagnostics>& diagnostics) {
  std::string out = "n,e_r,min_cell,max_cell,lower_ratio,upper_ratio\n";
  for (std::size_t i = 0; i < diagnostics.size(); ++i) {
    const auto& d = diagnostics[i];
    out += fmt::format("{},{},{},{},{},{}\n", n[i], number(d.total),
                       number(d.min), number(d.max), number(d.lower_ratio),
                       number(d.upper_ratio));
  }
  return out;
}

std::string cylinders_csv(const std::vector<CylinderRecord>& cells) {
  std::string out = "word,depth,mass,diameter,box\n";
  for (const auto& c : cells)
    out += fmt::format("{},{},{},{},{}\n", word_text(c.word), c.depth(),
                       number(c.mass), number(c.diameter), box_text(c.box));
  return out;
}

std::string bounds_csv(const BoundsTable& table) {
  std::string out = "level,phi,moment_sum,t_level,C,delta\n";
  for (const auto& l : table.levels)
    out += fmt::format("{},{},{},{},{},{}\n", l.level, l.phi,
                       number(l.moment_sum), number(l.t_level),
                       number(l.uniformity), number(l.delta));
  return out;
}

std::string bounds_json(const BoundsTable& table,
                        const std::optional<CriticalExponent>& critical) {
  Json j;
  j["r"] = value(table.r);
  j["rho"] = value(table.rho);
  j["epsilon0"] = value(table.epsilon0);
  j["t_grid"] = values(table.t_grid);
  Json levels = Json::array();
  for (const auto& l : table.levels) {
    Json lj;
    lj["level"] = l.level;
    lj["threshold"] = value(l.threshold);
    lj["phi"] = l.phi;
    lj["moment_sum"] = value(l.moment_sum);
    lj["t_level"] = value(l.t_level);
    lj["t_residual"] = value(l.t_residual);
    lj["C"] = value(l.uniformity);
    lj["delta"] = value(l.delta);
    lj["t_sums"] = values(l.t_sums);
    lj["min_depth"] = l.min_depth;
    lj["max_depth"] = l.max_depth;
    levels.push_back(std::move(lj));
  }
  j["levels"] = levels;
  if (critical) j["critical_exponent"] = critical_json(*critical);
  return dump(j);
}

std::string fit_json(const FitResult& fit,
                     const std::optional<CoefficientSeries>& series) {
  Json j;
  j["slope"] = value(fit.slope);
  j["intercept"] = value(fit.intercept);
  j["residual_sum"] = value(fit.residual_sum);
  j["standard_error"] = value(fit.standard_error);
  j["n_first"] = fit.n_first;
  j["n_last"] = fit.n_last;
  j["points_used"] = fit.points_used;
  j["dropped"] = fit.dropped;
  if (series) {
    Json sj;
    sj["s"] = value(series->s);
    sj["min"] = value(series->min);
    sj["max"] = value(series->max);
    sj["ratio"] = value(series->ratio);
    sj["verdict"] = series->verdict;
    j["coefficient_series"] = sj;
  }
  return dump(j);
}

std::string series_csv(const CoefficientSeries& series) {
  std::string out = "n,coefficient\n";
  for (const auto& [n, v] : series.values)
    out += fmt::format("{},{}\n", n, number(v));
  return out;
}

std::string report_json(const Report& report) {
  Json j;
  j["family"] = report.family;
  j["r"] = value(report.r);
  Json entries = Json::array();
  for (const auto& e : report.entries) {
    Json ej;
    ej["quantity"] = e.quantity;
    ej["value"] = value(e.value);
    ej["source"] = e.source;
    entries.push_back(std::move(ej));
  }
  j["estimates"] = entries;
  Json verdicts = Json::object();
  for (const auto& [k, v] : report.verdicts) verdicts[k] = v;
  j["verdicts"] = verdicts;
  Json disc = Json::array();
  for (const auto& d : report.discrepancies) {
    Json dj;
    dj["lhs"] = d.lhs;
    dj["rhs"] = d.rhs;
    dj["difference"] = value(d.difference);
    dj["tolerance"] = value(d.tolerance);
    dj["flagged"] = d.flagged;
    disc.push_back(std::move(dj));
  }
  j["discrepancies"] = disc;
  if (report.critical) j["critical_exponent"] = critical_json(*report.critical);
  j["notes"] = report.notes;
  return dump(j);
}

std::vector<CurveSample> read_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(s);
    while (std::getline(row, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
        cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      cells.push_back(cell);
    }
    return cells;
  };
  if (!std::getline(in, line))
    throw Error(ErrorCode::kConfigError, "curve CSV is empty");
  const auto header = split(line);
  std::size_t n_col = header.size(), e_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "n") n_col = i;
    if (header[i] == "e") e_col = i;
  }
  if (n_col == header.size() || e_col == header.size())
    throw Error(ErrorCode::kConfigError, "curve CSV needs columns n and e");
  std::vector<CurveSample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    try {
      if (cells.size() <= std::max(n_col, e_col)) throw std::invalid_argument("");
      const double n = std::stod(cells[n_col]);
      if (!(n >= 1.0) || n != std::floor(n)) throw std::invalid_argument("");
      out.emplace_back(static_cast<std::size_t>(n), std::stod(cells[e_col]));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kConfigError,
                  "curve CSV line " + std::to_string(line_no) + " is malformed");
    }
  }
  return out;
}

}  // namespace fracquant::io
