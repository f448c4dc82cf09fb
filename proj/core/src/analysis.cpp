#include "fracquant/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fracquant/error.hpp"

namespace fracquant {

std::vector<CurveSample> curve_samples(const ErrorCurve& curve) {
  std::vector<CurveSample> out;
  out.reserve(curve.points.size());
  for (const auto& p : curve.points) out.emplace_back(p.n, p.error);
  return out;
}

FitResult dimension_fit(const std::vector<CurveSample>& curve,
                        std::size_t drop) {
  if (curve.size() < 4)
    throw Error(ErrorCode::kInvalidArgument,
                "dimension fit needs at least 4 points, got " +
                    std::to_string(curve.size()));
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].first == 0 || (i > 0 && curve[i].first <= curve[i - 1].first))
      throw Error(ErrorCode::kInvalidArgument,
                  "curve n values must be positive and strictly increasing");
    if (!(curve[i].second > 0.0))
      throw Error(ErrorCode::kZeroError,
                  "e = 0 at n = " + std::to_string(curve[i].first) +
                      ": measure is finitely supported at this resolution");
  }
  FitResult out;
  out.dropped = std::min(drop, curve.size() - 4);
  const std::size_t count = curve.size() - out.dropped;
  std::vector<double> x, y;
  for (std::size_t i = out.dropped; i < curve.size(); ++i) {
    x.push_back(-std::log(curve[i].second));
    y.push_back(std::log(static_cast<double>(curve[i].first)));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(count);
  my /= static_cast<double>(count);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "curve errors are all equal");
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  for (std::size_t i = 0; i < count; ++i) {
    const double res = y[i] - (out.intercept + out.slope * x[i]);
    out.residual_sum += res * res;
  }
  out.standard_error =
      std::sqrt(out.residual_sum / static_cast<double>(count - 2) / sxx);
  out.n_first = curve[out.dropped].first;
  out.n_last = curve.back().first;
  out.points_used = count;
  return out;
}

CoefficientSeries coefficient_series(const std::vector<CurveSample>& curve,
                                     double s) {
  if (!(s > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "coefficient series needs s > 0");
  if (curve.empty())
    throw Error(ErrorCode::kInvalidArgument, "empty curve");
  CoefficientSeries out;
  out.s = s;
  for (const auto& [n, e] : curve)
    out.values.emplace_back(n, std::pow(static_cast<double>(n), 1.0 / s) * e);
  auto cmp = [](const CurveSample& a, const CurveSample& b) {
    return a.second < b.second;
  };
  out.min = std::min_element(out.values.begin(), out.values.end(), cmp)->second;
  out.max = std::max_element(out.values.begin(), out.values.end(), cmp)->second;
  out.ratio = out.min > 0.0 ? out.max / out.min
                            : std::numeric_limits<double>::infinity();
  out.verdict = out.ratio <= kCoefficientBandRatio
                    ? "consistent with positive finite coefficient"
                    : "inconsistent with positive finite coefficient";
  return out;
}

const ReportEntry* Report::entry(const std::string& quantity) const {
  for (const auto& e : entries)
    if (e.quantity == quantity) return &e;
  return nullptr;
}

double fit_tolerance(std::size_t ambient_dim) {
  return ambient_dim <= 1 ? 0.05 : 0.15;
}

Report build_report(const ReportInputs& in) {
  if (!in.theory && !in.fit && !in.bounds)
    throw Error(ErrorCode::kEmptyReport,
                "report needs a dimension report, fit, or bounds table");
  Report out;
  if (in.theory) {
    out.family = family_name(in.theory->family);
    out.r = in.theory->r;
    out.entries.push_back({"theoretical_dimension", in.theory->value,
                           "dim-solver"});
    out.verdicts = in.theory->verdicts;
  }
  if (in.bounds) {
    if (!in.theory) out.r = in.bounds->r;
    if (in.bounds->levels.size() >= 3) {
      out.critical = critical_exponent(*in.bounds);
      out.entries.push_back(
          {"critical_exponent", out.critical->value, "partition-bounds"});
      if (!out.critical->converged)
        out.notes.push_back("critical exponent iterates not contracting");
    } else {
      out.notes.push_back("bounds table too short for a critical exponent");
    }
  }
  if (in.fit) {
    out.entries.push_back({"fitted_slope", in.fit->slope, "analysis"});
    out.entries.push_back(
        {"fitted_slope_standard_error", in.fit->standard_error, "analysis"});
  }
  if (in.series) {
    out.entries.push_back({"coefficient_series_ratio", in.series->ratio,
                           "analysis"});
    out.verdicts.emplace_back("coefficient_series", in.series->verdict);
  }
  if (in.band) {
    out.entries.push_back({"coefficient_band_ratio", in.band->ratio,
                           "partition-bounds"});
    out.verdicts.emplace_back(
        "coefficient_band",
        in.band->ratio <= kCoefficientBandRatio
            ? "consistent with positive finite coefficient"
            : "inconsistent with positive finite coefficient");
  }

  auto compare = [&](const char* a, const char* b, double tol) {
    const ReportEntry* x = out.entry(a);
    const ReportEntry* y = out.entry(b);
    if (!x || !y) return;
    const double diff = std::abs(x->value - y->value);
    out.discrepancies.push_back({a, b, diff, tol, !(diff <= tol)});
  };
  const double fit_tol = fit_tolerance(in.ambient_dim);
  compare("theoretical_dimension", "critical_exponent", kCriticalTolerance);
  compare("theoretical_dimension", "fitted_slope", fit_tol);
  compare("critical_exponent", "fitted_slope", fit_tol);
  return out;
}

}  // namespace fracquant
