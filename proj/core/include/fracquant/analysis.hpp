#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fracquant/dim_solver.hpp"
#include "fracquant/partition_bounds.hpp"
#include "fracquant/quantizer.hpp"

namespace fracquant {

using CurveSample = std::pair<std::size_t, double>;  // (n, e_{n,r})

std::vector<CurveSample> curve_samples(const ErrorCurve& curve);

struct FitResult {
  double slope = 0.0;  // fitted quantization dimension
  double intercept = 0.0;
  double residual_sum = 0.0;
  double standard_error = 0.0;
  std::size_t n_first = 0;
  std::size_t n_last = 0;
  std::size_t points_used = 0;
  std::size_t dropped = 0;
};

/// Least squares of log n against -log e over the curve minus its `drop`
/// smallest-n points (clamped so that at least 4 points remain).
FitResult dimension_fit(const std::vector<CurveSample>& curve,
                        std::size_t drop = 2);

constexpr double kCoefficientBandRatio = 3.0;

struct CoefficientSeries {
  double s = 0.0;
  std::vector<CurveSample> values;  // (n, n^{1/s} e)
  double min = 0.0;
  double max = 0.0;
  double ratio = 0.0;
  std::string verdict;
};

CoefficientSeries coefficient_series(const std::vector<CurveSample>& curve,
                                     double s);

struct ReportInputs {
  std::optional<DimensionReport> theory;
  std::optional<FitResult> fit;
  std::optional<BoundsTable> bounds;
  std::optional<CoefficientSeries> series;
  std::optional<CoefficientBand> band;
  std::size_t ambient_dim = 1;
};

struct ReportEntry {
  std::string quantity;
  double value = 0.0;
  std::string source;  // module that produced the value
};

struct Discrepancy {
  std::string lhs;
  std::string rhs;
  double difference = 0.0;
  double tolerance = 0.0;
  bool flagged = false;
};

struct Report {
  std::string family;
  double r = 0.0;
  std::vector<ReportEntry> entries;
  std::vector<std::pair<std::string, std::string>> verdicts;
  std::vector<Discrepancy> discrepancies;
  std::optional<CriticalExponent> critical;
  std::vector<std::string> notes;

  const ReportEntry* entry(const std::string& quantity) const;
};

// Slope tolerance against theory: 0.05 on the line, 0.15 otherwise.
double fit_tolerance(std::size_t ambient_dim);
constexpr double kCriticalTolerance = 1e-3;

Report build_report(const ReportInputs& inputs);

}  // namespace fracquant
