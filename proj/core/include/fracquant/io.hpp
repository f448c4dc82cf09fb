#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fracquant/analysis.hpp"
#include "fracquant/dim_solver.hpp"
#include "fracquant/measure.hpp"
#include "fracquant/partition_bounds.hpp"
#include "fracquant/quantizer.hpp"

// Text serializers. CSV doubles use 17 significant digits; JSON documents
// keep key order, so equal inputs give byte-identical output.
namespace fracquant::io {

std::string number(double v);

std::string dimension_json(const DimensionReport& report);
std::string sequence_csv(const DimensionReport& report);
std::string validation_json(const ValidationReport& report);

std::string curve_csv(const ErrorCurve& curve);
std::string curve_json(const ErrorCurve& curve);
std::string codebooks_json(const ErrorCurve& curve);
std::string histogram_csv(const PointDensity& density);
std::string voronoi_csv(const std::vector<std::size_t>& n,
                        const std::vector<VoronoiDiagnostics>& diagnostics);

std::string cylinders_csv(const std::vector<CylinderRecord>& cells);

std::string bounds_csv(const BoundsTable& table);
std::string bounds_json(const BoundsTable& table,
                        const std::optional<CriticalExponent>& critical);

std::string fit_json(const FitResult& fit,
                     const std::optional<CoefficientSeries>& series);
std::string series_csv(const CoefficientSeries& series);

std::string report_json(const Report& report);

// Reads (n, e) rows from a CSV with a header naming columns "n" and "e".
std::vector<CurveSample> read_curve_csv(const std::string& text);

}  // namespace fracquant::io
