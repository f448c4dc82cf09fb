#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fracquant/measure.hpp"
#include "fracquant/points.hpp"

namespace fracquant {

struct OptimizeOptions {
  std::size_t restarts = 4;
  std::uint64_t seed = 0;
  int max_iterations = 500;
  double tolerance = 1e-9;  // relative distortion improvement
  int inner_iterations = 200;
  unsigned threads = 1;
  // Hartigan-style single-sample transfers after Lloyd stalls, applied only
  // to clouds of at most this many points.
  std::size_t transfer_limit = 256;
  // Consecutive rejected codepoint relocations tolerated on the best restart
  // before stopping; 0 disables the relocation search.
  std::size_t relocation_patience = 3;
};

struct Codebook {
  PointSet points;
  double order = 2.0;
  double distortion = 0.0;  // e_{n,r} against the cloud
  std::size_t n_requested = 0;
  int iterations = 0;
  std::size_t restarts_used = 0;
  std::size_t best_restart = 0;
  bool n_too_large = false;
  // r < 1: the cell objective is not convex and updates only reach
  // stationary points.
  bool stationary_only = false;
  std::vector<double> trace;  // mean d^r after each assignment, best run
};

/// Near-optimal codebook of at most n points for the empirical measure of
/// `cloud`: best of `restarts` seeded generalized Lloyd runs.
Codebook optimize(const PointSet& cloud, std::size_t n, double r,
                  const OptimizeOptions& options = {});

/// Mean of d(x, codebook)^r over the cloud, nearest codepoint per sample.
double mean_power_distance(const PointSet& cloud, const PointSet& codebook,
                           double r);

struct CurvePoint {
  std::size_t n = 0;
  double error = 0.0;
  int iterations = 0;
  std::size_t restarts_used = 0;
  bool n_too_large = false;
  // The smaller-n codebook was reused after the retry still came out worse.
  bool carried = false;
};

struct ErrorCurve {
  double order = 2.0;
  std::vector<CurvePoint> points;
  std::vector<Codebook> codebooks;
};

/// One optimize per n over a shared cloud; enforces e nonincreasing in n by
/// one rerun with doubled restarts, then falling back to the smaller-n
/// codebook (which is also admissible for the larger n).
ErrorCurve error_curve(const PointSet& cloud, double r,
                       const std::vector<std::size_t>& n_list,
                       const OptimizeOptions& options = {});
ErrorCurve error_curve(const Measure& measure, double r,
                       const std::vector<std::size_t>& n_list,
                       std::size_t samples, int depth,
                       const OptimizeOptions& options = {});

struct GeometricMeanError {
  double value = 0.0;
  bool hit_floor = false;
  std::size_t zero_distance_count = 0;
};

GeometricMeanError geometric_mean_error(const PointSet& cloud,
                                        const PointSet& codebook,
                                        double floor = 1e-300);

struct VoronoiDiagnostics {
  std::vector<double> contributions;  // (1/M) sum over cell of d^r
  double total = 0.0;                 // e^r
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double lower_ratio = 0.0;  // min * n / e^r
  double upper_ratio = 0.0;  // max * n / e^r
};

VoronoiDiagnostics voronoi_diagnostics(const PointSet& cloud,
                                       const PointSet& codebook, double r);

struct Histogram {
  std::size_t n = 0;  // codebook size; 0 for the pooled histogram
  std::vector<double> mass;
};

struct PointDensity {
  Box box;
  std::size_t bins_per_axis = 10;
  std::vector<Histogram> per_codebook;
  Histogram pooled;

  // Bounds of bin `index` along each axis (row-major over axes).
  Box bin(std::size_t index) const;
};

PointDensity point_density_histogram(const std::vector<PointSet>& codebooks,
                                     const Box& box, std::size_t bins);

}  // namespace fracquant
