#pragma once

#include <cstddef>
#include <vector>

#include "fracquant/measure.hpp"
#include "fracquant/quantizer.hpp"

namespace fracquant {

struct BoundsOptions {
  std::size_t levels = 8;
  double rho = 0.5;       // eps_{n+1} = rho * eps_n
  double epsilon0 = 0.0;  // level-1 threshold; 0 means mu(J)|J|^r
  std::vector<double> t_grid{0.25, 0.5, 0.75};
  unsigned threads = 1;
  PartitionOptions partition;
};

struct BoundsLevel {
  std::size_t level = 0;  // 1-based
  double threshold = 0.0;
  std::size_t phi = 0;
  double moment_sum = 0.0;  // sum mu(F) |F|^r
  double t_level = 0.0;     // root of sum (mu(F) (|F|/|J|)^r)^t = 1
  double t_residual = 0.0;
  double uniformity = 1.0;  // C
  double delta = 0.0;       // min over pairs of gap / larger diameter
  std::vector<double> t_sums;
  std::size_t min_depth = 0;
  std::size_t max_depth = 0;
};

struct BoundsTable {
  double r = 1.0;
  double rho = 0.5;
  double epsilon0 = 0.0;
  std::vector<double> t_grid;
  std::vector<BoundsLevel> levels;
};

double threshold_at(const BoundsTable& table, std::size_t level);

BoundsTable bounds_table(const Measure& measure, double r,
                         const BoundsOptions& options = {});

/// Summary of one partition, shared by bounds_table and the CLI.
BoundsLevel summarize_partition(const Measure& measure, const Partition& part,
                                const std::vector<double>& t_grid);

struct CriticalExponent {
  double t_star = 0.0;
  double value = 0.0;  // r t* / (1 - t*)
  std::vector<double> differences;  // |t_n - t_{n-1}|
  double last_difference = 0.0;
  bool converged = true;
};

CriticalExponent critical_exponent(const BoundsTable& table);

struct CoefficientBand {
  double s = 0.0;
  std::vector<std::size_t> level;
  std::vector<double> sums;
  double min = 0.0;
  double max = 0.0;
  double ratio = 0.0;
};

CoefficientBand coefficient_band(const Measure& measure, double r, double s,
                                 const BoundsOptions& options = {});

struct SandwichOptions {
  std::size_t samples = 100000;
  int depth = 0;
  double tolerance = 1.05;
  OptimizeOptions optimize;
};

struct SandwichRecord {
  std::size_t level = 0;
  std::size_t phi = 0;
  double moment_sum = 0.0;
  double error_power = 0.0;  // e^r of the optimized codebook
  double ratio = 0.0;        // e^r / moment sum
  bool upper_bound_holds = false;
};

SandwichRecord empirical_sandwich(const Measure& measure, double r,
                                  std::size_t level,
                                  const BoundsOptions& bounds,
                                  const SandwichOptions& options = {});

}  // namespace fracquant
