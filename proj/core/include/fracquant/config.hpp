#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracquant/measure.hpp"

namespace fracquant {

// Optional run parameters stored next to the measure; command-line flags
// override them.
struct RunDefaults {
  std::optional<double> r;
  std::optional<std::vector<std::size_t>> n;
  std::optional<std::size_t> levels;
  std::optional<std::size_t> samples;
  std::optional<int> depth;
  std::optional<std::size_t> restarts;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho;
  std::optional<double> epsilon0;
  std::optional<std::size_t> kmax;
};

struct MeasureConfig {
  MeasureSpec spec;
  RunDefaults run;
  std::string source;
};

/// Parses a measure file (YAML syntax). Numbers may be written as fractions
/// such as 1/3. Throws Error(kConfigError) on malformed input; semantic
/// checks are left to Measure::create.
MeasureConfig parse_config(const std::string& text,
                           const std::string& source = "<string>");
MeasureConfig load_config(const std::string& path);

}  // namespace fracquant
