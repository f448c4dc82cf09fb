#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "fracquant/error.hpp"
#include "fracquant/points.hpp"
#include "fracquant/rng.hpp"

namespace fracquant {

using Word = std::vector<std::uint32_t>;

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  double diameter() const;
  bool contains(std::span<const double> p, double tol = 0.0) const;
  bool contains(const Box& other, double tol = 0.0) const;
};

// Euclidean distance between two axis-aligned boxes (0 when they intersect).
double box_gap(const Box& a, const Box& b);
// Signed overlap: positive volume-like extent when interiors intersect,
// otherwise minus the gap.
double box_overlap(const Box& a, const Box& b);

/// x -> linear * x + offset, linear stored row-major.
struct AffineMap {
  std::size_t dim = 0;
  std::vector<double> linear;
  std::vector<double> offset;

  static AffineMap identity(std::size_t dim);
  void apply(std::span<const double> x, std::span<double> out) const;
  // (*this) o inner
  AffineMap compose(const AffineMap& inner) const;
  Box image(const Box& box) const;
};

struct Similitude {
  double ratio = 0.5;
  std::vector<double> orthogonal;  // q x q, row-major; empty means identity
  std::vector<double> translation;

  AffineMap as_affine(std::size_t dim) const;
};

enum class Separation { kStrong, kOpenSet };

struct SelfSimilarSpec {
  std::size_t dim = 1;
  std::vector<Similitude> maps;
  std::vector<double> probs;
  Separation separation = Separation::kStrong;
  // Root cell J; also the OSC witness when separation is kOpenSet.
  Box box{{0.0}, {1.0}};
};

// Bedford-McMullen carpet on [0,1]^2 with maps
// (x, y) -> ((x + i) / n, (y + j) / m).
struct CarpetSpec {
  int n = 2;
  int m = 2;
  std::vector<std::pair<int, int>> digits;
  std::vector<double> probs;
};

// Mauldin-Williams graph-directed construction with Markov masses, realized
// on [0,1].
struct MarkovSpec {
  std::vector<std::vector<double>> transition;
  std::vector<std::vector<double>> ratios;
  std::vector<double> initial;
  double gap = 0.5;  // t: sibling gap >= t * larger sibling diameter
};

struct Pattern {
  std::vector<double> ratios;
  std::vector<double> probs;
};

// omega = prefix, period, period, ...
struct PatternSequence {
  std::vector<std::size_t> prefix;
  std::vector<std::size_t> period;
};

struct MultiscaleSpec {
  std::vector<Pattern> patterns;
  std::optional<PatternSequence> sequence;
  std::optional<std::vector<double>> frequency;
  double gap = 0.5;  // beta: sibling gap >= beta * larger sibling diameter
};

using MeasureSpec =
    std::variant<SelfSimilarSpec, CarpetSpec, MarkovSpec, MultiscaleSpec>;

enum class Family { kSelfSimilar, kCarpet, kMarkov, kMultiscale };

std::string_view family_name(Family family);
Family family_of(const MeasureSpec& spec);

struct ValidationCheck {
  std::string name;
  bool passed = true;
  double margin = 0.0;  // worst margin; negative or zero on failure
  std::string detail;
  ErrorCode error = ErrorCode::kInvalidSpec;
};

struct ValidationReport {
  Family family = Family::kSelfSimilar;
  std::vector<ValidationCheck> checks;
  std::map<std::string, double> derived;  // e.g. theta for carpets

  bool ok() const;
  const ValidationCheck* first_failure() const;
};

ValidationReport validate(const MeasureSpec& spec);

struct CylinderRecord {
  Word word;
  double mass = 1.0;
  double diameter = 0.0;
  Box box;

  std::size_t depth() const { return word.size(); }
};

/// Enumeration cursor: a cylinder plus the map sending the root cell onto it.
struct CylinderNode {
  CylinderRecord record;
  AffineMap map;
};

struct SampleCloud {
  PointSet points;
  std::uint64_t seed = 0;
  int depth = 0;
  std::string measure_id;
};

/// A validated measure. Construction runs validate() and throws on failure,
/// so every Measure in existence satisfies its family's invariants.
class Measure {
 public:
  static Measure create(MeasureSpec spec);

  const MeasureSpec& spec() const { return *spec_; }
  Family family() const { return family_; }
  std::size_t dim() const { return root_.dim(); }
  const Box& root_box() const { return root_; }
  double root_diameter() const { return root_diameter_; }
  std::string identity() const;
  const ValidationReport& validation() const { return *report_; }

  CylinderNode root() const;
  std::vector<CylinderNode> children(const CylinderNode& parent) const;
  CylinderRecord cylinder(const Word& word) const;

  // Anchor of J_sigma: image of the root's lower corner.
  std::vector<double> coding_map(const Word& word) const;

  // Lower bounds on child/parent ratios of mass and diameter over all
  // cylinders (depth 1 included).
  double min_mass_ratio() const;
  double min_diameter_ratio() const;
  double max_diameter_ratio() const;

  // Pattern index used at depth `level` (1-based); multiscale only.
  std::size_t pattern_at(std::size_t level) const;
  // Limit frequencies chi of the pattern sequence; multiscale only.
  const std::vector<double>& pattern_frequency() const { return frequency_; }
  bool pattern_sequence_periodic() const {
    return std::holds_alternative<MultiscaleSpec>(*spec_) &&
           std::get<MultiscaleSpec>(*spec_).sequence.has_value();
  }

  // Draws one symbol path of the given depth and returns its anchor.
  void sample_point(Rng& rng, int depth, std::span<double> out) const;

 private:
  Measure() = default;

  struct LocalMap {
    AffineMap map;
    double mass = 1.0;
    double ratio = 1.0;
  };

  const LocalMap& local(std::uint32_t state_or_level_key,
                        std::uint32_t symbol) const;
  std::vector<std::uint32_t> allowed(const CylinderNode& node) const;

  std::shared_ptr<const MeasureSpec> spec_;
  std::shared_ptr<const ValidationReport> report_;
  Family family_ = Family::kSelfSimilar;
  Box root_;
  double root_diameter_ = 0.0;

  // local_[key][symbol]; key is 0 for self-similar and carpets, the previous
  // state + 1 for Markov (0 = root), the pattern index for multiscale.
  std::vector<std::vector<std::optional<LocalMap>>> local_;
  std::vector<std::vector<double>> cumulative_;  // per key, for sampling
  std::shared_ptr<const std::vector<std::uint32_t>> omega_;
  std::vector<double> frequency_;
};

struct PartitionOptions {
  std::size_t max_depth = 60;
  std::size_t max_cells = std::size_t{1} << 23;
};

struct Partition {
  std::vector<CylinderRecord> cells;
  double uniformity = 1.0;  // max / min of mass * diameter^r over cells
  double threshold = 0.0;
  double order = 1.0;
};

// Maximal antichain of cylinders with mass*diam^r below eps whose parents are
// not. Depth-1 children are the coarsest cells ever returned. Carpets with
// n > m use approximate squares instead of cylinders: words hold the full
// digits followed by row digits written as |G| + j.
Partition partition_at_threshold(const Measure& measure, double eps, double r,
                                 const PartitionOptions& options = {});

std::vector<CylinderRecord> cylinders_at_depth(const Measure& measure,
                                               std::size_t depth,
                                               std::size_t max_cells = 1u
                                                                       << 22);

// Smallest depth K with max_ratio^K * |J| < resolution.
int default_sample_depth(const Measure& measure, double resolution = 1e-9);

SampleCloud sample(const Measure& measure, std::size_t count, int depth,
                   std::uint64_t seed, unsigned threads = 1);

}  // namespace fracquant
