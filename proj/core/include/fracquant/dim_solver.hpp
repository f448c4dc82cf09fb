#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fracquant/measure.hpp"
#include "fracquant/spectral.hpp"

namespace fracquant {

struct ComponentValue {
  std::vector<std::size_t> vertices;
  double value = 0.0;  // s_r(H); 0 when Psi_H never reaches 1 on (0, inf)
  bool in_maximal_set = false;
};

struct SequenceRow {
  std::size_t k = 0;
  double value = 0.0;     // s_{k,r} or d_{k,r}
  double k_times_gap = 0.0;  // k |s_{k,r} - s_r| (0 when not applicable)
  double residual = 0.0;
};

/// Output of every dimension solver. `value` is k_r / s_r / k_0; `t` is the
/// solved exponent s/(s+r) where that applies.
struct DimensionReport {
  Family family = Family::kSelfSimilar;
  std::string quantity;  // "k_r", "k_0", "s_r", "d_kr"
  double r = 0.0;
  double value = 0.0;
  double t = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::vector<std::pair<std::string, double>> auxiliary;
  std::vector<ComponentValue> components;
  std::vector<std::pair<std::string, std::string>> verdicts;
  std::vector<SequenceRow> sequence;
  std::vector<std::string> notes;

  const std::string* verdict(const std::string& key) const;
  const double* aux(const std::string& key) const;
};

constexpr double kEqualityTolerance = 1e-9;

// Left-hand sides of the defining equations, as functions of t = s/(s+r).
double self_similar_sum(const SelfSimilarSpec& spec, double r, double t);
double carpet_lhs(const CarpetSpec& spec, double r, double t);
Matrix markov_matrix(const MarkovSpec& spec, double r, double t);
double markov_psi(const MarkovSpec& spec, double r, double t);
double multiscale_limit_lhs(const std::vector<Pattern>& patterns,
                            const std::vector<double>& chi, double r, double t);

DimensionReport solve_self_similar(const SelfSimilarSpec& spec, double r);
DimensionReport k0_self_similar(const SelfSimilarSpec& spec);
DimensionReport solve_carpet(const CarpetSpec& spec, double r);

struct CarpetVerdict {
  double s_r = 0.0;
  std::vector<int> columns;          // G_y
  std::vector<double> column_mass;   // q_j
  std::vector<double> condition_a_sums;
  bool condition_a = false;
  bool condition_b = false;
  bool coefficients_guaranteed = false;
};

CarpetVerdict carpet_conditions(const CarpetSpec& spec, double r);

struct MarkovSolution {
  DimensionReport report;
  SccDecomposition scc;
  bool maximal_set_incomparable = true;
};

MarkovSolution solve_markov(const MarkovSpec& spec, double r);

struct MoranOptions {
  // Evaluate sum over Omega_k explicitly instead of the product form.
  bool enumerate = false;
  std::size_t max_words = std::size_t{1} << 20;
};

struct MoranSequence {
  double r = 0.0;
  std::vector<SequenceRow> rows;  // d_{k,r}, k = 1..k_max
  std::vector<double> tail_sup;   // sup_{j >= k} d_{j,r}
  std::vector<double> tail_inf;   // inf_{j >= k} d_{j,r}
  double upper_proxy = 0.0;       // tail_sup at k_max/2
  double lower_proxy = 0.0;
  std::string label = "conjectural diagnostics";
};

// levels[k-1] holds (c_{k,j}, p_{k,j}) of level k.
MoranSequence moran_dkr_sequence(const std::vector<Pattern>& levels, double r,
                                 const MoranOptions& options = {});

// Per-level data of a multiscale measure for depths 1..k_max.
std::vector<Pattern> moran_levels(const Measure& measure, std::size_t k_max);

DimensionReport solve_multiscale(const Measure& measure, double r,
                                 std::size_t k_max);
DimensionReport solve_multiscale(const MultiscaleSpec& spec, double r,
                                 std::size_t k_max);

struct SolveOptions {
  std::size_t k_max = 200;  // multiscale horizon
};

/// Family dispatch used by the CLI; r == 0 selects k_0 (self-similar only).
DimensionReport solve_dimension(const Measure& measure, double r,
                                const SolveOptions& options = {});

}  // namespace fracquant
