#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace fracquant {

/// Dense row-major matrix, sized for the small transition matrices handled
/// here.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  explicit Matrix(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  Matrix submatrix(const std::vector<std::size_t>& index) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct SpectralOptions {
  int max_iterations = 100000;
  double relative_tolerance = 1e-13;
};

/// Perron root of a nonnegative square matrix. Irreducible blocks are solved
/// by shifted power iteration with a Collatz-Wielandt bracket; reducible
/// matrices return the max over strongly connected blocks. Throws
/// NonConvergence if a block does not reach the tolerance.
double spectral_radius(const Matrix& a, const SpectralOptions& options = {});

struct SccDecomposition {
  // Components in topological order of the condensation: edges only go from
  // lower to higher component indices.
  std::vector<std::vector<std::size_t>> components;
  std::vector<std::size_t> component_of;
  std::vector<std::pair<std::size_t, std::size_t>> dag_edges;
  // reaches[a][b]: a path of length >= 1 leads from component a to b.
  std::vector<std::vector<bool>> reaches;

  bool comparable(std::size_t a, std::size_t b) const {
    return reaches[a][b] || reaches[b][a];
  }
  // A component is trivial when it is a single vertex without a self-loop.
  std::vector<bool> trivial;
};

/// Strong components of the digraph with an edge i -> j iff a(i, j) > 0
/// (Tarjan), plus condensation edges and reachability closure.
SccDecomposition strongly_connected_components(const Matrix& a);

}  // namespace fracquant
