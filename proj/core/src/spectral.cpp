#include "fracquant/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fracquant/error.hpp"

namespace fracquant {

Matrix::Matrix(const std::vector<std::vector<double>>& rows)
    : rows_(rows.size()), cols_(rows.empty() ? 0 : rows.front().size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_)
      throw Error(ErrorCode::kInvalidArgument, "ragged matrix rows");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::submatrix(const std::vector<std::size_t>& index) const {
  Matrix out(index.size(), index.size());
  for (std::size_t a = 0; a < index.size(); ++a)
    for (std::size_t b = 0; b < index.size(); ++b)
      out(a, b) = (*this)(index[a], index[b]);
  return out;
}

namespace {

double irreducible_radius(const Matrix& a, const SpectralOptions& options) {
  const std::size_t n = a.rows();
  if (n == 1) return a(0, 0);

  double min_row = std::numeric_limits<double>::infinity();
  double max_row = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a(i, j);
    min_row = std::min(min_row, s);
    max_row = std::max(max_row, s);
  }
  if (max_row == 0.0) return 0.0;
  // Row sums bracket the Perron root; equal sums pin it exactly.
  if (max_row - min_row <= options.relative_tolerance * max_row)
    return 0.5 * (min_row + max_row);

  // A + shift*I is primitive, so the iteration converges even for periodic A.
  const double shift = 0.5 * (min_row + max_row);
  std::vector<double> x(n, 1.0);
  std::vector<double> y(n);
  for (int it = 0; it < options.max_iterations; ++it) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a(i, j) * x[j];
      y[i] = s;
      const double ratio = s / x[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    if (hi - lo <= options.relative_tolerance * hi) return 0.5 * (lo + hi);
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = y[i] + shift * x[i];
      norm = std::max(norm, x[i]);
    }
    for (double& v : x) v /= norm;
  }
  throw Error(ErrorCode::kNonConvergence,
              "power iteration did not converge in " +
                  std::to_string(options.max_iterations) + " iterations");
}

}  // namespace

SccDecomposition strongly_connected_components(const Matrix& a) {
  const std::size_t n = a.rows();
  constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> found;
  std::size_t counter = 0;

  // Iterative Tarjan: frames hold (vertex, next successor to try).
  std::vector<std::pair<std::size_t, std::size_t>> frames;
  for (std::size_t start = 0; start < n; ++start) {
    if (index[start] != kUnvisited) continue;
    frames.push_back({start, 0});
    index[start] = low[start] = counter++;
    stack.push_back(start);
    on_stack[start] = true;
    while (!frames.empty()) {
      auto& [v, next] = frames.back();
      if (next < n) {
        const std::size_t w = next++;
        if (a(v, w) <= 0.0) continue;
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        found.push_back(std::move(comp));
      }
      const std::size_t finished = v;
      frames.pop_back();
      if (!frames.empty()) {
        const std::size_t parent = frames.back().first;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }

  // Tarjan emits sinks first.
  std::reverse(found.begin(), found.end());
  SccDecomposition out;
  out.components = std::move(found);
  const std::size_t m = out.components.size();
  out.component_of.assign(n, 0);
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t v : out.components[c]) out.component_of[v] = c;

  std::vector<std::vector<bool>> edge(m, std::vector<bool>(m, false));
  out.trivial.assign(m, false);
  for (std::size_t c = 0; c < m; ++c)
    if (out.components[c].size() == 1) {
      const std::size_t v = out.components[c][0];
      out.trivial[c] = !(a(v, v) > 0.0);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t ci = out.component_of[i];
      const std::size_t cj = out.component_of[j];
      if (a(i, j) > 0.0 && ci != cj && !edge[ci][cj]) {
        edge[ci][cj] = true;
        out.dag_edges.push_back({ci, cj});
      }
    }
  std::sort(out.dag_edges.begin(), out.dag_edges.end());

  // Closure in reverse topological order.
  out.reaches.assign(m, std::vector<bool>(m, false));
  for (std::size_t c = m; c-- > 0;)
    for (std::size_t d = c + 1; d < m; ++d)
      if (edge[c][d]) {
        out.reaches[c][d] = true;
        for (std::size_t e = d + 1; e < m; ++e)
          if (out.reaches[d][e]) out.reaches[c][e] = true;
      }
  return out;
}

double spectral_radius(const Matrix& a, const SpectralOptions& options) {
  if (a.rows() != a.cols())
    throw Error(ErrorCode::kInvalidArgument, "spectral_radius: not square");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) < 0.0 || std::isnan(a(i, j)))
        throw Error(ErrorCode::kInvalidArgument,
                    "spectral_radius: matrix must be nonnegative");
  if (a.rows() == 0) return 0.0;
  const auto scc = strongly_connected_components(a);
  double best = 0.0;
  for (const auto& comp : scc.components)
    best = std::max(best, irreducible_radius(a.submatrix(comp), options));
  return best;
}

}  // namespace fracquant
