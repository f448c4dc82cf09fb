#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fracquant {

// Row-major set of points in R^q.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::size_t dim, std::vector<double> coords)
      : dim_(dim), coords_(std::move(coords)) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return coords_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> operator[](std::size_t i) {
    return {coords_.data() + i * dim_, dim_};
  }

  void push_back(std::span<const double> p) {
    coords_.insert(coords_.end(), p.begin(), p.end());
  }
  void resize(std::size_t count) { coords_.resize(count * dim_); }
  void reserve(std::size_t count) { coords_.reserve(count * dim_); }

  const std::vector<double>& coords() const { return coords_; }
  std::vector<double>& coords() { return coords_; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() == 1) return std::abs(a[0] - b[0]);
  return std::sqrt(squared_distance(a, b));
}

}  // namespace fracquant
