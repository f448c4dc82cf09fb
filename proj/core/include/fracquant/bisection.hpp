#pragma once

#include <cmath>

namespace fracquant {

struct RootResult {
  double t = 0.0;
  int iterations = 0;
};

/// Root of a strictly decreasing f on [lo, hi] with f(lo) > 0 > f(hi).
/// Splits on the sign of f only and stops once the bracket can no longer be
/// halved in double precision, so identical sign patterns give identical
/// roots. Returns the left end of the final bracket unless f hits 0 exactly.
template <typename F>
RootResult bisect_decreasing(F&& f, double lo = 0.0, double hi = 1.0,
                             int max_iterations = 2000) {
  RootResult out;
  for (; out.iterations < max_iterations; ++out.iterations) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double v = f(mid);
    if (v == 0.0) {
      out.t = mid;
      return out;
    }
    if (v > 0.0 || std::isnan(v))
      lo = mid;
    else
      hi = mid;
  }
  out.t = lo;
  return out;
}

}  // namespace fracquant
