#include "fracquant/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fracquant/bisection.hpp"
#include "fracquant/error.hpp"
#include "fracquant/parallel.hpp"
#include "fracquant/rng.hpp"

namespace fracquant {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kLloydInnerSteps = 4;
constexpr std::size_t kBlock = 1024;

double power(double d, double r) {
  if (r == 2.0) return d * d;
  if (r == 1.0) return d;
  return std::pow(d, r);
}

double power_from_squared(double sq, double r) {
  if (r == 2.0) return sq;
  if (r == 1.0) return std::sqrt(sq);
  return std::pow(sq, 0.5 * r);
}

double point_distance(const double* a, const double* b, std::size_t q) {
  if (q == 1) return std::abs(a[0] - b[0]);
  double s = 0.0;
  for (std::size_t k = 0; k < q; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double point_power(const double* a, const double* b, std::size_t q, double r) {
  if (q == 1) return power(std::abs(a[0] - b[0]), r);
  double s = 0.0;
  for (std::size_t k = 0; k < q; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return power_from_squared(s, r);
}

// A contiguous block of `count` points of dimension q.
struct Block {
  const double* data;
  std::size_t count;
  std::size_t q;

  const double* operator[](std::size_t i) const { return data + i * q; }
};

double cell_cost(const Block& cell, const double* a, double r) {
  double s = 0.0;
  for (std::size_t i = 0; i < cell.count; ++i)
    s += point_power(cell[i], a, cell.q, r);
  return s;
}

double cell_extent(const Block& cell) {
  double extent = 0.0;
  for (std::size_t k = 0; k < cell.q; ++k) {
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < cell.count; ++i) {
      lo = std::min(lo, cell[i][k]);
      hi = std::max(hi, cell[i][k]);
    }
    extent = std::max(extent, hi - lo);
  }
  return extent;
}

void cell_mean(const Block& cell, double* out) {
  const double inv = 1.0 / static_cast<double>(cell.count);
  for (std::size_t k = 0; k < cell.q; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < cell.count; ++i) m += cell[i][k];
    m *= inv;
    double c = 0.0;
    for (std::size_t i = 0; i < cell.count; ++i) c += cell[i][k] - m;
    out[k] = m + c * inv;
  }
}

// Geometric median, Vardi-Zhang modification of the Weiszfeld step so that
// iterates may sit on a sample.
void weiszfeld(const Block& cell, double* y, int iterations) {
  const std::size_t q = cell.q;
  const double scale = std::max(cell_extent(cell), 1e-300);
  std::vector<double> num(q), resid(q), next(q);
  for (int it = 0; it < iterations; ++it) {
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(resid.begin(), resid.end(), 0.0);
    double den = 0.0;
    double eta = 0.0;
    for (std::size_t i = 0; i < cell.count; ++i) {
      const double d = point_distance(cell[i], y, q);
      if (d <= 1e-14 * scale) {
        eta += 1.0;
        continue;
      }
      for (std::size_t k = 0; k < q; ++k) {
        num[k] += cell[i][k] / d;
        resid[k] += (cell[i][k] - y[k]) / d;
      }
      den += 1.0 / d;
    }
    if (den == 0.0) return;
    double rnorm = 0.0;
    for (double v : resid) rnorm += v * v;
    rnorm = std::sqrt(rnorm);
    if (rnorm <= eta) return;
    const double gamma = eta == 0.0 ? 0.0 : std::min(1.0, eta / rnorm);
    double step = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      next[k] = (1.0 - gamma) * (num[k] / den) + gamma * y[k];
      step = std::max(step, std::abs(next[k] - y[k]));
    }
    std::copy(next.begin(), next.end(), y);
    if (step <= 1e-16 * scale) return;
  }
}

// Minimizer of sum |x - a|^r on a sorted line cell, r > 1: the derivative is
// increasing, so bisect on its sign.
double line_minimizer(const Block& cell, double r) {
  auto slope = [&](double a) {
    double s = 0.0;
    for (std::size_t i = 0; i < cell.count; ++i) {
      const double d = a - cell[i][0];
      s += std::copysign(std::pow(std::abs(d), r - 1.0), d);
    }
    return -s;
  };
  const double lo = cell[0][0];
  const double hi = cell[cell.count - 1][0];
  if (!(lo < hi)) return lo;
  return bisect_decreasing(slope, lo, hi).t;
}

// Damped fixed point a <- sum w x / sum w, w = d^(r-2), with step halving.
void reweighted_descent(const Block& cell, double r, double* y,
                        int iterations) {
  const std::size_t q = cell.q;
  const double scale = std::max(cell_extent(cell), 1e-300);
  const double floor = 1e-12 * scale;
  std::vector<double> target(q), trial(q);
  double current = cell_cost(cell, y, r);
  for (int it = 0; it < iterations; ++it) {
    std::fill(target.begin(), target.end(), 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < cell.count; ++i) {
      const double d = std::max(point_distance(cell[i], y, q), floor);
      const double w = std::pow(d, r - 2.0);
      for (std::size_t k = 0; k < q; ++k) target[k] += w * cell[i][k];
      wsum += w;
    }
    if (!(wsum > 0.0) || !std::isfinite(wsum)) return;
    for (double& v : target) v /= wsum;
    double step = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h, step *= 0.5) {
      for (std::size_t k = 0; k < q; ++k)
        trial[k] = y[k] + step * (target[k] - y[k]);
      const double c = cell_cost(cell, trial.data(), r);
      if (c < current) {
        current = c;
        moved = true;
        break;
      }
    }
    if (!moved) return;
    double delta = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      delta = std::max(delta, std::abs(trial[k] - y[k]));
      y[k] = trial[k];
    }
    if (delta <= 1e-15 * scale) return;
  }
}

// Replaces a by a better representative of the cell; never increases cost.
void improve_representative(const Block& cell, double r, double* a,
                            int iterations) {
  if (cell.count == 0) return;
  const std::size_t q = cell.q;
  // Exact minimizers.
  if (r == 2.0) {
    cell_mean(cell, a);
    return;
  }
  if (q == 1 && r == 1.0) {
    a[0] = cell[(cell.count - 1) / 2][0];
    return;
  }
  std::vector<double> cand(a, a + q);
  if (q == 1 && r > 1.0) {
    cand[0] = line_minimizer(cell, r);
  } else if (r == 1.0) {
    weiszfeld(cell, cand.data(), iterations);
  } else {
    reweighted_descent(cell, r, cand.data(), iterations);
  }
  if (cell_cost(cell, cand.data(), r) <= cell_cost(cell, a, r))
    std::copy(cand.begin(), cand.end(), a);
}

// Cloud prepared for the Lloyd runs: sorted when q == 1.
struct Cloud {
  std::size_t q = 1;
  std::size_t count = 0;
  std::vector<double> coords;

  const double* operator[](std::size_t i) const { return coords.data() + i * q; }
};

struct RunResult {
  std::vector<double> code;
  double mean_power = kInf;
  int iterations = 0;
  std::vector<double> trace;
};

class Lloyd {
 public:
  Lloyd(const Cloud& cloud, std::size_t n, double r,
        const OptimizeOptions& options)
      : cloud_(cloud), n_(n), q_(cloud.q), r_(r), options_(options),
        code_(n * cloud.q), begin_(n), end_(n), cost_(n) {
    if (q_ > 1) {
      labels_.resize(cloud.count);
      gathered_.resize(cloud.count * q_);
      origin_.resize(cloud.count);
    }
  }

  RunResult run(Rng& rng) {
    seed(rng);
    RunResult out;
    descend(out, true);
    polish(out);
    if (cloud_.count <= options_.transfer_limit) {
      for (int pass = 0; pass < 100; ++pass) {
        if (!transfer_pass()) break;
        descend(out, false);
      }
    }
    out.code = best_code_;
    out.mean_power = best_;
    return out;
  }

  // Jump moves from a converged codebook: the codepoint whose removal costs
  // least goes to the worst-served sample of the heaviest cell, then Lloyd
  // resumes. Kept only when the distortion drops; stops after `patience`
  // consecutive rejections.
  void relocate(RunResult& run) {
    best_code_ = run.code;
    best_ = run.mean_power;
    if (n_ < 2 || best_ == 0.0) return;
    const std::size_t patience = options_.relocation_patience;
    const std::size_t max_trials = 4 * n_ + 16;
    std::size_t failures = 0;
    for (std::size_t trial = 0; trial < max_trials && failures < patience;
         ++trial) {
      const double base = best_;
      code_ = best_code_;
      assign();
      const std::vector<double> utility = removal_cost();
      std::vector<std::size_t> order(n_);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return utility[a] < utility[b];
                       });
      const std::size_t victim = order[failures % n_];
      std::size_t heavy = victim == 0 ? 1 : 0;
      for (std::size_t j = 0; j < n_; ++j)
        if (j != victim && cost_[j] > cost_[heavy]) heavy = j;
      if (!(cost_[heavy] > 0.0)) return;
      const Block c = cell(heavy);
      const double* a = code_.data() + heavy * q_;
      double worst = -1.0;
      std::size_t pick = 0;
      for (std::size_t i = 0; i < c.count; ++i) {
        const double v = point_power(c[i], a, q_, r_);
        if (v > worst) {
          worst = v;
          pick = i;
        }
      }
      std::copy_n(c[pick], q_, code_.data() + victim * q_);
      descend(run, false);
      if (best_ < base * (1.0 - 1e-12))
        failures = 0;
      else
        ++failures;
    }
    run.code = best_code_;
    run.mean_power = best_;
  }

 private:
  Block cell(std::size_t k) const {
    const double* base = q_ == 1 ? cloud_.coords.data() : gathered_.data();
    return {base + begin_[k] * q_, end_[k] - begin_[k], q_};
  }

  void seed(Rng& rng) {
    const std::size_t m = cloud_.count;
    std::vector<double> dist(m, kInf), weight(m, 0.0);
    const std::size_t blocks = (m + kBlock - 1) / kBlock;
    std::vector<double> block_sum(blocks, 0.0);
    auto refresh = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t b = lo / kBlock; b <= (hi - 1) / kBlock; ++b) {
        double s = 0.0;
        const std::size_t end = std::min(m, (b + 1) * kBlock);
        for (std::size_t i = b * kBlock; i < end; ++i) s += weight[i];
        block_sum[b] = s;
      }
    };
    auto add_center = [&](std::size_t idx, std::size_t slot) {
      std::copy_n(cloud_[idx], q_, code_.data() + slot * q_);
      if (q_ == 1) {
        // Distances to the nearest center are 1-Lipschitz along the sorted
        // line, so the update stops at the first unaffected sample each way.
        const double c = cloud_[idx][0];
        std::size_t lo = idx, hi = idx + 1;
        for (std::size_t i = idx + 1; i-- > 0;) {
          const double d = std::abs(cloud_.coords[i] - c);
          if (!(d < dist[i])) break;
          dist[i] = d;
          weight[i] = power(d, r_);
          lo = i;
        }
        for (std::size_t i = idx + 1; i < m; ++i) {
          const double d = std::abs(cloud_.coords[i] - c);
          if (!(d < dist[i])) break;
          dist[i] = d;
          weight[i] = power(d, r_);
          hi = i + 1;
        }
        refresh(lo, hi);
      } else {
        for (std::size_t i = 0; i < m; ++i) {
          const double d = point_distance(cloud_[i], cloud_[idx], q_);
          if (d < dist[i]) {
            dist[i] = d;
            weight[i] = power(d, r_);
          }
        }
        refresh(0, m);
      }
    };

    add_center(static_cast<std::size_t>(rng.below(m)), 0);
    std::size_t placed = 1;
    for (; placed < n_; ++placed) {
      double total = 0.0;
      for (double s : block_sum) total += s;
      if (!(total > 0.0)) break;
      double u = rng.uniform() * total;
      std::size_t b = 0;
      while (b + 1 < blocks && u >= block_sum[b]) u -= block_sum[b++];
      std::size_t pick = std::numeric_limits<std::size_t>::max();
      const std::size_t end = std::min(m, (b + 1) * kBlock);
      for (std::size_t i = b * kBlock; i < end; ++i) {
        if (weight[i] > 0.0) pick = i;
        if (u < weight[i]) break;
        u -= weight[i];
      }
      if (pick == std::numeric_limits<std::size_t>::max()) break;
      add_center(pick, placed);
    }
    // Support exhausted: park the rest on the first center; their cells stay
    // empty and they are deduplicated at the end.
    for (std::size_t k = placed; k < n_; ++k)
      std::copy_n(code_.data(), q_, code_.data() + k * q_);
  }

  // Nearest-codepoint assignment, ties to the lowest index. Returns the mean
  // of d^r and fills the per-cell ranges and costs.
  double assign() {
    const std::size_t m = cloud_.count;
    if (q_ == 1) {
      std::sort(code_.begin(), code_.end());
      const auto& xs = cloud_.coords;
      std::size_t last = 0;
      begin_[0] = 0;
      for (std::size_t k = 1; k < n_; ++k) {
        if (code_[k] == code_[last]) {
          begin_[k] = end_[k] = 0;
          continue;
        }
        const double mid = code_[last] + 0.5 * (code_[k] - code_[last]);
        const auto pos = static_cast<std::size_t>(
            std::upper_bound(xs.begin() + static_cast<std::ptrdiff_t>(begin_[last]),
                             xs.end(), mid) -
            xs.begin());
        end_[last] = pos;
        begin_[k] = pos;
        last = k;
      }
      end_[last] = m;
    } else {
      std::vector<std::size_t> counts(n_, 0);
      for (std::size_t i = 0; i < m; ++i) {
        double best = kInf;
        std::uint32_t label = 0;
        for (std::size_t k = 0; k < n_; ++k) {
          double s = 0.0;
          const double* a = code_.data() + k * q_;
          const double* x = cloud_[i];
          for (std::size_t c = 0; c < q_ && s < best; ++c) {
            const double d = x[c] - a[c];
            s += d * d;
          }
          if (s < best) {
            best = s;
            label = static_cast<std::uint32_t>(k);
          }
        }
        labels_[i] = label;
        ++counts[label];
      }
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n_; ++k) {
        begin_[k] = end_[k] = offset;
        offset += counts[k];
      }
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t slot = end_[labels_[i]]++;
        std::copy_n(cloud_[i], q_, gathered_.data() + slot * q_);
        origin_[slot] = i;
      }
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      cost_[k] = cell_cost(cell(k), code_.data() + k * q_, r_);
      total += cost_[k];
    }
    return total / static_cast<double>(m);
  }

  // Moves each codepoint with an empty cell onto the worst-served sample of
  // the currently heaviest cell.
  void repair_empty() {
    std::vector<double> cost = cost_;
    std::vector<std::size_t> taken;
    for (std::size_t k = 0; k < n_; ++k) {
      if (end_[k] > begin_[k]) continue;
      std::size_t heavy = 0;
      for (std::size_t j = 1; j < n_; ++j)
        if (cost[j] > cost[heavy]) heavy = j;
      if (!(cost[heavy] > 0.0)) return;
      const Block c = cell(heavy);
      const double* a = code_.data() + heavy * q_;
      double worst = -1.0;
      std::size_t pick = 0;
      for (std::size_t i = 0; i < c.count; ++i) {
        const std::size_t global = begin_[heavy] + i;
        if (std::find(taken.begin(), taken.end(), global) != taken.end())
          continue;
        const double v = point_power(c[i], a, q_, r_);
        if (v > worst) {
          worst = v;
          pick = i;
        }
      }
      if (!(worst > 0.0)) {
        cost[heavy] = 0.0;
        continue;
      }
      taken.push_back(begin_[heavy] + pick);
      cost[heavy] -= worst;
      std::copy_n(c[pick], q_, code_.data() + k * q_);
      begin_[k] = end_[k] = 0;
    }
  }

  void update(int inner) {
    for (std::size_t k = 0; k < n_; ++k)
      if (end_[k] > begin_[k])
        improve_representative(cell(k), r_, code_.data() + k * q_, inner);
  }

  void record(double value) {
    if (value < best_) {
      best_ = value;
      best_code_ = code_;
    }
  }

  // Increase in total cost if codepoint k were deleted (its samples moving
  // to their second-nearest codepoint), from the current assignment.
  std::vector<double> removal_cost() const {
    std::vector<double> out(n_, 0.0);
    for (std::size_t k = 0; k < n_; ++k) {
      const Block c = cell(k);
      double moved = 0.0;
      for (std::size_t i = 0; i < c.count; ++i) {
        double best = kInf;
        for (std::size_t j = 0; j < n_; ++j) {
          if (j == k) continue;
          if (q_ == 1 && j + 1 != k && j != k + 1) continue;
          best = std::min(best, point_power(c[i], code_.data() + j * q_, q_, r_));
        }
        moved += best;
      }
      out[k] = moved - cost_[k];
    }
    return out;
  }

  void descend(RunResult& out, bool trace) {
    double prev = kInf;
    for (int it = 0; it < options_.max_iterations; ++it) {
      const double value = assign();
      if (trace) out.trace.push_back(value);
      ++out.iterations;
      record(value);
      if (value == 0.0) return;
      if (std::isfinite(prev) && prev - value <= options_.tolerance * prev) return;
      prev = value;
      repair_empty();
      update(lloyd_inner());
    }
  }

  // Large clouds take a few warm-started steps per Lloyd iteration; each step
  // already lowers the cell cost, and polish() finishes the solve.
  int lloyd_inner() const {
    if (cloud_.count <= options_.transfer_limit) return options_.inner_iterations;
    return std::min(options_.inner_iterations, kLloydInnerSteps);
  }

  // Longer inner solves once Lloyd has settled, for the iterative updates.
  void polish(RunResult& out) {
    if (r_ == 2.0 || (q_ == 1 && r_ >= 1.0) || best_ == 0.0) return;
    code_ = best_code_;
    assign();
    update(options_.inner_iterations * 25);
    const double value = assign();
    out.trace.push_back(value);
    record(value);
  }

  // Best single-sample transfer between cells with re-optimized
  // representatives; applies the first improving move found.
  bool transfer_pass() {
    code_ = best_code_;
    assign();
    // Sample index lists per cell, in cloud order (sorted for q == 1).
    std::vector<std::vector<std::size_t>> members(n_);
    for (std::size_t k = 0; k < n_; ++k)
      for (std::size_t s = begin_[k]; s < end_[k]; ++s)
        members[k].push_back(q_ == 1 ? s : origin_[s]);
    for (auto& list : members) std::sort(list.begin(), list.end());

    std::vector<double> buffer;
    auto solve = [&](const std::vector<std::size_t>& list, const double* start,
                     std::vector<double>& rep) {
      buffer.clear();
      for (std::size_t idx : list)
        buffer.insert(buffer.end(), cloud_[idx], cloud_[idx] + q_);
      const Block c{buffer.data(), list.size(), q_};
      rep.assign(start, start + q_);
      if (list.empty()) return 0.0;
      improve_representative(c, r_, rep.data(), options_.inner_iterations * 5);
      return cell_cost(c, rep.data(), r_);
    };

    double total = 0.0;
    for (double c : cost_) total += c;
    const double threshold = 1e-12 * total;
    std::vector<double> rep_a, rep_b;
    for (std::size_t a = 0; a < n_; ++a) {
      if (members[a].size() < 2) continue;
      for (std::size_t pos = 0; pos < members[a].size(); ++pos) {
        const std::size_t idx = members[a][pos];
        std::vector<std::size_t> without = members[a];
        without.erase(without.begin() + static_cast<std::ptrdiff_t>(pos));
        const double cost_a = solve(without, code_.data() + a * q_, rep_a);
        const std::vector<double> kept_a = rep_a;
        for (std::size_t b = 0; b < n_; ++b) {
          if (b == a) continue;
          std::vector<std::size_t> with = members[b];
          with.insert(std::upper_bound(with.begin(), with.end(), idx), idx);
          const double cost_b = solve(with, code_.data() + b * q_, rep_b);
          const double delta = (cost_a + cost_b) - (cost_[a] + cost_[b]);
          if (delta < -threshold) {
            std::copy(kept_a.begin(), kept_a.end(), code_.data() + a * q_);
            std::copy(rep_b.begin(), rep_b.end(), code_.data() + b * q_);
            return true;
          }
        }
      }
    }
    return false;
  }

  const Cloud& cloud_;
  std::size_t n_;
  std::size_t q_;
  double r_;
  const OptimizeOptions& options_;
  std::vector<double> code_;
  std::vector<std::size_t> begin_, end_;
  std::vector<double> cost_;
  std::vector<std::uint32_t> labels_;
  std::vector<double> gathered_;
  std::vector<std::size_t> origin_;
  double best_ = kInf;
  std::vector<double> best_code_;
};

void check_cloud(const PointSet& cloud, double r) {
  if (!(r > 0.0) || !std::isfinite(r))
    throw Error(ErrorCode::kInvalidArgument, "order r must be positive");
  if (cloud.dim() == 0 || cloud.empty())
    throw Error(ErrorCode::kInvalidArgument, "empty sample cloud");
  for (double v : cloud.coords())
    if (!std::isfinite(v))
      throw Error(ErrorCode::kInvalidArgument, "non-finite sample coordinate");
}

// Distinct points in lexicographic order.
PointSet distinct_points(const PointSet& cloud) {
  const std::size_t q = cloud.dim();
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(cloud[a].begin(), cloud[a].end(),
                                        cloud[b].begin(), cloud[b].end());
  };
  std::sort(idx.begin(), idx.end(), less);
  PointSet out(q);
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (i == 0 || less(idx[i - 1], idx[i])) out.push_back(cloud[idx[i]]);
  return out;
}

// Nearest codepoint lookup, ties to the lowest index.
class Nearest {
 public:
  explicit Nearest(const PointSet& codebook) : code_(codebook) {
    if (code_.dim() == 1) {
      order_.resize(code_.size());
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::stable_sort(order_.begin(), order_.end(),
                       [&](std::size_t a, std::size_t b) {
                         return code_[a][0] < code_[b][0];
                       });
      values_.reserve(order_.size());
      for (std::size_t k : order_) values_.push_back(code_[k][0]);
    }
  }

  // (index, distance)
  std::pair<std::size_t, double> operator()(std::span<const double> x) const {
    if (code_.dim() == 1) {
      const double v = x[0];
      auto it = std::lower_bound(values_.begin(), values_.end(), v);
      std::size_t best = code_.size();
      double best_d = kInf;
      auto consider = [&](std::size_t pos) {
        // All equal values adjacent to pos share the distance; take the
        // smallest original index among them.
        const double d = std::abs(values_[pos] - v);
        const std::size_t k = order_[pos];
        if (d < best_d || (d == best_d && k < best)) {
          best_d = d;
          best = k;
        }
      };
      const auto pos = static_cast<std::size_t>(it - values_.begin());
      for (std::size_t p = pos; p < values_.size() && values_[p] == values_[pos]; ++p)
        consider(p);
      if (pos > 0) {
        const double left = values_[pos - 1];
        for (std::size_t p = pos; p-- > 0 && values_[p] == left;) consider(p);
      }
      return {best, best_d};
    }
    std::size_t best = 0;
    double best_sq = kInf;
    for (std::size_t k = 0; k < code_.size(); ++k) {
      const double s = squared_distance(x, code_[k]);
      if (s < best_sq) {
        best_sq = s;
        best = k;
      }
    }
    return {best, std::sqrt(best_sq)};
  }

 private:
  const PointSet& code_;
  std::vector<std::size_t> order_;
  std::vector<double> values_;
};

}  // namespace

Codebook optimize(const PointSet& cloud, std::size_t n, double r,
                  const OptimizeOptions& options) {
  check_cloud(cloud, r);
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n must be positive");
  const std::size_t q = cloud.dim();

  Codebook book;
  book.order = r;
  book.n_requested = n;
  book.stationary_only = r < 1.0;

  if (n >= cloud.size()) {
    PointSet distinct = distinct_points(cloud);
    if (distinct.size() <= n) {
      book.points = std::move(distinct);
      book.distortion = 0.0;
      book.n_too_large = n > book.points.size();
      return book;
    }
  }

  Cloud prepared;
  prepared.q = q;
  prepared.count = cloud.size();
  prepared.coords = cloud.coords();
  if (q == 1) std::sort(prepared.coords.begin(), prepared.coords.end());

  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  std::vector<RunResult> runs(restarts);
  parallel_for(restarts, options.threads, [&](std::size_t i) {
    Rng rng = Rng::stream(options.seed, {static_cast<std::uint64_t>(n),
                                         static_cast<std::uint64_t>(i)});
    Lloyd lloyd(prepared, n, r, options);
    runs[i] = lloyd.run(rng);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < restarts; ++i)
    if (runs[i].mean_power < runs[best].mean_power) best = i;
  RunResult& run = runs[best];
  if (options.relocation_patience > 0) {
    Lloyd lloyd(prepared, n, r, options);
    lloyd.relocate(run);
  }

  // Drop duplicate codepoints (support exhausted during seeding).
  PointSet points(q);
  for (std::size_t k = 0; k < n; ++k) {
    std::span<const double> p(run.code.data() + k * q, q);
    bool seen = false;
    for (std::size_t j = 0; j < points.size() && !seen; ++j)
      seen = std::equal(p.begin(), p.end(), points[j].begin());
    if (!seen) points.push_back(p);
  }
  if (q == 1) std::sort(points.coords().begin(), points.coords().end());

  book.points = std::move(points);
  book.n_too_large = book.points.size() < n;
  book.distortion = run.mean_power == 0.0 ? 0.0 : std::pow(run.mean_power, 1.0 / r);
  book.iterations = run.iterations;
  book.restarts_used = restarts;
  book.best_restart = best;
  book.trace = std::move(run.trace);
  return book;
}

double mean_power_distance(const PointSet& cloud, const PointSet& codebook,
                           double r) {
  check_cloud(cloud, r);
  if (codebook.empty() || codebook.dim() != cloud.dim())
    throw Error(ErrorCode::kInvalidArgument, "codebook does not match cloud");
  const Nearest nearest(codebook);
  double total = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    total += power(nearest(cloud[i]).second, r);
  return total / static_cast<double>(cloud.size());
}

ErrorCurve error_curve(const PointSet& cloud, double r,
                       const std::vector<std::size_t>& n_list,
                       const OptimizeOptions& options) {
  check_cloud(cloud, r);
  ErrorCurve curve;
  curve.order = r;
  curve.codebooks.resize(n_list.size());
  OptimizeOptions inner = options;
  inner.threads = 1;
  parallel_for(n_list.size(), options.threads, [&](std::size_t i) {
    curve.codebooks[i] = optimize(cloud, n_list[i], r, inner);
  });

  curve.points.resize(n_list.size());
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    Codebook& book = curve.codebooks[i];
    CurvePoint& point = curve.points[i];
    point.n = n_list[i];
    point.restarts_used = book.restarts_used;
    if (i > 0 && n_list[i] > n_list[i - 1] &&
        book.distortion > curve.codebooks[i - 1].distortion) {
      OptimizeOptions retry = options;
      retry.restarts = 2 * std::max<std::size_t>(1, options.restarts);
      Codebook again = optimize(cloud, n_list[i], r, retry);
      point.restarts_used += again.restarts_used;
      if (again.distortion < book.distortion) {
        again.restarts_used = point.restarts_used;
        book = std::move(again);
      }
      if (book.distortion > curve.codebooks[i - 1].distortion) {
        const std::size_t used = point.restarts_used;
        book = curve.codebooks[i - 1];
        book.n_requested = n_list[i];
        book.restarts_used = used;
        point.carried = true;
      }
    }
    book.restarts_used = point.restarts_used;
    point.error = book.distortion;
    point.iterations = book.iterations;
    point.n_too_large = book.n_too_large;
  }
  return curve;
}

ErrorCurve error_curve(const Measure& measure, double r,
                       const std::vector<std::size_t>& n_list,
                       std::size_t samples, int depth,
                       const OptimizeOptions& options) {
  const SampleCloud cloud =
      sample(measure, samples, depth, options.seed, options.threads);
  return error_curve(cloud.points, r, n_list, options);
}

GeometricMeanError geometric_mean_error(const PointSet& cloud,
                                        const PointSet& codebook,
                                        double floor) {
  check_cloud(cloud, 1.0);
  if (codebook.empty() || codebook.dim() != cloud.dim())
    throw Error(ErrorCode::kInvalidArgument, "codebook does not match cloud");
  const Nearest nearest(codebook);
  GeometricMeanError out;
  double sum = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = nearest(cloud[i]).second;
    if (d == 0.0) ++out.zero_distance_count;
    if (d < floor) out.hit_floor = true;
    sum += std::log(std::max(d, floor));
  }
  out.value = std::exp(sum / static_cast<double>(cloud.size()));
  return out;
}

VoronoiDiagnostics voronoi_diagnostics(const PointSet& cloud,
                                       const PointSet& codebook, double r) {
  check_cloud(cloud, r);
  if (codebook.empty() || codebook.dim() != cloud.dim())
    throw Error(ErrorCode::kInvalidArgument, "codebook does not match cloud");
  const Nearest nearest(codebook);
  const std::size_t n = codebook.size();
  VoronoiDiagnostics out;
  out.contributions.assign(n, 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto [k, d] = nearest(cloud[i]);
    out.contributions[k] += power(d, r);
  }
  const double m = static_cast<double>(cloud.size());
  for (double& c : out.contributions) c /= m;
  out.total = 0.0;
  for (double c : out.contributions) out.total += c;
  out.min = *std::min_element(out.contributions.begin(), out.contributions.end());
  out.max = *std::max_element(out.contributions.begin(), out.contributions.end());
  out.mean = out.total / static_cast<double>(n);
  if (out.total > 0.0) {
    out.lower_ratio = out.min * static_cast<double>(n) / out.total;
    out.upper_ratio = out.max * static_cast<double>(n) / out.total;
  } else {
    out.lower_ratio = out.upper_ratio = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

Box PointDensity::bin(std::size_t index) const {
  Box out;
  const std::size_t q = box.lower.size();
  std::vector<std::size_t> digits(q);
  for (std::size_t k = q; k-- > 0;) {
    digits[k] = index % bins_per_axis;
    index /= bins_per_axis;
  }
  for (std::size_t k = 0; k < q; ++k) {
    const double width = (box.upper[k] - box.lower[k]) /
                         static_cast<double>(bins_per_axis);
    out.lower.push_back(box.lower[k] + width * static_cast<double>(digits[k]));
    out.upper.push_back(digits[k] + 1 == bins_per_axis
                            ? box.upper[k]
                            : box.lower[k] + width * static_cast<double>(digits[k] + 1));
  }
  return out;
}

PointDensity point_density_histogram(const std::vector<PointSet>& codebooks,
                                     const Box& box, std::size_t bins) {
  const std::size_t q = box.lower.size();
  if (bins == 0 || q == 0 || box.upper.size() != q)
    throw Error(ErrorCode::kInvalidArgument, "histogram needs bins and a box");
  for (std::size_t k = 0; k < q; ++k)
    if (!(box.upper[k] > box.lower[k]))
      throw Error(ErrorCode::kInvalidArgument, "degenerate histogram box");
  std::size_t cells = 1;
  for (std::size_t k = 0; k < q; ++k) cells *= bins;

  PointDensity out;
  out.box = box;
  out.bins_per_axis = bins;
  out.pooled.mass.assign(cells, 0.0);
  for (const PointSet& book : codebooks) {
    if (book.dim() != q)
      throw Error(ErrorCode::kInvalidArgument, "codebook dimension mismatch");
    Histogram h;
    h.n = book.size();
    h.mass.assign(cells, 0.0);
    for (std::size_t i = 0; i < book.size(); ++i) {
      std::size_t index = 0;
      for (std::size_t k = 0; k < q; ++k) {
        const double u = (book[i][k] - box.lower[k]) / (box.upper[k] - box.lower[k]);
        const double scaled = std::floor(u * static_cast<double>(bins));
        const auto b = static_cast<std::size_t>(
            std::clamp(scaled, 0.0, static_cast<double>(bins - 1)));
        index = index * bins + b;
      }
      h.mass[index] += 1.0;
    }
    if (!book.empty())
      for (double& v : h.mass) v /= static_cast<double>(book.size());
    for (std::size_t c = 0; c < cells; ++c) out.pooled.mass[c] += h.mass[c];
    out.per_codebook.push_back(std::move(h));
  }
  if (!codebooks.empty())
    for (double& v : out.pooled.mass) v /= static_cast<double>(codebooks.size());
  return out;
}

}  // namespace fracquant
