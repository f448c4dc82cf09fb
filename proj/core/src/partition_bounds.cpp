#include "fracquant/partition_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fracquant/bisection.hpp"
#include "fracquant/error.hpp"
#include "fracquant/parallel.hpp"

namespace fracquant {

namespace {

void check_options(double r, const BoundsOptions& options) {
  if (!(r > 0.0) || !std::isfinite(r))
    throw Error(ErrorCode::kInvalidArgument, "order r must be positive");
  if (!(options.rho > 0.0 && options.rho < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "rho must lie in (0,1)");
  if (options.levels == 0)
    throw Error(ErrorCode::kInvalidArgument, "need at least one level");
  if (options.epsilon0 < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "epsilon0 must be >= 0");
}

double root_threshold(const Measure& measure, double r, double epsilon0) {
  return epsilon0 > 0.0 ? epsilon0 : std::pow(measure.root_diameter(), r);
}

double schedule(double eps0, double rho, std::size_t level) {
  return eps0 * std::pow(rho, static_cast<double>(level - 1));
}

// log sum_k w_k^t for w_k in (0, 1], evaluated stably.
double log_power_sum(const std::vector<double>& log_w, double t) {
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : log_w) top = std::max(top, t * lw);
  double s = 0.0;
  for (double lw : log_w) s += std::exp(t * lw - top);
  return top + std::log(s);
}

// min over cell pairs of gap / max(pair diameters); sweep along the first
// axis, stopping once the axis gap alone beats the best ratio against the
// widest cell.
double separation_ratio(const std::vector<CylinderRecord>& cells) {
  if (cells.size() < 2) return std::numeric_limits<double>::infinity();
  std::vector<const CylinderRecord*> order;
  order.reserve(cells.size());
  double widest = 0.0;
  for (const auto& c : cells) {
    order.push_back(&c);
    widest = std::max(widest, c.diameter);
  }
  std::sort(order.begin(), order.end(),
            [](const CylinderRecord* a, const CylinderRecord* b) {
              return a->box.lower[0] < b->box.lower[0] ||
                     (a->box.lower[0] == b->box.lower[0] &&
                      a->box.upper[0] < b->box.upper[0]);
            });
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (order[j]->box.lower[0] - order[i]->box.upper[0] >= best * widest)
        break;
      const double big = std::max(order[i]->diameter, order[j]->diameter);
      best = std::min(best, box_gap(order[i]->box, order[j]->box) / big);
    }
  return best;
}

}  // namespace

double threshold_at(const BoundsTable& table, std::size_t level) {
  return schedule(table.epsilon0, table.rho, level);
}

BoundsLevel summarize_partition(const Measure& measure, const Partition& part,
                                const std::vector<double>& t_grid) {
  const double r = part.order;
  const double root = measure.root_diameter();
  BoundsLevel out;
  out.threshold = part.threshold;
  out.phi = part.cells.size();
  out.uniformity = part.uniformity;
  out.min_depth = std::numeric_limits<std::size_t>::max();
  std::vector<double> log_w;
  log_w.reserve(part.cells.size());
  double moment = 0.0;
  for (const auto& cell : part.cells) {
    moment += cell.mass * std::pow(cell.diameter, r);
    log_w.push_back(std::log(cell.mass) + r * std::log(cell.diameter / root));
    out.min_depth = std::min(out.min_depth, cell.depth());
    out.max_depth = std::max(out.max_depth, cell.depth());
  }
  out.moment_sum = moment;
  out.delta = separation_ratio(part.cells);

  const auto root_t =
      bisect_decreasing([&](double t) { return log_power_sum(log_w, t); });
  out.t_level = root_t.t;
  out.t_residual = std::exp(log_power_sum(log_w, root_t.t)) - 1.0;
  for (double t : t_grid) out.t_sums.push_back(std::exp(log_power_sum(log_w, t)));
  return out;
}

BoundsTable bounds_table(const Measure& measure, double r,
                         const BoundsOptions& options) {
  check_options(r, options);
  BoundsTable table;
  table.r = r;
  table.rho = options.rho;
  table.epsilon0 = root_threshold(measure, r, options.epsilon0);
  table.t_grid = options.t_grid;
  table.levels.resize(options.levels);
  parallel_for(options.levels, options.threads, [&](std::size_t i) {
    const std::size_t level = i + 1;
    const Partition part = partition_at_threshold(
        measure, schedule(table.epsilon0, table.rho, level), r,
        options.partition);
    table.levels[i] = summarize_partition(measure, part, table.t_grid);
    table.levels[i].level = level;
  });
  return table;
}

CriticalExponent critical_exponent(const BoundsTable& table) {
  const auto& lv = table.levels;
  if (lv.size() < 3)
    throw Error(ErrorCode::kInsufficientLevels,
                "critical exponent needs at least 3 levels, got " +
                    std::to_string(lv.size()));
  CriticalExponent out;
  for (std::size_t i = 1; i < lv.size(); ++i)
    out.differences.push_back(std::abs(lv[i].t_level - lv[i - 1].t_level));
  out.t_star = lv.back().t_level;
  out.value = table.r * out.t_star / (1.0 - out.t_star);
  out.last_difference = out.differences.back();
  const double before = out.differences[out.differences.size() - 2];
  out.converged = out.last_difference <= 1e-12 || out.last_difference < before;
  return out;
}

CoefficientBand coefficient_band(const Measure& measure, double r, double s,
                                 const BoundsOptions& options) {
  check_options(r, options);
  if (!(s > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "coefficient band needs s > 0");
  const double eps0 = root_threshold(measure, r, options.epsilon0);
  const double t = s / (s + r);
  const double root = measure.root_diameter();
  CoefficientBand out;
  out.s = s;
  out.level.resize(options.levels);
  out.sums.resize(options.levels);
  parallel_for(options.levels, options.threads, [&](std::size_t i) {
    const Partition part = partition_at_threshold(
        measure, schedule(eps0, options.rho, i + 1), r, options.partition);
    double sum = 0.0;
    for (const auto& cell : part.cells)
      sum += std::pow(cell.mass * std::pow(cell.diameter / root, r), t);
    out.level[i] = i + 1;
    out.sums[i] = sum;
  });
  out.min = *std::min_element(out.sums.begin(), out.sums.end());
  out.max = *std::max_element(out.sums.begin(), out.sums.end());
  out.ratio = out.max / out.min;
  return out;
}

SandwichRecord empirical_sandwich(const Measure& measure, double r,
                                  std::size_t level,
                                  const BoundsOptions& bounds,
                                  const SandwichOptions& options) {
  check_options(r, bounds);
  if (level == 0)
    throw Error(ErrorCode::kInvalidArgument, "levels are 1-based");
  const double eps0 = root_threshold(measure, r, bounds.epsilon0);
  const Partition part = partition_at_threshold(
      measure, schedule(eps0, bounds.rho, level), r, bounds.partition);
  SandwichRecord out;
  out.level = level;
  out.phi = part.cells.size();
  for (const auto& cell : part.cells)
    out.moment_sum += cell.mass * std::pow(cell.diameter, r);

  const SampleCloud cloud = sample(measure, options.samples, options.depth,
                                   options.optimize.seed,
                                   options.optimize.threads);
  const Codebook book = optimize(cloud.points, out.phi, r, options.optimize);
  out.error_power = std::pow(book.distortion, r);
  out.ratio = out.error_power / out.moment_sum;
  out.upper_bound_holds = out.error_power <= options.tolerance * out.moment_sum;
  return out;
}

}  // namespace fracquant
