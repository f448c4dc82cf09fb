#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fracquant/analysis.hpp"
#include "fracquant/config.hpp"
#include "fracquant/dim_solver.hpp"
#include "fracquant/error.hpp"
#include "fracquant/io.hpp"
#include "fracquant/measure.hpp"
#include "fracquant/partition_bounds.hpp"
#include "fracquant/quantizer.hpp"

namespace fs = std::filesystem;
using namespace fracquant;

namespace {

struct Flags {
  std::string config;
  std::optional<double> r;
  std::vector<std::size_t> n;
  std::optional<std::size_t> levels;
  std::optional<std::size_t> samples;
  std::optional<int> depth;
  std::optional<std::size_t> restarts;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
  std::string format = "json";
  std::optional<double> rho;
  std::optional<double> epsilon0;
  std::optional<std::size_t> kmax;
  std::optional<double> s;
  std::size_t drop = 2;
  std::size_t bins = 32;
};

// Run parameters resolved from flags first, then the config's run section.
struct Run {
  MeasureConfig config;
  Flags flags;

  double r(double fallback = -1.0) const {
    if (flags.r) return *flags.r;
    if (config.run.r) return *config.run.r;
    if (fallback >= 0.0) return fallback;
    throw Error(ErrorCode::kConfigError, "order r not given (--r or run.r)");
  }
  std::vector<std::size_t> n() const {
    if (!flags.n.empty()) return flags.n;
    if (config.run.n) return *config.run.n;
    return {};
  }
  std::size_t levels() const {
    return flags.levels.value_or(config.run.levels.value_or(8));
  }
  std::size_t samples() const {
    return flags.samples.value_or(config.run.samples.value_or(100000));
  }
  int depth() const { return flags.depth.value_or(config.run.depth.value_or(0)); }
  std::size_t restarts() const {
    return flags.restarts.value_or(config.run.restarts.value_or(4));
  }
  std::uint64_t seed() const { return flags.seed.value_or(config.run.seed.value_or(0)); }
  double rho() const { return flags.rho.value_or(config.run.rho.value_or(0.5)); }
  double epsilon0() const {
    return flags.epsilon0.value_or(config.run.epsilon0.value_or(0.0));
  }
  std::size_t kmax() const { return flags.kmax.value_or(config.run.kmax.value_or(200)); }

  OptimizeOptions optimize() const {
    OptimizeOptions o;
    o.restarts = restarts();
    o.seed = seed();
    o.threads = flags.threads;
    return o;
  }
  BoundsOptions bounds() const {
    BoundsOptions b;
    b.levels = levels();
    b.rho = rho();
    b.epsilon0 = epsilon0();
    b.threads = flags.threads;
    return b;
  }
};

class Output {
 public:
  explicit Output(const Flags& flags) : dir_(flags.out), json_(flags.format == "json") {
    if (!dir_.empty()) fs::create_directories(dir_);
  }

  bool json() const { return json_; }

  // Primary document: a file under --out, otherwise stdout.
  void primary(const std::string& name, const std::string& text) {
    if (dir_.empty())
      std::cout << text;
    else
      write(name, text);
  }
  // Side artifacts only exist with --out.
  void extra(const std::string& name, const std::string& text) {
    if (!dir_.empty()) write(name, text);
  }

 private:
  void write(const std::string& name, const std::string& text) {
    const fs::path path = fs::path(dir_) / name;
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorCode::kConfigError, "cannot write " + path.string());
    file << text;
  }

  std::string dir_;
  bool json_;
};

Run load(const Flags& flags) {
  Run run;
  run.flags = flags;
  run.config = load_config(flags.config);
  return run;
}

std::string summary_csv(const DimensionReport& r) {
  return "family,quantity,r,value,t,residual\n" +
         std::string(family_name(r.family)) + "," + r.quantity + "," +
         io::number(r.r) + "," + io::number(r.value) + "," + io::number(r.t) +
         "," + io::number(r.residual) + "\n";
}

int cmd_dim(const Flags& flags) {
  const Run run = load(flags);
  const Measure measure = Measure::create(run.config.spec);
  const DimensionReport rep =
      solve_dimension(measure, run.r(), SolveOptions{run.kmax()});
  Output out(flags);
  if (out.json()) {
    out.primary("dim.json", io::dimension_json(rep));
  } else {
    out.primary("dim.csv", rep.sequence.empty() ? summary_csv(rep)
                                                : io::sequence_csv(rep));
  }
  if (!rep.sequence.empty() && out.json())
    out.extra("sequence.csv", io::sequence_csv(rep));
  return 0;
}

int cmd_quantize(const Flags& flags) {
  const Run run = load(flags);
  const Measure measure = Measure::create(run.config.spec);
  const auto n = run.n();
  if (n.empty()) throw Error(ErrorCode::kConfigError, "no codebook sizes (--n or run.n)");
  const double r = run.r();
  const OptimizeOptions opt = run.optimize();
  const SampleCloud cloud = sample(measure, run.samples(), run.depth(), opt.seed, opt.threads);
  const ErrorCurve curve = error_curve(cloud.points, r, n, opt);
  for (const auto& p : curve.points)
    if (p.n_too_large)
      std::cerr << "warning: n = " << p.n
                << " exceeds the number of distinct samples; e = 0\n";

  Output out(flags);
  out.primary(out.json() ? "curve.json" : "curve.csv",
              out.json() ? io::curve_json(curve) : io::curve_csv(curve));
  out.extra("codebooks.json", io::codebooks_json(curve));
  std::vector<PointSet> books;
  std::vector<VoronoiDiagnostics> cells;
  for (const auto& b : curve.codebooks) {
    books.push_back(b.points);
    cells.push_back(voronoi_diagnostics(cloud.points, b.points, r));
  }
  out.extra("histogram.csv",
            io::histogram_csv(point_density_histogram(books, measure.root_box(), flags.bins)));
  out.extra("voronoi.csv", io::voronoi_csv(n, cells));
  return 0;
}

int cmd_bounds(const Flags& flags) {
  const Run run = load(flags);
  const Measure measure = Measure::create(run.config.spec);
  const BoundsTable table = bounds_table(measure, run.r(), run.bounds());
  std::optional<CriticalExponent> critical;
  if (table.levels.size() >= 3) critical = critical_exponent(table);
  Output out(flags);
  if (out.json()) {
    out.primary("bounds.json", io::bounds_json(table, critical));
    out.extra("bounds.csv", io::bounds_csv(table));
  } else {
    out.primary("bounds.csv", io::bounds_csv(table));
    out.extra("bounds.json", io::bounds_json(table, critical));
  }
  return 0;
}

int cmd_fit(const Flags& flags) {
  std::ifstream file(flags.config);
  if (!file) throw Error(ErrorCode::kConfigError, "cannot open '" + flags.config + "'");
  std::ostringstream text;
  text << file.rdbuf();
  const auto curve = io::read_curve_csv(text.str());
  const FitResult fit = dimension_fit(curve, flags.drop);
  std::optional<CoefficientSeries> series;
  if (flags.s) series = coefficient_series(curve, *flags.s);
  Output out(flags);
  if (out.json() || !series) {
    out.primary("fit.json", io::fit_json(fit, series));
    if (series) out.extra("series.csv", io::series_csv(*series));
  } else {
    out.primary("series.csv", io::series_csv(*series));
    out.extra("fit.json", io::fit_json(fit, series));
  }
  return 0;
}

int cmd_check(const Flags& flags) {
  const Run run = load(flags);
  const ValidationReport report = validate(run.config.spec);
  Output out(flags);
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(io::validation_json(report));
  if (!report.ok()) {
    out.primary("check.json", doc.dump(2) + "\n");
    const auto* failure = report.first_failure();
    std::cerr << "validation failed: " << failure->name << ": " << failure->detail << "\n";
    return exit_code_for(failure->error);
  }
  const Measure measure = Measure::create(run.config.spec);
  const double r = run.r(2.0);
  const DimensionReport rep = solve_dimension(measure, r, SolveOptions{run.kmax()});
  nlohmann::ordered_json verdicts = nlohmann::ordered_json::object();
  for (const auto& [k, v] : rep.verdicts) verdicts[k] = v;
  doc["r"] = r;
  doc["verdicts"] = verdicts;
  if (measure.family() == Family::kCarpet) {
    const auto v = carpet_conditions(std::get<CarpetSpec>(measure.spec()), r);
    doc["condition_A_sums"] = v.condition_a_sums;
    doc["column_mass"] = v.column_mass;
  }
  out.primary("check.json", doc.dump(2) + "\n");
  return 0;
}

int cmd_report(const Flags& flags) {
  const Run run = load(flags);
  const Measure measure = Measure::create(run.config.spec);
  const double r = run.r();
  ReportInputs in;
  in.ambient_dim = measure.dim();
  in.theory = solve_dimension(measure, r, SolveOptions{run.kmax()});
  if (r > 0.0 && run.levels() > 0) in.bounds = bounds_table(measure, r, run.bounds());
  const auto n = run.n();
  if (r > 0.0 && n.size() >= 4) {
    const ErrorCurve curve =
        error_curve(measure, r, n, run.samples(), run.depth(), run.optimize());
    const auto samples = curve_samples(curve);
    in.fit = dimension_fit(samples, flags.drop);
    in.series = coefficient_series(samples, in.theory->value);
  }
  if (r > 0.0 && in.theory->value > 0.0 && run.levels() > 0)
    in.band = coefficient_band(measure, r, in.theory->value, run.bounds());
  Output out(flags);
  out.primary("report.json", io::report_json(build_report(in)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantization dimensions of fractal measures"};
  app.require_subcommand(1);
  Flags flags;

  auto common = [&](CLI::App* cmd, const char* positional) {
    cmd->add_option(positional, flags.config, "input file")->required();
    cmd->add_option("--out", flags.out, "output directory (default: stdout)");
    cmd->add_option("--format", flags.format, "primary output format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--threads", flags.threads, "worker threads")
        ->check(CLI::PositiveNumber);
  };
  auto measure_opts = [&](CLI::App* cmd) {
    cmd->add_option("--r", flags.r, "quantization order")->check(CLI::NonNegativeNumber);
    cmd->add_option("--kmax", flags.kmax, "multiscale horizon");
  };
  auto sampling = [&](CLI::App* cmd) {
    cmd->add_option("--n", flags.n, "codebook sizes, e.g. 2,4,8")->delimiter(',');
    cmd->add_option("--samples", flags.samples, "sample cloud size M")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--depth", flags.depth, "symbolic sampling depth (0 = auto)");
    cmd->add_option("--restarts", flags.restarts, "Lloyd restarts")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", flags.seed, "random seed");
    cmd->add_option("--bins", flags.bins, "histogram bins per axis")
        ->check(CLI::PositiveNumber);
  };
  auto schedule = [&](CLI::App* cmd) {
    cmd->add_option("--levels", flags.levels, "threshold levels");
    cmd->add_option("--rho", flags.rho, "threshold ratio between levels");
    cmd->add_option("--eps0", flags.epsilon0, "level-1 threshold (default mu(J)|J|^r)");
  };

  auto* dim = app.add_subcommand("dim", "solve for the quantization dimension");
  common(dim, "config");
  measure_opts(dim);
  auto* quantize = app.add_subcommand("quantize", "empirical error curve");
  common(quantize, "config");
  measure_opts(quantize);
  sampling(quantize);
  auto* bounds = app.add_subcommand("bounds", "partition bounds table");
  common(bounds, "config");
  measure_opts(bounds);
  schedule(bounds);
  auto* fit = app.add_subcommand("fit", "fit a dimension to an error curve CSV");
  common(fit, "curve");
  fit->add_option("--s", flags.s, "exponent for the coefficient series")
      ->check(CLI::PositiveNumber);
  fit->add_option("--drop", flags.drop, "leading points to discard");
  auto* check = app.add_subcommand("check", "validate a measure and report structural conditions");
  common(check, "config");
  measure_opts(check);
  auto* report = app.add_subcommand("report", "theory vs experiment summary");
  common(report, "config");
  measure_opts(report);
  sampling(report);
  schedule(report);
  report->add_option("--drop", flags.drop, "leading curve points to discard");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*dim) return cmd_dim(flags);
    if (*quantize) return cmd_quantize(flags);
    if (*bounds) return cmd_bounds(flags);
    if (*fit) return cmd_fit(flags);
    if (*check) return cmd_check(flags);
    if (*report) return cmd_report(flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
