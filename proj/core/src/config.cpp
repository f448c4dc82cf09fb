#include "fracquant/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "fracquant/error.hpp"

namespace fracquant {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const {
    std::string where = source_;
    const YAML::Mark mark = node.Mark();
    if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1);
    throw Error(ErrorCode::kConfigError, where + ": " + what);
  }

  YAML::Node require(const YAML::Node& map, const char* key) const {
    const YAML::Node node = map[key];
    if (!node) fail(map, std::string("missing key '") + key + "'");
    return node;
  }

  double number(const YAML::Node& node, const char* what) const {
    if (!node.IsScalar()) fail(node, std::string(what) + " must be a number");
    const std::string text = node.Scalar();
    const auto slash = text.find('/');
    double v = 0.0;
    try {
      std::size_t used = 0;
      if (slash == std::string::npos) {
        v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
      } else {
        const std::string a = text.substr(0, slash), b = text.substr(slash + 1);
        std::size_t used_b = 0;
        const double num = std::stod(a, &used);
        const double den = std::stod(b, &used_b);
        if (used != a.size() || used_b != b.size())
          throw std::invalid_argument(text);
        v = num / den;
      }
    } catch (const std::logic_error&) {
      fail(node, std::string(what) + ": cannot parse '" + text + "'");
    }
    if (!std::isfinite(v))
      fail(node, std::string(what) + ": '" + text + "' is not finite");
    return v;
  }

  std::int64_t integer(const YAML::Node& node, const char* what) const {
    const double v = number(node, what);
    if (v != std::floor(v) || std::abs(v) > 9.0e15)
      fail(node, std::string(what) + " must be an integer");
    return static_cast<std::int64_t>(v);
  }

  std::size_t count(const YAML::Node& node, const char* what) const {
    const auto v = integer(node, what);
    if (v < 0) fail(node, std::string(what) + " must be nonnegative");
    return static_cast<std::size_t>(v);
  }

  std::vector<double> vector(const YAML::Node& node, const char* what) const {
    if (!node.IsSequence()) fail(node, std::string(what) + " must be a list");
    std::vector<double> out;
    for (const auto& item : node) out.push_back(number(item, what));
    return out;
  }

  std::vector<std::size_t> indices(const YAML::Node& node,
                                   const char* what) const {
    if (!node.IsSequence()) fail(node, std::string(what) + " must be a list");
    std::vector<std::size_t> out;
    for (const auto& item : node) out.push_back(count(item, what));
    return out;
  }

  std::vector<std::vector<double>> matrix(const YAML::Node& node,
                                          const char* what) const {
    if (!node.IsSequence()) fail(node, std::string(what) + " must be a list of rows");
    std::vector<std::vector<double>> out;
    for (const auto& row : node) out.push_back(vector(row, what));
    return out;
  }

 private:
  std::string source_;
};

SelfSimilarSpec read_self_similar(const Reader& in, const YAML::Node& root) {
  SelfSimilarSpec spec;
  spec.dim = root["dimension"] ? in.count(root["dimension"], "dimension") : 1;
  if (spec.dim == 0) in.fail(root["dimension"], "dimension must be >= 1");
  if (const auto box = root["box"]) {
    spec.box.lower = in.vector(in.require(box, "lower"), "box.lower");
    spec.box.upper = in.vector(in.require(box, "upper"), "box.upper");
  } else {
    spec.box.lower.assign(spec.dim, 0.0);
    spec.box.upper.assign(spec.dim, 1.0);
  }
  if (const auto sep = root["separation"]) {
    const std::string s = sep.as<std::string>();
    if (s == "ssc")
      spec.separation = Separation::kStrong;
    else if (s == "osc")
      spec.separation = Separation::kOpenSet;
    else
      in.fail(sep, "separation must be 'ssc' or 'osc'");
  }
  const YAML::Node maps = in.require(root, "maps");
  if (!maps.IsSequence()) in.fail(maps, "maps must be a list");
  for (const auto& m : maps) {
    Similitude s;
    s.ratio = in.number(in.require(m, "ratio"), "ratio");
    s.translation = in.vector(in.require(m, "translation"), "translation");
    if (const auto rot = m["rotation"]) {
      for (const auto& row : in.matrix(rot, "rotation"))
        s.orthogonal.insert(s.orthogonal.end(), row.begin(), row.end());
    }
    spec.maps.push_back(std::move(s));
  }
  spec.probs = in.vector(in.require(root, "probs"), "probs");
  return spec;
}

CarpetSpec read_carpet(const Reader& in, const YAML::Node& root) {
  CarpetSpec spec;
  spec.n = static_cast<int>(in.integer(in.require(root, "n"), "n"));
  spec.m = static_cast<int>(in.integer(in.require(root, "m"), "m"));
  const YAML::Node digits = in.require(root, "digits");
  if (!digits.IsSequence()) in.fail(digits, "digits must be a list of [i, j]");
  for (const auto& d : digits) {
    if (!d.IsSequence() || d.size() != 2) in.fail(d, "digit must be [i, j]");
    spec.digits.emplace_back(static_cast<int>(in.integer(d[0], "digit")),
                             static_cast<int>(in.integer(d[1], "digit")));
  }
  spec.probs = in.vector(in.require(root, "probs"), "probs");
  return spec;
}

MarkovSpec read_markov(const Reader& in, const YAML::Node& root) {
  MarkovSpec spec;
  spec.transition = in.matrix(in.require(root, "transition"), "transition");
  spec.ratios = in.matrix(in.require(root, "ratios"), "ratios");
  spec.initial = in.vector(in.require(root, "initial"), "initial");
  if (root["gap"]) spec.gap = in.number(root["gap"], "gap");
  return spec;
}

MultiscaleSpec read_multiscale(const Reader& in, const YAML::Node& root) {
  MultiscaleSpec spec;
  const YAML::Node patterns = in.require(root, "patterns");
  if (!patterns.IsSequence()) in.fail(patterns, "patterns must be a list");
  for (const auto& p : patterns)
    spec.patterns.push_back({in.vector(in.require(p, "ratios"), "ratios"),
                             in.vector(in.require(p, "probs"), "probs")});
  if (const auto seq = root["sequence"]) {
    PatternSequence s;
    if (seq["prefix"]) s.prefix = in.indices(seq["prefix"], "prefix");
    s.period = in.indices(in.require(seq, "period"), "period");
    spec.sequence = std::move(s);
  }
  if (const auto f = root["frequency"])
    spec.frequency = in.vector(f, "frequency");
  if (root["gap"]) spec.gap = in.number(root["gap"], "gap");
  return spec;
}

RunDefaults read_run(const Reader& in, const YAML::Node& run) {
  RunDefaults out;
  if (!run) return out;
  if (!run.IsMap()) in.fail(run, "run must be a mapping");
  if (run["r"]) out.r = in.number(run["r"], "r");
  if (run["n"]) out.n = in.indices(run["n"], "n");
  if (run["levels"]) out.levels = in.count(run["levels"], "levels");
  if (run["samples"]) out.samples = in.count(run["samples"], "samples");
  if (run["depth"]) out.depth = static_cast<int>(in.integer(run["depth"], "depth"));
  if (run["restarts"]) out.restarts = in.count(run["restarts"], "restarts");
  if (run["seed"]) out.seed = in.count(run["seed"], "seed");
  if (run["rho"]) out.rho = in.number(run["rho"], "rho");
  if (run["epsilon0"]) out.epsilon0 = in.number(run["epsilon0"], "epsilon0");
  if (run["kmax"]) out.kmax = in.count(run["kmax"], "kmax");
  return out;
}

}  // namespace

MeasureConfig parse_config(const std::string& text, const std::string& source) {
  const Reader in(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfigError, source + ": " + e.what());
  }
  if (!root || !root.IsMap())
    throw Error(ErrorCode::kConfigError, source + ": expected a mapping");
  MeasureConfig out;
  out.source = source;
  try {
    const YAML::Node family = in.require(root, "family");
    const std::string name = family.as<std::string>();
    if (name == "self_similar")
      out.spec = read_self_similar(in, root);
    else if (name == "carpet")
      out.spec = read_carpet(in, root);
    else if (name == "markov")
      out.spec = read_markov(in, root);
    else if (name == "multiscale")
      out.spec = read_multiscale(in, root);
    else
      in.fail(family, "unknown family '" + name + "'");
    out.run = read_run(in, root["run"]);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfigError, source + ": " + e.what());
  }
  return out;
}

MeasureConfig load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file)
    throw Error(ErrorCode::kConfigError, "cannot open '" + path + "'");
  std::ostringstream text;
  text << file.rdbuf();
  return parse_config(text.str(), path);
}

}  // namespace fracquant
