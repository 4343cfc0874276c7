// Copyright 2026 The ipf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IPF_CONFIG_HPP_
#define IPF_CONFIG_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ipf/error.hpp"
#include "ipf/fk.hpp"
#include "ipf/functions.hpp"
#include "ipf/island.hpp"
#include "ipf/models.hpp"
#include "ipf/particle.hpp"

/**
 * \file
 * \brief JSON experiment configuration.
 *
 * The schema is documented in README.md. Syntax errors report line and column;
 * semantic errors report the JSON pointer of the offending value.
 */

namespace ipf {

using Json = nlohmann::json;

using AnyModel = std::variant<LinearGaussianModel, StochasticVolatilityModel, FiniteHmm>;

enum class ModelKind { lgm, sv, finite };

/// Settings of the high-particle reference run used as the SV oracle.
struct ReferenceRun {
  std::size_t particles = 1000000;
  std::size_t batches = 10;  ///< independent runs of particles / batches each; their spread gives the SE
  std::uint64_t seed = 1;
};

struct ModelSpec {
  ModelKind kind = ModelKind::lgm;
  std::optional<AnyModel> model;
  std::optional<std::uint64_t> data_seed;
  ReferenceRun reference;
};

struct Cell {
  std::size_t n1 = 1;
  std::size_t n2 = 1;
};

struct SchemePair {
  WithinScheme within;
  AcrossScheme across;
};

struct CrossoverSpec {
  std::vector<std::size_t> n2 = {256};
  std::vector<double> factors = {0.25, 4.0};  ///< N1 = factor * threshold
  std::size_t replications = 1000;
  std::string function = "identity";
};

struct ExperimentConfig {
  ModelSpec model;
  std::vector<Cell> grid;
  std::vector<SchemePair> schemes;
  double alpha_particles = 0.5;
  double alpha_islands = 0.5;
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  std::vector<TestFunction> functions;
  std::string output;
  unsigned workers = 1;
  unsigned island_workers = 1;
  bool record_timing = false;
  CrossoverSpec crossover;
  Json canonical;  ///< the parsed document, used for the hash

  [[nodiscard]] std::string hash() const;
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& where, const std::string& msg) {
  fail(Errc::config, (where.empty() ? std::string("/") : where) + ": " + msg);
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

/// Typed access to a JSON object that remembers the pointer for diagnostics and
/// rejects unknown keys.
class Node {
 public:
  Node(const Json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const noexcept { return path_; }
  [[nodiscard]] const Json& json() const noexcept { return j_; }
  [[nodiscard]] bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  [[nodiscard]] Node child(const std::string& key) const {
    if (!has(key)) {
      config_fail(path_, "missing required key '" + key + "'");
    }
    return {j_.at(key), path_ + "/" + key};
  }

  [[nodiscard]] Node at(std::size_t i) const { return {j_.at(i), path_ + "/" + std::to_string(i)}; }

  void expect_object() const {
    if (!j_.is_object()) {
      config_fail(path_, "expected an object");
    }
  }

  void expect_array() const {
    if (!j_.is_array()) {
      config_fail(path_, "expected an array");
    }
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    expect_object();
    for (const auto& [k, v] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        config_fail(path_ + "/" + k, "unknown key");
      }
    }
  }

  [[nodiscard]] double number() const {
    if (!j_.is_number()) {
      config_fail(path_, "expected a number");
    }
    return j_.get<double>();
  }

  [[nodiscard]] std::uint64_t uint() const {
    if (!j_.is_number_unsigned()) {
      config_fail(path_, "expected a nonnegative integer");
    }
    return j_.get<std::uint64_t>();
  }

  [[nodiscard]] std::size_t positive() const {
    const std::uint64_t v = uint();
    if (v == 0) {
      config_fail(path_, "must be at least 1");
    }
    return static_cast<std::size_t>(v);
  }

  [[nodiscard]] bool boolean() const {
    if (!j_.is_boolean()) {
      config_fail(path_, "expected true or false");
    }
    return j_.get<bool>();
  }

  [[nodiscard]] std::string string() const {
    if (!j_.is_string()) {
      config_fail(path_, "expected a string");
    }
    return j_.get<std::string>();
  }

  [[nodiscard]] std::vector<double> numbers() const {
    expect_array();
    std::vector<double> out;
    for (std::size_t i = 0; i < j_.size(); ++i) {
      out.push_back(at(i).number());
    }
    return out;
  }

  [[nodiscard]] std::vector<std::size_t> positives() const {
    expect_array();
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < j_.size(); ++i) {
      out.push_back(at(i).positive());
    }
    if (out.empty()) {
      config_fail(path_, "must not be empty");
    }
    return out;
  }

  double number_or(const std::string& key, double fallback) const { return has(key) ? child(key).number() : fallback; }

 private:
  const Json& j_;
  std::string path_;
};

inline Vector to_vector(const Node& node) {
  const std::vector<double> v = node.numbers();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix to_matrix(const Node& node) {
  node.expect_array();
  const std::size_t rows = node.json().size();
  Matrix m;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::vector<double> row = node.at(r).numbers();
    if (r == 0) {
      m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(row.size()));
    } else if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
      config_fail(node.at(r).path(), "ragged matrix row");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return m;
}

/// Runs fn, prefixing library errors with the document location they came from.
template <class Fn>
auto with_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

template <class Params>
std::vector<double> observations_for(const Node& m, const Params& params_for_sim) {
  if (m.has("observations")) {
    if (m.has("data_seed")) {
      config_fail(m.path(), "give either 'observations' or 'data_seed', not both");
    }
    return m.child("observations").numbers();
  }
  if (!m.has("data_seed")) {
    config_fail(m.path(), "need 'observations' or 'data_seed' with 'n'");
  }
  const std::size_t n = m.child("n").positive();
  Stream rng = Stream::for_island(m.child("data_seed").uint(), 0, 0, StreamPurpose::auxiliary);
  return simulate(params_for_sim, n, rng).observations;
}

inline ModelSpec parse_model(const Node& m) {
  m.expect_object();
  ModelSpec spec;
  const std::string kind = m.child("kind").string();
  if (m.has("data_seed")) {
    spec.data_seed = m.child("data_seed").uint();
  }
  if (kind == "lgm") {
    m.allow_only({"kind", "phi", "sigma_u", "sigma_v", "n", "data_seed", "observations"});
    spec.kind = ModelKind::lgm;
    LgmParams p;
    p.phi = m.number_or("phi", p.phi);
    p.sigma_u = m.number_or("sigma_u", p.sigma_u);
    p.sigma_v = m.number_or("sigma_v", p.sigma_v);
    with_path(m.path(), [&] { (void)LinearGaussianModel(p); });  // validate before simulating data
    p.observations = observations_for(m, p);
    spec.model = AnyModel(make_lgm(std::move(p)));
  } else if (kind == "sv") {
    m.allow_only({"kind", "alpha", "sigma", "beta", "n", "data_seed", "observations", "reference"});
    spec.kind = ModelKind::sv;
    SvParams p;
    p.alpha = m.number_or("alpha", p.alpha);
    p.sigma = m.number_or("sigma", p.sigma);
    p.beta = m.number_or("beta", p.beta);
    with_path(m.path(), [&] { (void)StochasticVolatilityModel(p); });
    p.observations = observations_for(m, p);
    spec.model = AnyModel(make_sv(std::move(p)));
    if (m.has("reference")) {
      const Node r = m.child("reference");
      r.allow_only({"particles", "batches", "seed"});
      if (r.has("particles")) {
        spec.reference.particles = r.child("particles").positive();
      }
      if (r.has("batches")) {
        spec.reference.batches = r.child("batches").positive();
      }
      if (r.has("seed")) {
        spec.reference.seed = r.child("seed").uint();
      }
      if (spec.reference.particles < spec.reference.batches) {
        config_fail(r.path(), "need at least one particle per batch");
      }
    }
  } else if (kind == "finite") {
    spec.kind = ModelKind::finite;
    if (m.has("transitions")) {
      m.allow_only({"kind", "initial", "transitions", "potentials"});
      const Vector eta0 = to_vector(m.child("initial"));
      const Node t = m.child("transitions");
      t.expect_array();
      std::vector<Matrix> transitions;
      for (std::size_t i = 0; i < t.json().size(); ++i) {
        transitions.push_back(to_matrix(t.at(i)));
      }
      const Node g = m.child("potentials");
      g.expect_array();
      std::vector<Vector> potentials;
      for (std::size_t i = 0; i < g.json().size(); ++i) {
        potentials.push_back(to_vector(g.at(i)));
      }
      spec.model = with_path(m.path(), [&] {
        return AnyModel(FiniteHmm(make_finite_hmm(eta0, std::move(transitions), std::move(potentials))));
      });
    } else {
      m.allow_only({"kind", "states", "n", "seed", "potential_min", "potential_max", "transition_floor"});
      RandomModelOptions opt;
      opt.potential_min = m.number_or("potential_min", opt.potential_min);
      opt.potential_max = m.number_or("potential_max", opt.potential_max);
      opt.transition_floor = m.number_or("transition_floor", opt.transition_floor);
      const std::size_t d = m.child("states").positive();
      const std::size_t n = m.child("n").positive();
      const std::uint64_t seed = m.has("seed") ? m.child("seed").uint() : kStandardInstanceSeed;
      spec.model = with_path(m.path(), [&] {
        return AnyModel(FiniteHmm(make_finite_hmm(static_cast<Eigen::Index>(d), n, seed, opt)));
      });
    }
  } else {
    config_fail(m.path() + "/kind", "unknown model kind '" + kind + "' (expected lgm, sv or finite)");
  }
  return spec;
}

struct SchemeOptions {
  double alpha = 0.5;
  std::optional<std::vector<double>> schedule;
};

inline std::optional<EpsilonPolicy> epsilon_policy(const std::string& name, const SchemeOptions& opt,
                                                   const std::string& path) {
  if (name == "eps_essup") {
    return EmpiricalEssSup{};
  }
  if (name == "eps_sup_norm") {
    return SupNormInverse{};
  }
  if (name == "eps_fixed") {
    if (!opt.schedule) {
      config_fail(path, "eps_fixed needs an epsilon schedule");
    }
    return FixedSchedule{*opt.schedule};
  }
  return std::nullopt;
}

inline WithinScheme parse_within(const Node& node, const SchemeOptions& opt) {
  const std::string name = node.string();
  if (name == "bootstrap") {
    return Bootstrap{};
  }
  if (name == "ess") {
    return AdaptiveEss{opt.alpha};
  }
  if (auto policy = epsilon_policy(name, opt, node.path())) {
    return EpsilonBootstrap{*policy};
  }
  config_fail(node.path(), "unknown within-island scheme '" + name + "'");
}

inline AcrossScheme parse_across(const Node& node, const SchemeOptions& opt) {
  const std::string name = node.string();
  if (name == "independent") {
    return Independent{};
  }
  if (name == "bootstrap") {
    return Bootstrap{};
  }
  if (name == "ess") {
    return AdaptiveEss{opt.alpha};
  }
  if (auto policy = epsilon_policy(name, opt, node.path())) {
    return EpsilonBootstrap{*policy};
  }
  config_fail(node.path(), "unknown across-island scheme '" + name + "'");
}

inline double parse_alpha(const Node& node) {
  const double a = node.number();
  if (!(a > 0.0 && a < 1.0)) {
    config_fail(node.path(), "alpha must lie in (0, 1)");
  }
  return a;
}

}  // namespace detail

/// Parses and validates a configuration document.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  try {
    cfg.canonical = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    fail(Errc::config, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
  using detail::Node;
  const Node root(cfg.canonical, "");
  root.allow_only({"model", "grid", "schemes", "within", "across", "alpha_particles", "alpha_islands",
                   "epsilon_schedule", "epsilon_schedule_islands", "replications", "seed", "functions", "output",
                   "workers", "island_workers", "record_timing", "crossover"});

  cfg.model = detail::parse_model(root.child("model"));

  if (root.has("alpha_particles")) {
    cfg.alpha_particles = detail::parse_alpha(root.child("alpha_particles"));
  }
  if (root.has("alpha_islands")) {
    cfg.alpha_islands = detail::parse_alpha(root.child("alpha_islands"));
  }
  detail::SchemeOptions within_opt{cfg.alpha_particles, std::nullopt};
  detail::SchemeOptions across_opt{cfg.alpha_islands, std::nullopt};
  if (root.has("epsilon_schedule")) {
    within_opt.schedule = root.child("epsilon_schedule").numbers();
    across_opt.schedule = within_opt.schedule;
  }
  if (root.has("epsilon_schedule_islands")) {
    across_opt.schedule = root.child("epsilon_schedule_islands").numbers();
  }

  if (root.has("grid")) {
    const Node g = root.child("grid");
    if (g.json().is_array()) {
      // Explicit [N1, N2] pairs.
      for (std::size_t i = 0; i < g.json().size(); ++i) {
        const std::vector<std::size_t> pair = g.at(i).positives();
        if (pair.size() != 2) {
          detail::config_fail(g.at(i).path(), "expected [N1, N2]");
        }
        cfg.grid.push_back({pair[0], pair[1]});
      }
    } else {
      g.allow_only({"N1", "N2"});
      for (const std::size_t n1 : g.child("N1").positives()) {
        for (const std::size_t n2 : g.child("N2").positives()) {
          cfg.grid.push_back({n1, n2});
        }
      }
    }
    if (cfg.grid.empty()) {
      detail::config_fail(g.path(), "must not be empty");
    }
  }

  if (root.has("schemes")) {
    if (root.has("within") || root.has("across")) {
      detail::config_fail("/schemes", "give either 'schemes' or 'within'/'across' lists, not both");
    }
    const Node s = root.child("schemes");
    s.expect_array();
    for (std::size_t i = 0; i < s.json().size(); ++i) {
      const Node pair = s.at(i);
      pair.allow_only({"within", "across"});
      cfg.schemes.push_back({detail::parse_within(pair.child("within"), within_opt),
                             detail::parse_across(pair.child("across"), across_opt)});
    }
  } else if (root.has("within") || root.has("across")) {
    const Node w = root.child("within");
    const Node a = root.child("across");
    w.expect_array();
    a.expect_array();
    for (std::size_t i = 0; i < w.json().size(); ++i) {
      for (std::size_t j = 0; j < a.json().size(); ++j) {
        cfg.schemes.push_back({detail::parse_within(w.at(i), within_opt), detail::parse_across(a.at(j), across_opt)});
      }
    }
  }

  if (root.has("replications")) {
    cfg.replications = root.child("replications").positive();
  }
  if (root.has("seed")) {
    cfg.seed = root.child("seed").uint();
  }
  if (root.has("functions")) {
    const Node f = root.child("functions");
    f.expect_array();
    for (std::size_t i = 0; i < f.json().size(); ++i) {
      const Node item = f.at(i);
      cfg.functions.push_back(detail::with_path(item.path(), [&] { return parse_test_function(item.string()); }));
    }
  } else {
    cfg.functions.push_back(identity_function());
  }
  if (root.has("output")) {
    cfg.output = root.child("output").string();
  }
  if (root.has("workers")) {
    cfg.workers = static_cast<unsigned>(root.child("workers").positive());
  }
  if (root.has("island_workers")) {
    cfg.island_workers = static_cast<unsigned>(root.child("island_workers").positive());
  }
  if (root.has("record_timing")) {
    cfg.record_timing = root.child("record_timing").boolean();
  }
  if (root.has("crossover")) {
    const Node c = root.child("crossover");
    c.allow_only({"N2", "factors", "replications", "function"});
    if (c.has("N2")) {
      cfg.crossover.n2 = c.child("N2").positives();
    }
    if (c.has("factors")) {
      cfg.crossover.factors = c.child("factors").numbers();
      for (const double f : cfg.crossover.factors) {
        if (!(f > 0.0)) {
          detail::config_fail(c.path() + "/factors", "factors must be positive");
        }
      }
    }
    if (c.has("replications")) {
      cfg.crossover.replications = c.child("replications").positive();
    }
    if (c.has("function")) {
      cfg.crossover.function = c.child("function").string();
      (void)detail::with_path(c.path() + "/function", [&] { return parse_test_function(cfg.crossover.function); });
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(Errc::config, "cannot open config file " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

/// FNV-1a 64 of the canonical (key-sorted, whitespace-free) document, as 16 hex digits.
inline std::string ExperimentConfig::hash() const {
  const std::string text = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace ipf

#endif  // IPF_CONFIG_HPP_
