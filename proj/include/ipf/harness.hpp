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

#ifndef IPF_HARNESS_HPP_
#define IPF_HARNESS_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "ipf/asymptotics.hpp"
#include "ipf/config.hpp"
#include "ipf/csv.hpp"
#include "ipf/error.hpp"
#include "ipf/fk.hpp"
#include "ipf/island.hpp"
#include "ipf/models.hpp"
#include "ipf/numeric.hpp"
#include "ipf/parallel.hpp"
#include "ipf/rng.hpp"

/**
 * \file
 * \brief Replicated experiments over a grid of (N1, N2) cells and scheme pairs.
 *
 * Every (cell, replication) gets its own seed derived from the master seed; all
 * scheme pairs of that cell and replication share it. Results are stored by task
 * index, so the raw CSV does not depend on the number of workers.
 */

namespace ipf {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Oracle {
  std::string function;
  double value = kNaN;
  double standard_error = 0.0;  ///< Monte Carlo error of a reference run, 0 for exact values
  std::string source;           ///< "kalman", "exact", "reference" or "none"
};

/// One line of the raw CSV.
struct RawRow {
  std::string config_hash;
  std::size_t cell = 0;
  std::string within;
  std::string across;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::size_t rep = 0;
  std::string function;
  double estimate = kNaN;
  double log_gamma1 = kNaN;
  std::uint64_t interactions = 0;
  std::uint64_t island_resamples = 0;
  std::uint64_t particle_resamples = 0;
  std::uint64_t seed = 0;
  double millis = 0.0;
};

struct FailureRow {
  std::size_t cell = 0;
  std::string within;
  std::string across;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::string code;
  std::optional<std::size_t> step;
  std::string message;
};

struct SummaryRow {
  std::size_t cell = 0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::string within;
  std::string across;
  std::string function;
  std::size_t replications = 0;  ///< successful ones
  std::size_t failures = 0;
  double mean = kNaN;
  double oracle = kNaN;
  double oracle_se = kNaN;
  double bias = kNaN;      ///< mean - oracle
  double variance = kNaN;  ///< divisor R, so mse = bias^2 + variance
  double mse = kNaN;
  double std_error = kNaN;  ///< of the mean
  double interactions = kNaN;
  double island_resamples = kNaN;
  double particle_resamples = kNaN;
  double millis = kNaN;
};

struct ExperimentResult {
  std::string config_hash;
  std::size_t horizon = 0;
  std::vector<Oracle> oracles;
  std::vector<RawRow> raw;
  std::vector<FailureRow> failures;
  std::vector<SummaryRow> summary;
};

inline const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::lgm: return "lgm";
    case ModelKind::sv: return "sv";
    case ModelKind::finite: return "finite";
  }
  return "unknown";
}

inline std::size_t horizon_of(const AnyModel& model) {
  return std::visit([](const auto& m) { return static_cast<std::size_t>(m.horizon()); }, model);
}

/// f evaluated at the states 0..d-1 of a finite model.
inline Vector function_values(const FiniteModel& model, const TestFunction& f) {
  Vector v(model.states());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = f(static_cast<double>(i));
  }
  return v;
}

/// eta_n(f) of the SV model by `batches` independent bootstrap filters that share
/// `particles` in total; the value is their mean and the error their spread.
inline Oracle sv_reference(const StochasticVolatilityModel& model, const ReferenceRun& ref, const TestFunction& f,
                           unsigned workers) {
  RunConfig rc;
  rc.n1 = ref.particles / ref.batches;
  rc.n2 = ref.batches;
  rc.within = Bootstrap{};
  rc.across = Independent{};
  rc.seed = ref.seed;
  rc.island_workers = workers;
  IslandFilter<StochasticVolatilityModel> filter(model, rc);
  while (!filter.done()) {
    filter.advance();
  }
  std::vector<double> per_batch;
  for (const auto& island : filter.system().islands) {
    per_batch.push_back(eta_hat(island, f));
  }
  CompensatedSum sum;
  for (const double v : per_batch) {
    sum.add(v);
  }
  const double b = static_cast<double>(per_batch.size());
  const double mean = sum.value() / b;
  CompensatedSum sq;
  for (const double v : per_batch) {
    sq.add((v - mean) * (v - mean));
  }
  const double se = per_batch.size() > 1 ? std::sqrt(sq.value() / (b - 1.0) / b) : kNaN;
  return {f.name, mean, se, "reference"};
}

/// Kalman predictive moments for the LGM, exact flow for finite models, a reference
/// particle run for SV.
inline std::vector<Oracle> compute_oracles(const ModelSpec& spec, const std::vector<TestFunction>& functions,
                                           unsigned workers = 1) {
  std::vector<Oracle> out;
  const AnyModel& model = *spec.model;
  for (const TestFunction& f : functions) {
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, LinearGaussianModel>) {
            const auto& p = m.params();
            const GaussianMoments last = kalman_predictive(p.phi, p.sigma_u, p.sigma_v, p.observations).back();
            if (f.gaussian_mean) {
              out.push_back({f.name, f.gaussian_mean(last.mean, last.variance), 0.0, "kalman"});
            } else {
              out.push_back({f.name, kNaN, kNaN, "none"});
            }
          } else if constexpr (std::is_same_v<M, FiniteHmm>) {
            const auto flow = exact_flow(m.model());
            out.push_back({f.name, flow.back().eta(function_values(m.model(), f)), 0.0, "exact"});
          } else {
            out.push_back(sv_reference(m, spec.reference, f, workers));
          }
        },
        model);
  }
  return out;
}

namespace detail {

struct Task {
  std::size_t cell;
  std::size_t scheme;
  std::size_t rep;
};

struct TaskOutcome {
  RunResult result;
  std::optional<Error> error;
  double millis = 0.0;
};

inline RunConfig run_config_for(const ExperimentConfig& cfg, const Cell& cell, const SchemePair& pair,
                                std::uint64_t seed) {
  RunConfig rc;
  rc.n1 = cell.n1;
  rc.n2 = cell.n2;
  rc.within = pair.within;
  rc.across = pair.across;
  rc.seed = seed;
  rc.test_functions = cfg.functions;
  rc.island_workers = cfg.island_workers;
  return rc;
}

inline TaskOutcome run_task(const AnyModel& model, const RunConfig& rc) {
  TaskOutcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    out.result = std::visit([&](const auto& m) { return run(m, rc); }, model);
  } catch (const Error& e) {
    out.error = e;
  }
  out.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace detail

/// Seed of replication `rep` in cell `cell`.
[[nodiscard]] inline std::uint64_t replication_seed(std::uint64_t master, std::size_t cell, std::size_t rep) {
  return derive_seed(master, {static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(rep)});
}

/**
 * Groups raw rows by (cell, within, across, function) in order of first
 * appearance. `oracles` maps function name to its oracle; missing names get no bias.
 */
inline std::vector<SummaryRow> summarize_rows(const std::vector<RawRow>& rows,
                                              const std::vector<Oracle>& oracles = {}) {
  using Key = std::tuple<std::size_t, std::string, std::string, std::string>;
  std::map<Key, std::size_t> index;
  std::vector<std::vector<const RawRow*>> groups;
  for (const RawRow& r : rows) {
    const Key key{r.cell, r.within, r.across, r.function};
    const auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) {
      groups.emplace_back();
    }
    groups[it->second].push_back(&r);
  }
  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (const auto& group : groups) {
    const RawRow& first = *group.front();
    SummaryRow s;
    s.cell = first.cell;
    s.n1 = first.n1;
    s.n2 = first.n2;
    s.within = first.within;
    s.across = first.across;
    s.function = first.function;
    CompensatedSum est;
    CompensatedSum inter;
    CompensatedSum isl;
    CompensatedSum part;
    CompensatedSum ms;
    for (const RawRow* r : group) {
      ms.add(r->millis);
      if (!std::isfinite(r->estimate)) {
        ++s.failures;
        continue;
      }
      ++s.replications;
      est.add(r->estimate);
      inter.add(static_cast<double>(r->interactions));
      isl.add(static_cast<double>(r->island_resamples));
      part.add(static_cast<double>(r->particle_resamples));
    }
    s.millis = ms.value() / static_cast<double>(group.size());
    if (s.replications > 0) {
      const double r = static_cast<double>(s.replications);
      s.mean = est.value() / r;
      CompensatedSum sq;
      for (const RawRow* row : group) {
        if (std::isfinite(row->estimate)) {
          sq.add((row->estimate - s.mean) * (row->estimate - s.mean));
        }
      }
      s.variance = sq.value() / r;
      s.std_error = s.replications > 1 ? std::sqrt(sq.value() / (r - 1.0) / r) : kNaN;
      s.interactions = inter.value() / r;
      s.island_resamples = isl.value() / r;
      s.particle_resamples = part.value() / r;
    }
    for (const Oracle& o : oracles) {
      if (o.function == s.function && std::isfinite(o.value)) {
        s.oracle = o.value;
        s.oracle_se = o.standard_error;
        s.bias = s.mean - s.oracle;
        s.mse = s.bias * s.bias + s.variance;
        break;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Runs every (cell, scheme pair, replication) of the configuration.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::optional<unsigned> workers = std::nullopt) {
  if (cfg.grid.empty()) {
    fail(Errc::config, "/grid: no cells to run");
  }
  if (cfg.schemes.empty()) {
    fail(Errc::config, "/schemes: no scheme pairs to run");
  }
  const AnyModel& model = *cfg.model.model;
  for (const Cell& cell : cfg.grid) {
    for (const SchemePair& pair : cfg.schemes) {
      detail::run_config_for(cfg, cell, pair, 0).validate();
    }
  }
  const unsigned pool = workers.value_or(cfg.workers);

  ExperimentResult result;
  result.config_hash = cfg.hash();
  result.horizon = horizon_of(model);
  result.oracles = compute_oracles(cfg.model, cfg.functions, pool);

  std::vector<detail::Task> tasks;
  tasks.reserve(cfg.grid.size() * cfg.schemes.size() * cfg.replications);
  for (std::size_t c = 0; c < cfg.grid.size(); ++c) {
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
      for (std::size_t r = 0; r < cfg.replications; ++r) {
        tasks.push_back({c, s, r});
      }
    }
  }
  std::vector<detail::TaskOutcome> outcomes(tasks.size());
  parallel_for(tasks.size(), pool, [&](std::size_t i) {
    const detail::Task& t = tasks[i];
    const std::uint64_t seed = replication_seed(cfg.seed, t.cell, t.rep);
    outcomes[i] = detail::run_task(model, detail::run_config_for(cfg, cfg.grid[t.cell], cfg.schemes[t.scheme], seed));
  });

  result.raw.reserve(tasks.size() * cfg.functions.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const detail::Task& t = tasks[i];
    const detail::TaskOutcome& o = outcomes[i];
    const Cell& cell = cfg.grid[t.cell];
    const SchemePair& pair = cfg.schemes[t.scheme];
    const std::uint64_t seed = replication_seed(cfg.seed, t.cell, t.rep);
    const std::string within = scheme_name(pair.within);
    const std::string across = scheme_name(pair.across);
    if (o.error) {
      result.failures.push_back({t.cell, within, across, t.rep, seed, std::string(to_string(o.error->code())),
                                 o.error->step(), o.error->message()});
    }
    for (std::size_t f = 0; f < cfg.functions.size(); ++f) {
      RawRow row;
      row.config_hash = result.config_hash;
      row.cell = t.cell;
      row.within = within;
      row.across = across;
      row.n1 = cell.n1;
      row.n2 = cell.n2;
      row.rep = t.rep;
      row.function = cfg.functions[f].name;
      if (!o.error) {
        row.estimate = o.result.estimates[f];
        row.log_gamma1 = o.result.log_gamma1;
        row.interactions = o.result.counters.interactions;
        row.island_resamples = o.result.counters.island_resamples;
        row.particle_resamples = o.result.counters.particle_resamples;
      }
      row.seed = seed;
      row.millis = o.millis;
      result.raw.push_back(std::move(row));
    }
  }
  result.summary = summarize_rows(result.raw, result.oracles);
  if (!cfg.record_timing) {
    for (RawRow& row : result.raw) {
      row.millis = 0.0;
    }
  }
  return result;
}

struct GainRow {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::string within;
  std::string across;  ///< the alternative scheme
  std::string function;
  double gain_percent = kNaN;
};

/// 100 (1 - Var_alt / Var_base) per cell, for summary rows with the given within
/// scheme and across schemes `baseline` and `alternative`.
inline std::vector<GainRow> variance_gain_table(const std::vector<SummaryRow>& summary, const std::string& within,
                                                const std::string& baseline, const std::string& alternative) {
  std::vector<GainRow> out;
  for (const SummaryRow& alt : summary) {
    if (alt.within != within || alt.across != alternative) {
      continue;
    }
    const SummaryRow* base = nullptr;
    for (const SummaryRow& b : summary) {
      if (b.cell == alt.cell && b.within == within && b.across == baseline && b.function == alt.function) {
        base = &b;
        break;
      }
    }
    if (base == nullptr) {
      fail(Errc::missing_cell, "no " + within + "/" + baseline + " row for N1 = " + std::to_string(alt.n1) +
                                   ", N2 = " + std::to_string(alt.n2) + ", function " + alt.function);
    }
    out.push_back({alt.n1, alt.n2, within, alternative, alt.function, 100.0 * (1.0 - alt.variance / base->variance)});
  }
  return out;
}

/// Every gain table the summary supports: each across scheme against bootstrap
/// across, for each within scheme that has a bootstrap-across baseline.
inline std::vector<GainRow> all_variance_gains(const std::vector<SummaryRow>& summary) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const SummaryRow& s : summary) {
    const std::pair<std::string, std::string> p{s.within, s.across};
    if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) {
      pairs.push_back(p);
    }
  }
  std::vector<GainRow> out;
  for (const auto& [within, across] : pairs) {
    if (across == "bootstrap" ||
        std::find(pairs.begin(), pairs.end(), std::pair<std::string, std::string>{within, "bootstrap"}) ==
            pairs.end()) {
      continue;
    }
    auto rows = variance_gain_table(summary, within, "bootstrap", across);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

struct CrossoverRow {
  std::size_t n2 = 0;
  double bias = kNaN;
  double variance = kNaN;
  double variance_tilde = kNaN;
  double threshold = kNaN;
  double factor = kNaN;
  std::size_t n1 = 0;
  double predicted_independent = kNaN;
  double predicted_interacting = kNaN;
  std::size_t replications = 0;
  double empirical_independent = kNaN;
  double empirical_interacting = kNaN;
  double z = kNaN;  ///< (MSE_ind - MSE_int) / standard error of the paired difference
  std::string predicted_better;
  std::string empirical_better;
  bool significant = false;  ///< |z| > 1.96
};

struct CrossoverOptions {
  std::vector<std::size_t> n2 = {256};
  std::vector<double> factors = {0.25, 4.0};
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/**
 * Threshold B^2 N2 / V_tilde per N2, the predicted MSEs at N1 = factor * threshold,
 * and empirical MSEs of independent islands against the double bootstrap
 * (both with bootstrap within) on common random numbers. With `replications` = 0,
 * or a threshold of 0 or infinity, only predictions are reported.
 */
inline std::vector<CrossoverRow> crossover_report(const FiniteModel& model, const TestFunction& f,
                                                  const CrossoverOptions& opt) {
  const AsymptoticConstants c = asymptotic_constants(model, function_values(model, f), f.name);
  const double truth = exact_flow(model).back().eta(function_values(model, f));
  const FiniteHmm hmm(model);
  std::vector<CrossoverRow> out;
  for (std::size_t a = 0; a < opt.n2.size(); ++a) {
    const std::size_t n2 = opt.n2[a];
    const double threshold = crossover_threshold(c, n2);
    for (std::size_t b = 0; b < opt.factors.size(); ++b) {
      CrossoverRow row;
      row.n2 = n2;
      row.bias = c.bias;
      row.variance = c.variance;
      row.variance_tilde = c.variance_tilde;
      row.threshold = threshold;
      row.factor = opt.factors[b];
      const bool finite_threshold = std::isfinite(threshold) && threshold > 0.0;
      row.n1 = finite_threshold
                   ? static_cast<std::size_t>(std::max(1.0, std::round(opt.factors[b] * threshold)))
                   : 0;
      if (row.n1 > 0) {
        row.predicted_independent = mse_predict(c, row.n1, n2, IslandMode::independent);
        row.predicted_interacting = mse_predict(c, row.n1, n2, IslandMode::interacting);
        row.predicted_better =
            row.predicted_interacting < row.predicted_independent ? "interacting" : "independent";
      } else {
        row.predicted_better = threshold > 0.0 ? "interacting" : "independent";
      }
      if (row.n1 > 0 && opt.replications > 0) {
        std::vector<double> err_ind(opt.replications);
        std::vector<double> err_int(opt.replications);
        parallel_for(opt.replications, opt.workers, [&](std::size_t r) {
          RunConfig rc;
          rc.n1 = row.n1;
          rc.n2 = n2;
          rc.within = Bootstrap{};
          rc.seed = derive_seed(opt.seed, {a, b, r});
          rc.test_functions = {f};
          rc.across = Independent{};
          err_ind[r] = run(hmm, rc).estimates[0] - truth;
          rc.across = Bootstrap{};
          err_int[r] = run(hmm, rc).estimates[0] - truth;
        });
        CompensatedSum si;
        CompensatedSum sb;
        CompensatedSum sd;
        for (std::size_t r = 0; r < opt.replications; ++r) {
          si.add(err_ind[r] * err_ind[r]);
          sb.add(err_int[r] * err_int[r]);
          sd.add(err_ind[r] * err_ind[r] - err_int[r] * err_int[r]);
        }
        const double rr = static_cast<double>(opt.replications);
        const double mean_d = sd.value() / rr;
        CompensatedSum vd;
        for (std::size_t r = 0; r < opt.replications; ++r) {
          const double d = err_ind[r] * err_ind[r] - err_int[r] * err_int[r] - mean_d;
          vd.add(d * d);
        }
        row.replications = opt.replications;
        row.empirical_independent = si.value() / rr;
        row.empirical_interacting = sb.value() / rr;
        row.z = mean_d / std::sqrt(vd.value() / (rr - 1.0) / rr);
        row.empirical_better = mean_d > 0.0 ? "interacting" : "independent";
        row.significant = std::abs(row.z) > 1.959963984540054;
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

// ---- CSV output -------------------------------------------------------------

inline const std::vector<std::string>& raw_header() {
  static const std::vector<std::string> h = {"config_hash", "cell",         "within",           "across",
                                             "N1",          "N2",           "rep",              "function",
                                             "estimate",    "log_gamma1",   "interactions",     "island_resamples",
                                             "particle_resamples",          "seed",             "millis"};
  return h;
}

inline void write_raw(std::ostream& os, const std::vector<RawRow>& rows) {
  csv::Writer w(os);
  w.row(raw_header());
  for (const RawRow& r : rows) {
    w.row({r.config_hash, std::to_string(r.cell), r.within, r.across, std::to_string(r.n1), std::to_string(r.n2),
           std::to_string(r.rep), r.function, csv::format(r.estimate), csv::format(r.log_gamma1),
           csv::format(r.interactions), csv::format(r.island_resamples), csv::format(r.particle_resamples),
           csv::format(r.seed), csv::format(r.millis)});
  }
}

inline std::vector<RawRow> read_raw(const csv::Table& table) {
  if (table.empty() || table.front() != raw_header()) {
    fail(Errc::config, "raw csv: header does not match the raw schema");
  }
  std::vector<RawRow> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& t = table[i];
    if (t.size() == 1 && t[0].empty()) {
      continue;
    }
    if (t.size() != raw_header().size()) {
      fail(Errc::config, "raw csv record " + std::to_string(i + 1) + ": expected " +
                             std::to_string(raw_header().size()) + " fields, got " + std::to_string(t.size()));
    }
    RawRow r;
    r.config_hash = t[0];
    r.cell = csv::parse_uint(t[1]);
    r.within = t[2];
    r.across = t[3];
    r.n1 = csv::parse_uint(t[4]);
    r.n2 = csv::parse_uint(t[5]);
    r.rep = csv::parse_uint(t[6]);
    r.function = t[7];
    r.estimate = csv::parse_double(t[8]);
    r.log_gamma1 = csv::parse_double(t[9]);
    r.interactions = csv::parse_uint(t[10]);
    r.island_resamples = csv::parse_uint(t[11]);
    r.particle_resamples = csv::parse_uint(t[12]);
    r.seed = csv::parse_uint(t[13]);
    r.millis = csv::parse_double(t[14]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  csv::Writer w(os);
  w.row({"cell", "N1", "N2", "within", "across", "function", "replications", "failures", "mean", "oracle",
         "oracle_se", "bias", "variance", "mse", "std_error", "interactions", "island_resamples",
         "particle_resamples", "millis"});
  for (const SummaryRow& s : rows) {
    w.row({std::to_string(s.cell), std::to_string(s.n1), std::to_string(s.n2), s.within, s.across, s.function,
           std::to_string(s.replications), std::to_string(s.failures), csv::format(s.mean), csv::format(s.oracle),
           csv::format(s.oracle_se), csv::format(s.bias), csv::format(s.variance), csv::format(s.mse),
           csv::format(s.std_error), csv::format(s.interactions), csv::format(s.island_resamples),
           csv::format(s.particle_resamples), csv::format(s.millis)});
  }
}

/// Mean interaction counts per (cell, scheme pair), next to the bootstrap count n N2.
inline void write_interactions(std::ostream& os, const std::vector<SummaryRow>& rows, std::size_t horizon) {
  csv::Writer w(os);
  w.row({"N1", "N2", "within", "across", "interactions", "island_resamples", "particle_resamples",
         "bootstrap_interactions"});
  std::vector<std::tuple<std::size_t, std::string, std::string>> seen;
  for (const SummaryRow& s : rows) {
    const auto key = std::make_tuple(s.cell, s.within, s.across);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      continue;
    }
    seen.push_back(key);
    w.row({std::to_string(s.n1), std::to_string(s.n2), s.within, s.across, csv::format(s.interactions),
           csv::format(s.island_resamples), csv::format(s.particle_resamples), std::to_string(horizon * s.n2)});
  }
}

inline void write_gains(std::ostream& os, const std::vector<GainRow>& rows) {
  csv::Writer w(os);
  w.row({"N1", "N2", "within", "across", "function", "variance_gain_percent"});
  for (const GainRow& g : rows) {
    w.row({std::to_string(g.n1), std::to_string(g.n2), g.within, g.across, g.function, csv::format(g.gain_percent)});
  }
}

inline void write_failures(std::ostream& os, const std::vector<FailureRow>& rows) {
  csv::Writer w(os);
  w.row({"cell", "within", "across", "rep", "seed", "error", "step", "message"});
  for (const FailureRow& f : rows) {
    w.row({std::to_string(f.cell), f.within, f.across, std::to_string(f.rep), csv::format(f.seed), f.code,
           f.step ? std::to_string(*f.step) : std::string(), f.message});
  }
}

inline void write_oracles(std::ostream& os, const std::vector<Oracle>& rows) {
  csv::Writer w(os);
  w.row({"function", "value", "standard_error", "source"});
  for (const Oracle& o : rows) {
    w.row({o.function, csv::format(o.value), csv::format(o.standard_error), o.source});
  }
}

inline void write_crossover(std::ostream& os, const std::vector<CrossoverRow>& rows) {
  csv::Writer w(os);
  w.row({"N2", "B", "V", "V_tilde", "threshold", "factor", "N1", "predicted_mse_independent",
         "predicted_mse_interacting", "replications", "empirical_mse_independent", "empirical_mse_interacting", "z",
         "predicted_better", "empirical_better", "significant"});
  for (const CrossoverRow& r : rows) {
    w.row({std::to_string(r.n2), csv::format(r.bias), csv::format(r.variance), csv::format(r.variance_tilde),
           csv::format(r.threshold), csv::format(r.factor), std::to_string(r.n1),
           csv::format(r.predicted_independent), csv::format(r.predicted_interacting),
           std::to_string(r.replications), csv::format(r.empirical_independent),
           csv::format(r.empirical_interacting), csv::format(r.z), r.predicted_better, r.empirical_better,
           r.significant ? "true" : "false"});
  }
}

/// function, n, B, V, B_tilde, V_tilde, crossover_N1_per_N2 for each test function.
inline void write_exact(std::ostream& os, const FiniteModel& model, const std::vector<TestFunction>& functions) {
  csv::Writer w(os);
  w.row({"function", "n", "B", "V", "B_tilde", "V_tilde", "crossover_N1_per_N2"});
  for (const TestFunction& f : functions) {
    const AsymptoticConstants c = asymptotic_constants(model, function_values(model, f), f.name);
    w.row({f.name, std::to_string(c.horizon), csv::format(c.bias), csv::format(c.variance),
           csv::format(c.bias_tilde), csv::format(c.variance_tilde), csv::format(crossover_threshold(c, 1))});
  }
}

/// Writes raw.csv, summary.csv, interactions.csv, variance_gain.csv, oracle.csv,
/// errors.csv and the parsed config into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ExperimentResult& res) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) {
      fail(Errc::config, "cannot write " + (dir / name).string());
    }
    return os;
  };
  {
    auto os = open("raw.csv");
    write_raw(os, res.raw);
  }
  {
    auto os = open("summary.csv");
    write_summary(os, res.summary);
  }
  {
    auto os = open("interactions.csv");
    write_interactions(os, res.summary, res.horizon);
  }
  {
    auto os = open("variance_gain.csv");
    write_gains(os, all_variance_gains(res.summary));
  }
  {
    auto os = open("oracle.csv");
    write_oracles(os, res.oracles);
  }
  {
    auto os = open("errors.csv");
    write_failures(os, res.failures);
  }
  {
    auto os = open("config.json");
    os << cfg.canonical.dump(2) << '\n';
  }
}

}  // namespace ipf

#endif  // IPF_HARNESS_HPP_
