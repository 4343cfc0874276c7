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

// ipf: run island particle filter experiments from a JSON configuration.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ipf/config.hpp"
#include "ipf/csv.hpp"
#include "ipf/harness.hpp"

namespace {

const ipf::FiniteModel& finite_model_of(const ipf::ExperimentConfig& cfg) {
  const auto* hmm = std::get_if<ipf::FiniteHmm>(&*cfg.model.model);
  if (hmm == nullptr) {
    ipf::fail(ipf::Errc::unsupported, std::string("exact constants need a finite model, got '") +
                                          ipf::model_kind_name(cfg.model.kind) + "'");
  }
  return hmm->model();
}

int cmd_run(const std::string& config_path, std::string out_dir, std::optional<unsigned> workers) {
  const ipf::ExperimentConfig cfg = ipf::load_config(config_path);
  if (out_dir.empty()) {
    out_dir = cfg.output;
  }
  if (out_dir.empty()) {
    ipf::fail(ipf::Errc::config, "no output directory: pass --out or set \"output\" in the config");
  }
  const ipf::ExperimentResult res = ipf::run_experiment(cfg, workers);
  ipf::write_outputs(out_dir, cfg, res);
  std::cerr << "wrote " << res.raw.size() << " raw rows and " << res.summary.size() << " summary rows to " << out_dir
            << '\n';
  if (!res.failures.empty()) {
    std::cerr << res.failures.size() << " replication(s) failed; see errors.csv\n";
  }
  return 0;
}

int cmd_exact(const std::string& config_path) {
  const ipf::ExperimentConfig cfg = ipf::load_config(config_path);
  ipf::write_exact(std::cout, finite_model_of(cfg), cfg.functions);
  return 0;
}

int cmd_crossover(const std::string& config_path, std::optional<unsigned> workers) {
  const ipf::ExperimentConfig cfg = ipf::load_config(config_path);
  ipf::CrossoverOptions opt;
  opt.n2 = cfg.crossover.n2;
  opt.factors = cfg.crossover.factors;
  opt.replications = cfg.crossover.replications;
  opt.seed = cfg.seed;
  opt.workers = workers.value_or(cfg.workers);
  const ipf::TestFunction f = ipf::parse_test_function(cfg.crossover.function);
  ipf::write_crossover(std::cout, ipf::crossover_report(finite_model_of(cfg), f, opt));
  return 0;
}

int cmd_summarize(const std::string& raw_path, const std::string& config_path) {
  const std::vector<ipf::RawRow> rows = ipf::read_raw(ipf::csv::read_file(raw_path));
  std::vector<ipf::Oracle> oracles;
  if (!config_path.empty()) {
    const ipf::ExperimentConfig cfg = ipf::load_config(config_path);
    oracles = ipf::compute_oracles(cfg.model, cfg.functions, cfg.workers);
  }
  ipf::write_summary(std::cout, ipf::summarize_rows(rows, oracles));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Island particle filters: experiments, exact constants and crossover reports"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string raw_path;
  std::optional<unsigned> workers;

  auto* run = app.add_subcommand("run", "Run the configured sweep and write CSV results");
  run->add_option("--config", config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (defaults to the config's \"output\")");
  run->add_option("--workers", workers, "Override the number of replication workers")->check(CLI::PositiveNumber);

  auto* exact = app.add_subcommand("exact", "Print exact asymptotic constants of a finite model as CSV");
  exact->add_option("--config", config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);

  auto* cross = app.add_subcommand("crossover", "Print the interaction/independence MSE crossover report as CSV");
  cross->add_option("--config", config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
  cross->add_option("--workers", workers, "Override the number of workers")->check(CLI::PositiveNumber);

  auto* summarize = app.add_subcommand("summarize", "Recompute summary statistics from a raw CSV");
  summarize->add_option("raw", raw_path, "raw.csv written by 'ipf run'")->required()->check(CLI::ExistingFile);
  summarize->add_option("--config", config_path, "Configuration used to compute oracle values for the bias column");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(config_path, out_dir, workers);
    }
    if (*exact) {
      return cmd_exact(config_path);
    }
    if (*cross) {
      return cmd_crossover(config_path, workers);
    }
    return cmd_summarize(raw_path, config_path);
  } catch (const ipf::Error& e) {
    std::cerr << "ipf: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ipf: " << e.what() << '\n';
    return 1;
  }
}
