#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dffl/bounds.hpp"
#include "dffl/datagen.hpp"
#include "dffl/federation.hpp"

namespace dffl {

struct ExperimentConfig {
  GenConfig gen;
  FedConfig fed;
  std::size_t test_size = 2000;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double delta_conf = 0.05;
  std::size_t rademacher_draws = 20;
  std::size_t rademacher_step_budget = 20000;  // per-draw optimizer steps, split as budget/n epochs
  std::string name = "config";

  void validate() const;
};

/// Desk-scale defaults: d=10, p=8, m=5 balanced at n=500 (m=20 at n=550 for
/// the imbalanced 10:1 split), 2000 test samples, 5 seeds.
void apply_desk_scale(ExperimentConfig& config);

struct ClientResult {
  std::size_t client = 0;
  double fed_regret = 0.0;
  double local_regret = 0.0;
  double fed_rel_regret = 0.0;
  double local_rel_regret = 0.0;
  double fed_mse = 0.0;
  double local_mse = 0.0;
  double eps_j = 0.0;
  double eps_mix = 0.0;
  double delta_hat = 0.0;
  double fg_ratio = 0.0;
  double fg_difference = 0.0;
  double regret_difference = 0.0;  // local - federated
  double delta_j_pct = 0.0;        // 100 * regret_difference / local
};

struct ExperimentResult {
  std::string config_name;
  std::string family;
  std::string balance;
  double eta_obj = 0.0;
  double eta_constr = 0.0;
  std::vector<ClientResult> per_client;  // averaged over seeds
  double fraction_preferring_federation = 0.0;
  double fg_agreement_rate = 0.0;
  std::size_t seeds_used = 0;
  std::size_t seeds_failed = 0;
};

struct EvalResult {
  double mean_regret = 0.0;
  double relative_regret = 0.0;  // mean regret / |mean true optimum|
  double mse = 0.0;
  std::size_t solver_failures = 0;
};

/// Mean SPO regret, relative regret and MSE of a predictor on held-out data.
EvalResult evaluate(const PredictorParams& params, const ClientDataset& test_data,
                    ExecMode exec = default_exec_mode());

/// Full pipeline for one configuration: generate, train federated and local
/// models, evaluate on the held-out law, compute the bound machinery and FG
/// certificates, average across seeds.
ExperimentResult run_config(const ExperimentConfig& config);

/// Runs each config in isolation; failed configs are dropped from the output.
std::vector<ExperimentResult> sweep(const std::vector<ExperimentConfig>& configs);

/// Sign-match fraction between FG difference and empirical regret difference.
/// Zero counts as predicting a benefit on both sides.
double fg_agreement(const std::vector<ClientResult>& rows);

/// Writes results_<hash>.csv per config, summary.json, and summary_table.csv
/// (Table-style columns sorted by percent improvement). Returns written paths.
std::vector<std::string> report(const std::vector<ExperimentResult>& results,
                                const std::string& out_dir);

/// Reads back a results CSV written by report (used for round-trip checks).
std::vector<ClientResult> load_results_csv(const std::string& path);

ExperimentConfig parse_config_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

}  // namespace dffl
