#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dffl/datagen.hpp"
#include "dffl/model.hpp"
#include "dffl/parallel.hpp"

namespace dffl {

struct FedConfig {
  std::size_t rounds = 50;        // T
  double client_fraction = 1.0;   // C in (0, 1]
  std::size_t local_epochs = 5;   // E
  std::size_t batch_size = 1;     // 1 = per-example updates
  double learning_rate = 1e-3;
  double grad_clip = 1.0;
  std::size_t hidden_dim = 64;
  double tau = 20.0;
  std::uint64_t seed = 0;
  ExecMode exec = default_exec_mode();
  bool log_client_loss = true;

  void validate() const;
};

struct RoundLog {
  std::size_t round = 0;
  std::vector<std::size_t> sampled;      // ascending client ids
  std::vector<double> pre_loss;          // mean SPO+ before the local pass
  std::vector<double> post_loss;         // and after
  std::vector<std::size_t> failed;       // dropped from aggregation
  std::vector<std::string> errors;
  double param_norm = 0.0;
  double wall_seconds = 0.0;
};

/// Mean SPO+ training loss of `params` on one client's data.
double mean_spo_plus_loss(const PredictorParams& params, const ClientDataset& client);

/// One client's local pass: E epochs of minibatch SPO+ subgradient steps
/// through backward, global gradient clipping and Adam, starting from the
/// global snapshot. Adam state is fresh each round; the shuffle stream is
/// keyed by (seed, client id, round) so results do not depend on scheduling.
PredictorParams client_update(const PredictorParams& global_params,
                              const ClientDataset& client, const FedConfig& config,
                              std::size_t round, std::size_t client_id);

/// Sample-count-weighted parameter average over the given clients.
PredictorParams aggregate(const std::vector<PredictorParams>& params,
                          const std::vector<std::size_t>& sample_counts);

struct TrainResult {
  PredictorParams params;
  std::vector<RoundLog> logs;
};

/// FedAvg rounds: sample max(floor(C K), 1) clients without replacement, run
/// client updates in parallel over the immutable global snapshot, aggregate
/// in ascending client order. Clients whose solver fails mid-round are
/// dropped from that round's aggregation with reweighting.
TrainResult train_federated(const std::vector<ClientDataset>& clients,
                            const FedConfig& config);

/// Local-only baseline: the degenerate K=1, C=1 protocol run for the same
/// T rounds of E epochs, so it is bit-identical to a single-client federation.
PredictorParams train_local(const ClientDataset& client, const FedConfig& config,
                            std::size_t client_id = 0);

void write_round_logs_jsonl(const std::vector<RoundLog>& logs,
                            const std::string& path);

}  // namespace dffl
