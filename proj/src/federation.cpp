#include "dffl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "dffl/errors.hpp"
#include "dffl/rng.hpp"
#include "dffl/spo.hpp"

namespace dffl {

namespace {

constexpr std::uint64_t kInitStream = 0x100;
constexpr std::uint64_t kClientSampleStream = 0x200;
constexpr std::uint64_t kShuffleStream = 0x300;

double param_norm(const PredictorParams& p) {
  return std::sqrt(squared_norm(p.w1) + squared_norm(p.b1) + squared_norm(p.w2) +
                   squared_norm(p.b2));
}

}  // namespace

void FedConfig::validate() const {
  if (rounds == 0) throw ConfigError("FedConfig: rounds must be >= 1");
  if (!(client_fraction > 0.0) || client_fraction > 1.0)
    throw ConfigError("FedConfig: client fraction must be in (0, 1]");
  if (local_epochs == 0) throw ConfigError("FedConfig: local epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("FedConfig: batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("FedConfig: learning rate must be positive");
  if (!(grad_clip > 0.0)) throw ConfigError("FedConfig: gradient clip must be positive");
  if (hidden_dim == 0) throw ConfigError("FedConfig: hidden_dim must be positive");
  if (!(tau > 0.0)) throw ConfigError("FedConfig: tau must be positive");
}

double mean_spo_plus_loss(const PredictorParams& params, const ClientDataset& client) {
  if (client.size() == 0) throw ConfigError("mean_spo_plus_loss: empty client");
  const double sign = client.cost_sign;
  double total = 0.0;
  for (std::size_t i = 0; i < client.size(); ++i) {
    const Vec c_hat = forward(params, matrix_row(client.features, i));
    const Vec v = scaled(matrix_row(client.costs, i), sign);
    total += spo_plus_loss_and_subgradient(client.set, scaled(c_hat, sign), v).loss;
  }
  return total / static_cast<double>(client.size());
}

PredictorParams client_update(const PredictorParams& global_params,
                              const ClientDataset& client, const FedConfig& config,
                              std::size_t round, std::size_t client_id) {
  config.validate();
  if (client.size() == 0) throw ConfigError("client_update: client has no samples");

  PredictorParams params = global_params;
  AdamState state(params, config.learning_rate);
  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream, client_id, round));

  std::vector<std::size_t> order(client.size());
  std::iota(order.begin(), order.end(), 0);
  const double sign = client.cost_sign;

  try {
    for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        ParamGrad batch_grad = ParamGrad::zeros_like(params);
        for (std::size_t b = start; b < stop; ++b) {
          const std::size_t i = order[b];
          ForwardCache cache;
          const Vec c_hat = forward(params, matrix_row(client.features, i), &cache);
          const Vec v = scaled(matrix_row(client.costs, i), sign);
          const Vec v_hat = scaled(c_hat, sign);
          Vec out_grad = spo_plus_subgradient(client.set, v_hat, v);
          // chain rule through the sign applied at the decision boundary
          if (sign != 1.0)
            for (double& gk : out_grad) gk *= sign;
          batch_grad.accumulate(backward(params, cache, out_grad));
        }
        batch_grad.scale(1.0 / static_cast<double>(stop - start));
        clip_global_gradient(batch_grad, config.grad_clip);
        adam_step(params, state, batch_grad);
      }
    }
  } catch (const BisectionError& e) {
    throw ClientUpdateError("client " + std::to_string(client_id) + " round " +
                            std::to_string(round) + ": " + e.what());
  } catch (const NonFiniteError& e) {
    throw ClientUpdateError("client " + std::to_string(client_id) + " round " +
                            std::to_string(round) + ": " + e.what());
  }
  return params;
}

PredictorParams aggregate(const std::vector<PredictorParams>& params,
                          const std::vector<std::size_t>& sample_counts) {
  if (params.empty()) throw ConfigError("aggregate: empty parameter list");
  if (params.size() != sample_counts.size())
    throw ConfigError("aggregate: counts do not match parameter list");
  const double total = static_cast<double>(
      std::accumulate(sample_counts.begin(), sample_counts.end(), std::size_t{0}));
  if (total == 0.0) throw ConfigError("aggregate: zero total sample count");

  PredictorParams out = params.front();
  std::fill(out.w1.begin(), out.w1.end(), 0.0);
  std::fill(out.b1.begin(), out.b1.end(), 0.0);
  std::fill(out.w2.begin(), out.w2.end(), 0.0);
  std::fill(out.b2.begin(), out.b2.end(), 0.0);

  for (std::size_t k = 0; k < params.size(); ++k) {
    const double w = static_cast<double>(sample_counts[k]) / total;
    const PredictorParams& pk = params[k];
    if (pk.w1.size() != out.w1.size() || pk.w2.size() != out.w2.size())
      throw ConfigError("aggregate: parameter shape mismatch");
    for (std::size_t i = 0; i < out.w1.size(); ++i) out.w1[i] += w * pk.w1[i];
    for (std::size_t i = 0; i < out.b1.size(); ++i) out.b1[i] += w * pk.b1[i];
    for (std::size_t i = 0; i < out.w2.size(); ++i) out.w2[i] += w * pk.w2[i];
    for (std::size_t i = 0; i < out.b2.size(); ++i) out.b2[i] += w * pk.b2[i];
  }
  return out;
}

TrainResult train_federated(const std::vector<ClientDataset>& clients,
                            const FedConfig& config) {
  config.validate();
  if (clients.empty()) throw ConfigError("train_federated: no clients");
  for (const ClientDataset& c : clients)
    if (c.size() == 0) throw ConfigError("train_federated: client with no samples");

  const std::size_t k_total = clients.size();
  const std::size_t input_dim = clients.front().features.cols;
  const std::size_t output_dim = clients.front().costs.cols;

  TrainResult result;
  result.params = init_params(input_dim, config.hidden_dim, output_dim,
                              derive_seed(config.seed, kInitStream), config.tau);
  Rng sample_rng(derive_seed(config.seed, kClientSampleStream));

  std::vector<std::size_t> ids(k_total);
  for (std::size_t t = 0; t < config.rounds; ++t) {
    const auto t0 = std::chrono::steady_clock::now();

    const std::size_t m = std::max<std::size_t>(
        static_cast<std::size_t>(std::floor(config.client_fraction *
                                            static_cast<double>(k_total))),
        1);
    std::iota(ids.begin(), ids.end(), 0);
    sample_rng.shuffle(ids);
    std::vector<std::size_t> sampled(ids.begin(), ids.begin() + m);
    std::sort(sampled.begin(), sampled.end());  // fixed aggregation order

    RoundLog log;
    log.round = t;
    log.sampled = sampled;
    log.pre_loss.assign(m, 0.0);
    log.post_loss.assign(m, 0.0);

    std::vector<PredictorParams> updated(m);
    std::vector<std::string> errors(m);
    const PredictorParams& snapshot = result.params;

    parallel_for(
        m,
        [&](std::size_t s) {
          const std::size_t id = sampled[s];
          try {
            if (config.log_client_loss)
              log.pre_loss[s] = mean_spo_plus_loss(snapshot, clients[id]);
            updated[s] = client_update(snapshot, clients[id], config, t, id);
            if (config.log_client_loss)
              log.post_loss[s] = mean_spo_plus_loss(updated[s], clients[id]);
          } catch (const std::exception& e) {
            errors[s] = e.what();
          }
        },
        config.exec);

    std::vector<PredictorParams> ok_params;
    std::vector<std::size_t> ok_counts;
    for (std::size_t s = 0; s < m; ++s) {
      if (errors[s].empty()) {
        ok_params.push_back(std::move(updated[s]));
        ok_counts.push_back(clients[sampled[s]].size());
      } else {
        log.failed.push_back(sampled[s]);
        log.errors.push_back(errors[s]);
      }
    }
    if (ok_params.empty())
      throw ClientUpdateError("round " + std::to_string(t) + ": every client failed");

    result.params = aggregate(ok_params, ok_counts);
    log.param_norm = param_norm(result.params);
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.logs.push_back(std::move(log));
  }
  return result;
}

PredictorParams train_local(const ClientDataset& client, const FedConfig& config,
                            std::size_t client_id) {
  config.validate();
  if (client.size() == 0) throw ConfigError("train_local: client has no samples");
  PredictorParams params =
      init_params(client.features.cols, config.hidden_dim, client.costs.cols,
                  derive_seed(config.seed, kInitStream), config.tau);
  for (std::size_t t = 0; t < config.rounds; ++t)
    params = client_update(params, client, config, t, client_id);
  return params;
}

void write_round_logs_jsonl(const std::vector<RoundLog>& logs,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_round_logs_jsonl: cannot open " + path);
  for (const RoundLog& log : logs) {
    nlohmann::json j;
    j["round"] = log.round;
    j["sampled"] = log.sampled;
    j["pre_loss"] = log.pre_loss;
    j["post_loss"] = log.post_loss;
    j["failed"] = log.failed;
    j["errors"] = log.errors;
    j["param_norm"] = log.param_norm;
    j["wall_seconds"] = log.wall_seconds;
    out << j.dump() << "\n";
  }
}

}  // namespace dffl
