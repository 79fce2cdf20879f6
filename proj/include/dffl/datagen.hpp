#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dffl/geometry.hpp"
#include "dffl/linalg.hpp"

namespace dffl {

enum class Family { Knapsack, Portfolio };
enum class Balance { Balanced, Imbalanced };

std::string to_string(Family f);
std::string to_string(Balance b);

struct GenConfig {
  std::size_t input_dim = 8;    // p
  std::size_t cost_dim = 50;    // d
  std::size_t n_samples = 2000;
  std::size_t n_clients = 20;   // m
  int degree = 2;               // kappa, even and >= 2
  double noise = 0.0;           // epsilon, multiplicative Uniform(1-eps, 1+eps)
  double eta_obj = 0.0;
  double eta_constr = 0.0;
  Balance balance = Balance::Balanced;
  Family family = Family::Knapsack;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClientDataset {
  Matrix features;  // n_j x p
  Matrix costs;     // n_j x d, raw generated costs (nonnegative for even degree)
  FeasibleSet set;
  double alpha = 0.0;  // n_j / N
  // Sign applied to costs/predictions at the decision boundary: -1 for the
  // profit-maximizing knapsack (solves min (-c).w), +1 for the portfolio.
  double cost_sign = 1.0;

  std::size_t size() const { return features.rows; }
};

/// The sampled data-generating law, reused verbatim by the test-set sampler.
struct SharedParams {
  Matrix loading;                  // B in {0,1}^{d x p}
  std::vector<Matrix> client_loadings;  // B R_j per client
  Vec knapsack_weights;            // a^0
  double base_budget = 0.0;        // B^0 = 0.6 d
  std::vector<double> budgets;     // B_j (knapsack family)
  std::vector<double> entropy_r;   // r_j (portfolio family)
};

struct Federation {
  std::vector<ClientDataset> clients;
  SharedParams shared;
};

/// Orthogonal rotation exp(eta * A / ||A||_2) with A the skew-symmetric part
/// of a seeded Gaussian matrix; exactly the identity at eta == 0.
Matrix rotation(std::size_t p, double eta_obj, std::uint64_t seed);

/// Sample counts for the imbalanced regime: the first m/2 clients get ten
/// times the samples of the rest.
std::vector<std::size_t> split_imbalanced(std::size_t n = 5500, std::size_t m = 20);

Federation generate(const GenConfig& config);

/// Fresh draw from the same law (same loading, rotations and constraint
/// parameters) with balanced random assignment over the clients.
std::vector<ClientDataset> generate_test_set(const GenConfig& config,
                                             std::size_t n_test,
                                             std::uint64_t test_seed);

/// Writes one CSV per client (header x1..xp,c1..cd) plus a sidecar JSON with
/// the per-client feasible-set parameters. Returns the CSV paths in client
/// order; the sidecar lands at <dir>/<prefix>_sidecar.json.
std::vector<std::string> write_csv(const Federation& fed, const std::string& dir,
                                   const std::string& prefix);

struct LoadedClients {
  std::vector<ClientDataset> train;
  std::vector<ClientDataset> test;  // populated when a split column is present
};

/// Loads client CSVs against the sidecar schema. Files pair with the
/// sidecar's clients array by position.
LoadedClients load_csv(const std::vector<std::string>& csv_paths,
                       const std::string& sidecar_path);

}  // namespace dffl
