#include "dffl/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "dffl/errors.hpp"
#include "dffl/rng.hpp"

namespace dffl {

namespace {

// Stream tags; every substream is keyed so that train and test draws, and
// per-client parameters, never alias.
constexpr std::uint64_t kLoadingStream = 0x10;
constexpr std::uint64_t kRotationStream = 0x20;
constexpr std::uint64_t kKnapWeightStream = 0x30;
constexpr std::uint64_t kConstraintStream = 0x40;
constexpr std::uint64_t kFeatureStream = 0x50;
constexpr std::uint64_t kNoiseStream = 0x60;
constexpr std::uint64_t kPermStream = 0x70;
constexpr std::uint64_t kTrainTag = 1;
constexpr std::uint64_t kTestTag = 2;

double matrix_max_abs(const Matrix& m) {
  double v = 0.0;
  for (double x : m.data) v = std::max(v, std::abs(x));
  return v;
}

double spectral_norm(const Matrix& a) {
  // Power iteration on A^T A; p is single digits so a fixed budget converges
  // far past double precision.
  const std::size_t n = a.cols;
  Vec v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i);
  const Matrix at = transpose(a);
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vec w = matvec(at, matvec(a, v));
    const double wn = norm(w);
    if (wn == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
    lambda = wn;
  }
  return std::sqrt(lambda);
}

Matrix expm(const Matrix& m) {
  // Scaling and squaring with a Taylor series run to machine precision.
  int squarings = 0;
  double scale = matrix_max_abs(m) * static_cast<double>(m.cols);
  while (scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  Matrix a = m;
  const double factor = std::ldexp(1.0, -squarings);
  for (double& x : a.data) x *= factor;

  Matrix sum = identity(m.rows);
  Matrix term = identity(m.rows);
  for (int k = 1; k <= 40; ++k) {
    term = matmul(term, a);
    for (double& x : term.data) x /= static_cast<double>(k);
    for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += term.data[i];
    if (matrix_max_abs(term) < 1e-18) break;
  }
  for (int s = 0; s < squarings; ++s) sum = matmul(sum, sum);
  return sum;
}

}  // namespace

std::string to_string(Family f) {
  return f == Family::Knapsack ? "knapsack" : "portfolio";
}

std::string to_string(Balance b) {
  return b == Balance::Balanced ? "balanced" : "imbalanced";
}

void GenConfig::validate() const {
  if (input_dim == 0) throw ConfigError("GenConfig: input_dim must be positive");
  if (cost_dim == 0) throw ConfigError("GenConfig: cost_dim must be positive");
  if (family == Family::Portfolio && cost_dim < 2)
    throw ConfigError("GenConfig: portfolio needs cost_dim >= 2");
  if (n_clients == 0) throw ConfigError("GenConfig: n_clients must be positive");
  if (n_samples < n_clients)
    throw ConfigError("GenConfig: need at least one sample per client");
  if (degree < 2 || degree % 2 != 0)
    throw ConfigError("GenConfig: degree must be even and >= 2");
  if (noise < 0.0) throw ConfigError("GenConfig: noise must be nonnegative");
  if (eta_obj < 0.0 || eta_constr < 0.0)
    throw ConfigError("GenConfig: eta values must be nonnegative");
  if (balance == Balance::Balanced && n_samples % n_clients != 0)
    throw ConfigError("GenConfig: balanced split needs n divisible by m");
  if (balance == Balance::Imbalanced) split_imbalanced(n_samples, n_clients);
}

Matrix rotation(std::size_t p, double eta_obj, std::uint64_t seed) {
  if (eta_obj < 0.0) throw ConfigError("rotation: eta_obj must be nonnegative");
  if (eta_obj == 0.0) return identity(p);

  Rng rng(seed);
  Matrix g(p, p);
  for (double& x : g.data) x = rng.normal();
  Matrix skew(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) skew(i, j) = 0.5 * (g(i, j) - g(j, i));

  const double sigma = spectral_norm(skew);
  if (sigma > 0.0)
    for (double& x : skew.data) x *= eta_obj / sigma;
  return expm(skew);
}

std::vector<std::size_t> split_imbalanced(std::size_t n, std::size_t m) {
  if (m < 2 || m % 2 != 0)
    throw ConfigError("split_imbalanced: needs an even client count");
  const std::size_t half = m / 2;
  // half clients at 10x samples, half at x: n = half * 11 * x.
  if (n % (half * 11) != 0)
    throw ConfigError("split_imbalanced: totals do not fit the 10:1 ratio");
  const std::size_t poor = n / (half * 11);
  std::vector<std::size_t> counts(m, poor);
  for (std::size_t j = 0; j < half; ++j) counts[j] = 10 * poor;
  return counts;
}

namespace {

SharedParams derive_law(const GenConfig& cfg) {
  SharedParams law;
  const std::size_t p = cfg.input_dim;
  const std::size_t d = cfg.cost_dim;

  Rng loading_rng(derive_seed(cfg.seed, kLoadingStream));
  law.loading = Matrix(d, p);
  for (double& x : law.loading.data) x = loading_rng.bernoulli(0.5) ? 1.0 : 0.0;

  law.client_loadings.reserve(cfg.n_clients);
  for (std::size_t j = 0; j < cfg.n_clients; ++j) {
    if (cfg.eta_obj == 0.0) {
      law.client_loadings.push_back(law.loading);
    } else {
      const Matrix r = rotation(p, cfg.eta_obj, derive_seed(cfg.seed, kRotationStream, j));
      law.client_loadings.push_back(matmul(law.loading, r));
    }
  }

  if (cfg.family == Family::Knapsack) {
    Rng weight_rng(derive_seed(cfg.seed, kKnapWeightStream));
    law.knapsack_weights.resize(d);
    for (double& w : law.knapsack_weights) w = weight_rng.uniform(0.5, 1.5);
    law.base_budget = 0.6 * static_cast<double>(d);
    law.budgets.resize(cfg.n_clients);
    for (std::size_t j = 0; j < cfg.n_clients; ++j) {
      Rng constr_rng(derive_seed(cfg.seed, kConstraintStream, j));
      law.budgets[j] = law.base_budget * std::exp(cfg.eta_constr * constr_rng.normal());
    }
  } else {
    const double log_d = std::log(static_cast<double>(d));
    law.entropy_r.resize(cfg.n_clients);
    for (std::size_t j = 0; j < cfg.n_clients; ++j) {
      Rng constr_rng(derive_seed(cfg.seed, kConstraintStream, j));
      const double h = std::clamp(0.5 * log_d + cfg.eta_constr * constr_rng.uniform(-1.0, 1.0),
                                  1e-6, log_d - 1e-6);
      law.entropy_r[j] = -h;
    }
  }
  return law;
}

FeasibleSet client_set(const GenConfig& cfg, const SharedParams& law, std::size_t j) {
  if (cfg.family == Family::Knapsack)
    return FeasibleSet::knapsack(law.knapsack_weights, law.budgets[j]);
  return FeasibleSet::entropy(cfg.cost_dim, law.entropy_r[j]);
}

std::vector<ClientDataset> sample_datasets(const GenConfig& cfg,
                                           const SharedParams& law,
                                           std::size_t n,
                                           const std::vector<std::size_t>& counts,
                                           std::uint64_t stream_seed) {
  const std::size_t p = cfg.input_dim;
  const std::size_t d = cfg.cost_dim;
  const std::size_t m = cfg.n_clients;

  Matrix features(n, p);
  Rng feature_rng(derive_seed(stream_seed, kFeatureStream));
  for (double& x : features.data) x = feature_rng.normal();

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng perm_rng(derive_seed(stream_seed, kPermStream));
  perm_rng.shuffle(perm);

  std::vector<std::size_t> client_of(n);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < counts[j]; ++k) client_of[perm[offset + k]] = j;
    offset += counts[j];
  }

  Rng noise_rng(derive_seed(stream_seed, kNoiseStream));
  const double root_p = std::sqrt(static_cast<double>(p));

  std::vector<ClientDataset> clients(m);
  for (std::size_t j = 0; j < m; ++j) {
    clients[j].features = Matrix(counts[j], p);
    clients[j].costs = Matrix(counts[j], d);
    clients[j].set = client_set(cfg, law, j);
    clients[j].alpha = static_cast<double>(counts[j]) / static_cast<double>(n);
    clients[j].cost_sign = cfg.family == Family::Knapsack ? -1.0 : 1.0;
  }

  std::vector<std::size_t> cursor(m, 0);
  Vec x(p);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = client_of[i];
    const Matrix& bj = law.client_loadings[j];
    for (std::size_t q = 0; q < p; ++q) x[q] = features(i, q);

    ClientDataset& cd = clients[j];
    const std::size_t row = cursor[j]++;
    for (std::size_t q = 0; q < p; ++q) cd.features(row, q) = x[q];
    for (std::size_t k = 0; k < d; ++k) {
      double z = 0.0;
      for (std::size_t q = 0; q < p; ++q) z += bj(k, q) * x[q];
      const double base = 1.0 + std::pow(1.0 + z / root_p, cfg.degree);
      const double xi =
          cfg.noise > 0.0 ? noise_rng.uniform(1.0 - cfg.noise, 1.0 + cfg.noise) : 1.0;
      cd.costs(row, k) = base * xi;
    }
  }
  return clients;
}

}  // namespace

Federation generate(const GenConfig& config) {
  config.validate();
  Federation fed;
  fed.shared = derive_law(config);

  std::vector<std::size_t> counts;
  if (config.balance == Balance::Balanced) {
    counts.assign(config.n_clients, config.n_samples / config.n_clients);
  } else {
    counts = split_imbalanced(config.n_samples, config.n_clients);
  }
  fed.clients = sample_datasets(config, fed.shared, config.n_samples, counts,
                                derive_seed(config.seed, kTrainTag));
  return fed;
}

std::vector<ClientDataset> generate_test_set(const GenConfig& config,
                                             std::size_t n_test,
                                             std::uint64_t test_seed) {
  config.validate();
  if (n_test == 0 || n_test % config.n_clients != 0)
    throw ConfigError("generate_test_set: n_test must divide evenly over clients");
  const SharedParams law = derive_law(config);
  const std::vector<std::size_t> counts(config.n_clients,
                                        n_test / config.n_clients);
  return sample_datasets(config, law, n_test, counts,
                         derive_seed(test_seed, kTestTag));
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(line);
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

std::vector<std::string> write_csv(const Federation& fed, const std::string& dir,
                                   const std::string& prefix) {
  std::vector<std::string> paths;
  nlohmann::json sidecar;
  sidecar["clients"] = nlohmann::json::array();
  sidecar["weights"] = nlohmann::json::array();

  const bool knapsack = !fed.shared.budgets.empty();
  if (knapsack) sidecar["weights"].push_back(fed.shared.knapsack_weights);

  for (std::size_t j = 0; j < fed.clients.size(); ++j) {
    const ClientDataset& cd = fed.clients[j];
    const std::string path = dir + "/" + prefix + "_client" + std::to_string(j) + ".csv";
    std::ofstream out(path);
    if (!out) throw ConfigError("write_csv: cannot open " + path);

    const std::size_t p = cd.features.cols;
    const std::size_t d = cd.costs.cols;
    for (std::size_t q = 0; q < p; ++q) out << "x" << (q + 1) << ",";
    for (std::size_t k = 0; k < d; ++k) out << "c" << (k + 1) << (k + 1 < d ? "," : "\n");
    for (std::size_t i = 0; i < cd.size(); ++i) {
      for (std::size_t q = 0; q < p; ++q) out << format_double(cd.features(i, q)) << ",";
      for (std::size_t k = 0; k < d; ++k)
        out << format_double(cd.costs(i, k)) << (k + 1 < d ? "," : "\n");
    }
    paths.push_back(path);

    nlohmann::json entry;
    entry["id"] = "client" + std::to_string(j);
    if (knapsack) {
      entry["family"] = "knapsack";
      entry["budget"] = fed.shared.budgets[j];
      entry["weights_ref"] = 0;
    } else {
      entry["family"] = "portfolio";
      entry["entropy_r"] = fed.shared.entropy_r[j];
    }
    sidecar["clients"].push_back(entry);
  }

  std::ofstream side(dir + "/" + prefix + "_sidecar.json");
  if (!side) throw ConfigError("write_csv: cannot open sidecar");
  side << sidecar.dump(2);
  return paths;
}

LoadedClients load_csv(const std::vector<std::string>& csv_paths,
                       const std::string& sidecar_path) {
  std::ifstream side(sidecar_path);
  if (!side) throw SchemaError("load_csv: cannot open sidecar " + sidecar_path);
  nlohmann::json sidecar;
  side >> sidecar;
  if (!sidecar.contains("clients") || !sidecar["clients"].is_array())
    throw SchemaError("load_csv: sidecar missing clients array");
  const auto& client_meta = sidecar["clients"];
  if (client_meta.size() != csv_paths.size())
    throw SchemaError("load_csv: sidecar lists " + std::to_string(client_meta.size()) +
                      " clients but " + std::to_string(csv_paths.size()) +
                      " files were given");

  LoadedClients out;
  out.train.resize(csv_paths.size());
  out.test.resize(csv_paths.size());
  bool any_test = false;

  for (std::size_t j = 0; j < csv_paths.size(); ++j) {
    std::ifstream in(csv_paths[j]);
    if (!in) throw SchemaError("load_csv: cannot open " + csv_paths[j]);

    std::string header;
    if (!std::getline(in, header))
      throw EmptyClientError("load_csv: " + csv_paths[j] + " is empty");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const std::vector<std::string> cols = split_line(header);

    std::size_t p = 0;
    while (p < cols.size() && cols[p] == "x" + std::to_string(p + 1)) ++p;
    if (p == 0) throw SchemaError("load_csv: missing column x1 in " + csv_paths[j]);
    std::size_t d = 0;
    while (p + d < cols.size() && cols[p + d] == "c" + std::to_string(d + 1)) ++d;
    if (d == 0) throw SchemaError("load_csv: missing column c1 in " + csv_paths[j]);
    bool has_split = false;
    if (p + d < cols.size()) {
      if (cols[p + d] == "split" && p + d + 1 == cols.size()) {
        has_split = true;
      } else {
        throw SchemaError("load_csv: unexpected column '" + cols[p + d] + "' in " +
                          csv_paths[j]);
      }
    }

    std::vector<Vec> train_rows, test_rows;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::vector<std::string> fields = split_line(line);
      const std::size_t expected = p + d + (has_split ? 1 : 0);
      if (fields.size() != expected)
        throw SchemaError("load_csv: row " + std::to_string(lineno) + " of " +
                          csv_paths[j] + " has " + std::to_string(fields.size()) +
                          " fields, expected " + std::to_string(expected));
      Vec row(p + d);
      for (std::size_t k = 0; k < p + d; ++k) {
        char* end = nullptr;
        row[k] = std::strtod(fields[k].c_str(), &end);
        if (end == fields[k].c_str() || !std::isfinite(row[k]))
          throw SchemaError("load_csv: non-finite value in column " +
                            (k < p ? "x" + std::to_string(k + 1)
                                   : "c" + std::to_string(k - p + 1)) +
                            " at row " + std::to_string(lineno) + " of " + csv_paths[j]);
      }
      bool is_test = false;
      if (has_split) {
        const std::string& tag = fields[p + d];
        if (tag == "test")
          is_test = true;
        else if (tag != "train")
          throw SchemaError("load_csv: split value '" + tag + "' at row " +
                            std::to_string(lineno) + " of " + csv_paths[j]);
      }
      (is_test ? test_rows : train_rows).push_back(std::move(row));
    }
    if (train_rows.empty())
      throw EmptyClientError("load_csv: no training rows in " + csv_paths[j]);

    const auto& meta = client_meta[j];
    FeasibleSet set;
    double sign = 1.0;
    const std::string family = meta.at("family").get<std::string>();
    if (family == "knapsack") {
      const std::size_t ref = meta.at("weights_ref").get<std::size_t>();
      if (!sidecar.contains("weights") || ref >= sidecar["weights"].size())
        throw SchemaError("load_csv: weights_ref out of range for " + csv_paths[j]);
      const Vec weights = sidecar["weights"][ref].get<Vec>();
      if (weights.size() != d)
        throw SchemaError("load_csv: weight vector size mismatch for " + csv_paths[j]);
      set = FeasibleSet::knapsack(weights, meta.at("budget").get<double>());
      sign = -1.0;
    } else if (family == "portfolio") {
      set = FeasibleSet::entropy(d, meta.at("entropy_r").get<double>());
    } else {
      throw SchemaError("load_csv: unknown family '" + family + "'");
    }

    const auto fill = [&](const std::vector<Vec>& rows, ClientDataset& cd) {
      cd.features = Matrix(rows.size(), p);
      cd.costs = Matrix(rows.size(), d);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t q = 0; q < p; ++q) cd.features(i, q) = rows[i][q];
        for (std::size_t k = 0; k < d; ++k) cd.costs(i, k) = rows[i][p + k];
      }
      cd.set = set;
      cd.cost_sign = sign;
    };
    fill(train_rows, out.train[j]);
    fill(test_rows, out.test[j]);
    if (!test_rows.empty()) any_test = true;
  }

  std::size_t total = 0;
  for (const ClientDataset& cd : out.train) total += cd.size();
  for (ClientDataset& cd : out.train)
    cd.alpha = static_cast<double>(cd.size()) / static_cast<double>(total);

  if (!any_test) out.test.clear();
  return out;
}

}  // namespace dffl
