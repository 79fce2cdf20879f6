#include "dffl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "dffl/errors.hpp"
#include "dffl/rng.hpp"
#include "dffl/spo.hpp"

namespace dffl {

void ExperimentConfig::validate() const {
  gen.validate();
  fed.validate();
  if (seeds.empty()) throw ConfigError("ExperimentConfig: seed list is empty");
  if (test_size == 0 || test_size % gen.n_clients != 0)
    throw ConfigError("ExperimentConfig: test size must divide over clients");
  if (!(delta_conf > 0.0) || delta_conf > 1.0)
    throw ConfigError("ExperimentConfig: delta_conf must be in (0, 1]");
}

void apply_desk_scale(ExperimentConfig& config) {
  config.gen.input_dim = 8;
  config.gen.cost_dim = 10;
  if (config.gen.balance == Balance::Balanced) {
    config.gen.n_clients = 5;
    config.gen.n_samples = 500;
  } else {
    config.gen.n_clients = 20;
    config.gen.n_samples = 550;
  }
  config.test_size = 2000;
  if (config.seeds.empty()) config.seeds = {1, 2, 3, 4, 5};
}

EvalResult evaluate(const PredictorParams& params, const ClientDataset& test_data,
                    ExecMode exec) {
  const std::size_t n = test_data.size();
  if (n == 0) throw ConfigError("evaluate: empty test set");
  const double sign = test_data.cost_sign;

  std::vector<double> regret(n, 0.0), optimum(n, 0.0), sq_err(n, 0.0);
  std::vector<char> failed(n, 0);

  parallel_for(
      n,
      [&](std::size_t i) {
        try {
          const Vec c_hat = forward(params, matrix_row(test_data.features, i));
          const Vec c = matrix_row(test_data.costs, i);
          const Vec v = scaled(c, sign);
          const Vec v_hat = scaled(c_hat, sign);
          const SolveResult truth = min_oracle(test_data.set, v);
          const SolveResult acted = min_oracle(test_data.set, v_hat);
          // bisection slack can leave a -1e-12 residue
          regret[i] = std::max(0.0, dot(v, acted.minimizer) - truth.value);
          optimum[i] = truth.value;
          double sq = 0.0;
          for (std::size_t k = 0; k < c.size(); ++k) {
            const double d = c_hat[k] - c[k];
            sq += d * d;
          }
          sq_err[i] = sq;
        } catch (const std::exception&) {
          failed[i] = 1;
        }
      },
      exec);

  EvalResult out;
  std::size_t used = 0;
  double regret_sum = 0.0, opt_sum = 0.0, mse_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) {
      ++out.solver_failures;
      continue;
    }
    regret_sum += regret[i];
    opt_sum += optimum[i];
    mse_sum += sq_err[i];
    ++used;
  }
  if (used == 0) throw ConfigError("evaluate: every sample failed to solve");
  out.mean_regret = regret_sum / static_cast<double>(used);
  out.mse = mse_sum / static_cast<double>(used);
  const double denom = std::abs(opt_sum / static_cast<double>(used));
  out.relative_regret = out.mean_regret / std::max(denom, 1e-12);
  return out;
}

namespace {

// Rademacher estimates depend on (features, n, seed, architecture, budget);
// configs sharing a data seed have identical pooled features, so identical
// requests share one computation. The key carries a feature fingerprint so a
// different X can never alias a cached value.
struct RadKey {
  std::uint64_t x_print;
  std::size_t n, input_dim, hidden_dim, output_dim, draws, epochs;
  std::uint64_t seed;
  double tau;

  bool operator<(const RadKey& o) const {
    return std::tie(x_print, n, input_dim, hidden_dim, output_dim, draws, epochs,
                    seed, tau) < std::tie(o.x_print, o.n, o.input_dim, o.hidden_dim,
                                          o.output_dim, o.draws, o.epochs, o.seed,
                                          o.tau);
  }
};

std::uint64_t fingerprint(const Matrix& x) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ x.rows ^ (x.cols << 32);
  const std::size_t stride = std::max<std::size_t>(1, x.data.size() / 64);
  for (std::size_t i = 0; i < x.data.size(); i += stride) {
    std::uint64_t bits;
    std::memcpy(&bits, &x.data[i], sizeof(bits));
    h = (h ^ bits) * 0x100000001b3ULL;
  }
  return h;
}

double cached_rademacher(const RademacherConfig& rc, const Matrix& X, std::size_t n) {
  static std::map<RadKey, double> cache;
  static std::mutex mutex;
  const RadKey key{fingerprint(X), n,       rc.input_dim, rc.hidden_dim,
                   rc.output_dim,  rc.draws, rc.epochs,    rc.seed,
                   rc.tau};
  {
    std::lock_guard<std::mutex> lock(mutex);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const double value = estimate_rademacher(rc, X, n).estimate;
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, value);
  return value;
}

struct SeedOutcome {
  std::vector<ClientResult> rows;
};

SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  GenConfig gen = config.gen;
  gen.seed = seed;
  FedConfig fed_cfg = config.fed;
  fed_cfg.seed = derive_seed(seed, 0xF3D);
  fed_cfg.log_client_loss = false;  // round logs are not consumed here

  Federation fed = generate(gen);
  const std::vector<ClientDataset> test =
      generate_test_set(gen, config.test_size, derive_seed(seed, 0x7E57));
  const std::size_t m = fed.clients.size();

  const TrainResult fed_train = train_federated(fed.clients, fed_cfg);
  std::vector<PredictorParams> locals(m);
  for (std::size_t j = 0; j < m; ++j)
    locals[j] = train_local(fed.clients[j], fed_cfg, j);

  // Statistical terms. Pooled training features back the Rademacher
  // estimates; C_max is the empirical max cost norm over the federation.
  std::size_t n_total = 0;
  for (const ClientDataset& c : fed.clients) n_total += c.size();
  Matrix pooled(n_total, gen.input_dim);
  std::size_t row = 0;
  double c_max = 0.0;
  for (const ClientDataset& c : fed.clients) {
    for (std::size_t i = 0; i < c.size(); ++i, ++row)
      for (std::size_t q = 0; q < gen.input_dim; ++q)
        pooled(row, q) = c.features(i, q);
    for (std::size_t i = 0; i < c.size(); ++i)
      c_max = std::max(c_max, norm(matrix_row(c.costs, i)));
  }

  RademacherConfig rc;
  rc.input_dim = gen.input_dim;
  rc.hidden_dim = fed_cfg.hidden_dim;
  rc.output_dim = gen.cost_dim;
  rc.tau = fed_cfg.tau;
  rc.draws = config.rademacher_draws;
  rc.learning_rate = fed_cfg.learning_rate;
  rc.grad_clip = fed_cfg.grad_clip;
  rc.seed = derive_seed(seed, 0x4AD);
  rc.exec = fed_cfg.exec;

  std::map<std::size_t, double> rad_by_n;
  for (const ClientDataset& c : fed.clients) rad_by_n[c.size()] = 0.0;
  rad_by_n[n_total] = 0.0;
  for (auto& [n, value] : rad_by_n) {
    // equal per-draw step budget across sample sizes
    rc.epochs = std::max<std::size_t>(1, config.rademacher_step_budget / n);
    value = cached_rademacher(rc, pooled, n);
  }

  // Averaged federated prediction over the test law, for the discrepancy term.
  Vec avg_pred(gen.cost_dim, 0.0);
  std::size_t pred_count = 0;
  for (const ClientDataset& c : test) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Vec c_hat = forward(fed_train.params, matrix_row(c.features, i));
      for (std::size_t k = 0; k < c_hat.size(); ++k) avg_pred[k] += c_hat[k];
      ++pred_count;
    }
  }
  for (double& v : avg_pred) v /= static_cast<double>(pred_count);

  double d_max = 0.0;
  std::vector<double> diameters(m);
  for (std::size_t j = 0; j < m; ++j) {
    diameters[j] = set_geometry(fed.clients[j].set).diameter;
    d_max = std::max(d_max, diameters[j]);
  }
  const double conf = config.delta_conf / 2.0;  // split across the two uniform-convergence events
  const double b_mix = loss_bound_b(d_max, c_max, fed_cfg.tau);
  const double eps_mix =
      epsilon_term(n_total, d_max, rad_by_n[n_total], b_mix, conf);

  SeedOutcome out;
  out.rows.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    ClientResult& r = out.rows[j];
    r.client = j;
    const EvalResult fe = evaluate(fed_train.params, test[j], fed_cfg.exec);
    const EvalResult le = evaluate(locals[j], test[j], fed_cfg.exec);
    r.fed_regret = fe.mean_regret;
    r.fed_rel_regret = fe.relative_regret;
    r.fed_mse = fe.mse;
    r.local_regret = le.mean_regret;
    r.local_rel_regret = le.relative_regret;
    r.local_mse = le.mse;

    const double b_j = loss_bound_b(diameters[j], c_max, fed_cfg.tau);
    r.eps_j = epsilon_term(fed.clients[j].size(), diameters[j],
                           rad_by_n[fed.clients[j].size()], b_j, conf);
    r.eps_mix = eps_mix;
    r.delta_hat = estimate_mixture_discrepancy(fed.clients, j, avg_pred, fed_cfg.tau);
    const FgCertificate fg = fg_certificate(r.eps_j, r.eps_mix, r.delta_hat);
    r.fg_ratio = fg.ratio;
    r.fg_difference = fg.difference;
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  // FNV-1a over the identifying fields.
  const std::string text = config.name + "|" + to_string(config.gen.family) + "|" +
                           to_string(config.gen.balance) + "|" +
                           std::to_string(config.gen.eta_obj) + "|" +
                           std::to_string(config.gen.eta_constr) + "|" +
                           std::to_string(config.gen.degree) + "|" +
                           std::to_string(config.gen.noise);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%08llx", static_cast<unsigned long long>(h & 0xffffffffULL));
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentResult run_config(const ExperimentConfig& config) {
  config.validate();

  ExperimentResult result;
  result.config_name = config.name;
  result.family = to_string(config.gen.family);
  result.balance = to_string(config.gen.balance);
  result.eta_obj = config.gen.eta_obj;
  result.eta_constr = config.gen.eta_constr;

  const std::size_t m = config.gen.n_clients;
  std::vector<ClientResult> sums(m);
  for (std::size_t j = 0; j < m; ++j) sums[j].client = j;

  for (const std::uint64_t seed : config.seeds) {
    SeedOutcome outcome;
    try {
      outcome = run_seed(config, seed);
    } catch (const std::exception&) {
      ++result.seeds_failed;
      continue;
    }
    ++result.seeds_used;
    for (std::size_t j = 0; j < m; ++j) {
      const ClientResult& r = outcome.rows[j];
      sums[j].fed_regret += r.fed_regret;
      sums[j].local_regret += r.local_regret;
      sums[j].fed_rel_regret += r.fed_rel_regret;
      sums[j].local_rel_regret += r.local_rel_regret;
      sums[j].fed_mse += r.fed_mse;
      sums[j].local_mse += r.local_mse;
      sums[j].eps_j += r.eps_j;
      sums[j].eps_mix += r.eps_mix;
      sums[j].delta_hat += r.delta_hat;
      sums[j].fg_ratio += r.fg_ratio;
      sums[j].fg_difference += r.fg_difference;
    }
  }
  if (result.seeds_used == 0)
    throw ConfigError("run_config: every seed failed for " + config.name);

  const double k = static_cast<double>(result.seeds_used);
  std::size_t preferring = 0;
  for (std::size_t j = 0; j < m; ++j) {
    ClientResult& r = sums[j];
    r.fed_regret /= k;
    r.local_regret /= k;
    r.fed_rel_regret /= k;
    r.local_rel_regret /= k;
    r.fed_mse /= k;
    r.local_mse /= k;
    r.eps_j /= k;
    r.eps_mix /= k;
    r.delta_hat /= k;
    r.fg_ratio /= k;
    r.fg_difference /= k;
    r.regret_difference = r.local_regret - r.fed_regret;
    r.delta_j_pct =
        r.local_regret != 0.0 ? 100.0 * r.regret_difference / r.local_regret : 0.0;
    if (r.fed_regret <= r.local_regret) ++preferring;
  }
  result.per_client = std::move(sums);
  result.fraction_preferring_federation =
      static_cast<double>(preferring) / static_cast<double>(m);
  result.fg_agreement_rate = fg_agreement(result.per_client);
  return result;
}

std::vector<ExperimentResult> sweep(const std::vector<ExperimentConfig>& configs) {
  std::vector<ExperimentResult> results;
  for (const ExperimentConfig& config : configs) {
    try {
      results.push_back(run_config(config));
    } catch (const std::exception&) {
      // config isolation: one failure must not take down the sweep
    }
  }
  return results;
}

double fg_agreement(const std::vector<ClientResult>& rows) {
  if (rows.empty()) return 0.0;
  std::size_t match = 0;
  for (const ClientResult& r : rows) {
    const bool fg_positive = r.fg_difference >= 0.0;  // zero predicts benefit
    const bool emp_positive = r.regret_difference >= 0.0;
    if (fg_positive == emp_positive) ++match;
  }
  return static_cast<double>(match) / static_cast<double>(rows.size());
}

std::vector<std::string> report(const std::vector<ExperimentResult>& results,
                                const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  const char* header =
      "config,client,fed_regret,local_regret,fed_rel_regret,local_rel_regret,"
      "fed_mse,local_mse,eps_j,eps_mix,delta_hat,fg_ratio,fg_difference,"
      "regret_difference,delta_j_pct\n";

  nlohmann::json summary = nlohmann::json::array();
  struct TableRow {
    std::string config;
    std::size_t client;
    double loc, fed, delta, fg_delta, pct;
  };
  std::vector<TableRow> table;

  for (const ExperimentResult& res : results) {
    ExperimentConfig key;
    key.name = res.config_name;
    key.gen.family = res.family == "knapsack" ? Family::Knapsack : Family::Portfolio;
    key.gen.balance = res.balance == "balanced" ? Balance::Balanced : Balance::Imbalanced;
    key.gen.eta_obj = res.eta_obj;
    key.gen.eta_constr = res.eta_constr;
    const std::string path = out_dir + "/results_" + config_hash(key) + ".csv";
    std::ofstream out(path);
    if (!out) throw ConfigError("report: cannot open " + path);
    out << header;
    for (const ClientResult& r : res.per_client) {
      out << res.config_name << "," << r.client << "," << fmt(r.fed_regret) << ","
          << fmt(r.local_regret) << "," << fmt(r.fed_rel_regret) << ","
          << fmt(r.local_rel_regret) << "," << fmt(r.fed_mse) << ","
          << fmt(r.local_mse) << "," << fmt(r.eps_j) << "," << fmt(r.eps_mix) << ","
          << fmt(r.delta_hat) << "," << fmt(r.fg_ratio) << ","
          << fmt(r.fg_difference) << "," << fmt(r.regret_difference) << ","
          << fmt(r.delta_j_pct) << "\n";
      table.push_back({res.config_name, r.client, r.local_regret, r.fed_regret,
                       r.regret_difference, r.fg_difference, r.delta_j_pct});
    }
    written.push_back(path);

    nlohmann::json cfg_json;
    cfg_json["config"] = res.config_name;
    cfg_json["family"] = res.family;
    cfg_json["balance"] = res.balance;
    cfg_json["eta_obj"] = res.eta_obj;
    cfg_json["eta_constr"] = res.eta_constr;
    cfg_json["fraction_preferring_federation"] = res.fraction_preferring_federation;
    cfg_json["fg_agreement_rate"] = res.fg_agreement_rate;
    cfg_json["seeds_used"] = res.seeds_used;
    cfg_json["seeds_failed"] = res.seeds_failed;
    cfg_json["clients"] = nlohmann::json::array();
    for (const ClientResult& r : res.per_client) {
      nlohmann::json cj;
      cj["client"] = r.client;
      cj["DFL_LOC"] = r.local_regret;
      cj["DFL_FED"] = r.fed_regret;
      cj["delta_j"] = r.regret_difference;
      cj["delta_j_pct"] = r.delta_j_pct;
      cj["FG_delta"] = r.fg_difference;
      cj["FG_ratio"] = r.fg_ratio;
      cj["eps_j"] = r.eps_j;
      cj["eps_mix"] = r.eps_mix;
      cj["delta_hat"] = r.delta_hat;
      cj["mse_fed"] = r.fed_mse;
      cj["mse_local"] = r.local_mse;
      cfg_json["clients"].push_back(cj);
    }
    summary.push_back(cfg_json);
  }

  const std::string summary_path = out_dir + "/summary.json";
  std::ofstream sj(summary_path);
  if (!sj) throw ConfigError("report: cannot open " + summary_path);
  sj << summary.dump(2);
  written.push_back(summary_path);

  std::sort(table.begin(), table.end(),
            [](const TableRow& a, const TableRow& b) { return a.pct > b.pct; });
  const std::string table_path = out_dir + "/summary_table.csv";
  std::ofstream st(table_path);
  if (!st) throw ConfigError("report: cannot open " + table_path);
  st << "config,client,DFL_LOC,DFL_FED,delta_j,FG_delta,delta_j_pct\n";
  for (const TableRow& r : table)
    st << r.config << "," << r.client << "," << fmt(r.loc) << "," << fmt(r.fed) << ","
       << fmt(r.delta) << "," << fmt(r.fg_delta) << "," << fmt(r.pct) << "\n";
  written.push_back(table_path);
  return written;
}

std::vector<ClientResult> load_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_results_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("load_results_csv: empty file");
  std::vector<ClientResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> fields;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (fields.size() != 15)
      throw ConfigError("load_results_csv: malformed row in " + path);
    ClientResult r;
    r.client = std::stoul(fields[1]);
    r.fed_regret = std::stod(fields[2]);
    r.local_regret = std::stod(fields[3]);
    r.fed_rel_regret = std::stod(fields[4]);
    r.local_rel_regret = std::stod(fields[5]);
    r.fed_mse = std::stod(fields[6]);
    r.local_mse = std::stod(fields[7]);
    r.eps_j = std::stod(fields[8]);
    r.eps_mix = std::stod(fields[9]);
    r.delta_hat = std::stod(fields[10]);
    r.fg_ratio = std::stod(fields[11]);
    r.fg_difference = std::stod(fields[12]);
    r.regret_difference = std::stod(fields[13]);
    r.delta_j_pct = std::stod(fields[14]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

Family family_from_string(const std::string& s) {
  if (s == "knapsack") return Family::Knapsack;
  if (s == "portfolio") return Family::Portfolio;
  throw ConfigError("unknown family: " + s);
}

Balance balance_from_string(const std::string& s) {
  if (s == "balanced") return Balance::Balanced;
  if (s == "imbalanced") return Balance::Imbalanced;
  throw ConfigError("unknown balance mode: " + s);
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ExperimentConfig c;
  if (j.contains("name")) c.name = j["name"].get<std::string>();
  if (j.contains("gen")) {
    const auto& g = j["gen"];
    if (g.contains("input_dim")) c.gen.input_dim = g["input_dim"].get<std::size_t>();
    if (g.contains("cost_dim")) c.gen.cost_dim = g["cost_dim"].get<std::size_t>();
    if (g.contains("n_samples")) c.gen.n_samples = g["n_samples"].get<std::size_t>();
    if (g.contains("n_clients")) c.gen.n_clients = g["n_clients"].get<std::size_t>();
    if (g.contains("degree")) c.gen.degree = g["degree"].get<int>();
    if (g.contains("noise")) c.gen.noise = g["noise"].get<double>();
    if (g.contains("eta_obj")) c.gen.eta_obj = g["eta_obj"].get<double>();
    if (g.contains("eta_constr")) c.gen.eta_constr = g["eta_constr"].get<double>();
    if (g.contains("family")) c.gen.family = family_from_string(g["family"]);
    if (g.contains("balance")) c.gen.balance = balance_from_string(g["balance"]);
    if (g.contains("seed")) c.gen.seed = g["seed"].get<std::uint64_t>();
  }
  if (j.contains("fed")) {
    const auto& f = j["fed"];
    if (f.contains("rounds")) c.fed.rounds = f["rounds"].get<std::size_t>();
    if (f.contains("client_fraction"))
      c.fed.client_fraction = f["client_fraction"].get<double>();
    if (f.contains("local_epochs")) c.fed.local_epochs = f["local_epochs"].get<std::size_t>();
    if (f.contains("batch_size")) c.fed.batch_size = f["batch_size"].get<std::size_t>();
    if (f.contains("learning_rate")) c.fed.learning_rate = f["learning_rate"].get<double>();
    if (f.contains("grad_clip")) c.fed.grad_clip = f["grad_clip"].get<double>();
    if (f.contains("hidden_dim")) c.fed.hidden_dim = f["hidden_dim"].get<std::size_t>();
    if (f.contains("tau")) c.fed.tau = f["tau"].get<double>();
  }
  if (j.contains("test_size")) c.test_size = j["test_size"].get<std::size_t>();
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("delta_conf")) c.delta_conf = j["delta_conf"].get<double>();
  if (j.contains("rademacher_draws"))
    c.rademacher_draws = j["rademacher_draws"].get<std::size_t>();
  if (j.contains("rademacher_step_budget"))
    c.rademacher_step_budget = j["rademacher_step_budget"].get<std::size_t>();
  return c;
}

std::string config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["name"] = config.name;
  j["gen"] = {{"input_dim", config.gen.input_dim},
              {"cost_dim", config.gen.cost_dim},
              {"n_samples", config.gen.n_samples},
              {"n_clients", config.gen.n_clients},
              {"degree", config.gen.degree},
              {"noise", config.gen.noise},
              {"eta_obj", config.gen.eta_obj},
              {"eta_constr", config.gen.eta_constr},
              {"family", to_string(config.gen.family)},
              {"balance", to_string(config.gen.balance)},
              {"seed", config.gen.seed}};
  j["fed"] = {{"rounds", config.fed.rounds},
              {"client_fraction", config.fed.client_fraction},
              {"local_epochs", config.fed.local_epochs},
              {"batch_size", config.fed.batch_size},
              {"learning_rate", config.fed.learning_rate},
              {"grad_clip", config.fed.grad_clip},
              {"hidden_dim", config.fed.hidden_dim},
              {"tau", config.fed.tau}};
  j["test_size"] = config.test_size;
  j["seeds"] = config.seeds;
  j["delta_conf"] = config.delta_conf;
  j["rademacher_draws"] = config.rademacher_draws;
  j["rademacher_step_budget"] = config.rademacher_step_budget;
  return j.dump(2);
}

}  // namespace dffl
