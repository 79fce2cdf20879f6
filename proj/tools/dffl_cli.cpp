// Command-line front end: generate | train | sweep | bounds | rademacher | report.
// Configuration comes from one JSON file (--config) with flag overrides.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dffl/rng.hpp"

#include "dffl/bounds.hpp"
#include "dffl/datagen.hpp"
#include "dffl/experiments.hpp"
#include "dffl/federation.hpp"
#include "dffl/model.hpp"

using namespace dffl;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::string in_dir;
  std::vector<double> eta_obj;
  std::vector<double> eta_constr;
  std::string family;
  std::string balance;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> rademacher_n = {50, 100, 500};
  bool desk_scale = false;
};

ExperimentConfig build_config(const CliOptions& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open config " + opt.config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = parse_config_json(buf.str());
  }
  if (!opt.family.empty())
    cfg.gen.family = opt.family == "portfolio" ? Family::Portfolio : Family::Knapsack;
  if (!opt.balance.empty())
    cfg.gen.balance = opt.balance == "imbalanced" ? Balance::Imbalanced : Balance::Balanced;
  if (!opt.seeds.empty()) cfg.seeds = opt.seeds;
  if (!opt.eta_obj.empty()) cfg.gen.eta_obj = opt.eta_obj.front();
  if (!opt.eta_constr.empty()) cfg.gen.eta_constr = opt.eta_constr.front();
  if (opt.desk_scale) apply_desk_scale(cfg);
  return cfg;
}

std::string config_label(const ExperimentConfig& cfg) {
  std::ostringstream name;
  name << to_string(cfg.gen.family) << "_" << to_string(cfg.gen.balance) << "_eo"
       << cfg.gen.eta_obj << "_ec" << cfg.gen.eta_constr;
  return name.str();
}

int cmd_generate(const CliOptions& opt) {
  ExperimentConfig cfg = build_config(opt);
  GenConfig gen = cfg.gen;
  gen.seed = cfg.seeds.front();
  std::filesystem::create_directories(opt.out_dir);
  const Federation fed = generate(gen);
  const std::vector<std::string> paths = write_csv(fed, opt.out_dir, "fed");
  std::cout << "wrote " << paths.size() << " client csv files and sidecar to "
            << opt.out_dir << "\n";
  return 0;
}

int cmd_train(const CliOptions& opt) {
  ExperimentConfig cfg = build_config(opt);
  GenConfig gen = cfg.gen;
  gen.seed = cfg.seeds.front();
  FedConfig fed_cfg = cfg.fed;
  fed_cfg.seed = derive_seed(gen.seed, 0xF3D);

  std::filesystem::create_directories(opt.out_dir);
  const Federation fed = generate(gen);
  const TrainResult fed_train = train_federated(fed.clients, fed_cfg);
  save_params(fed_train.params, opt.out_dir + "/fed_params.json");
  write_round_logs_jsonl(fed_train.logs,
                         opt.out_dir + "/rounds_" + config_label(cfg) + ".jsonl");

  const std::vector<ClientDataset> test =
      generate_test_set(gen, cfg.test_size, derive_seed(gen.seed, 0x7E57));
  for (std::size_t j = 0; j < fed.clients.size(); ++j) {
    const PredictorParams local = train_local(fed.clients[j], fed_cfg, j);
    save_params(local, opt.out_dir + "/local_params_" + std::to_string(j) + ".json");
    const EvalResult fe = evaluate(fed_train.params, test[j], fed_cfg.exec);
    const EvalResult le = evaluate(local, test[j], fed_cfg.exec);
    std::cout << "client " << j << ": fed regret " << fe.mean_regret
              << " (rel " << fe.relative_regret << "), local regret " << le.mean_regret
              << " (rel " << le.relative_regret << ")\n";
  }
  std::cout << "checkpoints and round logs in " << opt.out_dir << "\n";
  return 0;
}

int cmd_sweep(const CliOptions& opt) {
  const ExperimentConfig base = build_config(opt);
  const std::vector<double> obj_grid =
      opt.eta_obj.empty() ? std::vector<double>{base.gen.eta_obj} : opt.eta_obj;
  const std::vector<double> constr_grid =
      opt.eta_constr.empty() ? std::vector<double>{base.gen.eta_constr} : opt.eta_constr;

  std::vector<ExperimentConfig> configs;
  for (const double eo : obj_grid)
    for (const double ec : constr_grid) {
      ExperimentConfig cfg = base;
      cfg.gen.eta_obj = eo;
      cfg.gen.eta_constr = ec;
      cfg.name = config_label(cfg);
      configs.push_back(cfg);
    }

  const std::vector<ExperimentResult> results = sweep(configs);
  report(results, opt.out_dir);
  for (const ExperimentResult& res : results)
    std::cout << res.config_name << ": " << res.fraction_preferring_federation * 100.0
              << "% of clients prefer federation, FG agreement "
              << res.fg_agreement_rate * 100.0 << "%\n";
  if (results.size() != configs.size()) {
    std::cerr << (configs.size() - results.size()) << " config(s) failed\n";
    return 1;
  }
  return 0;
}

int cmd_bounds(const CliOptions& opt) {
  ExperimentConfig cfg = build_config(opt);
  GenConfig gen = cfg.gen;
  gen.seed = cfg.seeds.front();
  FedConfig fed_cfg = cfg.fed;
  fed_cfg.seed = derive_seed(gen.seed, 0xF3D);

  const Federation fed = generate(gen);
  const TrainResult fed_train = train_federated(fed.clients, fed_cfg);
  const std::vector<ClientDataset> test =
      generate_test_set(gen, cfg.test_size, derive_seed(gen.seed, 0x7E57));

  Vec avg_pred(gen.cost_dim, 0.0);
  std::size_t count = 0;
  for (const ClientDataset& c : test)
    for (std::size_t i = 0; i < c.size(); ++i, ++count) {
      const Vec pred = forward(fed_train.params, matrix_row(c.features, i));
      for (std::size_t k = 0; k < pred.size(); ++k) avg_pred[k] += pred[k];
    }
  for (double& v : avg_pred) v /= static_cast<double>(count);

  Vec c_hat = avg_pred;
  const double an = norm(avg_pred);
  if (an > 0.0)
    for (double& v : c_hat) v *= fed_cfg.tau / an;

  nlohmann::json out;
  out["pairs"] = nlohmann::json::array();
  const std::size_t m = fed.clients.size();
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i) {
      if (i == j) continue;
      const HeterogeneityProfile prof =
          make_profile(fed.clients[j].set, fed.clients[i].set,
                       matrix_row(fed.clients[j].costs, 0),
                       matrix_row(fed.clients[i].costs, 0), c_hat);
      nlohmann::json rec;
      rec["ref"] = j;
      rec["cl"] = i;
      rec["delta"] = prof.delta;
      rec["delta_n_exact"] = prof.delta_n_exact;
      rec["d_ref"] = prof.d_ref;
      rec["d_cl"] = prof.d_cl;
      rec["H_at_tau"] = heterogeneity_bound(prof, norm(c_hat));
      out["pairs"].push_back(rec);
    }

  std::size_t n_total = 0;
  double c_max = 0.0;
  for (const ClientDataset& c : fed.clients) {
    n_total += c.size();
    for (std::size_t i = 0; i < c.size(); ++i)
      c_max = std::max(c_max, norm(matrix_row(c.costs, i)));
  }
  Matrix pooled(n_total, gen.input_dim);
  std::size_t row = 0;
  for (const ClientDataset& c : fed.clients)
    for (std::size_t i = 0; i < c.size(); ++i, ++row)
      for (std::size_t q = 0; q < gen.input_dim; ++q) pooled(row, q) = c.features(i, q);

  RademacherConfig rc;
  rc.input_dim = gen.input_dim;
  rc.hidden_dim = fed_cfg.hidden_dim;
  rc.output_dim = gen.cost_dim;
  rc.tau = fed_cfg.tau;
  rc.draws = cfg.rademacher_draws;
  rc.seed = derive_seed(gen.seed, 0x4AD);

  std::map<std::size_t, double> rad;
  for (const ClientDataset& c : fed.clients) rad[c.size()] = 0.0;
  rad[n_total] = 0.0;
  for (auto& [n, value] : rad) {
    rc.epochs = std::max<std::size_t>(1, cfg.rademacher_step_budget / n);
    value = estimate_rademacher(rc, pooled, n).estimate;
  }

  double d_max = 0.0;
  std::vector<double> diam(m);
  for (std::size_t j = 0; j < m; ++j) {
    diam[j] = set_geometry(fed.clients[j].set).diameter;
    d_max = std::max(d_max, diam[j]);
  }
  const double conf = cfg.delta_conf / 2.0;
  const double eps_mix = epsilon_term(
      n_total, d_max, rad[n_total], loss_bound_b(d_max, c_max, fed_cfg.tau), conf);

  out["clients"] = nlohmann::json::array();
  for (std::size_t j = 0; j < m; ++j) {
    const double eps_j =
        epsilon_term(fed.clients[j].size(), diam[j], rad[fed.clients[j].size()],
                     loss_bound_b(diam[j], c_max, fed_cfg.tau), conf);
    const double delta_hat = estimate_mixture_discrepancy(fed.clients, j, avg_pred, fed_cfg.tau);
    const FgCertificate fg = fg_certificate(eps_j, eps_mix, delta_hat);
    nlohmann::json rec;
    rec["client"] = j;
    rec["eps_j"] = eps_j;
    rec["eps_mix"] = eps_mix;
    rec["delta_hat"] = delta_hat;
    rec["fg_ratio"] = fg.ratio;
    rec["fg_difference"] = fg.difference;
    rec["local_excess_risk_bound"] = 2.0 * eps_j;
    rec["federated_excess_risk_bound"] = 2.0 * eps_mix + 2.0 * delta_hat;
    out["clients"].push_back(rec);
  }

  std::filesystem::create_directories(opt.out_dir);
  std::ofstream os(opt.out_dir + "/bounds.json");
  os << out.dump(2) << "\n";
  std::cout << "bound report written to " << opt.out_dir << "/bounds.json\n";
  return 0;
}

int cmd_rademacher(const CliOptions& opt) {
  ExperimentConfig cfg = build_config(opt);
  GenConfig gen = cfg.gen;
  gen.seed = cfg.seeds.front();

  const std::size_t n_max =
      *std::max_element(opt.rademacher_n.begin(), opt.rademacher_n.end());
  GenConfig big = gen;
  big.n_samples = ((n_max + gen.n_clients - 1) / gen.n_clients) * gen.n_clients;
  big.balance = Balance::Balanced;
  const Federation fed = generate(big);
  Matrix pooled(big.n_samples, gen.input_dim);
  std::size_t row = 0;
  for (const ClientDataset& c : fed.clients)
    for (std::size_t i = 0; i < c.size(); ++i, ++row)
      for (std::size_t q = 0; q < gen.input_dim; ++q) pooled(row, q) = c.features(i, q);

  RademacherConfig rc;
  rc.input_dim = gen.input_dim;
  rc.hidden_dim = cfg.fed.hidden_dim;
  rc.output_dim = gen.cost_dim;
  rc.tau = cfg.fed.tau;
  rc.draws = cfg.rademacher_draws;
  rc.seed = derive_seed(gen.seed, 0x4AD);

  nlohmann::json out = nlohmann::json::array();
  std::printf("%8s %12s %12s\n", "n", "estimate", "stderr");
  for (const std::size_t n : opt.rademacher_n) {
    rc.epochs = std::max<std::size_t>(1, cfg.rademacher_step_budget / n);
    const RademacherEstimate est = estimate_rademacher(rc, pooled, n);
    std::printf("%8zu %12.4f %12.5f\n", n, est.estimate,
                est.standard_error.value_or(0.0));
    nlohmann::json rec;
    rec["n"] = n;
    rec["estimate"] = est.estimate;
    if (est.standard_error) rec["stderr"] = *est.standard_error;
    out.push_back(rec);
  }
  std::filesystem::create_directories(opt.out_dir);
  std::ofstream os(opt.out_dir + "/rademacher.json");
  os << out.dump(2) << "\n";
  return 0;
}

int cmd_report(const CliOptions& opt) {
  namespace fs = std::filesystem;
  if (opt.in_dir.empty()) throw ConfigError("report: --in directory required");

  struct Row {
    std::string config;
    ClientResult r;
  };
  std::vector<Row> rows;
  for (const auto& entry : fs::directory_iterator(opt.in_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("results_", 0) != 0 || entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string tok;
      std::vector<std::string> f;
      while (std::getline(ss, tok, ',')) f.push_back(tok);
      if (f.size() != 15) continue;
      Row row;
      row.config = f[0];
      row.r.client = std::stoul(f[1]);
      row.r.fed_regret = std::stod(f[2]);
      row.r.local_regret = std::stod(f[3]);
      row.r.fg_difference = std::stod(f[12]);
      row.r.regret_difference = std::stod(f[13]);
      row.r.delta_j_pct = std::stod(f[14]);
      rows.push_back(row);
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.r.delta_j_pct > b.r.delta_j_pct; });

  fs::create_directories(opt.out_dir);
  std::ofstream out(opt.out_dir + "/summary_table.csv");
  out << "config,client,DFL_LOC,DFL_FED,delta_j,FG_delta,delta_j_pct\n";
  char buf[256];
  for (const Row& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  row.config.c_str(), row.r.client, row.r.local_regret,
                  row.r.fed_regret, row.r.regret_difference, row.r.fg_difference,
                  row.r.delta_j_pct);
    out << buf;
  }
  std::cout << "summary table over " << rows.size() << " rows written to "
            << opt.out_dir << "/summary_table.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decision-focused federated learning workbench"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opt;
  app.add_option("--config", opt.config_path, "JSON experiment config");
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--seeds", opt.seeds, "seed list override");
  app.add_option("--eta-obj", opt.eta_obj, "objective heterogeneity value(s)");
  app.add_option("--eta-constr", opt.eta_constr, "constraint heterogeneity value(s)");
  app.add_option("--family", opt.family, "problem family")
      ->check(CLI::IsMember({"knapsack", "portfolio"}));
  app.add_option("--balance", opt.balance, "sample balance mode")
      ->check(CLI::IsMember({"balanced", "imbalanced"}));
  app.add_flag("--desk-scale", opt.desk_scale, "apply desk-scale defaults");

  auto* generate_cmd = app.add_subcommand("generate", "write synthetic client CSVs");
  auto* train_cmd = app.add_subcommand("train", "train federated and local models");
  auto* sweep_cmd = app.add_subcommand("sweep", "run a heterogeneity grid");
  auto* bounds_cmd = app.add_subcommand("bounds", "compute bound and FG reports");
  auto* rademacher_cmd =
      app.add_subcommand("rademacher", "estimate empirical Rademacher complexity");
  rademacher_cmd->add_option("--n", opt.rademacher_n, "sample sizes");
  auto* report_cmd = app.add_subcommand("report", "rebuild summary table from CSVs");
  report_cmd->add_option("--in", opt.in_dir, "directory with results_*.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate_cmd->parsed()) return cmd_generate(opt);
    if (train_cmd->parsed()) return cmd_train(opt);
    if (sweep_cmd->parsed()) return cmd_sweep(opt);
    if (bounds_cmd->parsed()) return cmd_bounds(opt);
    if (rademacher_cmd->parsed()) return cmd_rademacher(opt);
    if (report_cmd->parsed()) return cmd_report(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
