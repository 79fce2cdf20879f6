// Serial-versus-OpenMP benchmark for the three data-parallel kernels:
// batch evaluation, one federated round, and Rademacher draws. Also checks
// that both modes produce identical numbers.

#include <chrono>
#include <cstdio>

#include "dffl/bounds.hpp"
#include "dffl/datagen.hpp"
#include "dffl/experiments.hpp"
#include "dffl/federation.hpp"

using namespace dffl;

namespace {

template <typename F>
double time_seconds(const F& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-22s serial %8.3fs   openmp %8.3fs   speedup %5.2fx   %s\n", name,
              serial, parallel, parallel > 0.0 ? serial / parallel : 0.0,
              identical ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  GenConfig gen;
  gen.input_dim = 8;
  gen.cost_dim = 20;
  gen.n_samples = 800;
  gen.n_clients = 8;
  gen.noise = 1.0;
  gen.family = Family::Portfolio;  // bisection solves give each sample real work
  gen.seed = 42;

  const Federation fed = generate(gen);
  const std::vector<ClientDataset> test = generate_test_set(gen, 8000, 1);

  FedConfig fcfg;
  fcfg.rounds = 2;
  fcfg.local_epochs = 2;
  fcfg.hidden_dim = 64;
  fcfg.seed = 9;

  // federated rounds
  fcfg.exec = ExecMode::Serial;
  TrainResult serial_model;
  const double t_fed_serial =
      time_seconds([&] { serial_model = train_federated(fed.clients, fcfg); });
  fcfg.exec = ExecMode::OpenMP;
  TrainResult parallel_model;
  const double t_fed_parallel =
      time_seconds([&] { parallel_model = train_federated(fed.clients, fcfg); });
  row("federated rounds", t_fed_serial, t_fed_parallel,
      serial_model.params.w1 == parallel_model.params.w1 &&
          serial_model.params.b2 == parallel_model.params.b2);

  // batch evaluation
  std::vector<EvalResult> serial_eval(test.size()), parallel_eval(test.size());
  const double t_eval_serial = time_seconds([&] {
    for (std::size_t j = 0; j < test.size(); ++j)
      serial_eval[j] = evaluate(serial_model.params, test[j], ExecMode::Serial);
  });
  const double t_eval_parallel = time_seconds([&] {
    for (std::size_t j = 0; j < test.size(); ++j)
      parallel_eval[j] = evaluate(serial_model.params, test[j], ExecMode::OpenMP);
  });
  bool eval_same = true;
  for (std::size_t j = 0; j < test.size(); ++j)
    eval_same = eval_same && serial_eval[j].mean_regret == parallel_eval[j].mean_regret &&
                serial_eval[j].mse == parallel_eval[j].mse;
  row("batch evaluation", t_eval_serial, t_eval_parallel, eval_same);

  // rademacher draws
  Matrix pooled(gen.n_samples, gen.input_dim);
  std::size_t r = 0;
  for (const ClientDataset& c : fed.clients)
    for (std::size_t i = 0; i < c.size(); ++i, ++r)
      for (std::size_t q = 0; q < gen.input_dim; ++q) pooled(r, q) = c.features(i, q);

  RademacherConfig rc;
  rc.input_dim = gen.input_dim;
  rc.hidden_dim = 64;
  rc.output_dim = gen.cost_dim;
  rc.draws = 8;
  rc.epochs = 10;
  rc.seed = 3;

  rc.exec = ExecMode::Serial;
  RademacherEstimate rad_serial;
  const double t_rad_serial =
      time_seconds([&] { rad_serial = estimate_rademacher(rc, pooled, 200); });
  rc.exec = ExecMode::OpenMP;
  RademacherEstimate rad_parallel;
  const double t_rad_parallel =
      time_seconds([&] { rad_parallel = estimate_rademacher(rc, pooled, 200); });
  row("rademacher draws", t_rad_serial, t_rad_parallel,
      rad_serial.estimate == rad_parallel.estimate);

  return 0;
}
