#include "dffl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dffl/errors.hpp"
#include "dffl/model.hpp"
#include "dffl/rng.hpp"

namespace dffl {

std::optional<double> HeterogeneityProfile::rho_min() const {
  if (rho_ref.has_value() && rho_cl.has_value())
    return std::min(*rho_ref, *rho_cl);
  return std::nullopt;
}

HeterogeneityProfile make_profile(const FeasibleSet& ref_set, const FeasibleSet& cl_set,
                                  const Vec& c_ref, const Vec& c_cl, const Vec& c_hat) {
  HeterogeneityProfile prof;
  prof.c_d = distance(c_ref, c_cl);

  const ShapeDistance sd = shape_distance(ref_set, cl_set);
  prof.delta = sd.value;
  prof.delta_n = sd.value;  // delta substitutes for delta_N where inexact
  prof.delta_n_exact = sd.exact;

  const SetGeometry g_ref = set_geometry(ref_set);
  const SetGeometry g_cl = set_geometry(cl_set);
  prof.d_ref = g_ref.diameter;
  prof.d_cl = g_cl.diameter;
  prof.d_min = std::min(prof.d_ref, prof.d_cl);
  prof.rho_ref = g_ref.strong_convexity_rho;
  prof.rho_cl = g_cl.strong_convexity_rho;

  prof.norm_c_ref = norm(c_ref);
  prof.norm_c_cl = norm(c_cl);
  Vec tmp(c_ref.size());
  for (std::size_t i = 0; i < c_ref.size(); ++i) tmp[i] = c_ref[i] - 2.0 * c_hat[i];
  prof.norm_c_ref_m2hat = norm(tmp);
  for (std::size_t i = 0; i < c_cl.size(); ++i) tmp[i] = c_cl[i] - 2.0 * c_hat[i];
  prof.norm_c_cl_m2hat = norm(tmp);
  return prof;
}

namespace {

double mismatch_term(const HeterogeneityProfile& p) {
  const double via_ref = p.d_ref * p.c_d + p.delta_n * (p.norm_c_cl_m2hat + p.norm_c_cl);
  const double via_cl = p.d_cl * p.c_d + p.delta_n * (p.norm_c_ref_m2hat + p.norm_c_ref);
  return std::min(via_ref, via_cl);
}

}  // namespace

double heterogeneity_bound(const HeterogeneityProfile& profile, double c_hat_norm) {
  if (!std::isfinite(profile.c_d) || !std::isfinite(profile.delta_n) ||
      !std::isfinite(profile.d_min))
    throw ConfigError("heterogeneity_bound: incomplete profile");
  if (c_hat_norm < 0.0) throw ConfigError("heterogeneity_bound: negative prediction norm");
  return 2.0 * c_hat_norm * (profile.delta_n + profile.d_min) + mismatch_term(profile);
}

double heterogeneity_bound_sc(const HeterogeneityProfile& profile, const Vec& c_hat,
                              const Vec& c_ref, const Vec& c_cl) {
  const std::optional<double> rho = profile.rho_min();
  if (!rho.has_value())
    throw ConfigError("heterogeneity_bound_sc: strong-convexity radii missing");
  const double nr = norm(c_ref);
  const double ncl = norm(c_cl);
  if (nr <= 0.0 || ncl <= 0.0)
    throw ConfigError(
        "heterogeneity_bound_sc: cost norms must be strictly positive");

  double dir_sq = 0.0;
  for (std::size_t i = 0; i < c_ref.size(); ++i) {
    const double d = c_ref[i] / nr - c_cl[i] / ncl;
    dir_sq += d * d;
  }
  const double gamma = *rho * std::sqrt(dir_sq) + profile.delta_n +
                       2.0 * std::sqrt(*rho * profile.delta_n);
  return 2.0 * norm(c_hat) * gamma + mismatch_term(profile);
}

double loss_bound_b(double diameter, double c_max, double tau) {
  if (diameter < 0.0 || c_max < 0.0 || tau < 0.0)
    throw ConfigError("loss_bound_b: negative argument");
  return diameter * c_max + 2.0 * diameter * tau;
}

double epsilon_term(std::size_t n, double diameter, double rademacher, double b,
                    double delta_conf) {
  if (n == 0) throw ConfigError("epsilon_term: n must be >= 1");
  if (!(delta_conf > 0.0) || delta_conf > 1.0)
    throw ConfigError("epsilon_term: confidence must be in (0, 1]");
  return 4.0 * std::sqrt(2.0) * diameter * rademacher +
         b * std::sqrt(2.0 * std::log(1.0 / delta_conf) / static_cast<double>(n));
}

FgCertificate fg_certificate(double eps_j, double eps_mix, double delta_hat_j) {
  if (eps_j < 0.0 || eps_mix < 0.0 || delta_hat_j < 0.0)
    throw ConfigError("fg_certificate: negative inputs");
  const double denom = eps_mix + delta_hat_j;
  if (denom <= 0.0) throw ConfigError("fg_certificate: zero denominator");
  FgCertificate out;
  out.ratio = eps_j / denom;
  out.difference = eps_j - eps_mix - delta_hat_j;
  out.helps = out.ratio > 1.0;
  return out;
}

double spo_plus_quadratic_bound(double rho, const Vec& c_hat, const Vec& c) {
  if (!(rho > 0.0)) throw ConfigError("spo_plus_quadratic_bound: rho must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = c_hat[i] - c[i];
    sq += d * d;
  }
  return 2.0 / rho * sq;
}

double estimate_mixture_discrepancy(const std::vector<ClientDataset>& clients,
                                    std::size_t j, const Vec& avg_prediction,
                                    double output_bound) {
  if (j >= clients.size()) throw ConfigError("estimate_mixture_discrepancy: bad client index");
  if (!(output_bound > 0.0))
    throw ConfigError("estimate_mixture_discrepancy: output bound must be positive");

  // Averaged prediction rescaled to the output bound (kept at zero when the
  // average itself is zero).
  Vec c_hat = avg_prediction;
  const double an = norm(avg_prediction);
  if (an > 0.0)
    for (double& v : c_hat) v *= output_bound / an;
  const double c_hat_norm = norm(c_hat);

  const ClientDataset& cj = clients[j];
  double delta_hat = 0.0;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const ClientDataset& ci = clients[i];
    const std::size_t pairs = std::min(ci.size(), cj.size());
    if (pairs == 0) continue;

    // Geometry is fixed per pair; only the cost norms vary per sample.
    HeterogeneityProfile prof = make_profile(cj.set, ci.set, matrix_row(cj.costs, 0),
                                             matrix_row(ci.costs, 0), c_hat);
    double mean_h = 0.0;
    for (std::size_t k = 0; k < pairs; ++k) {
      const Vec c_refk = matrix_row(cj.costs, k);
      const Vec c_clk = matrix_row(ci.costs, k);
      prof.c_d = distance(c_refk, c_clk);
      prof.norm_c_ref = norm(c_refk);
      prof.norm_c_cl = norm(c_clk);
      Vec tmp(c_refk.size());
      for (std::size_t q = 0; q < tmp.size(); ++q) tmp[q] = c_refk[q] - 2.0 * c_hat[q];
      prof.norm_c_ref_m2hat = norm(tmp);
      for (std::size_t q = 0; q < tmp.size(); ++q) tmp[q] = c_clk[q] - 2.0 * c_hat[q];
      prof.norm_c_cl_m2hat = norm(tmp);
      mean_h += heterogeneity_bound(prof, c_hat_norm);
    }
    delta_hat += ci.alpha * mean_h / static_cast<double>(pairs);
  }
  return delta_hat;
}

RademacherEstimate estimate_rademacher(const RademacherConfig& config,
                                       const Matrix& X, std::size_t n) {
  if (n == 0 || n > X.rows)
    throw ConfigError("estimate_rademacher: need 1 <= n <= |X|");
  if (config.draws == 0) throw ConfigError("estimate_rademacher: draws must be >= 1");

  std::vector<double> best(config.draws, 0.0);
  std::vector<char> ok(config.draws, 0);

  parallel_for(
      config.draws,
      [&](std::size_t t) {
        try {
          Rng rng(derive_seed(config.seed, 0x5AD, t));

          // Subsample n rows without replacement, then draw the sign matrix.
          std::vector<std::size_t> rows(X.rows);
          std::iota(rows.begin(), rows.end(), 0);
          rng.shuffle(rows);
          rows.resize(n);

          std::vector<Vec> sigma(n, Vec(config.output_dim));
          for (Vec& s : sigma)
            for (double& v : s) v = rng.sign();

          PredictorParams params =
              init_params(config.input_dim, config.hidden_dim, config.output_dim,
                          derive_seed(config.seed, 0x5AD1, t), config.tau);
          AdamState state(params, config.learning_rate);

          const auto objective = [&]() {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i)
              total += dot(sigma[i], forward(params, matrix_row(X, rows[i])));
            return total / static_cast<double>(n);
          };

          // the zero predictor is in the class, so 0 is always attainable
          double best_obj = std::max(0.0, objective());
          for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            for (std::size_t i = 0; i < n; ++i) {
              ForwardCache cache;
              forward(params, matrix_row(X, rows[i]), &cache);
              // Ascent on <sigma_i, f(x_i)>: descend its negation.
              ParamGrad grad = backward(params, cache, scaled(sigma[i], -1.0));
              clip_global_gradient(grad, config.grad_clip);
              adam_step(params, state, grad);
            }
            best_obj = std::max(best_obj, objective());
          }
          best[t] = best_obj;
          ok[t] = 1;
        } catch (const std::exception&) {
          ok[t] = 0;
        }
      },
      config.exec);

  RademacherEstimate out;
  std::vector<double> values;
  for (std::size_t t = 0; t < config.draws; ++t)
    if (ok[t]) values.push_back(best[t]);
  out.successes = values.size();
  if (out.successes * 2 < config.draws)
    throw ConfigError("estimate_rademacher: too many failed draws");

  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  out.estimate = mean;
  if (values.size() > 1) {
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size() - 1);
    out.standard_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

}  // namespace dffl
