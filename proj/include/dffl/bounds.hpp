#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dffl/datagen.hpp"
#include "dffl/geometry.hpp"
#include "dffl/linalg.hpp"
#include "dffl/parallel.hpp"

namespace dffl {

/// Pairwise heterogeneity summary feeding the discrepancy bounds. delta is
/// the family Hausdorff distance; delta_n the shape distance, equal to delta
/// where only the conservative substitution is available (knapsack).
struct HeterogeneityProfile {
  double c_d = 0.0;       // ||c_ref - c_cl||
  double delta = 0.0;     // Hausdorff
  double delta_n = 0.0;   // shape distance (<= delta)
  bool delta_n_exact = false;
  double d_ref = 0.0;
  double d_cl = 0.0;
  double d_min = 0.0;
  std::optional<double> rho_ref;
  std::optional<double> rho_cl;
  double norm_c_ref = 0.0;
  double norm_c_cl = 0.0;
  double norm_c_ref_m2hat = 0.0;  // ||c_ref - 2 c_hat||
  double norm_c_cl_m2hat = 0.0;   // ||c_cl - 2 c_hat||

  std::optional<double> rho_min() const;
};

/// Builds the profile for one (set, cost, prediction) pair of clients.
/// Set distances follow the family rules; throws UnsupportedPairError when
/// no rule applies.
HeterogeneityProfile make_profile(const FeasibleSet& ref_set, const FeasibleSet& cl_set,
                                  const Vec& c_ref, const Vec& c_cl, const Vec& c_hat);

/// General discrepancy bound:
/// 2||c_hat|| (delta_N + D_min)
///   + min{ D_ref c_d + delta_N (||c_cl - 2c_hat|| + ||c_cl||),
///          D_cl  c_d + delta_N (||c_ref - 2c_hat|| + ||c_ref||) }.
double heterogeneity_bound(const HeterogeneityProfile& profile, double c_hat_norm);

/// Strongly convex refinement: 2||c_hat|| Gamma + T with
/// Gamma = rho_min ||c_ref/||c_ref|| - c_cl/||c_cl|||| + delta_N + 2 sqrt(rho_min delta_N).
double heterogeneity_bound_sc(const HeterogeneityProfile& profile, const Vec& c_hat,
                              const Vec& c_ref, const Vec& c_cl);

/// Uniform SPO+ loss bound b = D C_max + 2 D tau.
double loss_bound_b(double diameter, double c_max, double tau);

/// Statistical complexity eps(n, delta) = 4 sqrt(2) D r_n + b sqrt(2 log(1/delta) / n).
double epsilon_term(std::size_t n, double diameter, double rademacher, double b,
                    double delta_conf);

struct FgCertificate {
  double ratio = 0.0;
  double difference = 0.0;
  bool helps = false;
};

/// ratio = eps_j / (eps_mix + delta_hat); difference = eps_j - eps_mix - delta_hat.
/// ratio > 1 iff difference > 0 (identical denominators), asserted exactly.
FgCertificate fg_certificate(double eps_j, double eps_mix, double delta_hat_j);

/// Pointwise Bregman bound (2 / rho) ||c_hat - c||^2 on strongly convex sets.
double spo_plus_quadratic_bound(double rho, const Vec& c_hat, const Vec& c);

/// Client-mixture discrepancy estimate: the alpha-weighted mean of the
/// pairwise discrepancy bounds, evaluated at the averaged prediction rescaled
/// to norm `output_bound`. Cost pairs are formed by index under the shared-
/// covariate coupling.
double estimate_mixture_discrepancy(const std::vector<ClientDataset>& clients,
                                    std::size_t j, const Vec& avg_prediction,
                                    double output_bound);

struct RademacherConfig {
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 50;
  double tau = 20.0;
  std::size_t draws = 20;  // T
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  ExecMode exec = default_exec_mode();
};

struct RademacherEstimate {
  double estimate = 0.0;
  std::optional<double> standard_error;  // absent for a single draw
  std::size_t successes = 0;
};

/// Heuristic lower-bound estimate of the empirical Rademacher complexity:
/// per draw, train a fresh clipped predictor to maximize
/// (1/n) sum_i <sigma_i, f(x_i)> and average the best attained objective.
RademacherEstimate estimate_rademacher(const RademacherConfig& config,
                                       const Matrix& X, std::size_t n);

}  // namespace dffl
