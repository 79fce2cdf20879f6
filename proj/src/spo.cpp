#include "dffl/spo.hpp"

namespace dffl {

namespace {

// c - 2 c_hat
Vec surrogate_direction(const Vec& c_hat, const Vec& c) {
  Vec u(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) u[i] = c[i] - 2.0 * c_hat[i];
  return u;
}

}  // namespace

LossEval spo_plus_loss(const FeasibleSet& set, const Vec& c_hat, const Vec& c) {
  const SolveResult max_term = support_point(set, surrogate_direction(c_hat, c));
  const SolveResult truth = min_oracle(set, c);
  const SolveResult acted = min_oracle(set, c_hat);

  LossEval out;
  out.argmax_point = max_term.minimizer;
  out.decision = truth.minimizer;
  out.spo_plus = max_term.value + 2.0 * dot(c_hat, truth.minimizer) - truth.value;
  out.spo_regret = dot(c, acted.minimizer) - truth.value;
  return out;
}

double spo_regret(const FeasibleSet& set, const Vec& c_hat, const Vec& c) {
  const SolveResult acted = min_oracle(set, c_hat);
  const SolveResult truth = min_oracle(set, c);
  return dot(c, acted.minimizer) - truth.value;
}

Vec spo_plus_subgradient(const FeasibleSet& set, const Vec& c_hat, const Vec& c) {
  // w*(2 c_hat - c) is exactly the argmax of the surrogate's support term.
  const SolveResult max_term = support_point(set, surrogate_direction(c_hat, c));
  const SolveResult truth = min_oracle(set, c);
  Vec g(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    g[i] = 2.0 * (truth.minimizer[i] - max_term.minimizer[i]);
  return g;
}

LossGrad spo_plus_loss_and_subgradient(const FeasibleSet& set, const Vec& c_hat,
                                       const Vec& c) {
  const SolveResult max_term = support_point(set, surrogate_direction(c_hat, c));
  const SolveResult truth = min_oracle(set, c);

  LossGrad out;
  out.loss = max_term.value + 2.0 * dot(c_hat, truth.minimizer) - truth.value;
  out.subgradient.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    out.subgradient[i] = 2.0 * (truth.minimizer[i] - max_term.minimizer[i]);
  return out;
}

}  // namespace dffl
