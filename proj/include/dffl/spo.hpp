#pragma once

#include "dffl/geometry.hpp"
#include "dffl/linalg.hpp"

namespace dffl {

/// One SPO+ evaluation. spo_plus >= spo_regret >= 0 up to solver tolerance,
/// and both vanish at c_hat == c.
struct LossEval {
  double spo_plus = 0.0;
  double spo_regret = 0.0;
  Vec argmax_point;  // maximizer of (c - 2 c_hat).w, shared with the subgradient
  Vec decision;      // w*(c)
};

/// SPO+ surrogate: xi_S(c - 2 c_hat) + 2 c_hat.w*(c) - z*(c).
LossEval spo_plus_loss(const FeasibleSet& set, const Vec& c_hat, const Vec& c);

/// Realized decision suboptimality c.w*(c_hat) - z*(c) under the fixed oracle.
double spo_regret(const FeasibleSet& set, const Vec& c_hat, const Vec& c);

/// Subgradient of the SPO+ loss in the prediction: 2(w*(c) - w*(2 c_hat - c)).
/// Norm never exceeds twice the set diameter.
Vec spo_plus_subgradient(const FeasibleSet& set, const Vec& c_hat, const Vec& c);

/// Loss value and subgradient from the same two oracle solves; the training
/// loop's per-sample workhorse.
struct LossGrad {
  double loss = 0.0;
  Vec subgradient;
};
LossGrad spo_plus_loss_and_subgradient(const FeasibleSet& set, const Vec& c_hat,
                                       const Vec& c);

}  // namespace dffl
