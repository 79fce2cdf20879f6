#pragma once

#include <cstdint>
#include <string>

#include "dffl/linalg.hpp"

namespace dffl {

/// Shallow ReLU predictor x -> hidden -> output with an l2 clip on the
/// output: c_hat = u * min(1, tau / (||u|| + clip_eps)), so ||c_hat|| <= tau
/// always holds by construction.
struct PredictorParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;
  double tau = 20.0;
  double clip_eps = 1e-8;
  Vec w1;  // hidden x input, row-major
  Vec b1;  // hidden
  Vec w2;  // output x hidden, row-major
  Vec b2;  // output

  std::size_t parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }
};

/// Gradient holder with the same block layout as PredictorParams.
struct ParamGrad {
  Vec w1, b1, w2, b2;

  static ParamGrad zeros_like(const PredictorParams& p);
  void accumulate(const ParamGrad& other);
  void scale(double s);
  double global_norm() const;
};

struct ForwardCache {
  Vec x;           // input
  Vec z1;          // pre-activation
  Vec hidden;      // relu(z1)
  Vec preclip;     // u = W2 hidden + b2
  double preclip_norm = 0.0;
  double clip_scale = 1.0;
};

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  Vec m_w1, m_b1, m_w2, m_b2;
  Vec v_w1, v_b1, v_w2, v_b2;

  explicit AdamState(const PredictorParams& p, double lr = 1e-3);
};

/// Seeded init: weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
PredictorParams init_params(std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t output_dim, std::uint64_t seed,
                            double tau = 20.0);

/// Returns the clipped prediction; fills `cache` when given (needed for backward).
Vec forward(const PredictorParams& p, const Vec& x, ForwardCache* cache = nullptr);

/// Exact vector-Jacobian product through clip, affine and ReLU layers for an
/// externally supplied subgradient at the output.
ParamGrad backward(const PredictorParams& p, const ForwardCache& cache,
                   const Vec& output_subgradient);

/// Rescale to global l2 norm c_max when it exceeds c_max; identity otherwise.
void clip_global_gradient(ParamGrad& grad, double c_max = 1.0);

/// Bias-corrected Adam update in place.
void adam_step(PredictorParams& p, AdamState& state, const ParamGrad& grad);

/// Mean squared l2 prediction error over a dataset (rows of X against rows of C).
double mse(const PredictorParams& p, const Matrix& X, const Matrix& C);

Vec matrix_row(const Matrix& m, std::size_t i);

// Checkpoint layout: JSON object with dims header then w1, b1, w2, b2.
std::string params_to_json(const PredictorParams& p);
PredictorParams params_from_json(const std::string& text);
void save_params(const PredictorParams& p, const std::string& path);
PredictorParams load_params(const std::string& path);

}  // namespace dffl
