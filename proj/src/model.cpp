#include "dffl/model.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "dffl/errors.hpp"
#include "dffl/rng.hpp"

namespace dffl {

ParamGrad ParamGrad::zeros_like(const PredictorParams& p) {
  ParamGrad g;
  g.w1.assign(p.w1.size(), 0.0);
  g.b1.assign(p.b1.size(), 0.0);
  g.w2.assign(p.w2.size(), 0.0);
  g.b2.assign(p.b2.size(), 0.0);
  return g;
}

void ParamGrad::accumulate(const ParamGrad& other) {
  for (std::size_t i = 0; i < w1.size(); ++i) w1[i] += other.w1[i];
  for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += other.b1[i];
  for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += other.w2[i];
  for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += other.b2[i];
}

void ParamGrad::scale(double s) {
  for (double& v : w1) v *= s;
  for (double& v : b1) v *= s;
  for (double& v : w2) v *= s;
  for (double& v : b2) v *= s;
}

double ParamGrad::global_norm() const {
  return std::sqrt(squared_norm(w1) + squared_norm(b1) + squared_norm(w2) +
                   squared_norm(b2));
}

AdamState::AdamState(const PredictorParams& p, double lr) : learning_rate(lr) {
  m_w1.assign(p.w1.size(), 0.0);
  m_b1.assign(p.b1.size(), 0.0);
  m_w2.assign(p.w2.size(), 0.0);
  m_b2.assign(p.b2.size(), 0.0);
  v_w1 = m_w1;
  v_b1 = m_b1;
  v_w2 = m_w2;
  v_b2 = m_b2;
}

PredictorParams init_params(std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t output_dim, std::uint64_t seed,
                            double tau) {
  if (input_dim == 0 || hidden_dim == 0 || output_dim == 0)
    throw ConfigError("init_params: dimensions must be positive");
  if (!(tau > 0.0)) throw ConfigError("init_params: tau must be positive");

  PredictorParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.output_dim = output_dim;
  p.tau = tau;
  p.b1.assign(hidden_dim, 0.0);
  p.b2.assign(output_dim, 0.0);
  p.w1.resize(hidden_dim * input_dim);
  p.w2.resize(output_dim * hidden_dim);

  Rng rng(derive_seed(seed, 0x11));
  const double lim1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
  for (double& w : p.w1) w = rng.uniform(-lim1, lim1);
  const double lim2 = std::sqrt(6.0 / static_cast<double>(hidden_dim + output_dim));
  for (double& w : p.w2) w = rng.uniform(-lim2, lim2);
  return p;
}

Vec forward(const PredictorParams& p, const Vec& x, ForwardCache* cache) {
  if (x.size() != p.input_dim) throw ConfigError("forward: input size mismatch");
  require_finite(x, "forward input");

  Vec z1(p.hidden_dim);
  for (std::size_t h = 0; h < p.hidden_dim; ++h) {
    double s = p.b1[h];
    const double* row = &p.w1[h * p.input_dim];
    for (std::size_t i = 0; i < p.input_dim; ++i) s += row[i] * x[i];
    z1[h] = s;
  }
  Vec hidden(p.hidden_dim);
  for (std::size_t h = 0; h < p.hidden_dim; ++h)
    hidden[h] = z1[h] > 0.0 ? z1[h] : 0.0;

  Vec u(p.output_dim);
  for (std::size_t o = 0; o < p.output_dim; ++o) {
    double s = p.b2[o];
    const double* row = &p.w2[o * p.hidden_dim];
    for (std::size_t h = 0; h < p.hidden_dim; ++h) s += row[h] * hidden[h];
    u[o] = s;
  }

  const double un = norm(u);
  const double scale = std::min(1.0, p.tau / (un + p.clip_eps));
  Vec out(p.output_dim);
  for (std::size_t o = 0; o < p.output_dim; ++o) out[o] = scale * u[o];

  if (cache != nullptr) {
    cache->x = x;
    cache->z1 = std::move(z1);
    cache->hidden = std::move(hidden);
    cache->preclip = std::move(u);
    cache->preclip_norm = un;
    cache->clip_scale = scale;
  }
  return out;
}

ParamGrad backward(const PredictorParams& p, const ForwardCache& cache,
                   const Vec& output_subgradient) {
  if (output_subgradient.size() != p.output_dim)
    throw ConfigError("backward: output subgradient size mismatch");

  // Clip layer VJP. Active branch: d(s(u) u)/du = s I - tau u u^T / ((||u||+eps)^2 ||u||).
  Vec du(p.output_dim);
  if (cache.clip_scale >= 1.0) {
    du = output_subgradient;
  } else {
    const double denom = cache.preclip_norm + p.clip_eps;
    const double gu = dot(output_subgradient, cache.preclip);
    const double coeff = p.tau * gu / (denom * denom * cache.preclip_norm);
    for (std::size_t o = 0; o < p.output_dim; ++o)
      du[o] = cache.clip_scale * output_subgradient[o] - coeff * cache.preclip[o];
  }

  ParamGrad g = ParamGrad::zeros_like(p);
  g.b2 = du;
  for (std::size_t o = 0; o < p.output_dim; ++o) {
    double* row = &g.w2[o * p.hidden_dim];
    for (std::size_t h = 0; h < p.hidden_dim; ++h)
      row[h] = du[o] * cache.hidden[h];
  }

  Vec dz1(p.hidden_dim, 0.0);
  for (std::size_t o = 0; o < p.output_dim; ++o) {
    const double* row = &p.w2[o * p.hidden_dim];
    for (std::size_t h = 0; h < p.hidden_dim; ++h) dz1[h] += row[h] * du[o];
  }
  for (std::size_t h = 0; h < p.hidden_dim; ++h)
    if (cache.z1[h] <= 0.0) dz1[h] = 0.0;

  g.b1 = dz1;
  for (std::size_t h = 0; h < p.hidden_dim; ++h) {
    double* row = &g.w1[h * p.input_dim];
    for (std::size_t i = 0; i < p.input_dim; ++i) row[i] = dz1[h] * cache.x[i];
  }
  return g;
}

void clip_global_gradient(ParamGrad& grad, double c_max) {
  const double n = grad.global_norm();
  if (n > c_max && n > 0.0) grad.scale(c_max / n);
}

namespace {

void adam_block(Vec& param, Vec& m, Vec& v, const Vec& g, double lr,
                double beta1, double beta2, double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

void adam_step(PredictorParams& p, AdamState& state, const ParamGrad& grad) {
  if (grad.w1.size() != p.w1.size() || grad.w2.size() != p.w2.size())
    throw ConfigError("adam_step: gradient shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  adam_block(p.w1, state.m_w1, state.v_w1, grad.w1, state.learning_rate,
             state.beta1, state.beta2, state.epsilon, bc1, bc2);
  adam_block(p.b1, state.m_b1, state.v_b1, grad.b1, state.learning_rate,
             state.beta1, state.beta2, state.epsilon, bc1, bc2);
  adam_block(p.w2, state.m_w2, state.v_w2, grad.w2, state.learning_rate,
             state.beta1, state.beta2, state.epsilon, bc1, bc2);
  adam_block(p.b2, state.m_b2, state.v_b2, grad.b2, state.learning_rate,
             state.beta1, state.beta2, state.epsilon, bc1, bc2);
}

Vec matrix_row(const Matrix& m, std::size_t i) {
  return Vec(m.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols),
             m.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.cols));
}

double mse(const PredictorParams& p, const Matrix& X, const Matrix& C) {
  if (X.rows != C.rows) throw ConfigError("mse: sample count mismatch");
  if (X.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < X.rows; ++i) {
    const Vec pred = forward(p, matrix_row(X, i));
    double sq = 0.0;
    for (std::size_t k = 0; k < C.cols; ++k) {
      const double d = pred[k] - C(i, k);
      sq += d * d;
    }
    total += sq;
  }
  return total / static_cast<double>(X.rows);
}

std::string params_to_json(const PredictorParams& p) {
  nlohmann::json j;
  j["input_dim"] = p.input_dim;
  j["hidden_dim"] = p.hidden_dim;
  j["output_dim"] = p.output_dim;
  j["tau"] = p.tau;
  j["clip_eps"] = p.clip_eps;
  j["w1"] = p.w1;
  j["b1"] = p.b1;
  j["w2"] = p.w2;
  j["b2"] = p.b2;
  return j.dump();
}

PredictorParams params_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  PredictorParams p;
  p.input_dim = j.at("input_dim").get<std::size_t>();
  p.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  p.output_dim = j.at("output_dim").get<std::size_t>();
  p.tau = j.at("tau").get<double>();
  p.clip_eps = j.at("clip_eps").get<double>();
  p.w1 = j.at("w1").get<Vec>();
  p.b1 = j.at("b1").get<Vec>();
  p.w2 = j.at("w2").get<Vec>();
  p.b2 = j.at("b2").get<Vec>();
  if (p.w1.size() != p.hidden_dim * p.input_dim ||
      p.w2.size() != p.output_dim * p.hidden_dim ||
      p.b1.size() != p.hidden_dim || p.b2.size() != p.output_dim)
    throw ConfigError("params_from_json: inconsistent shapes");
  return p;
}

void save_params(const PredictorParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_params: cannot open " + path);
  out << params_to_json(p);
}

PredictorParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_params: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return params_from_json(text);
}

}  // namespace dffl
