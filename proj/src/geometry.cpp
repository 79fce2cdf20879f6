#include "dffl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "dffl/errors.hpp"

namespace dffl {

namespace {

constexpr int kMaxBisectionIters = 200;
constexpr double kTempLo = 1e-8;
constexpr double kTempHi = 1e8;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

Vec zeros(std::size_t n) { return Vec(n, 0.0); }

void apply_offset(const FeasibleSet& set, const Vec& c, SolveResult& res) {
  if (set.offset.empty()) return;
  for (std::size_t i = 0; i < res.minimizer.size(); ++i)
    res.minimizer[i] += set.offset[i];
  res.value = dot(c, res.minimizer);
}

}  // namespace

std::string to_string(SetKind kind) {
  switch (kind) {
    case SetKind::KnapsackPolytope: return "knapsack";
    case SetKind::EntropySimplex: return "entropy";
    case SetKind::Box: return "box";
    case SetKind::Ball: return "ball";
  }
  return "unknown";
}

FeasibleSet FeasibleSet::knapsack(Vec weights, double budget) {
  if (weights.empty()) throw ConfigError("knapsack: empty weight vector");
  require_finite(weights, "knapsack weights");
  for (double w : weights)
    if (w <= 0.0) throw ConfigError("knapsack: weights must be positive");
  if (!(budget > 0.0) || !std::isfinite(budget))
    throw ConfigError("knapsack: budget must be positive");
  FeasibleSet s;
  s.kind = SetKind::KnapsackPolytope;
  s.knapsack_weights = std::move(weights);
  s.budget = budget;
  return s;
}

FeasibleSet FeasibleSet::entropy(std::size_t dim, double r) {
  if (dim < 2) throw ConfigError("entropy set: dimension must be >= 2");
  const double lo = -std::log(static_cast<double>(dim));
  if (!(r > lo) || !(r < 0.0))
    throw ConfigError("entropy set: threshold must satisfy -log d < r < 0");
  FeasibleSet s;
  s.kind = SetKind::EntropySimplex;
  s.entropy_dim = dim;
  s.entropy_r = r;
  return s;
}

FeasibleSet FeasibleSet::box(Vec lo, Vec hi) {
  if (lo.empty() || lo.size() != hi.size()) throw ConfigError("box: corner size mismatch");
  require_finite(lo, "box lower corner");
  require_finite(hi, "box upper corner");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (lo[i] > hi[i]) throw ConfigError("box: lower corner exceeds upper");
  FeasibleSet s;
  s.kind = SetKind::Box;
  s.box_lo = std::move(lo);
  s.box_hi = std::move(hi);
  return s;
}

FeasibleSet FeasibleSet::ball(Vec center, double radius) {
  if (center.empty()) throw ConfigError("ball: empty center");
  require_finite(center, "ball center");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ConfigError("ball: radius must be positive");
  FeasibleSet s;
  s.kind = SetKind::Ball;
  s.ball_center = std::move(center);
  s.ball_radius = radius;
  return s;
}

FeasibleSet FeasibleSet::translated(const Vec& v) const {
  if (v.size() != dim()) throw ConfigError("translated: dimension mismatch");
  require_finite(v, "translation offset");
  FeasibleSet out = *this;
  if (out.offset.empty()) out.offset = zeros(dim());
  for (std::size_t i = 0; i < v.size(); ++i) out.offset[i] += v[i];
  return out;
}

std::size_t FeasibleSet::dim() const {
  switch (kind) {
    case SetKind::KnapsackPolytope: return knapsack_weights.size();
    case SetKind::EntropySimplex: return entropy_dim;
    case SetKind::Box: return box_lo.size();
    case SetKind::Ball: return ball_center.size();
  }
  return 0;
}

bool FeasibleSet::knapsack_budget_slack() const {
  if (kind != SetKind::KnapsackPolytope) return false;
  const double total = std::accumulate(knapsack_weights.begin(),
                                       knapsack_weights.end(), 0.0);
  return budget >= total;
}

SolveResult solve_knapsack(const Vec& a, double budget, const Vec& c) {
  if (a.size() != c.size()) throw ConfigError("solve_knapsack: size mismatch");
  require_finite(c, "knapsack cost");
  for (double w : a)
    if (!(w > 0.0)) throw ConfigError("solve_knapsack: weights must be positive");
  if (!(budget > 0.0)) throw ConfigError("solve_knapsack: budget must be positive");

  // Profitable coordinates sorted by cost-to-weight ratio, most negative
  // first; ties broken by index so the oracle is a fixed selector.
  std::vector<std::size_t> order;
  order.reserve(a.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i] < 0.0) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const double ri = c[i] / a[i];
    const double rj = c[j] / a[j];
    if (ri != rj) return ri < rj;
    return i < j;
  });

  SolveResult res;
  res.minimizer = zeros(a.size());
  double remaining = budget;
  for (std::size_t i : order) {
    if (remaining <= 0.0) break;
    const double take = std::min(1.0, remaining / a[i]);
    res.minimizer[i] = take;
    remaining -= take * a[i];
  }
  res.value = dot(c, res.minimizer);
  return res;
}

namespace {

// Softmax with temperature b over -c (shift-stabilized), plus its negentropy.
struct SoftmaxEval {
  Vec w;
  double negentropy = 0.0;
};

SoftmaxEval entropy_softmax(const Vec& c, double b) {
  const double cmin = *std::min_element(c.begin(), c.end());
  SoftmaxEval out;
  out.w.resize(c.size());
  double z = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out.w[i] = std::exp(-(c[i] - cmin) / b);
    z += out.w[i];
  }
  const double logz = std::log(z);
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out.w[i] /= z;
    if (out.w[i] > 0.0) s += out.w[i] * (-(c[i] - cmin) / b - logz);
  }
  out.negentropy = s;
  return out;
}

}  // namespace

SolveResult solve_entropy_portfolio(std::size_t dim, double r, const Vec& c,
                                    double tol) {
  if (dim < 2) throw ConfigError("entropy solve: dimension must be >= 2");
  if (c.size() != dim) throw ConfigError("entropy solve: size mismatch");
  require_finite(c, "entropy cost");
  if (!(tol > 0.0)) throw ConfigError("entropy solve: tol must be positive");
  const double neg_log_d = -std::log(static_cast<double>(dim));
  if (r < neg_log_d || r >= 0.0)
    throw ConfigError("entropy solve: threshold must satisfy -log d <= r < 0");

  SolveResult res;
  const double uniform = 1.0 / static_cast<double>(dim);

  // Maximal entropy or a constant cost vector forces the uniform portfolio.
  const double spread = *std::max_element(c.begin(), c.end()) -
                        *std::min_element(c.begin(), c.end());
  if (r <= neg_log_d + 1e-13 || spread == 0.0) {
    res.minimizer = Vec(dim, uniform);
    res.value = dot(c, res.minimizer);
    return res;
  }

  // Negentropy of the softmax path decreases in the temperature b. If even
  // the coldest point is below r (possible only with ties at the minimum
  // cost), the entropy constraint is slack at the LP optimum and the coldest
  // point is already optimal.
  SoftmaxEval lo_eval = entropy_softmax(c, kTempLo);
  if (lo_eval.negentropy <= r) {
    res.minimizer = std::move(lo_eval.w);
    res.value = dot(c, res.minimizer);
    return res;
  }

  double lo = kTempLo, hi = kTempHi;
  SoftmaxEval mid_eval;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kMaxBisectionIters; ++it) {
    const double mid = std::sqrt(lo * hi);  // geometric midpoint: b spans 16 decades
    mid_eval = entropy_softmax(c, mid);
    residual = std::abs(mid_eval.negentropy - r);
    if (residual <= tol) {
      res.minimizer = std::move(mid_eval.w);
      res.value = dot(c, res.minimizer);
      return res;
    }
    if (mid_eval.negentropy > r)
      lo = mid;
    else
      hi = mid;
  }
  throw BisectionError("entropy bisection did not converge", residual);
}

SolveResult min_oracle(const FeasibleSet& set, const Vec& c) {
  if (c.size() != set.dim()) throw ConfigError("min_oracle: dimension mismatch");
  require_finite(c, "min_oracle cost");

  SolveResult res;
  switch (set.kind) {
    case SetKind::KnapsackPolytope:
      res = solve_knapsack(set.knapsack_weights, set.budget, c);
      break;
    case SetKind::EntropySimplex:
      res = solve_entropy_portfolio(set.entropy_dim, set.entropy_r, c);
      break;
    case SetKind::Box: {
      res.minimizer.resize(c.size());
      for (std::size_t i = 0; i < c.size(); ++i)
        res.minimizer[i] = c[i] < 0.0 ? set.box_hi[i] : set.box_lo[i];
      res.value = dot(c, res.minimizer);
      break;
    }
    case SetKind::Ball: {
      const double cn = norm(c);
      res.minimizer = set.ball_center;
      if (cn > 0.0) {
        for (std::size_t i = 0; i < c.size(); ++i)
          res.minimizer[i] -= set.ball_radius * c[i] / cn;
      }
      res.value = dot(c, res.minimizer);
      break;
    }
  }
  apply_offset(set, c, res);
  return res;
}

double support_function(const FeasibleSet& set, const Vec& u) {
  return -min_oracle(set, scaled(u, -1.0)).value;
}

SolveResult support_point(const FeasibleSet& set, const Vec& u) {
  SolveResult res = min_oracle(set, scaled(u, -1.0));
  res.value = -res.value;
  return res;
}

double hausdorff_knapsack(const Vec& a, double budget1, double budget2) {
  if (a.empty()) throw ConfigError("hausdorff_knapsack: empty weights");
  for (double w : a)
    if (!(w > 0.0)) throw ConfigError("hausdorff_knapsack: weights must be positive");
  if (!(budget1 > 0.0) || !(budget2 > 0.0))
    throw ConfigError("hausdorff_knapsack: budgets must be positive");
  // Past sum(a) the constraint stops binding, so cap budgets there: the set
  // no longer changes and the plane-distance formula would overstate.
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  const double b1 = std::min(budget1, total);
  const double b2 = std::min(budget2, total);
  return std::abs(b2 - b1) / norm(a);
}

SubsetSumTable::SubsetSumTable(const Vec& weights, double grid_cell)
    : weights_(weights), grid_(grid_cell) {
  if (!(grid_cell > 0.0)) throw ConfigError("SubsetSumTable: grid cell must be positive");
  units_.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    long u = static_cast<long>(std::ceil(weights[i] / grid_));
    if (static_cast<double>(u) * grid_ < weights[i]) ++u;  // round up, never under
    units_[i] = std::max(u, 1L);
  }
}

std::vector<std::size_t> SubsetSumTable::max_count_pack(
    double budget, const std::vector<bool>& allowed) const {
  long cap = static_cast<long>(std::floor(budget / grid_));
  while (static_cast<double>(cap) * grid_ > budget) --cap;
  if (cap < 0) return {};

  const std::size_t n = weights_.size();
  const std::size_t width = static_cast<std::size_t>(cap) + 1;
  // hist[i][s]: best count using items 0..i at unit-sum exactly s; -1 = unreachable.
  std::vector<std::int16_t> hist(n * width, -1);
  auto at = [&](std::size_t i, std::size_t s) -> std::int16_t& {
    return hist[i * width + s];
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < width; ++s)
      at(i, s) = (i == 0) ? std::int16_t{-1} : at(i - 1, s);
    if (i == 0) at(0, 0) = 0;
    if (!allowed[i]) continue;
    const long u = units_[i];
    if (u > cap) continue;
    if (i == 0) {
      at(0, static_cast<std::size_t>(u)) = 1;
      continue;
    }
    for (long s = cap; s >= u; --s) {
      const std::int16_t prev = at(i - 1, static_cast<std::size_t>(s - u));
      if (prev >= 0 && prev + 1 > at(i, static_cast<std::size_t>(s)))
        at(i, static_cast<std::size_t>(s)) = static_cast<std::int16_t>(prev + 1);
    }
  }

  // Best count; among ties the smallest grid weight leaves the most slack.
  std::int16_t best = 0;
  std::size_t best_s = 0;
  for (std::size_t s = 0; s < width; ++s) {
    if (at(n - 1, s) > best) {
      best = at(n - 1, s);
      best_s = s;
    }
  }
  if (best <= 0) return {};

  std::vector<std::size_t> picked;
  std::size_t s = best_s;
  for (std::size_t i = n; i-- > 0;) {
    const std::int16_t cur = at(i, s);
    const std::int16_t without =
        (i == 0) ? static_cast<std::int16_t>(s == 0 ? 0 : -1) : at(i - 1, s);
    if (cur == without) continue;  // prefer skipping when indifferent
    picked.push_back(i);
    s -= static_cast<std::size_t>(units_[i]);
  }
  std::reverse(picked.begin(), picked.end());
  return picked;
}

namespace {

double knapsack_diameter_impl(const SubsetSumTable& table, const Vec& a,
                              double budget) {
  const std::size_t d = a.size();
  std::vector<bool> allowed(d, true);
  const std::vector<std::size_t> bin1 = table.max_count_pack(budget, allowed);
  for (std::size_t i : bin1) allowed[i] = false;
  const std::vector<std::size_t> bin2 = table.max_count_pack(budget, allowed);

  Vec x = Vec(d, 0.0), w = Vec(d, 0.0);
  double used1 = 0.0, used2 = 0.0;
  for (std::size_t i : bin1) {
    x[i] = 1.0;
    used1 += a[i];
  }
  for (std::size_t i : bin2) {
    w[i] = 1.0;
    used2 += a[i];
    allowed[i] = false;
  }

  // Spend leftover budget fractionally on the lightest unused coordinates,
  // a different one per side.
  std::vector<std::size_t> unused;
  for (std::size_t i = 0; i < d; ++i)
    if (allowed[i]) unused.push_back(i);
  std::sort(unused.begin(), unused.end(), [&](std::size_t i, std::size_t j) {
    if (a[i] != a[j]) return a[i] < a[j];
    return i < j;
  });

  std::size_t next = 0;
  const double slack1 = budget - used1;
  if (slack1 > 0.0 && next < unused.size()) {
    const std::size_t k = unused[next++];
    x[k] = std::min(1.0, slack1 / a[k]);
  }
  const double slack2 = budget - used2;
  if (slack2 > 0.0 && next < unused.size()) {
    const std::size_t k = unused[next++];
    w[k] = std::min(1.0, slack2 / a[k]);
  }
  return distance(x, w);
}

}  // namespace

double diameter_knapsack(const Vec& a, double budget,
                         std::size_t subset_sum_resolution) {
  if (a.empty()) throw ConfigError("diameter_knapsack: empty weights");
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  if (budget >= total) return std::sqrt(static_cast<double>(a.size()));
  const SubsetSumTable table(a, budget / static_cast<double>(subset_sum_resolution));
  return knapsack_diameter_impl(table, a, budget);
}

double radius_knapsack(const Vec& a, double budget) {
  if (a.empty()) throw ConfigError("radius_knapsack: empty weights");
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  if (budget >= total) return std::sqrt(static_cast<double>(a.size()));

  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (a[i] != a[j]) return a[i] < a[j];
    return i < j;
  });

  double remaining = budget;
  double sq = 0.0;
  for (std::size_t i : order) {
    if (remaining <= 0.0) break;
    const double take = std::min(1.0, remaining / a[i]);
    sq += take * take;
    remaining -= take * a[i];
  }
  return std::sqrt(sq);
}

EntropySpike entropy_spike(std::size_t dim, double r, double tol) {
  if (dim < 2) throw ConfigError("entropy_spike: dimension must be >= 2");
  const double neg_log_d = -std::log(static_cast<double>(dim));
  if (r < neg_log_d || r >= 0.0)
    throw ConfigError("entropy_spike: threshold must satisfy -log d <= r < 0");

  const double uniform = 1.0 / static_cast<double>(dim);
  if (r <= neg_log_d + 1e-13) return {uniform, uniform};

  const auto spike_negentropy = [&](double p) {
    const double q = (1.0 - p) / static_cast<double>(dim - 1);
    return xlogx(p) + static_cast<double>(dim - 1) * xlogx(q);
  };

  // Negentropy of the spike rises monotonically from -log d (uniform) to 0
  // as p goes from 1/d to 1.
  double lo = uniform, hi = 1.0;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kMaxBisectionIters; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = spike_negentropy(mid);
    residual = std::abs(f - r);
    if (residual <= tol)
      return {mid, (1.0 - mid) / static_cast<double>(dim - 1)};
    if (f < r)
      lo = mid;
    else
      hi = mid;
  }
  throw BisectionError("entropy_spike bisection did not converge", residual);
}

EntropyGeometry entropy_set_geometry(std::size_t dim, double r1, double r2) {
  const EntropySpike s1 = entropy_spike(dim, r1);
  const EntropySpike s2 = entropy_spike(dim, r2);
  EntropyGeometry g;
  g.diameter1 = std::sqrt(2.0) * (s1.p - s1.q);
  g.diameter2 = std::sqrt(2.0) * (s2.p - s2.q);
  // Same-axis spike distance: the difference vector is (p1-p2) on the spike
  // axis and -(p1-p2)/(d-1) on the remaining d-1 coordinates.
  const double dd = static_cast<double>(dim);
  g.hausdorff = std::abs(s1.p - s2.p) * std::sqrt(dd / (dd - 1.0));
  return g;
}

ShapeDistance shape_distance(const FeasibleSet& a, const FeasibleSet& b) {
  const auto unsupported = [&](const char* why) -> UnsupportedPairError {
    const double bound = std::max(set_geometry(a).radius, set_geometry(b).radius);
    return UnsupportedPairError(std::string("shape_distance: ") + why +
                                    " (centroid-aligned Hausdorff <= " +
                                    std::to_string(bound) + ")",
                                bound);
  };

  if (a.kind != b.kind) throw unsupported("cross-family pair");
  switch (a.kind) {
    case SetKind::KnapsackPolytope: {
      if (a.knapsack_weights.size() != b.knapsack_weights.size())
        throw unsupported("knapsack dimension mismatch");
      for (std::size_t i = 0; i < a.knapsack_weights.size(); ++i)
        if (std::abs(a.knapsack_weights[i] - b.knapsack_weights[i]) > 1e-12)
          throw unsupported("knapsack pair with different weights");
      const double h = hausdorff_knapsack(a.knapsack_weights, a.budget, b.budget);
      // Translation infimum not solved for this family: delta_N <= h.
      return {h, h == 0.0};
    }
    case SetKind::EntropySimplex: {
      if (a.entropy_dim != b.entropy_dim)
        throw unsupported("entropy dimension mismatch");
      const EntropyGeometry g =
          entropy_set_geometry(a.entropy_dim, a.entropy_r, b.entropy_r);
      // Both sets contain the uniform point, so centering is already optimal
      // and the family Hausdorff equals delta_N.
      return {g.hausdorff, true};
    }
    case SetKind::Box: {
      if (a.box_lo.size() != b.box_lo.size())
        throw unsupported("box dimension mismatch");
      double excess_a = 0.0, excess_b = 0.0;
      for (std::size_t i = 0; i < a.box_lo.size(); ++i) {
        const double ea = 0.5 * (a.box_hi[i] - a.box_lo[i]);
        const double eb = 0.5 * (b.box_hi[i] - b.box_lo[i]);
        excess_a += std::pow(std::max(ea - eb, 0.0), 2);
        excess_b += std::pow(std::max(eb - ea, 0.0), 2);
      }
      return {std::sqrt(std::max(excess_a, excess_b)), true};
    }
    case SetKind::Ball:
      return {std::abs(a.ball_radius - b.ball_radius), true};
  }
  throw unsupported("unknown set kind");
}

SetGeometry set_geometry(const FeasibleSet& set, std::size_t subset_sum_resolution) {
  SetGeometry g;
  const std::size_t d = set.dim();
  g.centroid = set.offset.empty() ? zeros(d) : set.offset;
  switch (set.kind) {
    case SetKind::KnapsackPolytope: {
      if (set.knapsack_budget_slack()) {
        const double rootd = std::sqrt(static_cast<double>(d));
        g.diameter = rootd;
        g.radius = 0.5 * rootd;
        for (std::size_t i = 0; i < d; ++i) g.centroid[i] += 0.5;
      } else {
        g.diameter = diameter_knapsack(set.knapsack_weights, set.budget,
                                       subset_sum_resolution);
        // Reference point is the origin (always feasible): the greedy
        // max-norm point is exact.
        g.radius = radius_knapsack(set.knapsack_weights, set.budget);
      }
      break;
    }
    case SetKind::EntropySimplex: {
      const EntropySpike s = entropy_spike(set.entropy_dim, set.entropy_r);
      const double dd = static_cast<double>(set.entropy_dim);
      g.diameter = std::sqrt(2.0) * (s.p - s.q);
      g.radius = (s.p - 1.0 / dd) * std::sqrt(dd / (dd - 1.0));
      for (std::size_t i = 0; i < d; ++i) g.centroid[i] += 1.0 / dd;
      break;
    }
    case SetKind::Box: {
      g.diameter = distance(set.box_hi, set.box_lo);
      g.radius = 0.5 * g.diameter;
      for (std::size_t i = 0; i < d; ++i)
        g.centroid[i] += 0.5 * (set.box_lo[i] + set.box_hi[i]);
      break;
    }
    case SetKind::Ball: {
      g.diameter = 2.0 * set.ball_radius;
      g.radius = set.ball_radius;
      g.strong_convexity_rho = set.ball_radius;
      for (std::size_t i = 0; i < d; ++i) g.centroid[i] += set.ball_center[i];
      break;
    }
  }
  return g;
}

}  // namespace dffl
