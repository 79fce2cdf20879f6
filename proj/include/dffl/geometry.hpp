#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "dffl/linalg.hpp"

namespace dffl {

enum class SetKind { KnapsackPolytope, EntropySimplex, Box, Ball };

std::string to_string(SetKind kind);

/// Descriptor of a client's downstream feasible region. All four families are
/// nonempty and compact; an optional translation offset shifts the whole set
/// (the SPO+ loss is invariant to it, which the tests exercise).
struct FeasibleSet {
  SetKind kind = SetKind::Box;

  // KnapsackPolytope: { w in [0,1]^d : a.w <= budget }, a_i > 0, budget > 0.
  Vec knapsack_weights;
  double budget = 0.0;

  // EntropySimplex: { w in simplex_d : sum_i w_i log w_i <= entropy_r },
  // with -log d < entropy_r < 0.
  std::size_t entropy_dim = 0;
  double entropy_r = 0.0;

  // Box: [lo, hi] componentwise.
  Vec box_lo, box_hi;

  // Ball: center + radius; rho-strongly convex with rho == radius.
  Vec ball_center;
  double ball_radius = 0.0;

  Vec offset;  // translation v, zero by default

  static FeasibleSet knapsack(Vec weights, double budget);
  static FeasibleSet entropy(std::size_t dim, double r);
  static FeasibleSet box(Vec lo, Vec hi);
  static FeasibleSet ball(Vec center, double radius);

  /// Copy of this set translated by v.
  FeasibleSet translated(const Vec& v) const;

  std::size_t dim() const;

  /// True when the knapsack budget is non-binding (B >= sum a_i), in which
  /// case the set degenerates to the unit box and geometry switches to the
  /// box closed forms.
  bool knapsack_budget_slack() const;
};

struct SolveResult {
  Vec minimizer;
  double value = 0.0;
};

struct SetGeometry {
  double diameter = 0.0;
  double radius = 0.0;                  // max norm of point - centroid
  std::optional<double> strong_convexity_rho;
  Vec centroid;
};

/// Deterministic linear-minimization oracle: global minimizer of c.w over the
/// set and its value. Ties are broken by ascending coordinate index so the
/// oracle is a fixed selector.
SolveResult min_oracle(const FeasibleSet& set, const Vec& c);

/// xi_S(u) = max_{w in S} u.w, computed as -min_oracle(set, -u).value.
double support_function(const FeasibleSet& set, const Vec& u);

/// Support point: the argmax of u.w over the set.
SolveResult support_point(const FeasibleSet& set, const Vec& u);

/// Fractional knapsack LP: greedy over coordinates with c_i < 0 sorted by
/// c_i / a_i ascending, at most one fractional coordinate. Exact.
SolveResult solve_knapsack(const Vec& a, double budget, const Vec& c);

/// Entropy-constrained portfolio: min c.w over the simplex subject to
/// sum w_i log w_i <= r. KKT gives w_i proportional to exp(-c_i / b); the
/// temperature b is found by bisection until the entropy residual is <= tol.
SolveResult solve_entropy_portfolio(std::size_t dim, double r, const Vec& c,
                                    double tol = 1e-10);

/// Hausdorff distance between two knapsack sets sharing weights a:
/// |B2 - B1| / ||a||, with budgets capped at sum(a) where the constraint
/// stops binding.
double hausdorff_knapsack(const Vec& a, double budget1, double budget2);

/// Reusable subset-sum table for the knapsack diameter heuristic. Weights are
/// quantized up to `resolution` grid cells of the reference budget, so any
/// grid-feasible pack is feasible for the real weights.
class SubsetSumTable {
 public:
  SubsetSumTable(const Vec& weights, double grid_cell);

  /// Max-cardinality subset with total weight <= budget, restricted to the
  /// allowed coordinates. Returns chosen indices (ascending).
  std::vector<std::size_t> max_count_pack(double budget,
                                          const std::vector<bool>& allowed) const;

  double grid_cell() const { return grid_; }

 private:
  Vec weights_;
  std::vector<long> units_;  // ceil(a_i / grid)
  double grid_;
};

/// Heuristic knapsack diameter: two disjoint max-cardinality packs (two-bin
/// view via subset-sum DP), leftover budget slack spent fractionally on the
/// lightest unused coordinates. Always a feasible lower bound on the true
/// diameter; exact on small instances (tested against vertex enumeration).
double diameter_knapsack(const Vec& a, double budget,
                         std::size_t subset_sum_resolution = 10000);

/// Exact max-norm point of the knapsack set measured from the origin:
/// fill lowest-weight coordinates first, fractional last.
double radius_knapsack(const Vec& a, double budget);

/// Extreme points of the entropy set are spikes (p, q, ..., q) with
/// q = (1-p)/(d-1). Finds p in (1/d, 1) with spike entropy exactly r.
struct EntropySpike {
  double p = 0.0;
  double q = 0.0;
};
EntropySpike entropy_spike(std::size_t dim, double r, double tol = 1e-12);

/// Diameters of two entropy sets and their same-axis spike Hausdorff
/// distance (an approximation validated by sampling in the tests).
struct EntropyGeometry {
  double diameter1 = 0.0;
  double diameter2 = 0.0;
  double hausdorff = 0.0;
};
EntropyGeometry entropy_set_geometry(std::size_t dim, double r1, double r2);

/// Shape distance delta_N = inf_v d_H(A, B + v). Exact for entropy pairs,
/// ball pairs and box pairs; an upper bound for knapsack pairs sharing a
/// (the translation infimum is not solved there).
struct ShapeDistance {
  double value = 0.0;
  bool exact = false;
};
ShapeDistance shape_distance(const FeasibleSet& a, const FeasibleSet& b);

/// Diameter, radius, strong-convexity radius (where known) and centroid.
SetGeometry set_geometry(const FeasibleSet& set,
                         std::size_t subset_sum_resolution = 10000);

}  // namespace dffl
