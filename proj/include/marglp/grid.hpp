#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

// Discretized rectangular domains, tensor-grid scalar fields, and the
// quadrature operators (full integral, one-axis marginal, all-but-one-axis
// co-marginal) used throughout the library.
//
// Tensor order is row-major with axis 0 slowest; this is fixed once and
// documented in docs/formats.md so serialized fields are portable.

namespace marglp {

// Input/configuration problems (bad bounds, bad exponents, bad node counts).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Structurally incompatible operands (fields on different grids, wrong sizes).
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Runtime data problems (inconsistent marginal masses, misaligned blocks,
// positivity violations).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class QuadScheme { Midpoint, Trapezoid };

const char* to_string(QuadScheme s);
QuadScheme quad_scheme_from_string(const std::string& s);

/// One coordinate axis: interval, nodes and quadrature weights.
struct Axis {
  double lower = 0.0;
  double upper = 1.0;
  Eigen::ArrayXd nodes;
  Eigen::ArrayXd quad_weights;
  QuadScheme scheme = QuadScheme::Midpoint;
  // True when this axis stands in for an unbounded interval via explicit
  // truncation. Surfaced in every report that touches the axis.
  bool truncated = false;

  Eigen::Index count() const { return nodes.size(); }
};

/// Uniform-node axis with the requested quadrature rule. Midpoint is the
/// default scheme elsewhere in the library: it never places nodes on the
/// boundary, so boundary-singular densities stay finite.
Axis build_axis(double lower, double upper, Eigen::Index node_count,
                QuadScheme scheme = QuadScheme::Midpoint, bool truncated = false);

/// Tensor-product grid. Problem-level entry points require n >= 2; residual
/// grids produced by comarginal_density may have a single axis.
struct GridSpec {
  std::vector<Axis> axes;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(axes.size()); }
  Eigen::Index node_count(Eigen::Index i) const { return axes[static_cast<size_t>(i)].count(); }
  Eigen::Index total_nodes() const;
  /// Row-major stride of axis i (axis 0 slowest).
  Eigen::Index stride(Eigen::Index i) const;

  /// Throws ConfigError unless the grid has at least min_axes axes and every
  /// axis satisfies its invariants.
  void validate(Eigen::Index min_axes = 2) const;

  bool any_truncated() const;
};

bool same_grid(const GridSpec& a, const GridSpec& b);

/// Real values of a function of n variables on the full tensor grid,
/// row-major with axis 0 slowest.
struct ScalarField {
  GridSpec grid;
  Eigen::ArrayXd values;

  ScalarField() = default;
  ScalarField(GridSpec g, Eigen::ArrayXd v);
};

/// Field with every node equal to `value`.
ScalarField constant_field(const GridSpec& grid, double value);

/// Field sampled from a callable taking the node coordinate vector.
template <typename F>
ScalarField sample_field(const GridSpec& grid, F&& f) {
  const Eigen::Index total = grid.total_nodes();
  const Eigen::Index n = grid.dim();
  Eigen::ArrayXd vals(total);
  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  std::vector<double> pt(static_cast<size_t>(n), 0.0);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    for (Eigen::Index i = 0; i < n; ++i)
      pt[static_cast<size_t>(i)] = grid.axes[static_cast<size_t>(i)].nodes[idx[static_cast<size_t>(i)]];
    vals[lin] = f(pt);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < grid.node_count(i)) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return ScalarField(grid, std::move(vals));
}

/// Per-axis 1D arrays, array i over the nodes of axis i. Holds prescribed
/// marginal data g_i as well as multiplier-side vectors.
struct MarginalSet {
  std::vector<Eigen::ArrayXd> arrays;

  Eigen::Index axis_count() const { return static_cast<Eigen::Index>(arrays.size()); }
};

MarginalSet zero_marginals(const GridSpec& grid);

/// Axis-i quadrature of array `a` against the axis weights.
double axis_integral(const Axis& axis, const Eigen::ArrayXd& a);

/// Compensated (Kahan) sum; keeps the 1e-12 quadrature invariants honest on
/// large grids.
double kahan_sum(const Eigen::ArrayXd& v);

/// Full tensor quadrature weight Q(xi) = prod_i q_i(xi_i) as a field.
Eigen::ArrayXd tensor_weights(const GridSpec& grid);

/// Plain quadrature of one field: sum f * Q.
double integrate(const ScalarField& f);

/// Weighted quadrature: sum f * w * Q. Both fields must share the grid.
double integrate(const ScalarField& f, const ScalarField& w);

/// (integral |f|^p w)^{1/p}; requires p > 1.
double weighted_p_norm(const ScalarField& f, const ScalarField& w, double p);

/// One-dimensional marginal of w along axis i: quadrature over all other
/// axes. Result has node_count(i) entries.
Eigen::ArrayXd marginal_density(const ScalarField& w, Eigen::Index i);

/// Co-marginal: integrate out axis i only; field on the residual grid with
/// axis i removed.
ScalarField comarginal_density(const ScalarField& w, Eigen::Index i);

/// All n axis marginals of `values * Q` in a single grid pass:
/// out[i][a] = sum over nodes with xi_i = a of values * Q_i^c.
std::vector<Eigen::ArrayXd> all_axis_marginals(const GridSpec& grid,
                                               const Eigen::ArrayXd& values);

/// Pairwise marginals of `values * Q` for the solver's Jacobian blocks:
/// pair(i,j)(a,b) = sum over nodes with xi_i = a, xi_j = b of values * Q,
/// for i < j, plus the per-axis sums diag[i][a] = sum over xi_i = a of
/// values * Q.
struct PairSums {
  std::vector<Eigen::ArrayXd> axis;                 // [n] arrays
  std::vector<std::vector<Eigen::MatrixXd>> pair;   // pair[i][j] valid for i < j
};
PairSums pair_marginals(const GridSpec& grid, const Eigen::ArrayXd& values);

/// Dyadic refinement under the piecewise-constant (midpoint) reading of a
/// field: every cell splits in two per axis, values copied. Exact for the
/// discretized densities of the block-constant class.
ScalarField refine_dyadic(const ScalarField& f);

/// Masses integral g_i d(xi_i) for each axis; the solvability precheck
/// requires them to agree.
std::vector<double> marginal_masses(const GridSpec& grid, const MarginalSet& g);

/// Max pairwise disagreement of the marginal masses, relative to 1 + max|m|.
double marginal_mass_mismatch(const GridSpec& grid, const MarginalSet& g);

}  // namespace marglp
