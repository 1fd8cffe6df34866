#pragma once

#include <optional>
#include <string>
#include <vector>

#include "marglp/grid.hpp"

// Multiplier solver for the marginal-constrained lower bound: find per-axis
// multipliers Phi_i so that the candidate minimizer
//
//   h = sign(PhiBar) |PhiBar|^{1/(p-1)},  PhiBar(xi) = (1/n) sum_i Phi_i(xi_i)
//
// has the prescribed marginals against w. The sharp bound on |f|_{L^p(w)}^p
// for every feasible f is then the weighted integral of |PhiBar|^{p/(p-1)}.

namespace marglp {

struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One 1D multiplier table per axis.
struct MultiplierSet {
  std::vector<Eigen::ArrayXd> phi;

  Eigen::Index axis_count() const { return static_cast<Eigen::Index>(phi.size()); }
};

MultiplierSet zero_multipliers(const GridSpec& grid);

/// sign(t) |t|^kappa, the odd power that links multipliers and minimizer.
double signed_power(double t, double kappa);

/// Smoothed derivative of signed_power used in Jacobians only:
/// kappa (t^2 + eps^2)^{(kappa-1)/2}. Reported residuals never use it.
double signed_power_derivative(double t, double kappa, double eps);

/// PhiBar as a field on the grid.
ScalarField mean_multiplier_field(const GridSpec& grid, const MultiplierSet& phi);

/// Candidate minimizer h = signed_power(PhiBar, 1/(p-1)).
ScalarField reconstruct_minimizer(const GridSpec& grid, const MultiplierSet& phi, double p);

/// Marginal defects and normalization defects of a multiplier iterate.
struct ResidualSet {
  MarginalSet marginal;  // F_i(a) = (h w marginal at a) - g_i(a)
  // N_i = sum_b Phi_i(b) w_i(b) q_i(b) for every axis; only i >= 1 are
  // constrained (axis 0 carries the gauge) and enter sup.
  std::vector<double> normalization;
  double sup = 0.0;  // max over marginal defects and constrained normalizations
};

ResidualSet residual(const ScalarField& w, const MarginalSet& g, const MultiplierSet& phi,
                     double p);

enum class InitScheme { FromP2, FromMarginalRatio, Zeros };

const char* to_string(InitScheme s);
InitScheme init_scheme_from_string(const std::string& s);

struct SolveOptions {
  double p = 2.0;
  double tol_residual = 1e-10;
  int max_iter = 200;
  double damping = 1.0;          // initial Newton step fraction
  double smoothing_eps = 1e-12;  // Jacobian smoothing only
  InitScheme init = InitScheme::FromP2;
  // Number of exponent stages walked from p = 2 to the target; -1 picks
  // automatically, 1 solves at the target directly.
  int homotopy_steps = -1;
  // Marginal masses must agree to this relative tolerance before solving.
  double mass_tol = 1e-8;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double residual_sup = 0.0;        // unsmoothed, at the returned iterate
  double normalization_sup = 0.0;
  std::vector<double> residual_history;
  std::vector<double> homotopy_path;  // p values visited
  std::string message;
  bool truncated_domain = false;

  // p = 2 uniqueness diagnostics (filled by solve_p2).
  bool degenerate = false;
  double singular_value_ratio = 0.0;  // sigma_min / sigma_max of the stacked system
  std::optional<MultiplierSet> null_direction;
};

struct SolveResult {
  MultiplierSet phi;
  SolveReport report;
};

/// Checks shapes, density positivity of mass, and marginal-mass agreement.
/// Throws ShapeError / InputError naming the offending input.
void solvability_precheck(const ScalarField& w, const MarginalSet& g, double mass_tol = 1e-8);

/// p = 2: the system is linear; solved in one least-squares pass with
/// explicit degeneracy diagnostics (rank, singular value ratio, and a unit
/// null direction as the non-uniqueness witness when present).
SolveResult solve_p2(const ScalarField& w, const MarginalSet& g, const SolveOptions& opts = {});

/// General p > 1: damped Newton on the stacked marginal + normalization
/// system, least-squares steps, backtracking line search with a
/// Levenberg-Marquardt fallback, optional exponent homotopy from p = 2.
SolveResult solve_newton(const ScalarField& w, const MarginalSet& g, const SolveOptions& opts);

/// Stacked residual vector [marginal equations; normalization constraints]
/// in the packed multiplier ordering, for derivative verification.
Eigen::VectorXd stacked_residual(const ScalarField& w, const MarginalSet& g,
                                 const MultiplierSet& phi, double p);

/// Dense Jacobian of stacked_residual with respect to the packed multiplier
/// vector, using the smoothed signed-power derivative.
Eigen::MatrixXd stacked_jacobian(const ScalarField& w, const MultiplierSet& phi, double p,
                                 double smoothing_eps = 1e-12);

struct BoundReport {
  double bound = 0.0;           // integral of |PhiBar|^{p/(p-1)} w
  double minimizer_norm_pow = 0.0;  // |h|_{L^p(w)}^p, must match bound
  double pairing = 0.0;         // (1/n) sum_i integral g_i Phi_i dxi_i
  double cross_check_gap = 0.0;
  bool cross_check_ok = false;
};

/// The bound value with its internal consistency checks. The two direct
/// routes must agree to 1e-12 relative; the pairing equals the bound exactly
/// at feasibility and tracks the residual otherwise.
BoundReport lower_bound(const ScalarField& w, const MarginalSet& g, const MultiplierSet& phi,
                        double p);

}  // namespace marglp
