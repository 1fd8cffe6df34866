#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "marglp/grid.hpp"

// Independent verification route: minimize the weighted p-norm over the
// affine set of fields with prescribed marginals by working on the field
// values directly, never through the multiplier system. Used to cross-check
// solver bounds and to build null directions of the constraint operator.

namespace marglp {

/// The affine set {h : marginal_i(h w) = g_i for all i} together with the
/// factored machinery to project onto it. One redundant constraint row per
/// axis beyond the first is dropped (the weighted row sums all equal the
/// common marginal mass), which makes the Gram system generically regular.
class FeasibleSet {
 public:
  FeasibleSet(ScalarField w, MarginalSet g);

  const ScalarField& weight() const { return w_; }
  const MarginalSet& marginals() const { return g_; }
  Eigen::Index reduced_rows() const { return reduced_; }

  /// All constraint values marginal_i(h w), stacked axis-major (full rows).
  Eigen::VectorXd apply_full(const Eigen::ArrayXd& h) const;

  /// Max absolute constraint defect of h over the full row set.
  double feasibility_sup(const Eigen::ArrayXd& h) const;

  /// W-orthogonal projection onto the kernel {marginals of u w all zero}.
  Eigen::ArrayXd project_kernel(const Eigen::ArrayXd& u) const;

  /// W-orthogonal projection onto the affine set itself.
  Eigen::ArrayXd project_affine(const Eigen::ArrayXd& x) const;

  /// Minimum W-norm feasible point (the projection of zero).
  Eigen::ArrayXd min_norm_point() const;

  /// True at nodes where w > 0; off-support values never affect constraints
  /// or norms and are kept at zero by the oracle.
  const Eigen::ArrayXd& support_mask() const { return support_; }

 private:
  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;
  Eigen::ArrayXd lift(const Eigen::VectorXd& reduced) const;

  ScalarField w_;
  MarginalSet g_;
  Eigen::ArrayXd support_;
  std::vector<Eigen::Index> row_off_;      // full-row offset per axis
  std::vector<Eigen::Index> dropped_;      // dropped full-row index per axis (-1 for axis 0)
  std::vector<Eigen::Index> keep_;         // reduced row -> full row
  Eigen::Index full_rows_ = 0;
  Eigen::Index reduced_ = 0;
  Eigen::VectorXd g_reduced_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> gram_;  // of the reduced Gram matrix
};

struct OracleOptions {
  double tol_stationarity = 1e-9;  // sup-norm of the projected gradient
  int max_iter = 100000;
  int nonmonotone_window = 10;
  int reproject_every = 100;
};

struct OracleResult {
  ScalarField minimizer;
  double objective = 0.0;  // integral |h|^p w, the certified lower bound value
  double stationarity_sup = 0.0;
  double feasibility_sup = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

/// Direct minimization of integral |h|^p w over the feasible set. p = 2 is
/// solved exactly through the factored Gram system; general p > 1 runs a
/// projected gradient method in the W metric with Barzilai-Borwein steps and
/// a non-monotone line-search safeguard, started from the p = 2 point.
OracleResult min_norm_direct(const ScalarField& w, const MarginalSet& g, double p,
                             const OracleOptions& opts = {});

/// Correction of psi whose weighted marginals all vanish:
///   psi_tilde = psi - sum_i m_i(xi_i) + (n - 1) T,
/// with m_i the axis-i marginal of psi w divided by the axis marginal of w
/// and T the full integral of psi w. Exact for product densities of unit
/// mass; otherwise the leftover marginal defect scales with the mass defect.
ScalarField null_space_element(const ScalarField& w, const ScalarField& psi);

/// Deterministic feasible sample: the minimum-norm point plus the kernel
/// projection of seeded Gaussian noise of the given amplitude.
ScalarField random_feasible(const ScalarField& w, const MarginalSet& g, std::uint64_t seed,
                            double amplitude = 1.0);

}  // namespace marglp
