#pragma once

#include <optional>
#include <string>
#include <vector>

#include "marglp/densities.hpp"
#include "marglp/grid.hpp"
#include "marglp/solver.hpp"

// Witness constructions on the diagonal block densities: sequences for which
// the joint functional stays finite (zero, with g = -f) while the per-factor
// functionals diverge, and the alpha = 0 study exhibiting non-trivial
// solutions of the homogeneous marginal system.

namespace marglp {

/// Block-level sequences on K diagonal blocks. g = -f by default, so
/// f(x) + g(y) vanishes identically on the diagonal support.
struct WitnessSequences {
  double q = 2.0;
  Eigen::Index K = 0;
  Eigen::ArrayXd theta;  // positive, sums to 1
  Eigen::ArrayXd f;
  Eigen::ArrayXd g;
  std::string family;  // "power" or "log-corrected"
};

enum class WitnessFamily {
  Auto,          // per-q default
  PowerLaw,      // f_i = i^{1.5/q}; requires q > 1.5 for L^1 summability
  LogCorrected,  // f_i = i^{1/q} log(i+1)^{2/q}; valid for every q > 1
};

/// theta_i proportional to i^{-2} in both families. The power family's
/// f_i = i^{1.5/q} makes sum |f_i|^q theta_i a divergent p-series while
/// sum |f_i| theta_i converges, but only for q > 1.5; at and below that the
/// log-corrected family takes over (Auto). Requesting PowerLaw at q <= 1.5
/// is rejected: its L^1 sum diverges symbolically.
WitnessSequences build_witness(double q, Eigen::Index K,
                               WitnessFamily family = WitnessFamily::Auto);

struct CertifyOptions {
  std::vector<Eigen::Index> ladder;  // empty: doublings ending at ws.K
  double growth_threshold = 1.2;     // required growth of the q-sums per doubling
  double increment_threshold = 0.9;  // required shrink of the L^1 tail increments
};

/// Ladder evidence on a given witness: partial q-sums must grow per doubling
/// while the L^1 partial sums become Cauchy. Finite-truncation trend
/// evidence only; a witness whose sums level off gets a negative
/// certificate, never an error.
struct DivergenceCertificate {
  double q = 2.0;
  std::vector<Eigen::Index> ladder;
  std::vector<double> marginal_sums;        // S_K = sum_{i<=K} |f_i|^q theta_i
  std::vector<double> l1_norms;             // sum_{i<=K} |f_i| theta_i
  std::vector<double> growth_ratios;        // S at consecutive rungs
  std::vector<double> l1_increment_ratios;  // consecutive tail increments
  double joint_functional = 0.0;            // sum |f_i + g_i|^q theta_i over all K
  double fitted_exponent = 0.0;             // log-log slope of S against K
  bool monotone = false;
  bool marginal_diverges = false;
  bool l1_summable = false;
  bool certified = false;
  double growth_threshold = 1.2;
  double increment_threshold = 0.9;
  std::string message;
};

DivergenceCertificate certify_divergence(const WitnessSequences& ws,
                                         const CertifyOptions& opts = {});

/// Grid-level violation package: assembles the diagonal density for the
/// witness and evaluates both sides by quadrature. The joint integral of
/// |f(x) + g(y)|^q stays the pure background contribution (zero at
/// alpha = 0) while the integral of |f(x)|^q carries the diverging block
/// sums.
struct SmirnovViolationReport {
  double q = 2.0;
  double alpha = 0.5;
  WitnessSequences witness;
  DivergenceCertificate certificate;
  ScalarField density;
  double joint_lq = 0.0;       // integral |f(x)+g(y)|^q w
  double f_lq = 0.0;           // integral |f(x)|^q w
  double g_lq = 0.0;           // integral |g(y)|^q w
  double background_lq = 0.0;  // integral |f(x)+g(y)|^q w0 (0 when alpha = 0)
  DensityProvenance provenance;
  SmirnovVerdict verdict;
};

/// background supplies w0 for alpha > 0; empty means uniform on the block
/// square. The grid must be block-aligned on [1, K+1)^2.
SmirnovViolationReport smirnov_violation_report(const WitnessSequences& ws, double alpha,
                                                const std::optional<ScalarField>& background,
                                                const GridSpec& grid,
                                                const CertifyOptions& certify = {});

/// alpha = 0 study at p = 2: with f_1 rebalanced so sum f_i theta_i = 0, the
/// pair (f, -f) solves the homogeneous marginal system exactly, giving a
/// non-trivial null multiplier alongside the zero solution.
struct NonuniquenessReport {
  WitnessSequences witness;  // input with f_1 replaced by the balancing value
  ScalarField w;             // alpha = 0 diagonal density
  MarginalSet zero_g;        // the prescribed (zero) marginals
  MultiplierSet witness_phi; // (f, -f) expanded to the grid axes
  double eq1_residual_sup = 0.0;  // blockwise f_k theta_k vs its block quadrature
  double eq2_residual_sup = 0.0;  // same for g on the other axis (collinear by symmetry)
  double eq3_residual = 0.0;      // normalization sum f_i theta_i
  double witness_residual_sup = 0.0;  // full marginal system residual of (f, -f)
  bool f_plus_g_zero = false;
  double witness_sup = 0.0;            // largest |f_i|, nonzero for a real witness
  std::vector<Eigen::Index> ladder;    // rungs for the norm partial sums
  std::vector<double> norm_partial_sums;  // sum_{i<=K_j} f_i^2 theta_i
};

/// Requires ws.q == 2 (the study is Hilbertian) and a block-aligned grid.
NonuniquenessReport nonuniqueness_witness(const WitnessSequences& ws, const GridSpec& grid);

/// Repeats each block value nodes_per_block times (block grid to node grid).
Eigen::ArrayXd expand_blocks(const Eigen::ArrayXd& block_values, Eigen::Index nodes_per_block);

}  // namespace marglp
