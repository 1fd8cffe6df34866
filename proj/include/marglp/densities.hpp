#pragma once

#include <optional>
#include <string>
#include <vector>

#include "marglp/grid.hpp"

// Density construction and analysis: finite product mixtures, the diagonal
// block counterexample family, likelihood ratios w_i w_i^c / w, and the
// sufficient-condition checks behind the Smirnov classification.

namespace marglp {

struct PositivityError : InputError {
  using InputError::InputError;
};

// A node where the density vanishes makes the likelihood ratio undefined;
// only reachable for alpha = 0 study-mode densities.
struct DivisionDomainError : InputError {
  using InputError::InputError;
};

/// Finite mixture of tensor products: w = sum_j lambda_j prod_i f_i^(j).
/// Each component's factors are tabulated on the grid axes and the component
/// product is normalized to unit mass before mixing.
struct ProductMixtureSpec {
  struct Component {
    double weight = 1.0;
    std::vector<Eigen::ArrayXd> factors;  // one table per axis
  };
  std::vector<Component> components;
};

/// w(x,y) = alpha w0 + (1 - alpha) sum_i theta_i 1_block_i(x) 1_block_i(y)
/// on [1, K+1)^2, blocks [i, i+1) x [i, i+1). alpha = 0 is permitted only in
/// study mode (the non-uniqueness example); it makes the density vanish off
/// the diagonal blocks.
struct DiagonalCounterexampleSpec {
  double alpha = 0.5;
  Eigen::ArrayXd theta;                  // K positive entries summing to 1
  std::optional<ScalarField> background; // normalized density on the grid; required when alpha > 0
  bool study_mode = false;
};

/// How a density was built; drives the Smirnov classification.
struct DensityProvenance {
  bool finite_product_mixture = false;
  bool has_violation_witness = false;
  std::string witness_detail;
  std::string description;
};

enum class SmirnovClass {
  SufficientProductForm,
  SufficientBoundedRatio,
  Unknown,
  ViolationWitness,
};

const char* to_string(SmirnovClass c);

struct SmirnovVerdict {
  SmirnovClass cls = SmirnovClass::Unknown;
  std::string detail;
};

/// Per-axis estimates for the likelihood ratio w_i w_i^c / w plus the flags
/// the classifier consumes. Finite-grid numbers, never a theorem: boundedness
/// is certified only as "below threshold and stable under one refinement".
struct WeightConditionReport {
  double p = 2.0;
  double threshold = 1e6;
  std::vector<double> lp_norm;    // ||w_i w_i^c / w||_{p,w} per axis
  std::vector<double> max_ratio;  // max node ratio per axis
  std::vector<double> refined_lp_norm;    // empty when no refinement supplied
  std::vector<double> refined_max_ratio;  // empty when no refinement supplied
  bool refinement_checked = false;
  bool refinement_stable = false;
  bool support_restricted = false;  // ratio evaluated on the support only
  bool truncated_domain = false;
  bool product_mixture_form = false;
  bool bounded_ratio = false;
  bool condition_Lp_ok = false;
  bool violation_witness = false;
  std::string violation_detail;
};

/// Assembles, validates positivity (floor 1e-300, no clamping), and
/// normalizes the mixture. The returned provenance records the finite
/// product-mixture form.
ScalarField assemble_product_mixture(const ProductMixtureSpec& spec, const GridSpec& grid,
                                     DensityProvenance* provenance = nullptr);

/// Assembles the diagonal block density. The grid must be a 2-axis midpoint
/// grid on [1, K+1)^2 whose node spacing divides 1.
ScalarField assemble_diagonal(const DiagonalCounterexampleSpec& spec, const GridSpec& grid,
                              DensityProvenance* provenance = nullptr);

/// Node-wise w_i(xi_i) * w_i^c(xi_i^c) / w(xi). Throws DivisionDomainError on
/// any zero node.
ScalarField likelihood_ratio(const ScalarField& w, Eigen::Index i);

struct SupportRatio {
  ScalarField ratio;          // zero off the support
  bool restricted = false;    // true when zero-density nodes were skipped
};
/// Like likelihood_ratio but reports the ratio on the support only, flagging
/// the restriction instead of throwing (alpha = 0 study densities).
SupportRatio likelihood_ratio_support(const ScalarField& w, Eigen::Index i);

struct WeightConditionOptions {
  double threshold = 1e6;
  // Factor by which the refined max ratio may exceed the coarse one and
  // still count as stable.
  double stability_factor = 1.25;
};

WeightConditionReport check_weight_conditions(const ScalarField& w, double p,
                                              const WeightConditionOptions& opts = {});

/// Overload with the same density re-assembled on a dyadically refined grid;
/// fills the stability verdict.
WeightConditionReport check_weight_conditions(const ScalarField& w, const ScalarField& w_refined,
                                              double p, const WeightConditionOptions& opts = {});

/// Classification is monotone in evidence: an attached witness always wins,
/// finite product-mixture provenance always certifies, grid data alone never
/// claims a violation. A truncated domain downgrades the bounded-ratio
/// certificate to Unknown (it only covers the truncated box).
SmirnovVerdict classify_smirnov(const ScalarField& w, const DensityProvenance& provenance,
                                double p);
SmirnovVerdict classify_smirnov(const ScalarField& w, const DensityProvenance& provenance,
                                double p, const WeightConditionReport& report);

}  // namespace marglp
