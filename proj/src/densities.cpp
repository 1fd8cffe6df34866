#include "marglp/densities.hpp"

#include <cmath>
#include <sstream>

namespace marglp {

namespace {

std::string axis_tag(Eigen::Index i) {
  std::ostringstream os;
  os << "axis " << i;
  return os.str();
}

}  // namespace

const char* to_string(SmirnovClass c) {
  switch (c) {
    case SmirnovClass::SufficientProductForm: return "sufficient-product-form";
    case SmirnovClass::SufficientBoundedRatio: return "sufficient-bounded-ratio";
    case SmirnovClass::Unknown: return "unknown";
    case SmirnovClass::ViolationWitness: return "violation-witness";
  }
  return "unknown";
}

ScalarField assemble_product_mixture(const ProductMixtureSpec& spec, const GridSpec& grid,
                                     DensityProvenance* provenance) {
  grid.validate(2);
  if (spec.components.empty())
    throw ConfigError("product mixture: components must be non-empty");

  const Eigen::Index n = grid.dim();
  double weight_sum = 0.0;
  for (size_t j = 0; j < spec.components.size(); ++j) {
    const auto& c = spec.components[j];
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      std::ostringstream os;
      os << "product mixture: components[" << j << "].weight must be positive and finite";
      throw ConfigError(os.str());
    }
    weight_sum += c.weight;
    if (static_cast<Eigen::Index>(c.factors.size()) != n) {
      std::ostringstream os;
      os << "product mixture: components[" << j << "].factors must have one table per axis ("
         << n << " expected, " << c.factors.size() << " given)";
      throw ShapeError(os.str());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& f = c.factors[static_cast<size_t>(i)];
      if (f.size() != grid.node_count(i)) {
        std::ostringstream os;
        os << "product mixture: components[" << j << "].factors[" << i << "] has " << f.size()
           << " entries, axis has " << grid.node_count(i) << " nodes";
        throw ShapeError(os.str());
      }
      for (Eigen::Index a = 0; a < f.size(); ++a) {
        if (!std::isfinite(f[a]) || f[a] < 0.0) {
          std::ostringstream os;
          os << "product mixture: components[" << j << "].factors[" << i << "][" << a
             << "] must be finite and non-negative";
          throw InputError(os.str());
        }
      }
    }
  }

  Eigen::ArrayXd vals = Eigen::ArrayXd::Zero(grid.total_nodes());
  const Eigen::Index total = grid.total_nodes();
  for (size_t j = 0; j < spec.components.size(); ++j) {
    const auto& c = spec.components[j];
    // Product structure makes the component mass a product of axis integrals;
    // normalize each component before mixing.
    double mass = 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      mass *= axis_integral(grid.axes[static_cast<size_t>(i)], c.factors[static_cast<size_t>(i)]);
    if (!(mass > 0.0) || !std::isfinite(mass)) {
      std::ostringstream os;
      os << "product mixture: components[" << j << "] has non-positive mass " << mass;
      throw InputError(os.str());
    }
    const double lam = c.weight / weight_sum / mass;
    std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
    for (Eigen::Index lin = 0; lin < total; ++lin) {
      double prod = lam;
      for (Eigen::Index i = 0; i < n; ++i)
        prod *= c.factors[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
      vals[lin] += prod;
      for (Eigen::Index i = n - 1; i >= 0; --i) {
        if (++idx[static_cast<size_t>(i)] < grid.node_count(i)) break;
        idx[static_cast<size_t>(i)] = 0;
      }
    }
  }

  for (Eigen::Index lin = 0; lin < total; ++lin) {
    if (!(vals[lin] > 1e-300)) {
      std::ostringstream os;
      os << "product mixture: assembled density is not strictly positive at node " << lin;
      throw PositivityError(os.str());
    }
  }

  ScalarField w(grid, std::move(vals));
  const double mass = integrate(w);
  if (std::abs(mass - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "product mixture: assembled mass " << mass << " is not 1";
    throw InputError(os.str());
  }
  w.values /= mass;

  if (provenance) {
    provenance->finite_product_mixture = true;
    provenance->has_violation_witness = false;
    provenance->witness_detail.clear();
    std::ostringstream os;
    os << "finite product mixture, " << spec.components.size() << " component(s)";
    provenance->description = os.str();
  }
  return w;
}

ScalarField assemble_diagonal(const DiagonalCounterexampleSpec& spec, const GridSpec& grid,
                              DensityProvenance* provenance) {
  grid.validate(2);
  if (grid.dim() != 2)
    throw ConfigError("diagonal density: grid must have exactly 2 axes");
  if (!(spec.alpha >= 0.0) || !(spec.alpha < 1.0))
    throw ConfigError("diagonal density: alpha must lie in [0, 1)");
  if (spec.alpha == 0.0 && !spec.study_mode)
    throw PositivityError(
        "diagonal density: alpha = 0 vanishes off the diagonal blocks; "
        "enable study_mode to build it anyway");

  const Eigen::Index K = spec.theta.size();
  if (K < 1) throw ConfigError("diagonal density: theta must be non-empty");
  double theta_sum = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(spec.theta[k] > 0.0) || !std::isfinite(spec.theta[k])) {
      std::ostringstream os;
      os << "diagonal density: theta[" << k << "] must be positive and finite";
      throw InputError(os.str());
    }
    theta_sum += spec.theta[k];
  }
  if (std::abs(theta_sum - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "diagonal density: theta must sum to 1 within 1e-12 (got " << theta_sum << ")";
    throw InputError(os.str());
  }
  const Eigen::ArrayXd theta = spec.theta / theta_sum;

  std::vector<std::vector<Eigen::Index>> block(2);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const Axis& ax = grid.axes[static_cast<size_t>(i)];
    if (ax.scheme != QuadScheme::Midpoint)
      throw ConfigError("diagonal density: " + axis_tag(i) + " must use the midpoint scheme");
    if (std::abs(ax.lower - 1.0) > 1e-9 || std::abs(ax.upper - double(K + 1)) > 1e-9) {
      std::ostringstream os;
      os << "diagonal density: " << axis_tag(i) << " must cover [1, " << (K + 1)
         << ") to hold " << K << " unit blocks";
      throw InputError(os.str());
    }
    if (ax.count() % K != 0) {
      std::ostringstream os;
      os << "diagonal density: " << axis_tag(i) << " node count " << ax.count()
         << " must be a multiple of the block count " << K;
      throw InputError(os.str());
    }
    block[static_cast<size_t>(i)].resize(static_cast<size_t>(ax.count()));
    for (Eigen::Index a = 0; a < ax.count(); ++a) {
      Eigen::Index b = static_cast<Eigen::Index>(std::floor(ax.nodes[a] - 1.0));
      if (b < 0) b = 0;
      if (b >= K) b = K - 1;
      block[static_cast<size_t>(i)][static_cast<size_t>(a)] = b;
    }
  }

  Eigen::ArrayXd bg;
  if (spec.alpha > 0.0) {
    if (!spec.background)
      throw InputError("diagonal density: background is required when alpha > 0");
    if (!same_grid(spec.background->grid, grid))
      throw ShapeError("diagonal density: background must live on the same grid");
    if ((spec.background->values <= 0.0).any())
      throw PositivityError("diagonal density: background must be strictly positive");
    const double bg_mass = integrate(*spec.background);
    if (std::abs(bg_mass - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "diagonal density: background mass " << bg_mass << " must be 1 within 1e-12";
      throw InputError(os.str());
    }
    bg = spec.background->values / bg_mass;
  }

  const Eigen::Index n0 = grid.node_count(0), n1 = grid.node_count(1);
  Eigen::ArrayXd vals(n0 * n1);
  for (Eigen::Index a = 0; a < n0; ++a) {
    const Eigen::Index ba = block[0][static_cast<size_t>(a)];
    for (Eigen::Index b = 0; b < n1; ++b) {
      const Eigen::Index lin = a * n1 + b;
      double v = 0.0;
      if (spec.alpha > 0.0) v += spec.alpha * bg[lin];
      if (ba == block[1][static_cast<size_t>(b)]) v += (1.0 - spec.alpha) * theta[ba];
      vals[lin] = v;
    }
  }

  ScalarField w(grid, std::move(vals));
  const double mass = integrate(w);
  if (std::abs(mass - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "diagonal density: assembled mass " << mass << " is not 1 within 1e-12";
    throw InputError(os.str());
  }

  if (provenance) {
    provenance->finite_product_mixture = false;
    provenance->has_violation_witness = false;
    provenance->witness_detail.clear();
    std::ostringstream os;
    os << "diagonal block density, alpha = " << spec.alpha << ", K = " << K
       << " (truncation of the infinite diagonal family)";
    provenance->description = os.str();
  }
  return w;
}

namespace {

// Shared core of the two likelihood-ratio entry points.
SupportRatio likelihood_ratio_impl(const ScalarField& w, Eigen::Index i, bool throw_on_zero) {
  w.grid.validate(2);
  const Eigen::Index n = w.grid.dim();
  if (i < 0 || i >= n) throw ConfigError("likelihood ratio: axis index out of range");
  if ((w.values < 0.0).any())
    throw InputError("likelihood ratio: density has negative node values");

  const Eigen::ArrayXd wi = marginal_density(w, i);
  const ScalarField wic = comarginal_density(w, i);

  // Row-major strides of the residual grid (axis i removed).
  std::vector<Eigen::Index> rstride(static_cast<size_t>(n), 0);
  {
    Eigen::Index s = 1;
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      if (j == i) continue;
      rstride[static_cast<size_t>(j)] = s;
      s *= w.grid.node_count(j);
    }
  }

  const Eigen::Index total = w.grid.total_nodes();
  Eigen::ArrayXd ratio(total);
  bool restricted = false;
  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    const double denom = w.values[lin];
    if (denom == 0.0) {
      if (throw_on_zero) {
        std::ostringstream os;
        os << "likelihood ratio: density vanishes at node " << lin
           << "; the ratio is defined on the support only";
        throw DivisionDomainError(os.str());
      }
      ratio[lin] = 0.0;
      restricted = true;
    } else {
      Eigen::Index rlin = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) rlin += idx[static_cast<size_t>(j)] * rstride[static_cast<size_t>(j)];
      ratio[lin] = wi[idx[static_cast<size_t>(i)]] * wic.values[rlin] / denom;
    }
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      if (++idx[static_cast<size_t>(j)] < w.grid.node_count(j)) break;
      idx[static_cast<size_t>(j)] = 0;
    }
  }
  return SupportRatio{ScalarField(w.grid, std::move(ratio)), restricted};
}

}  // namespace

ScalarField likelihood_ratio(const ScalarField& w, Eigen::Index i) {
  return likelihood_ratio_impl(w, i, true).ratio;
}

SupportRatio likelihood_ratio_support(const ScalarField& w, Eigen::Index i) {
  return likelihood_ratio_impl(w, i, false);
}

namespace {

void fill_axis_numbers(const ScalarField& w, double p, WeightConditionReport& rep) {
  const Eigen::Index n = w.grid.dim();
  rep.lp_norm.resize(static_cast<size_t>(n));
  rep.max_ratio.resize(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    SupportRatio sr = likelihood_ratio_support(w, i);
    rep.support_restricted = rep.support_restricted || sr.restricted;
    rep.lp_norm[static_cast<size_t>(i)] = weighted_p_norm(sr.ratio, w, p);
    rep.max_ratio[static_cast<size_t>(i)] = sr.ratio.values.maxCoeff();
  }
}

}  // namespace

WeightConditionReport check_weight_conditions(const ScalarField& w, double p,
                                              const WeightConditionOptions& opts) {
  w.grid.validate(2);
  if (!(p > 1.0)) throw ConfigError("weight conditions: p must exceed 1");
  if (!(opts.threshold > 0.0)) throw ConfigError("weight conditions: threshold must be positive");

  WeightConditionReport rep;
  rep.p = p;
  rep.threshold = opts.threshold;
  rep.truncated_domain = w.grid.any_truncated();
  fill_axis_numbers(w, p, rep);

  // Without a refinement there is no stability evidence, so neither
  // certificate is granted.
  rep.refinement_checked = false;
  rep.refinement_stable = false;
  rep.bounded_ratio = false;
  rep.condition_Lp_ok = false;
  return rep;
}

WeightConditionReport check_weight_conditions(const ScalarField& w, const ScalarField& w_refined,
                                              double p, const WeightConditionOptions& opts) {
  WeightConditionReport rep = check_weight_conditions(w, p, opts);
  if (w_refined.grid.dim() != w.grid.dim())
    throw ShapeError("weight conditions: refined density must have the same axis count");

  WeightConditionReport fine;
  fine.support_restricted = false;
  fill_axis_numbers(w_refined, p, fine);
  rep.refined_lp_norm = fine.lp_norm;
  rep.refined_max_ratio = fine.max_ratio;
  rep.support_restricted = rep.support_restricted || fine.support_restricted;
  rep.refinement_checked = true;

  const Eigen::Index n = w.grid.dim();
  bool max_stable = true, lp_stable = true;
  bool max_below = true, lp_below = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const size_t k = static_cast<size_t>(i);
    max_stable = max_stable &&
        rep.refined_max_ratio[k] <= opts.stability_factor * rep.max_ratio[k] + 1e-12;
    lp_stable = lp_stable &&
        rep.refined_lp_norm[k] <= opts.stability_factor * rep.lp_norm[k] + 1e-12;
    max_below = max_below && rep.max_ratio[k] <= opts.threshold &&
        rep.refined_max_ratio[k] <= opts.threshold;
    lp_below = lp_below && rep.lp_norm[k] <= opts.threshold &&
        rep.refined_lp_norm[k] <= opts.threshold;
  }
  rep.refinement_stable = max_stable && lp_stable;
  rep.bounded_ratio = max_below && max_stable;
  rep.condition_Lp_ok = lp_below && lp_stable;
  return rep;
}

SmirnovVerdict classify_smirnov(const ScalarField& w, const DensityProvenance& provenance,
                                double p) {
  WeightConditionReport rep;
  if (!w.grid.any_truncated()) {
    bool midpoint = true;
    for (const Axis& ax : w.grid.axes) midpoint = midpoint && ax.scheme == QuadScheme::Midpoint;
    if (midpoint) {
      // Tabulated fields are read as piecewise constant, so the dyadic
      // refinement reproduces the same density and certifies stability.
      rep = check_weight_conditions(w, refine_dyadic(w), p);
    } else {
      rep = check_weight_conditions(w, p);
    }
  } else {
    rep = check_weight_conditions(w, p);
  }
  return classify_smirnov(w, provenance, p, rep);
}

SmirnovVerdict classify_smirnov(const ScalarField& w, const DensityProvenance& provenance,
                                double p, const WeightConditionReport& report) {
  (void)p;
  SmirnovVerdict v;
  if (provenance.has_violation_witness) {
    v.cls = SmirnovClass::ViolationWitness;
    v.detail = provenance.witness_detail.empty()
                   ? "violation witness attached to the density"
                   : provenance.witness_detail;
    return v;
  }
  if (provenance.finite_product_mixture) {
    v.cls = SmirnovClass::SufficientProductForm;
    v.detail = "density assembled as a finite product mixture";
    return v;
  }
  if (w.grid.any_truncated()) {
    v.cls = SmirnovClass::Unknown;
    v.detail =
        "domain is a truncation of an unbounded one; a bounded ratio on the "
        "truncated box certifies nothing about the full domain";
    return v;
  }
  if (report.bounded_ratio && report.condition_Lp_ok) {
    std::ostringstream os;
    double mr = 0.0;
    for (double r : report.max_ratio) mr = std::max(mr, r);
    os << "likelihood ratios bounded by " << mr << " (threshold " << report.threshold
       << "), stable under one dyadic refinement";
    v.cls = SmirnovClass::SufficientBoundedRatio;
    v.detail = os.str();
    return v;
  }
  v.cls = SmirnovClass::Unknown;
  v.detail = report.refinement_checked
                 ? "ratio evidence exceeds the threshold or is unstable under refinement"
                 : "no refinement evidence; bounded-ratio certificate not granted";
  return v;
}

}  // namespace marglp
