#include "marglp/solver.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>

namespace marglp {

namespace {

struct Layout {
  Eigen::Index n = 0;
  std::vector<Eigen::Index> off;  // column offset of each axis block
  Eigen::Index cols = 0;          // sum of axis node counts
  Eigen::Index rows = 0;          // cols + (n - 1) normalization rows
};

Layout make_layout(const GridSpec& grid) {
  Layout l;
  l.n = grid.dim();
  l.off.resize(static_cast<size_t>(l.n));
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < l.n; ++i) {
    l.off[static_cast<size_t>(i)] = c;
    c += grid.node_count(i);
  }
  l.cols = c;
  l.rows = c + (l.n - 1);
  return l;
}

Eigen::VectorXd pack(const Layout& l, const MultiplierSet& phi) {
  Eigen::VectorXd u(l.cols);
  for (Eigen::Index i = 0; i < l.n; ++i)
    u.segment(l.off[static_cast<size_t>(i)], phi.phi[static_cast<size_t>(i)].size()) =
        phi.phi[static_cast<size_t>(i)].matrix();
  return u;
}

MultiplierSet unpack(const GridSpec& grid, const Layout& l, const Eigen::VectorXd& u) {
  MultiplierSet phi;
  phi.phi.resize(static_cast<size_t>(l.n));
  for (Eigen::Index i = 0; i < l.n; ++i)
    phi.phi[static_cast<size_t>(i)] =
        u.segment(l.off[static_cast<size_t>(i)], grid.node_count(i)).array();
  return phi;
}

std::vector<Eigen::ArrayXd> axis_weight_marginals(const ScalarField& w) {
  std::vector<Eigen::ArrayXd> wm(static_cast<size_t>(w.grid.dim()));
  for (Eigen::Index i = 0; i < w.grid.dim(); ++i)
    wm[static_cast<size_t>(i)] = marginal_density(w, i);
  return wm;
}

// Shift Phi_i by constants so the normalizations vanish for i >= 1, pushing
// the compensating constant onto Phi_0. PhiBar is unchanged.
void shift_normalizations(MultiplierSet& phi, const GridSpec& grid,
                          const std::vector<Eigen::ArrayXd>& wm) {
  double total = 0.0;
  for (Eigen::Index i = 1; i < grid.dim(); ++i) {
    const size_t k = static_cast<size_t>(i);
    const Eigen::ArrayXd wq = wm[k] * grid.axes[k].quad_weights;
    const double mass = kahan_sum(wq);
    if (!(std::abs(mass) > 0.0)) continue;
    const double s = kahan_sum((phi.phi[k] * wq).eval()) / mass;
    phi.phi[k] -= s;
    total += s;
  }
  phi.phi[0] += total;
}

Eigen::VectorXd pack_residual(const Layout& l, const ResidualSet& r) {
  Eigen::VectorXd v(l.rows);
  for (Eigen::Index i = 0; i < l.n; ++i)
    v.segment(l.off[static_cast<size_t>(i)], r.marginal.arrays[static_cast<size_t>(i)].size()) =
        r.marginal.arrays[static_cast<size_t>(i)].matrix();
  for (Eigen::Index i = 1; i < l.n; ++i)
    v[l.cols + i - 1] = r.normalization[static_cast<size_t>(i)];
  return v;
}

// Stacked Jacobian of the marginal + normalization system at the current
// iterate. derivative_weights holds s'(PhiBar) * w node-wise (s' = 1 for the
// linear p = 2 system).
Eigen::MatrixXd stacked_matrix(const ScalarField& w, const Layout& l,
                               const Eigen::ArrayXd& derivative_weights,
                               const std::vector<Eigen::ArrayXd>& wm) {
  const GridSpec& grid = w.grid;
  const PairSums ps = pair_marginals(grid, derivative_weights);
  const double inv_n = 1.0 / static_cast<double>(l.n);

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(l.rows, l.cols);
  for (Eigen::Index i = 0; i < l.n; ++i) {
    const size_t ki = static_cast<size_t>(i);
    const Eigen::ArrayXd& qi = grid.axes[ki].quad_weights;
    for (Eigen::Index a = 0; a < grid.node_count(i); ++a)
      A(l.off[ki] + a, l.off[ki] + a) = inv_n * ps.axis[ki][a] / qi[a];
    for (Eigen::Index j = i + 1; j < l.n; ++j) {
      const size_t kj = static_cast<size_t>(j);
      const Eigen::MatrixXd& pij = ps.pair[ki][kj];
      const Eigen::ArrayXd& qj = grid.axes[kj].quad_weights;
      for (Eigen::Index a = 0; a < grid.node_count(i); ++a)
        for (Eigen::Index b = 0; b < grid.node_count(j); ++b) {
          A(l.off[ki] + a, l.off[kj] + b) = inv_n * pij(a, b) / qi[a];
          A(l.off[kj] + b, l.off[ki] + a) = inv_n * pij(a, b) / qj[b];
        }
    }
  }
  for (Eigen::Index i = 1; i < l.n; ++i) {
    const size_t ki = static_cast<size_t>(i);
    const Eigen::ArrayXd wq = wm[ki] * grid.axes[ki].quad_weights;
    for (Eigen::Index b = 0; b < grid.node_count(i); ++b)
      A(l.cols + i - 1, l.off[ki] + b) = wq[b];
  }
  return A;
}

void check_shapes(const ScalarField& w, const MarginalSet& g) {
  w.grid.validate(2);
  if (g.axis_count() != w.grid.dim())
    throw ShapeError("marginals: expected one array per axis");
  for (Eigen::Index i = 0; i < w.grid.dim(); ++i) {
    if (g.arrays[static_cast<size_t>(i)].size() != w.grid.node_count(i)) {
      std::ostringstream os;
      os << "marginals: array " << i << " has " << g.arrays[static_cast<size_t>(i)].size()
         << " entries, axis has " << w.grid.node_count(i) << " nodes";
      throw ShapeError(os.str());
    }
  }
}

}  // namespace

MultiplierSet zero_multipliers(const GridSpec& grid) {
  MultiplierSet m;
  m.phi.resize(static_cast<size_t>(grid.dim()));
  for (Eigen::Index i = 0; i < grid.dim(); ++i)
    m.phi[static_cast<size_t>(i)] = Eigen::ArrayXd::Zero(grid.node_count(i));
  return m;
}

double signed_power(double t, double kappa) {
  if (t == 0.0) return 0.0;
  return t > 0.0 ? std::pow(t, kappa) : -std::pow(-t, kappa);
}

double signed_power_derivative(double t, double kappa, double eps) {
  return kappa * std::pow(t * t + eps * eps, 0.5 * (kappa - 1.0));
}

ScalarField mean_multiplier_field(const GridSpec& grid, const MultiplierSet& phi) {
  grid.validate(1);
  if (phi.axis_count() != grid.dim())
    throw ShapeError("multipliers: expected one array per axis");
  const Eigen::Index n = grid.dim();
  for (Eigen::Index i = 0; i < n; ++i)
    if (phi.phi[static_cast<size_t>(i)].size() != grid.node_count(i))
      throw ShapeError("multipliers: axis table size mismatch");

  const Eigen::Index total = grid.total_nodes();
  Eigen::ArrayXd vals(total);
  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      s += phi.phi[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
    vals[lin] = inv_n * s;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < grid.node_count(i)) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return ScalarField(grid, std::move(vals));
}

ScalarField reconstruct_minimizer(const GridSpec& grid, const MultiplierSet& phi, double p) {
  if (!(p > 1.0)) throw ConfigError("reconstruct_minimizer: p must exceed 1");
  ScalarField bar = mean_multiplier_field(grid, phi);
  const double kappa = 1.0 / (p - 1.0);
  for (Eigen::Index lin = 0; lin < bar.values.size(); ++lin)
    bar.values[lin] = signed_power(bar.values[lin], kappa);
  return bar;
}

ResidualSet residual(const ScalarField& w, const MarginalSet& g, const MultiplierSet& phi,
                     double p) {
  check_shapes(w, g);
  const GridSpec& grid = w.grid;
  const ScalarField h = reconstruct_minimizer(grid, phi, p);
  const std::vector<Eigen::ArrayXd> hm = all_axis_marginals(grid, (h.values * w.values).eval());

  ResidualSet r;
  r.marginal.arrays.resize(static_cast<size_t>(grid.dim()));
  r.normalization.assign(static_cast<size_t>(grid.dim()), 0.0);
  double sup = 0.0;
  for (Eigen::Index i = 0; i < grid.dim(); ++i) {
    const size_t k = static_cast<size_t>(i);
    r.marginal.arrays[k] = hm[k] - g.arrays[k];
    sup = std::max(sup, r.marginal.arrays[k].abs().maxCoeff());
    const Eigen::ArrayXd wq = marginal_density(w, i) * grid.axes[k].quad_weights;
    r.normalization[k] = kahan_sum((phi.phi[k] * wq).eval());
    if (i >= 1) sup = std::max(sup, std::abs(r.normalization[k]));
  }
  r.sup = sup;
  return r;
}

const char* to_string(InitScheme s) {
  switch (s) {
    case InitScheme::FromP2: return "from-p2";
    case InitScheme::FromMarginalRatio: return "from-marginal-ratio";
    case InitScheme::Zeros: return "zeros";
  }
  return "from-p2";
}

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "from-p2") return InitScheme::FromP2;
  if (s == "from-marginal-ratio") return InitScheme::FromMarginalRatio;
  if (s == "zeros") return InitScheme::Zeros;
  throw ConfigError("init: unknown scheme '" + s +
                    "' (expected from-p2, from-marginal-ratio, or zeros)");
}

void solvability_precheck(const ScalarField& w, const MarginalSet& g, double mass_tol) {
  check_shapes(w, g);
  if ((w.values < 0.0).any())
    throw InputError("density: negative node values");
  const double wmass = integrate(w);
  if (!(wmass > 0.0))
    throw InputError("density: total mass must be positive");
  const double mismatch = marginal_mass_mismatch(w.grid, g);
  if (mismatch > mass_tol) {
    std::ostringstream os;
    os << "marginals: marginal mass mismatch (relative spread " << mismatch
       << " exceeds tolerance " << mass_tol << "); the constraint system is infeasible";
    throw InputError(os.str());
  }
}

namespace {

void validate_options(const SolveOptions& opts) {
  if (!(opts.p > 1.0)) throw ConfigError("solve: p must exceed 1");
  if (!(opts.tol_residual > 0.0)) throw ConfigError("solve: tol_residual must be positive");
  if (opts.max_iter < 1) throw ConfigError("solve: max_iter must be at least 1");
  if (!(opts.damping > 0.0) || opts.damping > 1.0)
    throw ConfigError("solve: damping must lie in (0, 1]");
  if (!(opts.smoothing_eps >= 0.0)) throw ConfigError("solve: smoothing_eps must be non-negative");
}

// One Newton run at a fixed exponent. Returns false when the stage stalls.
bool newton_stage(const ScalarField& w, const MarginalSet& g, double p, const SolveOptions& opts,
                  const Layout& l, const std::vector<Eigen::ArrayXd>& wm, MultiplierSet& phi,
                  SolveReport& report) {
  const double kappa = 1.0 / (p - 1.0);
  ResidualSet r = residual(w, g, phi, p);
  report.residual_history.push_back(r.sup);

  for (int it = 0; it < opts.max_iter; ++it) {
    if (r.sup <= opts.tol_residual) return true;
    ++report.iterations;

    ScalarField bar = mean_multiplier_field(w.grid, phi);
    Eigen::ArrayXd dw(bar.values.size());
    for (Eigen::Index lin = 0; lin < dw.size(); ++lin)
      dw[lin] = signed_power_derivative(bar.values[lin], kappa, opts.smoothing_eps) *
                w.values[lin];
    const Eigen::MatrixXd J = stacked_matrix(w, l, dw, wm);
    const Eigen::VectorXd rv = pack_residual(l, r);
    Eigen::VectorXd delta = J.colPivHouseholderQr().solve(-rv);

    // Cap absurd steps before the line search sees them.
    const double cap = 1e3 * (1.0 + pack(l, phi).cwiseAbs().maxCoeff());
    const double dmax = delta.cwiseAbs().maxCoeff();
    if (dmax > cap) delta *= cap / dmax;

    const Eigen::VectorXd u0 = pack(l, phi);
    bool accepted = false;
    double t = opts.damping;
    for (int half = 0; half < 60 && !accepted; ++half, t *= 0.5) {
      MultiplierSet cand = unpack(w.grid, l, u0 + t * delta);
      ResidualSet rc = residual(w, g, cand, p);
      if (rc.sup <= (1.0 - 1e-4 * t) * r.sup) {
        phi = std::move(cand);
        r = std::move(rc);
        accepted = true;
      }
    }

    if (!accepted) {
      // Levenberg-Marquardt fallback on the normal equations.
      const Eigen::MatrixXd H = J.transpose() * J;
      const Eigen::VectorXd grad = J.transpose() * rv;
      double mu = std::max(1e-14, 1e-10 * H.trace() / static_cast<double>(l.cols));
      for (int k = 0; k < 20 && !accepted; ++k, mu *= 10.0) {
        Eigen::MatrixXd Hm = H;
        Hm.diagonal().array() += mu;
        const Eigen::VectorXd d = Hm.ldlt().solve(-grad);
        for (double tt : {1.0, 0.5, 0.25}) {
          MultiplierSet cand = unpack(w.grid, l, u0 + tt * d);
          ResidualSet rc = residual(w, g, cand, p);
          if (rc.sup < r.sup) {
            phi = std::move(cand);
            r = std::move(rc);
            accepted = true;
            break;
          }
        }
      }
    }

    report.residual_history.push_back(r.sup);
    if (!accepted) {
      std::ostringstream os;
      os << "newton stalled at p = " << p << " with residual " << r.sup;
      report.message = os.str();
      return false;
    }
  }
  if (r.sup <= opts.tol_residual) return true;
  std::ostringstream os;
  os << "newton ran out of iterations at p = " << p << " with residual " << r.sup;
  report.message = os.str();
  return false;
}

void finalize_report(const ScalarField& w, const MarginalSet& g, const MultiplierSet& phi,
                     double p, const SolveOptions& opts, SolveReport& report) {
  const ResidualSet r = residual(w, g, phi, p);
  report.residual_sup = r.sup;
  double nsup = 0.0;
  for (size_t i = 1; i < r.normalization.size(); ++i)
    nsup = std::max(nsup, std::abs(r.normalization[i]));
  report.normalization_sup = nsup;
  report.truncated_domain = w.grid.any_truncated();
  report.converged = r.sup <= opts.tol_residual;
}

}  // namespace

SolveResult solve_p2(const ScalarField& w, const MarginalSet& g, const SolveOptions& opts) {
  validate_options(opts);
  solvability_precheck(w, g, opts.mass_tol);
  const GridSpec& grid = w.grid;
  const Layout l = make_layout(grid);
  const std::vector<Eigen::ArrayXd> wm = axis_weight_marginals(w);

  // s' = 1 at p = 2: the stacked matrix is the constant system matrix.
  const Eigen::MatrixXd A = stacked_matrix(w, l, w.values, wm);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(l.rows);
  for (Eigen::Index i = 0; i < l.n; ++i)
    b.segment(l.off[static_cast<size_t>(i)], grid.node_count(i)) =
        g.arrays[static_cast<size_t>(i)].matrix();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::VectorXd u = qr.solve(b);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv[0];
  const double smin = sv[sv.size() - 1];

  SolveResult res;
  res.phi = unpack(grid, l, u);
  shift_normalizations(res.phi, grid, wm);

  SolveOptions o2 = opts;
  o2.p = 2.0;
  res.report.homotopy_path = {2.0};
  res.report.iterations = 1;
  res.report.singular_value_ratio = smax > 0.0 ? smin / smax : 0.0;
  res.report.degenerate = res.report.singular_value_ratio < 1e-10 || qr.rank() < l.cols;
  if (res.report.degenerate) {
    res.report.null_direction = unpack(grid, l, svd.matrixV().col(sv.size() - 1));
    res.report.message =
        "stacked system is rank-deficient: the multiplier solution is not unique";
  }
  finalize_report(w, g, res.phi, 2.0, o2, res.report);
  res.report.residual_history = {res.report.residual_sup};
  if (!res.report.converged && res.report.message.empty()) {
    std::ostringstream os;
    os << "marginal system is inconsistent: least-squares defect " << res.report.residual_sup;
    res.report.message = os.str();
  }
  return res;
}

SolveResult solve_newton(const ScalarField& w, const MarginalSet& g, const SolveOptions& opts) {
  validate_options(opts);
  solvability_precheck(w, g, opts.mass_tol);
  const GridSpec& grid = w.grid;
  const Layout l = make_layout(grid);
  const std::vector<Eigen::ArrayXd> wm = axis_weight_marginals(w);

  SolveResult res;
  switch (opts.init) {
    case InitScheme::FromP2: {
      SolveResult p2 = solve_p2(w, g, opts);
      res.phi = std::move(p2.phi);
      res.report.degenerate = p2.report.degenerate;
      res.report.singular_value_ratio = p2.report.singular_value_ratio;
      res.report.null_direction = std::move(p2.report.null_direction);
      break;
    }
    case InitScheme::FromMarginalRatio: {
      res.phi = zero_multipliers(grid);
      for (Eigen::Index i = 0; i < grid.dim(); ++i) {
        const size_t k = static_cast<size_t>(i);
        for (Eigen::Index a = 0; a < grid.node_count(i); ++a) {
          const double wi = wm[k][a];
          const double ratio = wi > 0.0 ? g.arrays[k][a] / wi : 0.0;
          res.phi.phi[k][a] = signed_power(ratio, opts.p - 1.0);
        }
      }
      break;
    }
    case InitScheme::Zeros:
      res.phi = zero_multipliers(grid);
      break;
  }
  shift_normalizations(res.phi, grid, wm);

  // Exponent homotopy: walk kappa = 1/(p-1) from 1 to the target in equal
  // steps. A single stage solves at the target directly.
  const double kappa_t = 1.0 / (opts.p - 1.0);
  int steps = opts.homotopy_steps;
  if (steps < 0)
    steps = std::max(1, std::min(4, static_cast<int>(std::ceil(std::abs(kappa_t - 1.0) / 0.5))));
  if (steps == 0) steps = 1;

  bool ok = true;
  for (int k = 1; k <= steps && ok; ++k) {
    const double kap = 1.0 + (kappa_t - 1.0) * static_cast<double>(k) / steps;
    const double pk = 1.0 + 1.0 / kap;
    res.report.homotopy_path.push_back(pk);
    ok = newton_stage(w, g, pk, opts, l, wm, res.phi, res.report);
  }

  shift_normalizations(res.phi, grid, wm);
  finalize_report(w, g, res.phi, opts.p, opts, res.report);
  if (res.report.converged) res.report.message.clear();
  return res;
}

BoundReport lower_bound(const ScalarField& w, const MarginalSet& g, const MultiplierSet& phi,
                        double p) {
  check_shapes(w, g);
  if (!(p > 1.0)) throw ConfigError("lower_bound: p must exceed 1");
  const GridSpec& grid = w.grid;
  const ScalarField bar = mean_multiplier_field(grid, phi);
  const double pprime = p / (p - 1.0);

  Eigen::ArrayXd integrand(bar.values.size());
  for (Eigen::Index lin = 0; lin < integrand.size(); ++lin)
    integrand[lin] = std::pow(std::abs(bar.values[lin]), pprime);
  BoundReport rep;
  rep.bound = integrate(ScalarField(grid, std::move(integrand)), w);

  const ScalarField h = reconstruct_minimizer(grid, phi, p);
  Eigen::ArrayXd hp(h.values.size());
  for (Eigen::Index lin = 0; lin < hp.size(); ++lin)
    hp[lin] = std::pow(std::abs(h.values[lin]), p);
  rep.minimizer_norm_pow = integrate(ScalarField(grid, std::move(hp)), w);

  double pairing = 0.0;
  for (Eigen::Index i = 0; i < grid.dim(); ++i) {
    const size_t k = static_cast<size_t>(i);
    pairing += axis_integral(grid.axes[k], (g.arrays[k] * phi.phi[k]).eval());
  }
  rep.pairing = pairing / static_cast<double>(grid.dim());

  rep.cross_check_gap =
      std::abs(rep.bound - rep.minimizer_norm_pow) / std::max(1.0, std::abs(rep.bound));
  rep.cross_check_ok = rep.cross_check_gap <= 1e-12;
  return rep;
}

Eigen::VectorXd stacked_residual(const ScalarField& w, const MarginalSet& g,
                                 const MultiplierSet& phi, double p) {
  const Layout l = make_layout(w.grid);
  return pack_residual(l, residual(w, g, phi, p));
}

Eigen::MatrixXd stacked_jacobian(const ScalarField& w, const MultiplierSet& phi, double p,
                                 double smoothing_eps) {
  if (!(p > 1.0)) throw ConfigError("stacked_jacobian: p must exceed 1");
  const Layout l = make_layout(w.grid);
  const std::vector<Eigen::ArrayXd> wm = axis_weight_marginals(w);
  const double kappa = 1.0 / (p - 1.0);
  const ScalarField bar = mean_multiplier_field(w.grid, phi);
  Eigen::ArrayXd dw(bar.values.size());
  for (Eigen::Index lin = 0; lin < dw.size(); ++lin)
    dw[lin] = signed_power_derivative(bar.values[lin], kappa, smoothing_eps) * w.values[lin];
  return stacked_matrix(w, l, dw, wm);
}

}  // namespace marglp
