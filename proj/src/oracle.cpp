#include "marglp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

namespace marglp {

namespace {

void check_pair(const ScalarField& w, const MarginalSet& g) {
  w.grid.validate(2);
  if (g.axis_count() != w.grid.dim())
    throw ShapeError("feasible set: expected one marginal array per axis");
  for (Eigen::Index i = 0; i < w.grid.dim(); ++i)
    if (g.arrays[static_cast<size_t>(i)].size() != w.grid.node_count(i))
      throw ShapeError("feasible set: marginal array size mismatch on axis " +
                       std::to_string(i));
  if ((w.values < 0.0).any()) throw InputError("feasible set: density has negative node values");
}

}  // namespace

FeasibleSet::FeasibleSet(ScalarField w, MarginalSet g) : w_(std::move(w)), g_(std::move(g)) {
  check_pair(w_, g_);
  const GridSpec& grid = w_.grid;
  const Eigen::Index n = grid.dim();

  support_ = (w_.values > 0.0).cast<double>();

  row_off_.resize(static_cast<size_t>(n));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    row_off_[static_cast<size_t>(i)] = r;
    r += grid.node_count(i);
  }
  full_rows_ = r;

  // Drop the heaviest row of each axis beyond the first; the dropped
  // constraint is implied by the rest through the shared mass identity.
  dropped_.assign(static_cast<size_t>(n), -1);
  for (Eigen::Index i = 1; i < n; ++i) {
    const Eigen::ArrayXd wq =
        marginal_density(w_, i) * grid.axes[static_cast<size_t>(i)].quad_weights;
    Eigen::Index amax = 0;
    wq.maxCoeff(&amax);
    dropped_[static_cast<size_t>(i)] = row_off_[static_cast<size_t>(i)] + amax;
  }
  keep_.clear();
  keep_.reserve(static_cast<size_t>(full_rows_));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < grid.node_count(i); ++a) {
      const Eigen::Index row = row_off_[static_cast<size_t>(i)] + a;
      if (row != dropped_[static_cast<size_t>(i)]) keep_.push_back(row);
    }
  reduced_ = static_cast<Eigen::Index>(keep_.size());

  Eigen::VectorXd g_full(full_rows_);
  for (Eigen::Index i = 0; i < n; ++i)
    g_full.segment(row_off_[static_cast<size_t>(i)], grid.node_count(i)) =
        g_.arrays[static_cast<size_t>(i)].matrix();
  g_reduced_ = reduce(g_full);

  // Gram matrix of the constraint rows in the W inner product:
  // S[(i,a),(j,b)] = sum over nodes with xi_i = a, xi_j = b of w Q / (q_i q_j).
  const PairSums ps = pair_marginals(grid, w_.values);
  Eigen::MatrixXd S_full = Eigen::MatrixXd::Zero(full_rows_, full_rows_);
  for (Eigen::Index i = 0; i < n; ++i) {
    const size_t ki = static_cast<size_t>(i);
    const Eigen::ArrayXd& qi = grid.axes[ki].quad_weights;
    for (Eigen::Index a = 0; a < grid.node_count(i); ++a)
      S_full(row_off_[ki] + a, row_off_[ki] + a) = ps.axis[ki][a] / (qi[a] * qi[a]);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const size_t kj = static_cast<size_t>(j);
      const Eigen::ArrayXd& qj = grid.axes[kj].quad_weights;
      for (Eigen::Index a = 0; a < grid.node_count(i); ++a)
        for (Eigen::Index b = 0; b < grid.node_count(j); ++b) {
          const double v = ps.pair[ki][kj](a, b) / (qi[a] * qj[b]);
          S_full(row_off_[ki] + a, row_off_[kj] + b) = v;
          S_full(row_off_[kj] + b, row_off_[ki] + a) = v;
        }
    }
  }
  Eigen::MatrixXd S(reduced_, reduced_);
  for (Eigen::Index r2 = 0; r2 < reduced_; ++r2)
    for (Eigen::Index c = 0; c < reduced_; ++c)
      S(r2, c) = S_full(keep_[static_cast<size_t>(r2)], keep_[static_cast<size_t>(c)]);
  gram_.compute(S);
}

Eigen::VectorXd FeasibleSet::reduce(const Eigen::VectorXd& full) const {
  Eigen::VectorXd out(reduced_);
  for (Eigen::Index r = 0; r < reduced_; ++r) out[r] = full[keep_[static_cast<size_t>(r)]];
  return out;
}

Eigen::ArrayXd FeasibleSet::lift(const Eigen::VectorXd& reduced) const {
  const GridSpec& grid = w_.grid;
  const Eigen::Index n = grid.dim();
  Eigen::VectorXd full = Eigen::VectorXd::Zero(full_rows_);
  for (Eigen::Index r = 0; r < reduced_; ++r) full[keep_[static_cast<size_t>(r)]] = reduced[r];

  const Eigen::Index total = grid.total_nodes();
  Eigen::ArrayXd h = Eigen::ArrayXd::Zero(total);
  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    if (support_[lin] > 0.0) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const size_t ki = static_cast<size_t>(i);
        s += full[row_off_[ki] + idx[ki]] / grid.axes[ki].quad_weights[idx[ki]];
      }
      h[lin] = s;
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < grid.node_count(i)) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return h;
}

Eigen::VectorXd FeasibleSet::apply_full(const Eigen::ArrayXd& h) const {
  if (h.size() != w_.values.size())
    throw ShapeError("feasible set: field size mismatch");
  const std::vector<Eigen::ArrayXd> m =
      all_axis_marginals(w_.grid, (h * w_.values).eval());
  Eigen::VectorXd out(full_rows_);
  for (Eigen::Index i = 0; i < w_.grid.dim(); ++i)
    out.segment(row_off_[static_cast<size_t>(i)], w_.grid.node_count(i)) =
        m[static_cast<size_t>(i)].matrix();
  return out;
}

double FeasibleSet::feasibility_sup(const Eigen::ArrayXd& h) const {
  Eigen::VectorXd d = apply_full(h);
  for (Eigen::Index i = 0; i < w_.grid.dim(); ++i)
    d.segment(row_off_[static_cast<size_t>(i)], w_.grid.node_count(i)) -=
        g_.arrays[static_cast<size_t>(i)].matrix();
  return d.cwiseAbs().maxCoeff();
}

Eigen::ArrayXd FeasibleSet::project_kernel(const Eigen::ArrayXd& u) const {
  const Eigen::VectorXd mu = gram_.solve(reduce(apply_full(u)));
  return u - lift(mu);
}

Eigen::ArrayXd FeasibleSet::project_affine(const Eigen::ArrayXd& x) const {
  const Eigen::VectorXd defect = reduce(apply_full(x)) - g_reduced_;
  return x - lift(gram_.solve(defect));
}

Eigen::ArrayXd FeasibleSet::min_norm_point() const {
  return lift(gram_.solve(g_reduced_));
}

namespace {

double weighted_dot(const ScalarField& w, const Eigen::ArrayXd& wq, const Eigen::ArrayXd& a,
                    const Eigen::ArrayXd& b) {
  (void)w;
  return kahan_sum((a * b * wq).eval());
}

double objective_value(const Eigen::ArrayXd& x, const Eigen::ArrayXd& wq, double p) {
  Eigen::ArrayXd t(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) t[i] = std::pow(std::abs(x[i]), p);
  return kahan_sum((t * wq).eval());
}

Eigen::ArrayXd objective_gradient(const Eigen::ArrayXd& x, const Eigen::ArrayXd& support,
                                  double p) {
  // W-metric gradient of the objective: p sign(x) |x|^{p-1}, masked to the
  // support where the metric lives.
  Eigen::ArrayXd grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x[i];
    grad[i] = v == 0.0 ? 0.0 : p * (v > 0 ? 1.0 : -1.0) * std::pow(std::abs(v), p - 1.0);
  }
  return grad * support;
}

}  // namespace

OracleResult min_norm_direct(const ScalarField& w, const MarginalSet& g, double p,
                             const OracleOptions& opts) {
  if (!(p > 1.0)) throw ConfigError("oracle: p must exceed 1");
  if (opts.max_iter < 1) throw ConfigError("oracle: max_iter must be at least 1");
  FeasibleSet fs(w, g);
  const Eigen::ArrayXd wq = w.values * tensor_weights(w.grid);

  OracleResult res;
  Eigen::ArrayXd x = fs.min_norm_point();

  if (p == 2.0) {
    res.minimizer = ScalarField(w.grid, x);
    res.objective = objective_value(x, wq, 2.0);
    res.feasibility_sup = fs.feasibility_sup(x);
    res.stationarity_sup = fs.project_kernel(objective_gradient(x, fs.support_mask(), 2.0))
                               .abs()
                               .maxCoeff();
    res.iterations = 1;
    res.converged = true;
    return res;
  }

  // Projected Barzilai-Borwein descent in the W metric. For p < 2 the
  // gradient has square-root kinks wherever the minimizer crosses zero, so a
  // tiny projected-gradient norm can be unreachable in double precision; the
  // loop therefore also stops once the objective is stationary at machine
  // precision (an ftol-style rule), reporting the gradient floor honestly.
  double f = objective_value(x, wq, p);
  Eigen::ArrayXd grad = objective_gradient(x, fs.support_mask(), p);
  Eigen::ArrayXd d = fs.project_kernel(grad);
  std::deque<double> recent{f};

  const auto initial_alpha = [&] {
    const double dsup = d.abs().maxCoeff();
    return dsup > 0.0 ? 0.1 * (1.0 + x.abs().maxCoeff()) / dsup : 1.0;
  };
  Eigen::ArrayXd x_prev = x, grad_prev = grad;
  double alpha = initial_alpha();
  bool have_bb_pair = false;

  Eigen::ArrayXd best_x = x;
  double best_f = f;
  double best_at_last_stall = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const int plateau_limit = 50;
  const auto plateau_eps = [&] { return 1e-14 * (1.0 + std::abs(best_f)); };

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    res.stationarity_sup = d.abs().maxCoeff();
    if (res.stationarity_sup <= opts.tol_stationarity) {
      res.converged = true;
      break;
    }
    if (since_best >= plateau_limit) {
      res.converged = true;
      res.message = "objective stationary at machine precision; projected gradient floor";
      break;
    }

    if (have_bb_pair) {
      const Eigen::ArrayXd s = x - x_prev;
      const Eigen::ArrayXd y = grad - grad_prev;
      const double ss = weighted_dot(w, wq, s, s);
      const double sy = weighted_dot(w, wq, s, y);
      alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : std::min(alpha * 2.0, 1e12);
    }

    const double fmax = *std::max_element(recent.begin(), recent.end());
    const double dd = weighted_dot(w, wq, d, d);
    double t = alpha;
    bool accepted = false;
    Eigen::ArrayXd xc;
    double fc = 0.0;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      xc = x - t * d;
      fc = objective_value(xc, wq, p);
      if (fc <= fmax - 1e-6 * t * dd) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (best_f < best_at_last_stall - plateau_eps()) {
        // Progress since the previous stall: restart the BB memory from the
        // best point instead of giving up.
        best_at_last_stall = best_f;
        x = fs.project_affine(best_x);
        f = objective_value(x, wq, p);
        grad = objective_gradient(x, fs.support_mask(), p);
        d = fs.project_kernel(grad);
        recent.assign(1, f);
        alpha = initial_alpha();
        have_bb_pair = false;
        continue;
      }
      // Two stalls with no measurable objective progress between them: the
      // strictly convex objective cannot be improved in this precision.
      res.converged = true;
      res.message = "objective stationary at machine precision; projected gradient floor";
      break;
    }

    x_prev = x;
    grad_prev = grad;
    x = std::move(xc);
    f = fc;
    have_bb_pair = true;
    if (opts.reproject_every > 0 && (it + 1) % opts.reproject_every == 0)
      x = fs.project_affine(x);
    grad = objective_gradient(x, fs.support_mask(), p);
    d = fs.project_kernel(grad);
    recent.push_back(f);
    if (static_cast<int>(recent.size()) > opts.nonmonotone_window) recent.pop_front();
    if (f < best_f - plateau_eps()) since_best = 0;
    else ++since_best;
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  res.iterations = it;

  x = fs.project_affine(best_f < f ? best_x : x);
  res.minimizer = ScalarField(w.grid, x);
  res.objective = objective_value(x, wq, p);
  res.feasibility_sup = fs.feasibility_sup(x);
  res.stationarity_sup =
      fs.project_kernel(objective_gradient(x, fs.support_mask(), p)).abs().maxCoeff();
  if (!res.converged && res.stationarity_sup <= opts.tol_stationarity) res.converged = true;
  if (!res.converged && res.message.empty()) {
    std::ostringstream os;
    os << "projected gradient reached max_iter with stationarity " << res.stationarity_sup;
    res.message = os.str();
  }
  return res;
}

ScalarField null_space_element(const ScalarField& w, const ScalarField& psi) {
  w.grid.validate(2);
  if (!same_grid(w.grid, psi.grid))
    throw ShapeError("null space element: psi must live on the density grid");

  const GridSpec& grid = w.grid;
  const Eigen::Index n = grid.dim();
  const std::vector<Eigen::ArrayXd> num =
      all_axis_marginals(grid, (psi.values * w.values).eval());
  std::vector<Eigen::ArrayXd> m(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd wi = marginal_density(w, i);
    m[static_cast<size_t>(i)] = Eigen::ArrayXd::Zero(grid.node_count(i));
    for (Eigen::Index a = 0; a < grid.node_count(i); ++a)
      if (wi[a] > 0.0)
        m[static_cast<size_t>(i)][a] = num[static_cast<size_t>(i)][a] / wi[a];
  }
  const double T = integrate(psi, w);

  const Eigen::Index total = grid.total_nodes();
  Eigen::ArrayXd vals(total);
  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    double s = psi.values[lin];
    for (Eigen::Index i = 0; i < n; ++i)
      s -= m[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
    vals[lin] = s + static_cast<double>(n - 1) * T;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < grid.node_count(i)) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return ScalarField(grid, std::move(vals));
}

ScalarField random_feasible(const ScalarField& w, const MarginalSet& g, std::uint64_t seed,
                            double amplitude) {
  FeasibleSet fs(w, g);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::ArrayXd noise(w.values.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = amplitude * normal(rng);
  noise *= fs.support_mask();
  return ScalarField(w.grid, fs.min_norm_point() + fs.project_kernel(noise));
}

}  // namespace marglp
