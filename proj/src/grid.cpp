#include "marglp/grid.hpp"

#include <cmath>
#include <limits>

namespace marglp {

const char* to_string(QuadScheme s) {
  return s == QuadScheme::Midpoint ? "midpoint" : "trapezoid";
}

QuadScheme quad_scheme_from_string(const std::string& s) {
  if (s == "midpoint") return QuadScheme::Midpoint;
  if (s == "trapezoid") return QuadScheme::Trapezoid;
  throw ConfigError("unknown quadrature scheme '" + s + "' (expected midpoint or trapezoid)");
}

Axis build_axis(double lower, double upper, Eigen::Index node_count, QuadScheme scheme,
                bool truncated) {
  if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper))
    throw ConfigError("build_axis: require finite lower < upper");
  if (node_count < 2) throw ConfigError("build_axis: node_count must be >= 2");

  Axis ax;
  ax.lower = lower;
  ax.upper = upper;
  ax.scheme = scheme;
  ax.truncated = truncated;
  ax.nodes.resize(node_count);
  ax.quad_weights.resize(node_count);
  const double len = upper - lower;
  if (scheme == QuadScheme::Midpoint) {
    const double h = len / static_cast<double>(node_count);
    for (Eigen::Index k = 0; k < node_count; ++k) {
      ax.nodes[k] = lower + (static_cast<double>(k) + 0.5) * h;
      ax.quad_weights[k] = h;
    }
  } else {
    const double h = len / static_cast<double>(node_count - 1);
    for (Eigen::Index k = 0; k < node_count; ++k) {
      ax.nodes[k] = lower + static_cast<double>(k) * h;
      ax.quad_weights[k] = (k == 0 || k == node_count - 1) ? 0.5 * h : h;
    }
  }
  return ax;
}

Eigen::Index GridSpec::total_nodes() const {
  Eigen::Index total = 1;
  for (const Axis& ax : axes) total *= ax.count();
  return total;
}

Eigen::Index GridSpec::stride(Eigen::Index i) const {
  Eigen::Index s = 1;
  for (size_t j = static_cast<size_t>(i) + 1; j < axes.size(); ++j) s *= axes[j].count();
  return s;
}

void GridSpec::validate(Eigen::Index min_axes) const {
  if (dim() < min_axes)
    throw ConfigError("grid must have at least " + std::to_string(min_axes) + " axes, got " +
                      std::to_string(dim()));
  for (size_t i = 0; i < axes.size(); ++i) {
    const Axis& ax = axes[i];
    const std::string tag = "axis " + std::to_string(i);
    if (ax.count() < 2) throw ConfigError(tag + ": fewer than 2 nodes");
    if (ax.nodes.size() != ax.quad_weights.size())
      throw ConfigError(tag + ": nodes/quad_weights size mismatch");
    if (!(ax.lower < ax.upper)) throw ConfigError(tag + ": lower >= upper");
    for (Eigen::Index k = 0; k < ax.count(); ++k) {
      if (ax.nodes[k] < ax.lower || ax.nodes[k] > ax.upper)
        throw ConfigError(tag + ": node outside [lower, upper]");
      if (k > 0 && !(ax.nodes[k] > ax.nodes[k - 1]))
        throw ConfigError(tag + ": nodes not strictly increasing");
      if (!(ax.quad_weights[k] > 0.0)) throw ConfigError(tag + ": non-positive quad weight");
    }
    const double wsum = kahan_sum(ax.quad_weights);
    const double len = ax.upper - ax.lower;
    if (std::abs(wsum - len) > 1e-12 * std::abs(len))
      throw ConfigError(tag + ": quad weights do not sum to the interval length");
  }
}

bool GridSpec::any_truncated() const {
  for (const Axis& ax : axes)
    if (ax.truncated) return true;
  return false;
}

bool same_grid(const GridSpec& a, const GridSpec& b) {
  if (a.dim() != b.dim()) return false;
  for (size_t i = 0; i < a.axes.size(); ++i) {
    const Axis& x = a.axes[i];
    const Axis& y = b.axes[i];
    if (x.count() != y.count() || x.lower != y.lower || x.upper != y.upper ||
        x.scheme != y.scheme)
      return false;
  }
  return true;
}

ScalarField::ScalarField(GridSpec g, Eigen::ArrayXd v) : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.total_nodes())
    throw ShapeError("ScalarField: values size " + std::to_string(values.size()) +
                     " != grid total " + std::to_string(grid.total_nodes()));
  if (!values.allFinite()) throw InputError("ScalarField: non-finite value");
}

ScalarField constant_field(const GridSpec& grid, double value) {
  return ScalarField(grid, Eigen::ArrayXd::Constant(grid.total_nodes(), value));
}

MarginalSet zero_marginals(const GridSpec& grid) {
  MarginalSet m;
  for (const Axis& ax : grid.axes) m.arrays.push_back(Eigen::ArrayXd::Zero(ax.count()));
  return m;
}

double kahan_sum(const Eigen::ArrayXd& v) {
  double sum = 0.0, c = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double y = v[k] - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum;
}

double axis_integral(const Axis& axis, const Eigen::ArrayXd& a) {
  if (a.size() != axis.count()) throw ShapeError("axis_integral: array length != node count");
  return kahan_sum(a * axis.quad_weights);
}

Eigen::ArrayXd tensor_weights(const GridSpec& grid) {
  const Eigen::Index total = grid.total_nodes();
  Eigen::ArrayXd q = Eigen::ArrayXd::Ones(total);
  // Multiply in one axis at a time using the row-major strides.
  for (Eigen::Index i = 0; i < grid.dim(); ++i) {
    const Axis& ax = grid.axes[static_cast<size_t>(i)];
    const Eigen::Index s = grid.stride(i);
    const Eigen::Index block = s * ax.count();
    for (Eigen::Index lin = 0; lin < total; ++lin) {
      const Eigen::Index a = (lin % block) / s;
      q[lin] *= ax.quad_weights[a];
    }
  }
  return q;
}

double integrate(const ScalarField& f) {
  return kahan_sum(f.values * tensor_weights(f.grid));
}

double integrate(const ScalarField& f, const ScalarField& w) {
  if (!same_grid(f.grid, w.grid)) throw ShapeError("integrate: fields on different grids");
  return kahan_sum(f.values * w.values * tensor_weights(f.grid));
}

double weighted_p_norm(const ScalarField& f, const ScalarField& w, double p) {
  if (!(p > 1.0)) throw ConfigError("weighted_p_norm: require p > 1");
  if (!same_grid(f.grid, w.grid)) throw ShapeError("weighted_p_norm: fields on different grids");
  const double m = kahan_sum(f.values.abs().pow(p) * w.values * tensor_weights(f.grid));
  return std::pow(m, 1.0 / p);
}

std::vector<Eigen::ArrayXd> all_axis_marginals(const GridSpec& grid,
                                               const Eigen::ArrayXd& values) {
  if (values.size() != grid.total_nodes())
    throw ShapeError("all_axis_marginals: values size mismatch");
  const Eigen::Index n = grid.dim();
  const Eigen::Index total = grid.total_nodes();
  const Eigen::ArrayXd q = tensor_weights(grid);

  std::vector<Eigen::ArrayXd> acc(static_cast<size_t>(n));
  std::vector<Eigen::ArrayXd> comp(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    acc[static_cast<size_t>(i)] = Eigen::ArrayXd::Zero(grid.node_count(i));
    comp[static_cast<size_t>(i)] = Eigen::ArrayXd::Zero(grid.node_count(i));
  }

  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    const double v = values[lin] * q[lin];
    for (Eigen::Index i = 0; i < n; ++i) {
      double& sum = acc[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
      double& c = comp[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
      const double y = v - c;
      const double t = sum + y;
      c = (t - sum) - y;
      sum = t;
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < grid.node_count(i)) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  // Divide out the own-axis weight: sum over the slice used Q = q_i(a) * Q_i^c.
  for (Eigen::Index i = 0; i < n; ++i)
    acc[static_cast<size_t>(i)] /= grid.axes[static_cast<size_t>(i)].quad_weights;
  return acc;
}

Eigen::ArrayXd marginal_density(const ScalarField& w, Eigen::Index i) {
  if (i < 0 || i >= w.grid.dim()) throw ShapeError("marginal_density: axis index out of range");
  return all_axis_marginals(w.grid, w.values)[static_cast<size_t>(i)];
}

ScalarField comarginal_density(const ScalarField& w, Eigen::Index i) {
  const GridSpec& grid = w.grid;
  const Eigen::Index n = grid.dim();
  if (i < 0 || i >= n) throw ShapeError("comarginal_density: axis index out of range");
  if (n < 2) throw ShapeError("comarginal_density: grid must have at least 2 axes");

  GridSpec residual;
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != i) residual.axes.push_back(grid.axes[static_cast<size_t>(j)]);

  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(residual.total_nodes());
  const Eigen::Index total = grid.total_nodes();
  const Axis& ax = grid.axes[static_cast<size_t>(i)];
  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    Eigen::Index rlin = 0;
    Eigen::Index rstride = 1;
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      if (j == i) continue;
      rlin += idx[static_cast<size_t>(j)] * rstride;
      rstride *= grid.node_count(j);
    }
    out[rlin] += w.values[lin] * ax.quad_weights[idx[static_cast<size_t>(i)]];
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      if (++idx[static_cast<size_t>(j)] < grid.node_count(j)) break;
      idx[static_cast<size_t>(j)] = 0;
    }
  }
  return ScalarField(std::move(residual), std::move(out));
}

PairSums pair_marginals(const GridSpec& grid, const Eigen::ArrayXd& values) {
  if (values.size() != grid.total_nodes()) throw ShapeError("pair_marginals: values size mismatch");
  const Eigen::Index n = grid.dim();
  const Eigen::Index total = grid.total_nodes();
  const Eigen::ArrayXd q = tensor_weights(grid);

  PairSums ps;
  ps.axis.resize(static_cast<size_t>(n));
  ps.pair.resize(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    ps.axis[static_cast<size_t>(i)] = Eigen::ArrayXd::Zero(grid.node_count(i));
    ps.pair[static_cast<size_t>(i)].resize(static_cast<size_t>(n));
    for (Eigen::Index j = i + 1; j < n; ++j)
      ps.pair[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          Eigen::MatrixXd::Zero(grid.node_count(i), grid.node_count(j));
  }

  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    const double v = values[lin] * q[lin];
    for (Eigen::Index i = 0; i < n; ++i) {
      ps.axis[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]] += v;
      for (Eigen::Index j = i + 1; j < n; ++j)
        ps.pair[static_cast<size_t>(i)][static_cast<size_t>(j)](idx[static_cast<size_t>(i)],
                                                                idx[static_cast<size_t>(j)]) += v;
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < grid.node_count(i)) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return ps;
}

ScalarField refine_dyadic(const ScalarField& f) {
  const GridSpec& grid = f.grid;
  const Eigen::Index n = grid.dim();
  GridSpec fine;
  for (const Axis& ax : grid.axes) {
    if (ax.scheme != QuadScheme::Midpoint)
      throw ConfigError("refine_dyadic: only midpoint grids have a piecewise-constant reading");
    fine.axes.push_back(build_axis(ax.lower, ax.upper, 2 * ax.count(), ax.scheme, ax.truncated));
  }
  Eigen::ArrayXd out(fine.total_nodes());
  const Eigen::Index total = fine.total_nodes();
  std::vector<Eigen::Index> idx(static_cast<size_t>(n), 0);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    Eigen::Index coarse = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      coarse += (idx[static_cast<size_t>(i)] / 2) * grid.stride(i);
    out[lin] = f.values[coarse];
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < fine.node_count(i)) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return ScalarField(std::move(fine), std::move(out));
}

std::vector<double> marginal_masses(const GridSpec& grid, const MarginalSet& g) {
  if (g.axis_count() != grid.dim()) throw ShapeError("marginal_masses: axis count mismatch");
  std::vector<double> m;
  for (Eigen::Index i = 0; i < grid.dim(); ++i) {
    const Axis& ax = grid.axes[static_cast<size_t>(i)];
    if (g.arrays[static_cast<size_t>(i)].size() != ax.count())
      throw ShapeError("marginal_masses: array length mismatch on axis " + std::to_string(i));
    m.push_back(axis_integral(ax, g.arrays[static_cast<size_t>(i)]));
  }
  return m;
}

double marginal_mass_mismatch(const GridSpec& grid, const MarginalSet& g) {
  const std::vector<double> m = marginal_masses(grid, g);
  double lo = m[0], hi = m[0], amax = 0.0;
  for (double v : m) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    amax = std::max(amax, std::abs(v));
  }
  return (hi - lo) / (1.0 + amax);
}

}  // namespace marglp
