#include "marglp/counterexamples.hpp"

#include <cmath>
#include <sstream>

namespace marglp {

WitnessSequences build_witness(double q, Eigen::Index K, WitnessFamily family) {
  if (!(q > 1.0)) throw ConfigError("witness: q must exceed 1");
  if (K < 2) throw ConfigError("witness: K must be at least 2");
  if (family == WitnessFamily::Auto)
    family = q > 1.5 ? WitnessFamily::PowerLaw : WitnessFamily::LogCorrected;
  if (family == WitnessFamily::PowerLaw && !(q > 1.5))
    throw ConfigError(
        "witness: the power-law family needs q > 1.5 (its L^1 sum against "
        "theta is a divergent p-series otherwise); use the log-corrected family");

  WitnessSequences ws;
  ws.q = q;
  ws.K = K;
  ws.theta.resize(K);
  ws.f.resize(K);
  ws.family = family == WitnessFamily::PowerLaw ? "power" : "log-corrected";
  for (Eigen::Index i = 0; i < K; ++i) {
    const double idx = static_cast<double>(i + 1);
    ws.theta[i] = 1.0 / (idx * idx);
    ws.f[i] = family == WitnessFamily::PowerLaw
                  ? std::pow(idx, 1.5 / q)
                  : std::pow(idx, 1.0 / q) * std::pow(std::log(idx + 1.0), 2.0 / q);
  }
  ws.theta /= kahan_sum(ws.theta);
  ws.g = -ws.f;
  return ws;
}

DivergenceCertificate certify_divergence(const WitnessSequences& ws,
                                         const CertifyOptions& opts) {
  if (!(ws.q > 1.0)) throw ConfigError("certificate: witness q must exceed 1");
  if (ws.theta.size() != ws.K || ws.f.size() != ws.K || ws.g.size() != ws.K)
    throw ShapeError("certificate: witness arrays must have length K");

  DivergenceCertificate cert;
  cert.q = ws.q;
  cert.growth_threshold = opts.growth_threshold;
  cert.increment_threshold = opts.increment_threshold;
  cert.ladder = opts.ladder;
  if (cert.ladder.empty()) {
    // The last four doublings of K. Early rungs sit outside the asymptotic
    // regime and would spoil the trend test, so they are left out.
    std::vector<Eigen::Index> rungs;
    for (Eigen::Index k = ws.K; k >= 2 && rungs.size() < 4; k /= 2) rungs.push_back(k);
    cert.ladder.assign(rungs.rbegin(), rungs.rend());
  }
  if (cert.ladder.size() < 3)
    throw ConfigError("certificate: ladder needs at least 3 rungs");
  for (size_t j = 0; j < cert.ladder.size(); ++j) {
    if (j > 0 && cert.ladder[j] <= cert.ladder[j - 1])
      throw ConfigError("certificate: ladder must be strictly increasing");
    if (cert.ladder[j] < 1 || cert.ladder[j] > ws.K)
      throw ConfigError("certificate: ladder rung exceeds the witness length K");
  }

  double S = 0.0, L = 0.0, Scomp = 0.0, Lcomp = 0.0;
  size_t rung = 0;
  for (Eigen::Index i = 0; i < ws.K && rung < cert.ladder.size(); ++i) {
    const double s_term = std::pow(std::abs(ws.f[i]), ws.q) * ws.theta[i];
    const double l_term = std::abs(ws.f[i]) * ws.theta[i];
    // Kahan updates; the ladder tails are where the small terms live.
    double y = s_term - Scomp, t = S + y;
    Scomp = (t - S) - y;
    S = t;
    y = l_term - Lcomp;
    t = L + y;
    Lcomp = (t - L) - y;
    L = t;
    while (rung < cert.ladder.size() && i + 1 == cert.ladder[rung]) {
      cert.marginal_sums.push_back(S);
      cert.l1_norms.push_back(L);
      ++rung;
    }
  }
  cert.joint_functional = kahan_sum((((ws.f + ws.g).abs().pow(ws.q)) * ws.theta).eval());

  const size_t R = cert.ladder.size();
  cert.growth_ratios.resize(R - 1);
  for (size_t j = 0; j + 1 < R; ++j)
    cert.growth_ratios[j] =
        cert.marginal_sums[j] > 0.0 ? cert.marginal_sums[j + 1] / cert.marginal_sums[j] : 0.0;
  cert.l1_increment_ratios.resize(R >= 3 ? R - 2 : 0);
  for (size_t j = 0; j + 2 < R; ++j) {
    const double d0 = cert.l1_norms[j + 1] - cert.l1_norms[j];
    const double d1 = cert.l1_norms[j + 2] - cert.l1_norms[j + 1];
    cert.l1_increment_ratios[j] = d0 > 0.0 ? d1 / d0 : 0.0;
  }

  // log S against log K slope.
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    size_t m = 0;
    for (size_t j = 0; j < R; ++j) {
      if (!(cert.marginal_sums[j] > 0.0)) continue;
      const double x = std::log(static_cast<double>(cert.ladder[j]));
      const double y = std::log(cert.marginal_sums[j]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
    const double denom = m * sxx - sx * sx;
    cert.fitted_exponent = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
  }

  cert.monotone = true;
  for (size_t j = 0; j + 1 < R; ++j)
    cert.monotone = cert.monotone && cert.marginal_sums[j + 1] > cert.marginal_sums[j];
  cert.marginal_diverges = cert.monotone;
  for (double r : cert.growth_ratios)
    cert.marginal_diverges = cert.marginal_diverges && r >= cert.growth_threshold;
  cert.l1_summable = !cert.l1_increment_ratios.empty();
  for (double r : cert.l1_increment_ratios)
    cert.l1_summable = cert.l1_summable && r <= cert.increment_threshold;
  cert.certified = cert.marginal_diverges && cert.l1_summable;

  std::ostringstream os;
  if (cert.certified) {
    os << "q-sums grow like K^" << cert.fitted_exponent
       << " per the ladder while the witness stays L^1-summable"
       << (cert.joint_functional == 0.0 ? " and the joint block sum is exactly 0" : "");
  } else if (!cert.marginal_diverges) {
    os << "q-sum growth falls below " << cert.growth_threshold
       << " per doubling; divergence not certified on this ladder";
  } else {
    os << "L^1 tail increments exceed " << cert.increment_threshold
       << "; summability not certified on this ladder";
  }
  cert.message = os.str();
  return cert;
}

Eigen::ArrayXd expand_blocks(const Eigen::ArrayXd& block_values, Eigen::Index nodes_per_block) {
  if (nodes_per_block < 1) throw ConfigError("expand_blocks: nodes_per_block must be positive");
  Eigen::ArrayXd out(block_values.size() * nodes_per_block);
  for (Eigen::Index i = 0; i < block_values.size(); ++i)
    out.segment(i * nodes_per_block, nodes_per_block).setConstant(block_values[i]);
  return out;
}

namespace {

void check_block_grid(const GridSpec& grid, Eigen::Index K) {
  grid.validate(2);
  if (grid.dim() != 2)
    throw ConfigError("block grid: exactly 2 axes required");
  for (Eigen::Index i = 0; i < 2; ++i) {
    const Axis& ax = grid.axes[static_cast<size_t>(i)];
    if (std::abs(ax.lower - 1.0) > 1e-9 ||
        std::abs(ax.upper - static_cast<double>(K + 1)) > 1e-9 || ax.count() % K != 0)
      throw InputError("block grid: axis " + std::to_string(i) + " must cover [1, " +
                       std::to_string(K + 1) + ") with node count a multiple of " +
                       std::to_string(K));
  }
}

// f evaluated along one axis of the block grid, as a node array.
Eigen::ArrayXd blocks_on_axis(const GridSpec& grid, Eigen::Index axis,
                              const Eigen::ArrayXd& block_values) {
  const Eigen::Index K = block_values.size();
  const Eigen::Index npb = grid.node_count(axis) / K;
  return expand_blocks(block_values, npb);
}

}  // namespace

SmirnovViolationReport smirnov_violation_report(const WitnessSequences& ws, double alpha,
                                                const std::optional<ScalarField>& background,
                                                const GridSpec& grid,
                                                const CertifyOptions& certify) {
  check_block_grid(grid, ws.K);
  SmirnovViolationReport rep;
  rep.q = ws.q;
  rep.alpha = alpha;
  rep.witness = ws;
  rep.certificate = certify_divergence(ws, certify);

  DiagonalCounterexampleSpec spec;
  spec.alpha = alpha;
  spec.theta = ws.theta;
  spec.study_mode = alpha == 0.0;
  if (alpha > 0.0) {
    if (background)
      spec.background = *background;
    else
      spec.background = constant_field(
          grid, 1.0 / (static_cast<double>(ws.K) * static_cast<double>(ws.K)));
  }
  rep.density = assemble_diagonal(spec, grid, &rep.provenance);

  const Eigen::ArrayXd fx = blocks_on_axis(grid, 0, ws.f);
  const Eigen::ArrayXd gy = blocks_on_axis(grid, 1, ws.g);
  const Eigen::Index n0 = grid.node_count(0), n1 = grid.node_count(1);
  Eigen::ArrayXd joint(n0 * n1), fonly(n0 * n1), gonly(n0 * n1);
  for (Eigen::Index a = 0; a < n0; ++a)
    for (Eigen::Index b = 0; b < n1; ++b) {
      const Eigen::Index lin = a * n1 + b;
      joint[lin] = std::pow(std::abs(fx[a] + gy[b]), ws.q);
      fonly[lin] = std::pow(std::abs(fx[a]), ws.q);
      gonly[lin] = std::pow(std::abs(gy[b]), ws.q);
    }
  rep.joint_lq = integrate(ScalarField(grid, joint), rep.density);
  rep.f_lq = integrate(ScalarField(grid, fonly), rep.density);
  rep.g_lq = integrate(ScalarField(grid, gonly), rep.density);
  rep.background_lq =
      spec.background ? integrate(ScalarField(grid, joint), *spec.background) : 0.0;

  if (rep.certificate.certified) {
    rep.provenance.has_violation_witness = true;
    std::ostringstream os;
    os << "block witness at q = " << ws.q << " (" << ws.family
       << " family): " << rep.certificate.message;
    rep.provenance.witness_detail = os.str();
  }
  rep.verdict = classify_smirnov(rep.density, rep.provenance, ws.q);
  return rep;
}

NonuniquenessReport nonuniqueness_witness(const WitnessSequences& ws, const GridSpec& grid) {
  if (ws.q != 2.0)
    throw ConfigError("nonuniqueness witness: only q = 2 is supported (Hilbert case)");
  check_block_grid(grid, ws.K);

  NonuniquenessReport rep;
  rep.witness = ws;
  // Rebalance the first block value so the normalization sum vanishes.
  double tail = 0.0, comp = 0.0;
  for (Eigen::Index i = 1; i < ws.K; ++i) {
    const double y = ws.f[i] * ws.theta[i] - comp;
    const double t = tail + y;
    comp = (t - tail) - y;
    tail = t;
  }
  rep.witness.f[0] = -tail / ws.theta[0];
  rep.witness.g = -rep.witness.f;

  DiagonalCounterexampleSpec spec;
  spec.alpha = 0.0;
  spec.theta = ws.theta;
  spec.study_mode = true;
  rep.w = assemble_diagonal(spec, grid);

  const Eigen::ArrayXd fx = blocks_on_axis(grid, 0, rep.witness.f);
  const Eigen::ArrayXd gy = blocks_on_axis(grid, 1, rep.witness.g);
  rep.witness_phi.phi = {fx, gy};
  rep.zero_g.arrays = {Eigen::ArrayXd::Zero(grid.node_count(0)),
                       Eigen::ArrayXd::Zero(grid.node_count(1))};

  // Blockwise checks: the block value f_k theta_k must equal its own
  // quadrature over the block (unit length), and symmetrically for g. The
  // full system residual of the pair is recorded separately.
  {
    const Eigen::Index npb0 = grid.node_count(0) / ws.K;
    const Eigen::Index npb1 = grid.node_count(1) / ws.K;
    double e1 = 0.0, e2 = 0.0;
    for (Eigen::Index k = 0; k < ws.K; ++k) {
      double quad_f = 0.0, quad_g = 0.0;
      for (Eigen::Index a = 0; a < npb0; ++a)
        quad_f += fx[k * npb0 + a] * ws.theta[k] *
                  grid.axes[0].quad_weights[k * npb0 + a];
      for (Eigen::Index b = 0; b < npb1; ++b)
        quad_g += gy[k * npb1 + b] * ws.theta[k] *
                  grid.axes[1].quad_weights[k * npb1 + b];
      e1 = std::max(e1, std::abs(rep.witness.f[k] * ws.theta[k] - quad_f));
      e2 = std::max(e2, std::abs(rep.witness.g[k] * ws.theta[k] - quad_g));
    }
    rep.eq1_residual_sup = e1;
    rep.eq2_residual_sup = e2;

    double s = 0.0, c = 0.0;
    for (Eigen::Index i = 0; i < ws.K; ++i) {
      const double y = rep.witness.f[i] * ws.theta[i] - c;
      const double t = s + y;
      c = (t - s) - y;
      s = t;
    }
    rep.eq3_residual = s;
    rep.witness_residual_sup = residual(rep.w, rep.zero_g, rep.witness_phi, 2.0).sup;
  }

  rep.f_plus_g_zero = ((rep.witness.f + rep.witness.g).abs() == 0.0).all();
  rep.witness_sup = rep.witness.f.abs().maxCoeff();

  for (Eigen::Index k = ws.K; k >= 2 && rep.ladder.size() < 4; k /= 2)
    rep.ladder.push_back(k);
  std::reverse(rep.ladder.begin(), rep.ladder.end());
  double S = 0.0;
  size_t rung = 0;
  for (Eigen::Index i = 0; i < ws.K && rung < rep.ladder.size(); ++i) {
    S += rep.witness.f[i] * rep.witness.f[i] * ws.theta[i];
    while (rung < rep.ladder.size() && i + 1 == rep.ladder[rung]) {
      rep.norm_partial_sums.push_back(S);
      ++rung;
    }
  }
  return rep;
}

}  // namespace marglp
