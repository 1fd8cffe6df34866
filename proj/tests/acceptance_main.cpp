// Acceptance gate: every release-blocking property in one binary, one
// PASS/FAIL line each, nonzero exit when anything fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "marglp/counterexamples.hpp"
#include "marglp/densities.hpp"
#include "marglp/grid.hpp"
#include "marglp/oracle.hpp"
#include "marglp/solver.hpp"

using namespace marglp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail) {
  std::printf("[%d] %s  %-34s %s\n", idx, ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

GridSpec cube(Eigen::Index n_axes, Eigen::Index nodes, double lo = 0.0, double hi = 1.0) {
  GridSpec g;
  for (Eigen::Index i = 0; i < n_axes; ++i) g.axes.push_back(build_axis(lo, hi, nodes));
  return g;
}

MarginalSet weighted_marginals(const ScalarField& f, const ScalarField& w) {
  MarginalSet m;
  m.arrays = all_axis_marginals(w.grid, (f.values * w.values).eval());
  return m;
}

// Smooth seeded generating function with O(1) values on any box.
ScalarField random_smooth_field(const GridSpec& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Index n = grid.dim();
  std::vector<double> lin(static_cast<size_t>(n)), quad(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    lin[static_cast<size_t>(i)] = u(rng);
    quad[static_cast<size_t>(i)] = u(rng);
  }
  const double c0 = u(rng), cx = u(rng);
  return sample_field(grid, [&](const std::vector<double>& p) {
    double v = c0, prod = 1.0;
    for (size_t i = 0; i < p.size(); ++i) {
      const Axis& ax = grid.axes[i];
      const double t = (p[i] - ax.lower) / (ax.upper - ax.lower);
      v += lin[i] * t + quad[i] * t * t;
      prod *= t;
    }
    return v + cx * prod;
  });
}

ScalarField seeded_mixture(const GridSpec& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-0.4, 0.4);
  std::uniform_real_distribution<double> wgt(0.5, 1.5);
  ProductMixtureSpec spec;
  for (int c = 0; c < 3; ++c) {
    ProductMixtureSpec::Component comp;
    comp.weight = wgt(rng);
    for (const Axis& ax : grid.axes) {
      const double a = coef(rng), b = coef(rng);
      Eigen::ArrayXd f(ax.count());
      for (Eigen::Index k = 0; k < ax.count(); ++k) {
        const double t = (ax.nodes[k] - ax.lower) / (ax.upper - ax.lower);
        f[k] = 1.0 + a * t + b * t * t;
      }
      comp.factors.push_back(std::move(f));
    }
    spec.components.push_back(std::move(comp));
  }
  return assemble_product_mixture(spec, grid, nullptr);
}

ScalarField diagonal_density(Eigen::Index K, Eigen::Index npb, double alpha,
                             GridSpec* grid_out) {
  GridSpec g = cube(2, K * npb, 1.0, static_cast<double>(K + 1));
  DiagonalCounterexampleSpec spec;
  spec.alpha = alpha;
  spec.theta = Eigen::ArrayXd(K);
  for (Eigen::Index i = 0; i < K; ++i)
    spec.theta[i] = 1.0 / ((static_cast<double>(i) + 1.0) * (static_cast<double>(i) + 1.0));
  spec.theta /= spec.theta.sum();
  spec.study_mode = alpha == 0.0;
  if (alpha > 0.0)
    spec.background =
        constant_field(g, 1.0 / (static_cast<double>(K) * static_cast<double>(K)));
  ScalarField w = assemble_diagonal(spec, g, nullptr);
  *grid_out = w.grid;
  return w;
}

struct Instance {
  ScalarField w;
  MarginalSet g;
  double p = 2.0;
  std::string tag;
};

std::vector<Instance> seeded_instances() {
  struct Row {
    int n;
    Eigen::Index nodes;
    char density;  // u, m, d
    double p;
  };
  const Row rows[] = {
      {2, 16, 'u', 1.5}, {2, 24, 'u', 2.0}, {2, 32, 'u', 3.0},  //
      {2, 16, 'm', 2.0}, {2, 20, 'm', 3.0}, {2, 24, 'm', 1.5},  //
      {2, 28, 'm', 2.0}, {2, 32, 'm', 1.5},                     //
      {2, 16, 'd', 1.5}, {2, 16, 'd', 3.0}, {2, 24, 'd', 2.0},  //
      {2, 24, 'd', 1.5}, {2, 32, 'd', 3.0}, {2, 32, 'd', 2.0},  //
      {3, 8, 'u', 1.5},  {3, 8, 'm', 3.0},  {3, 10, 'u', 2.0},  //
      {3, 10, 'm', 1.5}, {3, 12, 'u', 3.0}, {3, 12, 'm', 2.0},
  };
  std::vector<Instance> out;
  std::uint64_t seed = 1000;
  for (const Row& r : rows) {
    Instance inst;
    GridSpec grid;
    if (r.density == 'u') {
      grid = cube(r.n, r.nodes);
      inst.w = constant_field(grid, 1.0);
    } else if (r.density == 'm') {
      grid = cube(r.n, r.nodes);
      inst.w = seeded_mixture(grid, seed);
    } else {
      inst.w = diagonal_density(8, r.nodes / 8, 0.5, &grid);
    }
    inst.g = weighted_marginals(random_smooth_field(grid, seed + 7), inst.w);
    inst.p = r.p;
    inst.tag = fmt("n%d %c %lldpts p%.1f", r.n, r.density,
                   static_cast<long long>(r.nodes), r.p);
    out.push_back(std::move(inst));
    ++seed;
  }
  return out;
}

SolveResult solve_instance(const Instance& inst, double tol) {
  SolveOptions opts;
  opts.p = inst.p;
  opts.tol_residual = tol;
  return inst.p == 2.0 ? solve_p2(inst.w, inst.g, opts) : solve_newton(inst.w, inst.g, opts);
}

// 1. p = 2 closed form on the uniform square, with second-order refinement.
void criterion_1() {
  const auto t0 = Clock::now();
  auto bound_at = [](Eigen::Index nodes) {
    const GridSpec g = cube(2, nodes);
    const ScalarField w = constant_field(g, 1.0);
    const ScalarField f =
        sample_field(g, [](const std::vector<double>& p) { return p[0] + p[1]; });
    const SolveResult res = solve_p2(w, weighted_marginals(f, w));
    return res.report.converged ? lower_bound(w, weighted_marginals(f, w), res.phi, 2.0).bound
                                : std::nan("");
  };
  const double e64 = std::abs(bound_at(64) - 7.0 / 6.0);
  const double e128 = std::abs(bound_at(128) - 7.0 / 6.0);
  const double dt = seconds_since(t0);
  const bool ok = e64 < 2e-3 && e128 <= 0.5 * e64 && dt < 5.0;
  report(1, "p=2 hypercube closed form", ok,
         fmt("err64=%.3g err128=%.3g time=%.2fs (tol 2e-3, halving, <5s)", e64, e128, dt));
}

// 2 + 3. Solver vs oracle on 20 seeded instances; bound dominance over 100
// seeded feasible fields per instance.
void criteria_2_3() {
  const auto t0 = Clock::now();
  const std::vector<Instance> instances = seeded_instances();
  double worst_gap = 0.0, worst_margin = 1e300;
  int solved = 0;
  std::string first_fail;
  for (size_t k = 0; k < instances.size(); ++k) {
    const Instance& inst = instances[k];
    const SolveResult res = solve_instance(inst, 1e-11);
    const OracleResult oracle = min_norm_direct(inst.w, inst.g, inst.p);
    if (!res.report.converged || !oracle.converged) {
      if (first_fail.empty())
        first_fail = fmt("instance %zu (%s) did not converge", k, inst.tag.c_str());
      continue;
    }
    ++solved;
    const double bound = lower_bound(inst.w, inst.g, res.phi, inst.p).bound;
    const double gap = std::abs(bound - oracle.objective) / (1.0 + std::abs(bound));
    worst_gap = std::max(worst_gap, gap);

    for (std::uint64_t s = 0; s < 100; ++s) {
      const ScalarField h = random_feasible(inst.w, inst.g, 40000 + 100 * k + s, 0.8);
      Eigen::ArrayXd hp(h.values.size());
      for (Eigen::Index i = 0; i < hp.size(); ++i)
        hp[i] = std::pow(std::abs(h.values[i]), inst.p);
      const double norm_pow = integrate(ScalarField(inst.w.grid, std::move(hp)), inst.w);
      worst_margin = std::min(worst_margin, norm_pow - bound + 1e-8 * (1.0 + bound));
    }
  }
  const double dt = seconds_since(t0);
  const bool ok2 = solved == 20 && worst_gap <= 1e-6 && dt < 180.0;
  report(2, "oracle equivalence, 20 instances", ok2,
         first_fail.empty()
             ? fmt("max rel gap=%.3g time=%.1fs (tol 1e-6, <180s)", worst_gap, dt)
             : first_fail);
  report(3, "bound dominance, 100 fields each", worst_margin >= 0.0 && solved == 20,
         fmt("min slack=%.3g over 2000 samples (>= 0 required)", worst_margin));
}

// 4. Null-space orthogonality of the converged minimizer.
void criterion_4() {
  struct Case {
    ScalarField w;
    double p;
  };
  const GridSpec g1 = cube(2, 24);
  ScalarField wprod = sample_field(g1, [](const std::vector<double>& p) {
    return (1.0 + 0.6 * p[0]) * std::exp(-0.4 * p[1]);
  });
  wprod.values /= integrate(wprod);
  std::vector<Case> cases;
  cases.push_back({constant_field(g1, 1.0), 3.0});
  cases.push_back({wprod, 1.5});

  double worst_pair = 0.0, worst_marg = 0.0;
  bool all_converged = true;
  int samples = 0;
  for (const Case& c : cases) {
    const ScalarField f = random_smooth_field(c.w.grid, 555);
    const MarginalSet m = weighted_marginals(f, c.w);
    SolveOptions opts;
    opts.p = c.p;
    opts.tol_residual = 1e-11;
    const SolveResult res =
        c.p == 2.0 ? solve_p2(c.w, m, opts) : solve_newton(c.w, m, opts);
    all_converged = all_converged && res.report.converged;
    const ScalarField h = reconstruct_minimizer(c.w.grid, res.phi, c.p);
    Eigen::ArrayXd sh(h.values.size());
    for (Eigen::Index i = 0; i < sh.size(); ++i)
      sh[i] = signed_power(h.values[i], c.p - 1.0);

    std::mt19937_64 rng(2026);
    std::normal_distribution<double> gauss;
    for (int s = 0; s < 25; ++s, ++samples) {
      Eigen::ArrayXd noise(c.w.grid.total_nodes());
      for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = gauss(rng);
      const ScalarField phi = null_space_element(c.w, ScalarField(c.w.grid, std::move(noise)));

      const auto marg = all_axis_marginals(c.w.grid, (phi.values * c.w.values).eval());
      for (const Eigen::ArrayXd& a : marg)
        worst_marg = std::max(worst_marg, a.abs().maxCoeff());

      const double pair =
          std::abs(integrate(ScalarField(c.w.grid, (sh * phi.values).eval()), c.w));
      const double norm = weighted_p_norm(phi, c.w, c.p);
      worst_pair = std::max(worst_pair, pair / std::max(norm, 1e-300));
    }
  }
  const bool ok = all_converged && samples == 50 && worst_pair <= 1e-8 && worst_marg <= 1e-10;
  report(4, "null-space orthogonality, 50 samples", ok,
         fmt("max |<s(h),phi>|/||phi||=%.3g max marg=%.3g (tol 1e-8 / 1e-10)", worst_pair,
             worst_marg));
}

// 5. Analytic vs central-difference Jacobian.
void criterion_5() {
  const GridSpec g = cube(2, 8);
  ScalarField w = sample_field(g, [](const std::vector<double>& p) {
    return 1.0 + 0.4 * p[0] - 0.3 * p[1] + 0.2 * p[0] * p[1];
  });
  w.values /= integrate(w);
  const ScalarField f =
      sample_field(g, [](const std::vector<double>& p) { return p[0] - 0.5 * p[1]; });
  const MarginalSet m = weighted_marginals(f, w);

  double worst = 0.0;
  for (double p : {1.5, 2.0, 3.0}) {
    MultiplierSet phi = zero_multipliers(g);
    for (size_t i = 0; i < 2; ++i)
      for (Eigen::Index k = 0; k < phi.phi[i].size(); ++k)
        phi.phi[i][k] = 0.9 + 0.15 * std::cos(2.3 * static_cast<double>(k) + double(i));

    const Eigen::MatrixXd J = stacked_jacobian(w, phi, p);
    Eigen::MatrixXd Jfd(J.rows(), J.cols());
    const double step = 1e-6;
    Eigen::Index col = 0;
    for (size_t i = 0; i < 2; ++i)
      for (Eigen::Index k = 0; k < phi.phi[i].size(); ++k, ++col) {
        MultiplierSet hi = phi, lo = phi;
        hi.phi[i][k] += step;
        lo.phi[i][k] -= step;
        Jfd.col(col) =
            (stacked_residual(w, m, hi, p) - stacked_residual(w, m, lo, p)) / (2.0 * step);
      }
    worst = std::max(worst,
                     (J - Jfd).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff()));
  }
  report(5, "jacobian vs central differences", worst <= 1e-5,
         fmt("max rel err=%.3g over p in {1.5,2,3} (tol 1e-5)", worst));
}

// 6. Initialization independence of the mean multiplier field.
void criterion_6() {
  const GridSpec g = cube(2, 16);
  const ScalarField w = seeded_mixture(g, 77);
  const ScalarField f = random_smooth_field(g, 78);
  const MarginalSet m = weighted_marginals(f, w);

  SolveOptions a;
  a.p = 3.0;
  a.tol_residual = 1e-12;
  a.init = InitScheme::FromP2;
  SolveOptions b = a;
  b.init = InitScheme::Zeros;
  b.homotopy_steps = 1;

  const SolveResult ra = solve_newton(w, m, a);
  const SolveResult rb = solve_newton(w, m, b);
  double sup = 1e300;
  if (ra.report.converged && rb.report.converged) {
    const ScalarField bar_a = mean_multiplier_field(g, ra.phi);
    const ScalarField bar_b = mean_multiplier_field(g, rb.phi);
    sup = (bar_a.values - bar_b.values).abs().maxCoeff();
  }
  report(6, "init independence (zeros vs p2)", sup <= 1e-7,
         fmt("sup |PhiBar difference|=%.3g at p=3 (tol 1e-7)", sup));
}

// 7. Divergence certificate on the canonical ladder.
void criterion_7() {
  const auto t0 = Clock::now();
  const WitnessSequences ws = build_witness(2.0, 512);
  CertifyOptions opts;
  opts.ladder = {64, 128, 256, 512};
  const DivergenceCertificate cert = certify_divergence(ws, opts);
  const double dt = seconds_since(t0);

  bool ratios_ok = true;
  for (double r : cert.growth_ratios) ratios_ok = ratios_ok && r >= 1.2;
  for (double r : cert.l1_increment_ratios) ratios_ok = ratios_ok && r <= 0.9;
  const bool ok =
      cert.certified && ratios_ok && cert.joint_functional == 0.0 && dt < 1.0;
  report(7, "divergence certificate q=2", ok,
         fmt("growth>=%.3f incr<=%.3f joint=%g time=%.3fs (1.2 / 0.9 / 0 / <1s)",
             *std::min_element(cert.growth_ratios.begin(), cert.growth_ratios.end()),
             *std::max_element(cert.l1_increment_ratios.begin(),
                               cert.l1_increment_ratios.end()),
             cert.joint_functional, dt));
}

// 8. Non-uniqueness witness at K = 512 with solver degeneracy diagnostics.
void criterion_8() {
  const WitnessSequences ws = build_witness(2.0, 512);
  GridSpec grid = cube(2, 512, 1.0, 513.0);
  const NonuniquenessReport rep = nonuniqueness_witness(ws, grid);
  const SolveResult s = solve_p2(rep.w, rep.zero_g);

  const bool ok = rep.eq1_residual_sup <= 1e-12 && rep.eq2_residual_sup <= 1e-12 &&
                  std::abs(rep.eq3_residual) <= 1e-12 && s.report.degenerate &&
                  s.report.singular_value_ratio < 1e-10 &&
                  s.report.null_direction.has_value() && rep.witness_sup > 0.0 &&
                  rep.f_plus_g_zero;
  report(8, "non-uniqueness witness K=512", ok,
         fmt("eq=(%.2g,%.2g,%.2g) sv_ratio=%.2g witness_sup=%.3g (tol 1e-12 / 1e-10)",
             rep.eq1_residual_sup, rep.eq2_residual_sup, std::abs(rep.eq3_residual),
             s.report.singular_value_ratio, rep.witness_sup));
}

// 9. Constant generating data forces the constant minimizer.
void criterion_9() {
  const double c = 0.7;
  double worst_bound = 0.0, worst_h = 0.0;
  bool all_converged = true;

  std::vector<ScalarField> densities;
  densities.push_back(constant_field(cube(2, 12), 1.0));
  densities.push_back(seeded_mixture(cube(2, 12), 31));
  GridSpec dg;
  densities.push_back(diagonal_density(8, 2, 0.5, &dg));

  for (const ScalarField& w : densities) {
    const MarginalSet m = weighted_marginals(constant_field(w.grid, c), w);
    for (double p : {1.5, 2.0, 3.0}) {
      SolveOptions opts;
      opts.p = p;
      opts.tol_residual = 1e-12;
      const SolveResult res =
          p == 2.0 ? solve_p2(w, m, opts) : solve_newton(w, m, opts);
      all_converged = all_converged && res.report.converged;
      if (!res.report.converged) continue;
      const double bound = lower_bound(w, m, res.phi, p).bound;
      worst_bound = std::max(worst_bound, std::abs(bound - std::pow(c, p)));
      const ScalarField h = reconstruct_minimizer(w.grid, res.phi, p);
      worst_h = std::max(worst_h, (h.values - c).abs().maxCoeff());
    }
  }
  const bool ok = all_converged && worst_bound <= 1e-10 && worst_h <= 1e-8;
  report(9, "constant case h == c", ok,
         fmt("max |bound-c^p|=%.3g max |h-c|=%.3g (tol 1e-10 / 1e-8)", worst_bound, worst_h));
}

}  // namespace

int main() {
  std::printf("marglp acceptance suite\n");
  criterion_1();
  criteria_2_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  std::printf("ACCEPTANCE: %d/9 criteria passed\n", 9 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
