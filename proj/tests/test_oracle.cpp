#include <doctest.h>

#include <cmath>

#include "marglp/densities.hpp"
#include "marglp/expr.hpp"
#include "marglp/grid.hpp"
#include "marglp/oracle.hpp"
#include "marglp/solver.hpp"

using namespace marglp;

namespace {

GridSpec unit_square(Eigen::Index n) {
  GridSpec g;
  g.axes = {build_axis(0.0, 1.0, n), build_axis(0.0, 1.0, n)};
  return g;
}

MarginalSet weighted_marginals(const ScalarField& f, const ScalarField& w) {
  MarginalSet m;
  m.arrays = all_axis_marginals(w.grid, (f.values * w.values).eval());
  return m;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("feasible set projections behave like projections") {
  const GridSpec g = unit_square(10);
  ScalarField w = sample_field(g, [](const std::vector<double>& p) {
    return 1.0 + 0.3 * p[0] - 0.2 * p[1];
  });
  w.values /= integrate(w);
  const ScalarField f = sample_field(g, [](const std::vector<double>& p) {
    return std::exp(p[0] - p[1]);
  });
  const MarginalSet m = weighted_marginals(f, w);
  const FeasibleSet fs(w, m);

  const Eigen::ArrayXd h0 = fs.min_norm_point();
  CHECK(fs.feasibility_sup(h0) <= 1e-10);

  Eigen::ArrayXd noise(g.total_nodes());
  for (Eigen::Index i = 0; i < noise.size(); ++i)
    noise[i] = std::sin(0.77 * static_cast<double>(i));
  const Eigen::ArrayXd k = fs.project_kernel(noise);
  const Eigen::VectorXd c = fs.apply_full(k);
  CHECK(c.cwiseAbs().maxCoeff() <= 1e-10);
  // Idempotent to solver precision.
  CHECK((fs.project_kernel(k) - k).abs().maxCoeff() <= 1e-10);

  const Eigen::ArrayXd a = fs.project_affine(noise);
  CHECK(fs.feasibility_sup(a) <= 1e-10);
  CHECK((fs.project_affine(a) - a).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("p2 oracle equals the multiplier bound") {
  const GridSpec g = unit_square(20);
  const ScalarField w = constant_field(g, 1.0);
  const ScalarField f = sample_field(g, [](const std::vector<double>& p) {
    return p[0] * p[1] + 0.5;
  });
  const MarginalSet m = weighted_marginals(f, w);

  const OracleResult o = min_norm_direct(w, m, 2.0);
  REQUIRE(o.converged);
  const SolveResult s = solve_p2(w, m);
  REQUIRE(s.report.converged);
  const BoundReport b = lower_bound(w, m, s.phi, 2.0);
  CHECK(o.objective == doctest::Approx(b.bound).epsilon(1e-12));
  CHECK(o.feasibility_sup <= 1e-10);
}

TEST_CASE("general p oracle agrees with the solver") {
  const GridSpec g = unit_square(12);
  ScalarField w = sample_field(g, [](const std::vector<double>& p) {
    return 1.0 + 0.5 * p[0] * p[1];
  });
  w.values /= integrate(w);
  const ScalarField f = sample_field(g, [](const std::vector<double>& p) {
    return p[0] + p[1] * p[1];
  });
  const MarginalSet m = weighted_marginals(f, w);

  for (double p : {1.5, 3.0}) {
    const OracleResult o = min_norm_direct(w, m, p);
    REQUIRE(o.converged);
    SolveOptions opts;
    opts.p = p;
    opts.tol_residual = 1e-11;
    const SolveResult s = solve_newton(w, m, opts);
    REQUIRE(s.report.converged);
    const BoundReport b = lower_bound(w, m, s.phi, p);
    CHECK(std::abs(o.objective - b.bound) <= 1e-8 * (1.0 + std::abs(b.bound)));
  }
}

TEST_CASE("minimizer has the separable signed-power form") {
  const GridSpec g = unit_square(12);
  const ScalarField w = constant_field(g, 1.0);
  const ScalarField f = sample_field(g, [](const std::vector<double>& p) {
    return p[0] + 2.0 * p[1];
  });
  const MarginalSet m = weighted_marginals(f, w);
  const double p = 3.0;

  const OracleResult o = min_norm_direct(w, m, p);
  REQUIRE(o.converged);
  SolveOptions opts;
  opts.p = p;
  opts.tol_residual = 1e-11;
  const SolveResult s = solve_newton(w, m, opts);
  REQUIRE(s.report.converged);
  const ScalarField h = reconstruct_minimizer(g, s.phi, p);
  CHECK((h.values - o.minimizer.values).abs().maxCoeff() <= 1e-6);
}

TEST_CASE("tilde correction on the uniform square is exact for xy") {
  const GridSpec g = unit_square(16);
  const ScalarField w = constant_field(g, 1.0);
  const ScalarField psi = sample_field(g, [](const std::vector<double>& p) {
    return p[0] * p[1];
  });
  const ScalarField phi = null_space_element(w, psi);

  // xy - x/2 - y/2 + 1/4, node for node.
  const ScalarField ref = sample_field(g, [](const std::vector<double>& p) {
    return p[0] * p[1] - 0.5 * p[0] - 0.5 * p[1] + 0.25;
  });
  CHECK((phi.values - ref.values).abs().maxCoeff() <= 1e-13);

  const auto marg = all_axis_marginals(g, (phi.values * w.values).eval());
  for (const Eigen::ArrayXd& a : marg) CHECK(a.abs().maxCoeff() <= 1e-13);

  // Applying the correction twice changes nothing.
  const ScalarField again = null_space_element(w, phi);
  CHECK((again.values - phi.values).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("tilde correction kills marginals for any product density") {
  const GridSpec g = unit_square(14);
  ScalarField w = sample_field(g, [](const std::vector<double>& p) {
    return (1.0 + p[0]) * std::exp(-0.5 * p[1]);
  });
  w.values /= integrate(w);
  const ScalarField psi = sample_field(g, [](const std::vector<double>& p) {
    return std::exp(p[0] * p[1]) - p[1];
  });
  const ScalarField phi = null_space_element(w, psi);
  const auto marg = all_axis_marginals(g, (phi.values * w.values).eval());
  for (const Eigen::ArrayXd& a : marg) CHECK(a.abs().maxCoeff() <= 1e-12);
}

TEST_CASE("random feasible samples are feasible and dominate the minimum") {
  const GridSpec g = unit_square(10);
  ScalarField w = sample_field(g, [](const std::vector<double>& p) {
    return 1.0 + 0.25 * (p[0] - p[1]);
  });
  w.values /= integrate(w);
  const ScalarField f = sample_field(g, [](const std::vector<double>& p) {
    return 1.0 + p[0] - p[1];
  });
  const MarginalSet m = weighted_marginals(f, w);
  const FeasibleSet fs(w, m);
  const OracleResult o = min_norm_direct(w, m, 2.0);
  REQUIRE(o.converged);

  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    const ScalarField h = random_feasible(w, m, seed, 0.7);
    CHECK(fs.feasibility_sup(h.values) <= 1e-10);
    const ScalarField h2(g, h.values.square().eval());
    CHECK(integrate(h2, w) >= o.objective - 1e-10);
  }
  // Distinct seeds give distinct samples.
  const ScalarField a = random_feasible(w, m, 1, 0.7);
  const ScalarField b = random_feasible(w, m, 2, 0.7);
  CHECK((a.values - b.values).abs().maxCoeff() > 1e-6);
}

}  // TEST_SUITE
