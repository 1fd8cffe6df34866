#include <doctest.h>

#include <cmath>

#include "marglp/counterexamples.hpp"
#include "marglp/grid.hpp"
#include "marglp/solver.hpp"

using namespace marglp;

namespace {

GridSpec block_square(Eigen::Index K, Eigen::Index npb) {
  GridSpec g;
  g.axes = {build_axis(1.0, static_cast<double>(K + 1), K * npb),
            build_axis(1.0, static_cast<double>(K + 1), K * npb)};
  return g;
}

}  // namespace

TEST_SUITE("counterexamples") {

TEST_CASE("witness families follow the stated exponents") {
  const WitnessSequences pw = build_witness(2.0, 32);
  CHECK(pw.family == "power");
  CHECK(pw.theta.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pw.f[3] == doctest::Approx(std::pow(4.0, 0.75)).epsilon(1e-14));
  CHECK((pw.g + pw.f).abs().maxCoeff() == 0.0);
  // theta_i proportional to i^{-2}
  CHECK(pw.theta[0] / pw.theta[1] == doctest::Approx(4.0).epsilon(1e-14));

  const WitnessSequences lg = build_witness(1.2, 32);
  CHECK(lg.family == "log-corrected");
  const double i = 5.0;
  CHECK(lg.f[4] == doctest::Approx(std::pow(i, 1.0 / 1.2) *
                                   std::pow(std::log(i + 1.0), 2.0 / 1.2)).epsilon(1e-13));

  // The power family is undefined at and below q = 1.5: its L^1 series
  // degenerates to the harmonic series.
  CHECK_THROWS_AS(build_witness(1.5, 32, WitnessFamily::PowerLaw), ConfigError);
  CHECK_NOTHROW(build_witness(1.5, 32));
  CHECK_THROWS_AS(build_witness(0.9, 8), ConfigError);
}

TEST_CASE("divergence certificate at q = 2 on the canonical ladder") {
  const WitnessSequences ws = build_witness(2.0, 512);
  CertifyOptions opts;
  opts.ladder = {64, 128, 256, 512};
  const DivergenceCertificate cert = certify_divergence(ws, opts);

  REQUIRE(cert.certified);
  CHECK(cert.monotone);
  CHECK(cert.joint_functional == 0.0);
  // S_K ~ K^{1/2}: per-doubling growth near sqrt(2), fitted slope near 1/2.
  for (double r : cert.growth_ratios) CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(0.05));
  for (double r : cert.l1_increment_ratios)
    CHECK(r == doctest::Approx(std::pow(2.0, -0.25)).epsilon(0.02));
  CHECK(cert.fitted_exponent == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("constant and zero sequences earn negative certificates") {
  WitnessSequences flat;
  flat.q = 2.0;
  flat.K = 256;
  flat.family = "manual";
  flat.theta = Eigen::ArrayXd(256);
  for (Eigen::Index i = 0; i < 256; ++i)
    flat.theta[i] = 1.0 / ((i + 1.0) * (i + 1.0));
  flat.theta /= flat.theta.sum();
  flat.f = Eigen::ArrayXd::Ones(256);
  flat.g = -flat.f;
  const DivergenceCertificate c1 = certify_divergence(flat);
  CHECK_FALSE(c1.certified);
  CHECK(c1.message.size() > 0);

  WitnessSequences zero = flat;
  zero.f.setZero();
  zero.g.setZero();
  const DivergenceCertificate c2 = certify_divergence(zero);
  CHECK_FALSE(c2.certified);
  CHECK(std::isfinite(c2.fitted_exponent));
}

TEST_CASE("ladder validation") {
  const WitnessSequences ws = build_witness(2.0, 64);
  CertifyOptions bad;
  bad.ladder = {16, 8, 32};
  CHECK_THROWS_AS(certify_divergence(ws, bad), ConfigError);
  bad.ladder = {16, 32, 128};
  CHECK_THROWS_AS(certify_divergence(ws, bad), ConfigError);
  bad.ladder = {16, 32};
  CHECK_THROWS_AS(certify_divergence(ws, bad), ConfigError);
}

TEST_CASE("violation report classifies the diagonal family") {
  const WitnessSequences ws = build_witness(2.0, 64);
  const GridSpec g = block_square(64, 1);
  const SmirnovViolationReport rep =
      smirnov_violation_report(ws, 0.5, std::nullopt, g);
  CHECK(rep.certificate.certified);
  CHECK(rep.verdict.cls == SmirnovClass::ViolationWitness);
  CHECK(integrate(rep.density) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.f_lq > 0.0);
  CHECK(rep.joint_lq < rep.f_lq);

  // alpha = 0: the joint functional vanishes identically on the support.
  const SmirnovViolationReport pure =
      smirnov_violation_report(ws, 0.0, std::nullopt, g);
  CHECK(pure.joint_lq == 0.0);
  CHECK(pure.background_lq == 0.0);
}

TEST_CASE("two-block nonuniqueness witness by hand") {
  WitnessSequences ws;
  ws.q = 2.0;
  ws.K = 2;
  ws.family = "manual";
  ws.theta = Eigen::ArrayXd(2);
  ws.theta << 0.5, 0.5;
  ws.f = Eigen::ArrayXd(2);
  ws.f << 123.0, 1.0;  // f[0] gets rebalanced
  ws.g = -ws.f;

  const NonuniquenessReport rep = nonuniqueness_witness(ws, block_square(2, 4));
  CHECK(rep.witness.f[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(rep.eq1_residual_sup <= 1e-15);
  CHECK(rep.eq2_residual_sup <= 1e-15);
  CHECK(std::abs(rep.eq3_residual) <= 1e-15);
  CHECK(rep.f_plus_g_zero);
  CHECK(rep.witness_sup == doctest::Approx(1.0));
  CHECK(rep.witness_residual_sup <= 1e-12);
}

TEST_CASE("nonuniqueness norms grow along the ladder") {
  const WitnessSequences ws = build_witness(2.0, 128);
  const NonuniquenessReport rep = nonuniqueness_witness(ws, block_square(128, 1));
  REQUIRE(rep.norm_partial_sums.size() >= 3);
  for (size_t i = 1; i < rep.norm_partial_sums.size(); ++i)
    CHECK(rep.norm_partial_sums[i] > rep.norm_partial_sums[i - 1] * 1.1);
  CHECK(rep.witness_residual_sup <= 1e-12);

  // The homogeneous system is honestly degenerate here.
  const SolveResult s = solve_p2(rep.w, rep.zero_g);
  CHECK(s.report.degenerate);
  CHECK(s.report.singular_value_ratio < 1e-10);
  CHECK(s.report.null_direction.has_value());
}

TEST_CASE("nonuniqueness requires q = 2") {
  const WitnessSequences ws = build_witness(3.0, 16);
  CHECK_THROWS_AS(nonuniqueness_witness(ws, block_square(16, 2)), ConfigError);
}

}  // TEST_SUITE
