// Command-line front end: reproducible solver runs, oracle comparisons,
// weight-condition analysis, counterexample certificates, and sweeps.
// Exit codes: 0 success, 1 input/config error, 2 non-convergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "marglp/counterexamples.hpp"
#include "marglp/densities.hpp"
#include "marglp/expr.hpp"
#include "marglp/field_io.hpp"
#include "marglp/grid.hpp"
#include "marglp/oracle.hpp"
#include "marglp/report_json.hpp"
#include "marglp/solver.hpp"

namespace {

using njson = nlohmann::json;
using namespace marglp;

std::string dotted(const std::string& ctx, const std::string& key) {
  return ctx.empty() ? key : ctx + "." + key;
}

const njson& need(const njson& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing config key '" + dotted(ctx, key) + "'");
  return *it;
}

double need_num(const njson& j, const std::string& key, const std::string& ctx) {
  const njson& v = need(j, key, ctx);
  if (!v.is_number())
    throw ConfigError("config key '" + dotted(ctx, key) + "' must be a number");
  return v.get<double>();
}

double opt_num(const njson& j, const std::string& key, const std::string& ctx, double fb) {
  if (!j.contains(key)) return fb;
  return need_num(j, key, ctx);
}

long long need_int(const njson& j, const std::string& key, const std::string& ctx) {
  const njson& v = need(j, key, ctx);
  if (!v.is_number_integer())
    throw ConfigError("config key '" + dotted(ctx, key) + "' must be an integer");
  return v.get<long long>();
}

std::string need_str(const njson& j, const std::string& key, const std::string& ctx) {
  const njson& v = need(j, key, ctx);
  if (!v.is_string())
    throw ConfigError("config key '" + dotted(ctx, key) + "' must be a string");
  return v.get<std::string>();
}

std::string opt_str(const njson& j, const std::string& key, const std::string& ctx,
                    const std::string& fb) {
  if (!j.contains(key)) return fb;
  return need_str(j, key, ctx);
}

bool opt_bool(const njson& j, const std::string& key, const std::string& ctx, bool fb) {
  if (!j.contains(key)) return fb;
  const njson& v = j.at(key);
  if (!v.is_boolean())
    throw ConfigError("config key '" + dotted(ctx, key) + "' must be a boolean");
  return v.get<bool>();
}

void check_keys(const njson& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + ctx + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown config key '" + dotted(ctx, it.key()) + "'");
  }
}

Eigen::ArrayXd array_from_json(const njson& v, const std::string& ctx) {
  if (!v.is_array()) throw ConfigError("config key '" + ctx + "' must be an array of numbers");
  Eigen::ArrayXd a(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (const njson& x : v) {
    if (!x.is_number()) throw ConfigError("config key '" + ctx + "' must be an array of numbers");
    a[k++] = x.get<double>();
  }
  return a;
}

// Everything a command needs: the parsed config file plus CLI overrides,
// and the hash stamped into every artifact.
struct Context {
  njson config = njson::object();
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 20260815;
  std::string hash;

  std::optional<double> p_cli;
  std::optional<double> tol_cli;
  std::optional<int> max_iter_cli;
  std::optional<double> damping_cli;
  std::optional<double> eps_cli;
  std::optional<std::string> init_cli;
  std::optional<int> homotopy_cli;

  double p() const {
    if (p_cli) return *p_cli;
    return opt_num(config, "p", "", 2.0);
  }

  SolveOptions solver_options() const {
    SolveOptions o;
    o.p = p();
    if (config.contains("solver")) {
      const njson& s = config.at("solver");
      check_keys(s, "solver",
                 {"tol_residual", "max_iter", "damping", "smoothing_eps", "init",
                  "homotopy_steps", "mass_tol"});
      o.tol_residual = opt_num(s, "tol_residual", "solver", o.tol_residual);
      o.max_iter = static_cast<int>(opt_num(s, "max_iter", "solver", o.max_iter));
      o.damping = opt_num(s, "damping", "solver", o.damping);
      o.smoothing_eps = opt_num(s, "smoothing_eps", "solver", o.smoothing_eps);
      o.homotopy_steps = static_cast<int>(opt_num(s, "homotopy_steps", "solver",
                                                  o.homotopy_steps));
      o.mass_tol = opt_num(s, "mass_tol", "solver", o.mass_tol);
      if (s.contains("init")) o.init = init_scheme_from_string(need_str(s, "init", "solver"));
    }
    if (tol_cli) o.tol_residual = *tol_cli;
    if (max_iter_cli) o.max_iter = *max_iter_cli;
    if (damping_cli) o.damping = *damping_cli;
    if (eps_cli) o.smoothing_eps = *eps_cli;
    if (init_cli) o.init = init_scheme_from_string(*init_cli);
    if (homotopy_cli) o.homotopy_steps = *homotopy_cli;
    return o;
  }

  OracleOptions oracle_options() const {
    OracleOptions o;
    if (config.contains("oracle")) {
      const njson& s = config.at("oracle");
      check_keys(s, "oracle",
                 {"tol_stationarity", "max_iter", "nonmonotone_window", "reproject_every"});
      o.tol_stationarity = opt_num(s, "tol_stationarity", "oracle", o.tol_stationarity);
      o.max_iter = static_cast<int>(opt_num(s, "max_iter", "oracle", o.max_iter));
      o.nonmonotone_window =
          static_cast<int>(opt_num(s, "nonmonotone_window", "oracle", o.nonmonotone_window));
      o.reproject_every =
          static_cast<int>(opt_num(s, "reproject_every", "oracle", o.reproject_every));
    }
    return o;
  }

  WeightConditionOptions weight_options() const {
    WeightConditionOptions o;
    if (config.contains("weight_check")) {
      const njson& s = config.at("weight_check");
      check_keys(s, "weight_check", {"threshold", "stability_factor"});
      o.threshold = opt_num(s, "threshold", "weight_check", o.threshold);
      o.stability_factor = opt_num(s, "stability_factor", "weight_check", o.stability_factor);
    }
    return o;
  }
};

void load_config(Context& ctx) {
  std::string raw;
  if (!ctx.config_path.empty()) {
    std::ifstream in(ctx.config_path, std::ios::binary);
    if (!in) throw InputError("cannot open config file '" + ctx.config_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    raw = buf.str();
    try {
      ctx.config = njson::parse(raw);
    } catch (const njson::parse_error& e) {
      throw ConfigError("config file '" + ctx.config_path + "' is not valid JSON: " + e.what());
    }
    if (!ctx.config.is_object())
      throw ConfigError("config file '" + ctx.config_path + "' must hold a JSON object");
  }
  if (ctx.config.contains("seed"))
    ctx.seed = static_cast<std::uint64_t>(need_int(ctx.config, "seed", ""));
  if (ctx.config.contains("output_dir") && ctx.out_dir == "out")
    ctx.out_dir = need_str(ctx.config, "output_dir", "");

  // Hash covers the file bytes plus every CLI override, so identical
  // invocations stamp identical artifacts.
  std::ostringstream h;
  h << raw << '|';
  if (ctx.p_cli) h << "p=" << *ctx.p_cli << ';';
  if (ctx.tol_cli) h << "tol=" << *ctx.tol_cli << ';';
  if (ctx.max_iter_cli) h << "max_iter=" << *ctx.max_iter_cli << ';';
  if (ctx.damping_cli) h << "damping=" << *ctx.damping_cli << ';';
  if (ctx.eps_cli) h << "eps=" << *ctx.eps_cli << ';';
  if (ctx.init_cli) h << "init=" << *ctx.init_cli << ';';
  if (ctx.homotopy_cli) h << "homotopy=" << *ctx.homotopy_cli << ';';
  h << "seed=" << ctx.seed;
  ctx.hash = fnv1a_hex(h.str());
}

GridSpec grid_from_config(const njson& j, const std::string& ctx) {
  check_keys(j, ctx, {"axes"});
  const njson& axes = need(j, "axes", ctx);
  if (!axes.is_array() || axes.empty())
    throw ConfigError("config key '" + dotted(ctx, "axes") + "' must be a non-empty array");
  GridSpec grid;
  Eigen::Index i = 0;
  for (const njson& a : axes) {
    const std::string actx = dotted(ctx, "axes[" + std::to_string(i) + "]");
    check_keys(a, actx, {"lower", "upper", "nodes", "scheme", "truncated"});
    grid.axes.push_back(build_axis(need_num(a, "lower", actx), need_num(a, "upper", actx),
                                   need_int(a, "nodes", actx),
                                   quad_scheme_from_string(opt_str(a, "scheme", actx, "midpoint")),
                                   opt_bool(a, "truncated", actx, false)));
    ++i;
  }
  grid.validate(2);
  return grid;
}

struct DensityBundle {
  ScalarField w;
  DensityProvenance prov;
  std::string label;
  std::string kind;
};

double box_volume(const GridSpec& grid) {
  double v = 1.0;
  for (const Axis& ax : grid.axes) v *= ax.upper - ax.lower;
  return v;
}

Eigen::ArrayXd default_block_weights(Eigen::Index K) {
  Eigen::ArrayXd theta(K);
  for (Eigen::Index i = 0; i < K; ++i) {
    const double idx = static_cast<double>(i + 1);
    theta[i] = 1.0 / (idx * idx);
  }
  return theta / kahan_sum(theta);
}

DensityBundle density_from_config(const njson& j, const GridSpec& grid,
                                  const std::string& ctx) {
  DensityBundle b;
  b.kind = need_str(j, "kind", ctx);
  b.label = opt_str(j, "label", ctx, b.kind);
  if (b.kind == "uniform") {
    check_keys(j, ctx, {"kind", "label"});
    b.w = constant_field(grid, 1.0 / box_volume(grid));
    b.prov.finite_product_mixture = true;
    b.prov.description = "uniform density (single product component)";
  } else if (b.kind == "expression") {
    check_keys(j, ctx, {"kind", "label", "expr"});
    const std::string text = need_str(j, "expr", ctx);
    b.w = evaluate_on_grid(*parse_expression(text), grid);
    if ((b.w.values <= 0.0).any())
      throw PositivityError("config key '" + dotted(ctx, "expr") +
                            "': density expression is not strictly positive on the grid");
    b.w.values /= integrate(b.w);
    b.prov.description = "expression density: " + text;
  } else if (b.kind == "product-mixture") {
    check_keys(j, ctx, {"kind", "label", "components"});
    const njson& comps = need(j, "components", ctx);
    if (!comps.is_array() || comps.empty())
      throw ConfigError("config key '" + dotted(ctx, "components") +
                        "' must be a non-empty array");
    ProductMixtureSpec spec;
    Eigen::Index ci = 0;
    for (const njson& c : comps) {
      const std::string cctx = dotted(ctx, "components[" + std::to_string(ci) + "]");
      check_keys(c, cctx, {"weight", "factors", "factors_data"});
      ProductMixtureSpec::Component comp;
      comp.weight = opt_num(c, "weight", cctx, 1.0);
      if (c.contains("factors")) {
        const njson& fs = c.at("factors");
        if (!fs.is_array() || static_cast<Eigen::Index>(fs.size()) != grid.dim())
          throw ConfigError("config key '" + dotted(cctx, "factors") +
                            "' must list one expression per axis");
        Eigen::Index ai = 0;
        for (const njson& f : fs) {
          if (!f.is_string())
            throw ConfigError("config key '" + dotted(cctx, "factors") +
                              "' must hold expression strings");
          comp.factors.push_back(evaluate_on_axis(*parse_expression(f.get<std::string>()),
                                                  grid.axes[static_cast<size_t>(ai)]));
          ++ai;
        }
      } else if (c.contains("factors_data")) {
        const njson& fs = c.at("factors_data");
        if (!fs.is_array() || static_cast<Eigen::Index>(fs.size()) != grid.dim())
          throw ConfigError("config key '" + dotted(cctx, "factors_data") +
                            "' must list one array per axis");
        Eigen::Index ai = 0;
        for (const njson& f : fs) {
          comp.factors.push_back(
              array_from_json(f, dotted(cctx, "factors_data[" + std::to_string(ai) + "]")));
          ++ai;
        }
      } else {
        throw ConfigError("config key '" + cctx + "' needs 'factors' or 'factors_data'");
      }
      spec.components.push_back(std::move(comp));
      ++ci;
    }
    b.w = assemble_product_mixture(spec, grid, &b.prov);
  } else if (b.kind == "diagonal") {
    check_keys(j, ctx, {"kind", "label", "alpha", "K", "theta", "study_mode"});
    DiagonalCounterexampleSpec spec;
    spec.alpha = need_num(j, "alpha", ctx);
    const Eigen::Index K = need_int(j, "K", ctx);
    spec.theta = j.contains("theta") ? array_from_json(j.at("theta"), dotted(ctx, "theta"))
                                     : default_block_weights(K);
    if (spec.theta.size() != K)
      throw ConfigError("config key '" + dotted(ctx, "theta") + "' must have K entries");
    spec.study_mode = opt_bool(j, "study_mode", ctx, false);
    if (spec.alpha > 0.0)
      spec.background = constant_field(
          grid, 1.0 / (static_cast<double>(K) * static_cast<double>(K)));
    b.w = assemble_diagonal(spec, grid, &b.prov);
  } else if (b.kind == "field") {
    check_keys(j, ctx, {"kind", "label", "path"});
    b.w = read_field(need_str(j, "path", ctx));
    if (!same_grid(b.w.grid, grid))
      throw ConfigError("config key '" + dotted(ctx, "path") +
                        "': field grid does not match the configured grid");
    b.prov.description = "tabulated density from " + need_str(j, "path", ctx);
  } else {
    throw ConfigError("config key '" + dotted(ctx, "kind") + "': unknown density kind '" +
                      b.kind + "'");
  }
  return b;
}

/// Weighted per-axis marginalization of a field: g_i = marginal_i(g w).
MarginalSet generate_marginals(const ScalarField& g, const ScalarField& w) {
  if (!same_grid(g.grid, w.grid))
    throw ShapeError("generate_marginals: g must live on the density grid");
  MarginalSet m;
  m.arrays = all_axis_marginals(w.grid, (g.values * w.values).eval());
  return m;
}

MarginalSet marginals_from_config(const njson& j, const ScalarField& w,
                                  const std::string& ctx) {
  const std::string kind = need_str(j, "kind", ctx);
  if (kind == "from-function") {
    check_keys(j, ctx, {"kind", "expr"});
    const ScalarField g =
        evaluate_on_grid(*parse_expression(need_str(j, "expr", ctx)), w.grid);
    return generate_marginals(g, w);
  }
  if (kind == "constant") {
    check_keys(j, ctx, {"kind", "value"});
    const double c = need_num(j, "value", ctx);
    return generate_marginals(constant_field(w.grid, c), w);
  }
  if (kind == "arrays") {
    check_keys(j, ctx, {"kind", "arrays"});
    const njson& arrs = need(j, "arrays", ctx);
    if (!arrs.is_array() || static_cast<Eigen::Index>(arrs.size()) != w.grid.dim())
      throw ConfigError("config key '" + dotted(ctx, "arrays") +
                        "' must list one array per axis");
    MarginalSet m;
    Eigen::Index i = 0;
    for (const njson& a : arrs) {
      m.arrays.push_back(array_from_json(a, dotted(ctx, "arrays[" + std::to_string(i) + "]")));
      ++i;
    }
    return m;
  }
  if (kind == "file") {
    check_keys(j, ctx, {"kind", "path"});
    return read_marginals(need_str(j, "path", ctx), w.grid);
  }
  throw ConfigError("config key '" + dotted(ctx, "kind") + "': unknown marginal kind '" + kind +
                    "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

void stamp(JsonWriter& w, const Context& ctx) {
  w.field("config_hash", ctx.hash);
  w.field("seed", static_cast<long long>(ctx.seed));
}

void emit_solve_body(JsonWriter& w, const SolveReport& rep) {
  w.field("converged", rep.converged);
  w.field("iterations", rep.iterations);
  w.field("residual_sup", rep.residual_sup);
  w.field("normalization_sup", rep.normalization_sup);
  w.field("degenerate", rep.degenerate);
  w.field("singular_value_ratio", rep.singular_value_ratio);
  w.field("truncated_domain", rep.truncated_domain);
  w.field("message", rep.message);
  w.key("homotopy_path").value(rep.homotopy_path);
  w.key("residual_history").value(rep.residual_history);
}

struct ProblemSetup {
  GridSpec grid;
  DensityBundle density;
  MarginalSet g;
};

ProblemSetup setup_problem(const Context& ctx) {
  ProblemSetup s;
  s.grid = grid_from_config(need(ctx.config, "grid", ""), "grid");
  s.density = density_from_config(need(ctx.config, "density", ""), s.grid, "density");
  s.g = marginals_from_config(need(ctx.config, "marginals", ""), s.density.w, "marginals");
  return s;
}

SolveResult run_solver(const ScalarField& w, const MarginalSet& g, const SolveOptions& opts) {
  return opts.p == 2.0 ? solve_p2(w, g, opts) : solve_newton(w, g, opts);
}

int cmd_solve(const Context& ctx, bool with_bound) {
  const ProblemSetup s = setup_problem(ctx);
  const SolveOptions opts = ctx.solver_options();
  const SolveResult res = run_solver(s.density.w, s.g, opts);
  const BoundReport bound = lower_bound(s.density.w, s.g, res.phi, opts.p);

  JsonWriter w;
  w.begin_object();
  w.field("format", with_bound ? "marglp-bound-report" : "marglp-solve-report");
  stamp(w, ctx);
  w.field("p", opts.p);
  emit_solve_body(w, res.report);
  w.key("bound").begin_object();
  w.field("value", bound.bound);
  w.field("minimizer_norm_pow", bound.minimizer_norm_pow);
  w.field("pairing", bound.pairing);
  w.field("cross_check_gap", bound.cross_check_gap);
  w.field("cross_check_ok", bound.cross_check_ok);
  w.end_object();
  w.end_object();
  write_text(ctx.out_dir + (with_bound ? "/bound_report.json" : "/solve_report.json"), w.str());

  MarginalSet phi_out;
  phi_out.arrays = res.phi.phi;
  write_marginals(phi_out, s.grid, ctx.out_dir + "/multipliers.json");
  write_field(reconstruct_minimizer(s.grid, res.phi, opts.p), ctx.out_dir + "/minimizer.json");

  std::cout << "density          " << s.density.label << "\n"
            << "p                " << opts.p << "\n"
            << "converged        " << (res.report.converged ? "yes" : "no") << "\n"
            << "iterations       " << res.report.iterations << "\n"
            << "residual_sup     " << res.report.residual_sup << "\n"
            << "bound            " << bound.bound << "\n"
            << "cross_check_gap  " << bound.cross_check_gap << "\n";
  if (!res.report.converged) {
    std::cerr << "error: " << res.report.message << "\n";
    return 2;
  }
  return 0;
}

int cmd_oracle_compare(const Context& ctx) {
  const ProblemSetup s = setup_problem(ctx);
  const SolveOptions opts = ctx.solver_options();
  const SolveResult res = run_solver(s.density.w, s.g, opts);
  const BoundReport bound = lower_bound(s.density.w, s.g, res.phi, opts.p);
  const OracleResult oracle = min_norm_direct(s.density.w, s.g, opts.p, ctx.oracle_options());

  const double abs_diff = std::abs(oracle.objective - bound.bound);
  const double rel_diff = abs_diff / (1.0 + std::abs(bound.bound));

  JsonWriter w;
  w.begin_object();
  w.field("format", "marglp-oracle-compare");
  stamp(w, ctx);
  w.field("p", opts.p);
  w.field("oracle_value", oracle.objective);
  w.field("solver_value", bound.bound);
  w.field("abs_diff", abs_diff);
  w.field("rel_diff", rel_diff);
  w.field("oracle_iterations", oracle.iterations);
  w.field("oracle_converged", oracle.converged);
  w.field("oracle_stationarity", oracle.stationarity_sup);
  w.field("solver_converged", res.report.converged);
  w.field("truncated_domain", res.report.truncated_domain);
  w.end_object();
  write_text(ctx.out_dir + "/oracle_compare.json", w.str());

  std::cout << "solver_value  " << bound.bound << "\n"
            << "oracle_value  " << oracle.objective << "\n"
            << "abs_diff      " << abs_diff << "\n"
            << "rel_diff      " << rel_diff << "\n";
  if (!res.report.converged || !oracle.converged) {
    std::cerr << "error: "
              << (!res.report.converged ? res.report.message : oracle.message) << "\n";
    return 2;
  }
  return 0;
}

int cmd_check_weight(const Context& ctx) {
  const GridSpec grid = grid_from_config(need(ctx.config, "grid", ""), "grid");
  const njson& dj = need(ctx.config, "density", "");
  const DensityBundle d = density_from_config(dj, grid, "density");
  const double p = ctx.p();
  const WeightConditionOptions wopts = ctx.weight_options();

  // Analytic kinds are re-assembled on the dyadically refined grid; tabulated
  // ones refine by the piecewise-constant reading.
  WeightConditionReport rep;
  const std::string kind = d.kind;
  if (kind == "uniform" || kind == "expression" || kind == "diagonal" ||
      (kind == "product-mixture" && !grid.any_truncated())) {
    GridSpec fine;
    for (const Axis& ax : grid.axes)
      fine.axes.push_back(build_axis(ax.lower, ax.upper, 2 * ax.count(), ax.scheme,
                                     ax.truncated));
    bool analytic_ok = true;
    DensityBundle dfine;
    try {
      dfine = density_from_config(dj, fine, "density");
    } catch (const std::invalid_argument&) {
      analytic_ok = false;
    }
    rep = analytic_ok ? check_weight_conditions(d.w, dfine.w, p, wopts)
                      : check_weight_conditions(d.w, refine_dyadic(d.w), p, wopts);
  } else {
    rep = check_weight_conditions(d.w, refine_dyadic(d.w), p, wopts);
  }
  rep.product_mixture_form = d.prov.finite_product_mixture;
  const SmirnovVerdict verdict = classify_smirnov(d.w, d.prov, p, rep);

  JsonWriter w;
  w.begin_object();
  w.field("format", "marglp-weight-report");
  stamp(w, ctx);
  w.field("p", p);
  w.field("threshold", rep.threshold);
  w.key("lp_norm").value(rep.lp_norm);
  w.key("max_ratio").value(rep.max_ratio);
  w.key("refined_lp_norm").value(rep.refined_lp_norm);
  w.key("refined_max_ratio").value(rep.refined_max_ratio);
  w.field("refinement_checked", rep.refinement_checked);
  w.field("refinement_stable", rep.refinement_stable);
  w.field("support_restricted", rep.support_restricted);
  w.field("truncated_domain", rep.truncated_domain);
  w.field("product_mixture_form", rep.product_mixture_form);
  w.field("bounded_ratio", rep.bounded_ratio);
  w.field("condition_Lp_ok", rep.condition_Lp_ok);
  w.key("classification").begin_object();
  w.field("class", to_string(verdict.cls));
  w.field("detail", verdict.detail);
  w.end_object();
  w.end_object();
  write_text(ctx.out_dir + "/weight_report.json", w.str());

  std::cout << "density         " << d.label << "\n"
            << "classification  " << to_string(verdict.cls) << "\n"
            << "detail          " << verdict.detail << "\n";
  for (size_t i = 0; i < rep.max_ratio.size(); ++i)
    std::cout << "axis " << i << "  max_ratio " << rep.max_ratio[i] << "  lp_norm "
              << rep.lp_norm[i] << "\n";
  return 0;
}

int cmd_counter_smirnov(const Context& ctx, double q, Eigen::Index K, double alpha,
                        Eigen::Index npb, const std::vector<Eigen::Index>& ladder) {
  const WitnessSequences ws = build_witness(q, K);
  GridSpec grid;
  grid.axes = {build_axis(1.0, static_cast<double>(K + 1), K * npb),
               build_axis(1.0, static_cast<double>(K + 1), K * npb)};
  CertifyOptions copts;
  copts.ladder = ladder;
  const SmirnovViolationReport rep =
      smirnov_violation_report(ws, alpha, std::nullopt, grid, copts);

  JsonWriter w;
  w.begin_object();
  w.field("format", "marglp-smirnov-certificate");
  stamp(w, ctx);
  w.field("q", q);
  w.field("alpha", alpha);
  w.field("K", static_cast<long long>(K));
  w.field("family", rep.witness.family);
  w.field("joint_lq", rep.joint_lq);
  w.field("f_lq", rep.f_lq);
  w.field("g_lq", rep.g_lq);
  w.field("background_lq", rep.background_lq);
  w.key("certificate").begin_object();
  {
    std::vector<double> rungs(rep.certificate.ladder.begin(), rep.certificate.ladder.end());
    w.key("ladder").begin_array();
    for (Eigen::Index kk : rep.certificate.ladder) w.value(static_cast<long long>(kk));
    w.end_array();
  }
  w.key("marginal_sums").value(rep.certificate.marginal_sums);
  w.key("l1_norms").value(rep.certificate.l1_norms);
  w.key("growth_ratios").value(rep.certificate.growth_ratios);
  w.key("l1_increment_ratios").value(rep.certificate.l1_increment_ratios);
  w.field("joint_functional", rep.certificate.joint_functional);
  w.field("fitted_exponent", rep.certificate.fitted_exponent);
  w.field("monotone", rep.certificate.monotone);
  w.field("certified", rep.certificate.certified);
  w.field("message", rep.certificate.message);
  w.end_object();
  w.key("classification").begin_object();
  w.field("class", to_string(rep.verdict.cls));
  w.field("detail", rep.verdict.detail);
  w.end_object();
  w.field("truncated_domain", rep.density.grid.any_truncated());
  w.end_object();
  write_text(ctx.out_dir + "/smirnov_certificate.json", w.str());

  std::cout << "family           " << rep.witness.family << "\n"
            << "certified        " << (rep.certificate.certified ? "yes" : "no") << "\n"
            << "fitted_exponent  " << rep.certificate.fitted_exponent << "\n"
            << "joint_lq         " << rep.joint_lq << "\n"
            << "f_lq             " << rep.f_lq << "\n"
            << "classification   " << to_string(rep.verdict.cls) << "\n";
  return 0;
}

int cmd_counter_uniqueness(const Context& ctx, Eigen::Index K, Eigen::Index npb) {
  const WitnessSequences ws = build_witness(2.0, K);
  GridSpec grid;
  grid.axes = {build_axis(1.0, static_cast<double>(K + 1), K * npb),
               build_axis(1.0, static_cast<double>(K + 1), K * npb)};
  const NonuniquenessReport rep = nonuniqueness_witness(ws, grid);
  const SolveResult p2 = solve_p2(rep.w, rep.zero_g);

  JsonWriter w;
  w.begin_object();
  w.field("format", "marglp-uniqueness-certificate");
  stamp(w, ctx);
  w.field("K", static_cast<long long>(K));
  w.field("alpha", 0.0);
  w.field("study_mode", true);
  w.field("eq1_residual_sup", rep.eq1_residual_sup);
  w.field("eq2_residual_sup", rep.eq2_residual_sup);
  w.field("eq3_residual", rep.eq3_residual);
  w.field("witness_residual_sup", rep.witness_residual_sup);
  w.field("witness_sup", rep.witness_sup);
  w.field("f_plus_g_zero", rep.f_plus_g_zero);
  w.field("truncated_domain", rep.w.grid.any_truncated());
  w.key("norm_partial_sums").value(rep.norm_partial_sums);
  w.field("solver_degenerate", p2.report.degenerate);
  w.field("singular_value_ratio", p2.report.singular_value_ratio);
  w.field("null_direction_emitted", p2.report.null_direction.has_value());
  w.end_object();
  write_text(ctx.out_dir + "/uniqueness_certificate.json", w.str());

  std::cout << "eq1_residual_sup      " << rep.eq1_residual_sup << "\n"
            << "eq2_residual_sup      " << rep.eq2_residual_sup << "\n"
            << "eq3_residual          " << rep.eq3_residual << "\n"
            << "witness_residual_sup  " << rep.witness_residual_sup << "\n"
            << "singular_value_ratio  " << p2.report.singular_value_ratio << "\n"
            << "degenerate            " << (p2.report.degenerate ? "yes" : "no") << "\n";
  return 0;
}

int cmd_demo(const Context& ctx, Eigen::Index n, Eigen::Index nodes, const std::string& gexpr) {
  if (n < 2) throw ConfigError("demo: n must be at least 2");
  GridSpec grid;
  for (Eigen::Index i = 0; i < n; ++i) grid.axes.push_back(build_axis(0.0, 1.0, nodes));
  const ScalarField w = constant_field(grid, 1.0);
  const ScalarField g = evaluate_on_grid(*parse_expression(gexpr), grid);
  const MarginalSet gm = generate_marginals(g, w);

  SolveOptions opts = ctx.solver_options();
  opts.p = 2.0;
  const SolveResult res = solve_p2(w, gm, opts);
  const BoundReport bound = lower_bound(w, gm, res.phi, 2.0);

  // Closed-form route for the uniform hypercube: sum of the squared marginal
  // integrals minus (n - 1) times the squared common mass.
  double closed = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    closed += axis_integral(grid.axes[static_cast<size_t>(i)],
                            gm.arrays[static_cast<size_t>(i)].square().eval());
  const double mass = integrate(g, w);
  closed -= static_cast<double>(n - 1) * mass * mass;
  const double diff = bound.bound - closed;

  JsonWriter jw;
  jw.begin_object();
  jw.field("format", "marglp-demo-p2-hypercube");
  stamp(jw, ctx);
  jw.field("n", static_cast<long long>(n));
  jw.field("nodes", static_cast<long long>(nodes));
  jw.field("g", gexpr);
  jw.field("bound", bound.bound);
  jw.field("closed_form", closed);
  jw.field("difference", diff);
  jw.field("cross_check_gap", bound.cross_check_gap);
  jw.field("converged", res.report.converged);
  jw.field("truncated_domain", grid.any_truncated());
  jw.end_object();
  write_text(ctx.out_dir + "/demo_p2_hypercube.json", jw.str());

  std::cout << "bound        " << bound.bound << "\n"
            << "closed_form  " << closed << "\n"
            << "difference   " << diff << "\n";
  return res.report.converged ? 0 : 2;
}

int cmd_sweep(const Context& ctx) {
  const njson& sj = need(ctx.config, "sweep", "");
  check_keys(sj, "sweep", {"p", "densities", "marginals"});
  const njson& pj = need(sj, "p", "sweep");
  if (!pj.is_array() || pj.empty())
    throw ConfigError("config key 'sweep.p' must be a non-empty array");
  const njson& dj = need(sj, "densities", "sweep");
  if (!dj.is_array() || dj.empty())
    throw ConfigError("config key 'sweep.densities' must be a non-empty array");
  const GridSpec grid = grid_from_config(need(ctx.config, "grid", ""), "grid");

  std::ostringstream csv;
  csv << "# config_hash=" << ctx.hash << " seed=" << ctx.seed
      << " truncated_domain=" << (grid.any_truncated() ? "true" : "false") << "\n";
  csv << "p,density,bound,oracle_value,rel_diff,iterations\n";
  bool all_converged = true;
  Eigen::Index di = 0;
  for (const njson& d : dj) {
    const DensityBundle bundle =
        density_from_config(d, grid, "sweep.densities[" + std::to_string(di) + "]");
    const MarginalSet g =
        marginals_from_config(need(sj, "marginals", "sweep"), bundle.w, "sweep.marginals");
    for (const njson& pv : pj) {
      if (!pv.is_number()) throw ConfigError("config key 'sweep.p' must hold numbers");
      SolveOptions opts = ctx.solver_options();
      opts.p = pv.get<double>();
      const SolveResult res = run_solver(bundle.w, g, opts);
      const BoundReport bound = lower_bound(bundle.w, g, res.phi, opts.p);
      const OracleResult oracle = min_norm_direct(bundle.w, g, opts.p, ctx.oracle_options());
      all_converged = all_converged && res.report.converged && oracle.converged;
      char row[256];
      std::snprintf(row, sizeof(row), "%.17g,%s,%.17g,%.17g,%.17g,%d\n", opts.p,
                    bundle.label.c_str(), bound.bound, oracle.objective,
                    std::abs(oracle.objective - bound.bound) / (1.0 + std::abs(bound.bound)),
                    res.report.iterations);
      csv << row;
      std::cout << "p=" << opts.p << " density=" << bundle.label << " bound=" << bound.bound
                << " oracle=" << oracle.objective << "\n";
    }
    ++di;
  }
  write_text(ctx.out_dir + "/sweep.csv", csv.str());
  return all_converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"marginal-constrained weighted L^p lower bounds"};
  app.require_subcommand(1);

  Context ctx;
  double q = 2.0;
  long long K = 64, npb = 4, demo_n = 2, demo_nodes = 64;
  double alpha = 0.5;
  std::string ladder_csv, demo_g = "x+y";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", ctx.config_path, "JSON config file");
    cmd->add_option("--out", ctx.out_dir, "output directory (default out)");
    cmd->add_option("--seed", ctx.seed, "seed recorded in artifacts");
  };
  auto add_solver = [&](CLI::App* cmd) {
    cmd->add_option("--p", ctx.p_cli, "norm exponent p > 1");
    cmd->add_option("--tol", ctx.tol_cli, "residual sup-norm tolerance");
    cmd->add_option("--max-iter", ctx.max_iter_cli, "Newton iteration cap per stage");
    cmd->add_option("--damping", ctx.damping_cli, "initial Newton step fraction");
    cmd->add_option("--eps", ctx.eps_cli, "Jacobian smoothing epsilon");
    cmd->add_option("--init", ctx.init_cli, "from-p2 | from-marginal-ratio | zeros");
    cmd->add_option("--homotopy-steps", ctx.homotopy_cli, "exponent stages (-1 auto)");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the multiplier system");
  add_common(solve);
  add_solver(solve);
  CLI::App* bound = app.add_subcommand("bound", "solve and report the certified bound");
  add_common(bound);
  add_solver(bound);
  CLI::App* ocmp = app.add_subcommand("oracle-compare", "solver bound vs direct minimization");
  add_common(ocmp);
  add_solver(ocmp);
  CLI::App* chk = app.add_subcommand("check-weight", "weight conditions and classification");
  add_common(chk);
  add_solver(chk);
  CLI::App* counter = app.add_subcommand("counterexample", "witness certificates");
  CLI::App* smirnov = counter->add_subcommand("smirnov", "violation witness certificate");
  add_common(smirnov);
  smirnov->add_option("--q", q, "exponent q > 1");
  smirnov->add_option("--K", K, "block count");
  smirnov->add_option("--alpha", alpha, "background weight in [0, 1)");
  smirnov->add_option("--ladder", ladder_csv, "comma-separated K rungs");
  smirnov->add_option("--nodes-per-block", npb, "grid nodes per unit block");
  CLI::App* uniq = counter->add_subcommand("uniqueness", "alpha = 0 non-uniqueness study");
  add_common(uniq);
  uniq->add_option("--K", K, "block count");
  uniq->add_option("--nodes-per-block", npb, "grid nodes per unit block");
  counter->require_subcommand(1);
  CLI::App* demo = app.add_subcommand("demo-p2-hypercube", "closed-form p = 2 demo");
  add_common(demo);
  demo->add_option("--n", demo_n, "axis count");
  demo->add_option("--nodes", demo_nodes, "nodes per axis");
  demo->add_option("--g", demo_g, "expression for g");
  CLI::App* sweep = app.add_subcommand("sweep", "p x density table with oracle values");
  add_common(sweep);
  add_solver(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    load_config(ctx);
    if (solve->parsed()) return cmd_solve(ctx, false);
    if (bound->parsed()) return cmd_solve(ctx, true);
    if (ocmp->parsed()) return cmd_oracle_compare(ctx);
    if (chk->parsed()) return cmd_check_weight(ctx);
    if (smirnov->parsed()) {
      std::vector<Eigen::Index> ladder;
      if (!ladder_csv.empty()) {
        std::stringstream ss(ladder_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) ladder.push_back(std::stoll(tok));
      }
      return cmd_counter_smirnov(ctx, q, K, alpha, npb, ladder);
    }
    if (uniq->parsed()) return cmd_counter_uniqueness(ctx, K, npb);
    if (demo->parsed()) return cmd_demo(ctx, demo_n, demo_nodes, demo_g);
    if (sweep->parsed()) return cmd_sweep(ctx);
  } catch (const SolveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
