#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end coverage through the installed binary: exit codes, artifact
// schemas, reproducibility. The path is injected by the build.
#ifndef MARGLP_CLI_PATH
#error "MARGLP_CLI_PATH must be defined"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path d = [] {
    fs::path p = fs::temp_directory_path() / "marglp_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

RunResult run_cli(const std::string& args, const std::string& tag) {
  const fs::path out = work_dir() / (tag + ".out");
  const fs::path err = work_dir() / (tag + ".err");
  const std::string cmd = std::string("\"") + MARGLP_CLI_PATH + "\" " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
#ifdef _WIN32
  r.exit_code = raw;
#else
  r.exit_code = WEXITSTATUS(raw);
#endif
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string write_config(const std::string& name, const std::string& text) {
  const fs::path p = work_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

const char* kSmallConfig = R"({
  "seed": 11,
  "p": 2.0,
  "grid": {"axes": [
    {"lower": 0.0, "upper": 1.0, "nodes": 12},
    {"lower": 0.0, "upper": 1.0, "nodes": 12}
  ]},
  "density": {"kind": "uniform"},
  "marginals": {"kind": "from-function", "expr": "x+y"}
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("demo subcommand reproduces the closed form") {
  const auto out = (work_dir() / "demo_out").string();
  const RunResult r = run_cli("demo-p2-hypercube --out " + out, "demo");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("bound") != std::string::npos);

  std::ifstream in(out + "/demo_p2_hypercube.json");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string json = buf.str();
  CHECK(json.find("\"config_hash\"") != std::string::npos);
  CHECK(json.find("\"seed\"") != std::string::npos);
  CHECK(json.find("\"bound\":1.16662") != std::string::npos);
}

TEST_CASE("solve writes artifacts and succeeds") {
  const std::string cfg = write_config("small.json", kSmallConfig);
  const auto out = (work_dir() / "solve_out").string();
  const RunResult r = run_cli("solve --config " + cfg + " --out " + out, "solve");
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(out + "/solve_report.json"));
  CHECK(fs::exists(out + "/multipliers.json"));
  CHECK(fs::exists(out + "/minimizer.json"));
}

TEST_CASE("oracle compare agrees on the small instance") {
  const std::string cfg = write_config("small2.json", kSmallConfig);
  const auto out = (work_dir() / "cmp_out").string();
  const RunResult r =
      run_cli("oracle-compare --config " + cfg + " --out " + out + " --p 3", "cmp");
  REQUIRE(r.exit_code == 0);
  std::ifstream in(out + "/oracle_compare.json");
  std::ostringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str().find("\"rel_diff\"") != std::string::npos);
  // The printed rel_diff line should carry a tiny number.
  const size_t pos = r.out.find("rel_diff");
  REQUIRE(pos != std::string::npos);
  const double v = std::strtod(r.out.c_str() + pos + 8, nullptr);
  CHECK(v <= 1e-7);
}

TEST_CASE("unknown config keys fail with exit 1 and a name") {
  const std::string cfg = write_config("bad.json", R"({
    "grid": {"axes": [
      {"lower": 0.0, "upper": 1.0, "nodes": 8},
      {"lower": 0.0, "upper": 1.0, "nodes": 8}
    ]},
    "density": {"kind": "uniform", "wobble": 3},
    "marginals": {"kind": "constant", "value": 1.0}
  })");
  const RunResult r = run_cli("solve --config " + cfg, "bad");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("density.wobble") != std::string::npos);
}

TEST_CASE("missing subcommand or config file fail cleanly") {
  const RunResult none = run_cli("", "none");
  CHECK(none.exit_code != 0);
  const RunResult miss = run_cli("solve --config /nonexistent/cfg.json", "miss");
  CHECK(miss.exit_code == 1);
}

TEST_CASE("uniqueness counterexample reports degeneracy") {
  const auto out = (work_dir() / "uniq_out").string();
  const RunResult r =
      run_cli("counterexample uniqueness --K 8 --nodes-per-block 2 --out " + out, "uniq");
  REQUIRE(r.exit_code == 0);
  std::ifstream in(out + "/uniqueness_certificate.json");
  std::ostringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str().find("\"solver_degenerate\":true") != std::string::npos);
}

TEST_CASE("artifacts are byte reproducible") {
  const std::string cfg = write_config("rep.json", kSmallConfig);
  const auto o1 = (work_dir() / "rep1").string();
  const auto o2 = (work_dir() / "rep2").string();
  REQUIRE(run_cli("bound --config " + cfg + " --out " + o1, "rep1").exit_code == 0);
  REQUIRE(run_cli("bound --config " + cfg + " --out " + o2, "rep2").exit_code == 0);
  for (const char* name : {"/bound_report.json", "/multipliers.json", "/minimizer.json"}) {
    std::ifstream a(o1 + name, std::ios::binary), b(o2 + name, std::ios::binary);
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().size() > 0);
  }
}

}  // TEST_SUITE
