/// Expression parser, scenario files, exit codes and report determinism.

#include <doctest.h>

#include "folcoil/expr.hpp"
#include "folcoil/random_fields.hpp"
#include "folcoil/scenario.hpp"

#include <cmath>
#include <random>

using namespace folcoil;

namespace {

std::string data(const std::string& name) { return std::string(FOLCOIL_SOURCE_DIR) + "/tests/data/" + name; }
std::string bundled(const std::string& name) { return std::string(FOLCOIL_SOURCE_DIR) + "/scenarios/" + name; }

double eval(const std::string& s) { return parse_expr(s).evaluate({}, {}); }

// Random expression text with redundant parentheses and spacing.
std::string random_text(std::mt19937_64& rng, int depth) {
  static const char* leaves[] = {"x", "y", "2", "0.5", "pi", "1e-3", "3.25"};
  static const char* funcs[] = {"sin", "cos", "exp", "tanh", "sech"};
  static const char ops[] = {'+', '-', '*', '/', '^'};
  std::uniform_int_distribution<int> pick(0, 9);
  const int k = depth <= 0 ? 0 : pick(rng);
  if (k <= 2) return leaves[rng() % 7];
  if (k == 3) return "-" + random_text(rng, depth - 1);
  if (k == 4) return std::string(funcs[rng() % 5]) + "( " + random_text(rng, depth - 1) + " )";
  if (k == 5) return "(" + random_text(rng, depth - 1) + ")";
  return random_text(rng, depth - 1) + " " + ops[rng() % 5] + " " + random_text(rng, depth - 1);
}

ScenarioConfig config(const std::string& text) { return parse_config(text); }

}  // namespace

TEST_CASE("arithmetic and precedence") {
  CHECK(eval("1+2*3") == 7);
  CHECK(eval("(1+2)*3") == 9);
  CHECK(eval("2^3^2") == 512);
  CHECK(eval("-2^2") == -4);
  CHECK(eval("(-2)^2") == 4);
  CHECK(eval("2*-3") == -6);
  CHECK(eval("2^-1") == 0.5);
  CHECK(eval("8/4/2") == 1);
  CHECK(eval("1-2-3") == -4);
  CHECK(eval("--3") == 3);
  CHECK(eval("1.5e2 + .5") == 150.5);
  CHECK(eval("pi") == M_PI);
  CHECK(eval("sech(0) + tanh(0) + log(exp(2))") == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("grid evaluation matches the math library pointwise") {
  PeriodicGrid g({"x", "y"}, 16);
  const auto f = evaluate_on_grid(parse_expr("sin(x)*cos(y)"), g);
  double err = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const auto p = g.point(i);
    err = std::max(err, std::abs(f[i] - std::sin(p[0]) * std::cos(p[1])));
  }
  CHECK(err <= 1e-15);
  const auto ft = evaluate_on_grid(parse_expr("t*x"), g, 0.5);
  CHECK(ft[g.ravel({3, 0})] == 0.5 * g.coordinate(0, 3));
}

TEST_CASE("syntax errors carry the byte offset") {
  auto offset_of = [](const std::string& s) {
    try {
      parse_expr(s);
    } catch (const ExprError& e) {
      return static_cast<long>(e.offset());
    }
    return -1L;
  };
  CHECK(offset_of("sin(") == 4);
  CHECK_THROWS_WITH_AS(parse_expr("sin("), "syntax error at offset 4: unexpected end of input", ExprError);
  CHECK(offset_of("1 + * 2") == 4);
  CHECK(offset_of("(x") == 2);
  CHECK(offset_of("x y") == 2);
  CHECK(offset_of("sin x") == 4);
  CHECK(offset_of("2 + foo") == 4);
  CHECK_THROWS_WITH_AS(parse_expr("2 + foo"), "unknown identifier 'foo' at offset 4", ExprError);
  CHECK(offset_of("") == 0);
  CHECK(parse_expr_list("x, y, 2*z").size() == 3);
  try {
    parse_expr_list("x, sin(");
    FAIL("expected an error");
  } catch (const ExprError& e) {
    CHECK(e.offset() == 7);
  }
}

TEST_CASE("domain checks at evaluation") {
  PeriodicGrid g({"x", "y"}, 8);
  CHECK_THROWS_AS(evaluate_on_grid(parse_expr("log(sin(x))"), g), DomainError);
  CHECK_THROWS_AS(evaluate_on_grid(parse_expr("1/(x - x)"), g), DomainError);
  CHECK_THROWS_AS(evaluate_on_grid(parse_expr("q1"), g), DomainError);
  CHECK_THROWS_AS(evaluate_on_grid(parse_expr("t"), g), DomainError);
  CHECK_NOTHROW(evaluate_on_grid(parse_expr("log(2 + sin(x))"), g));
}

TEST_CASE("pretty printing is a fixed point after one parse") {
  CHECK(parse_expr("((1)+(2*3))").to_string() == "1 + 2*3");
  CHECK(parse_expr("x-(y-z)").to_string() == "x - (y - z)");
  CHECK(parse_expr("(x^y)^z").to_string() == "(x^y)^z");
  CHECK(parse_expr("x^(y^z)").to_string() == "x^y^z");
  CHECK(parse_expr("(-x)^2").to_string() == "(-x)^2");
  CHECK(parse_expr("-(x^2)").to_string() == "-x^2");
  CHECK(parse_expr("x/(y*z)").to_string() == "x/(y*z)");
  CHECK(parse_expr("3.141592653589793").to_string() == "pi");
  std::mt19937_64 rng(7);
  PeriodicGrid g({"x", "y"}, 8);
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    const std::string text = random_text(rng, 4);
    const ExprAst a = parse_expr(text);
    const std::string once = a.to_string();
    const ExprAst b = parse_expr(once);
    CHECK(b.to_string() == once);
    // same tree: identical values wherever finite
    try {
      const auto fa = evaluate_on_grid(a, g), fb = evaluate_on_grid(b, g);
      CHECK((fa - fb).max_abs() == 0);
      ++checked;
    } catch (const DomainError&) {
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("config schema validation") {
  CHECK_THROWS_WITH_AS(config("[scenario]\nkind = nope\n"), "unknown scenario kind 'nope'", ConfigError);
  CHECK_THROWS_WITH_AS(config("[grid]\naxes = x\n"), "missing key 'kind' in [scenario]", ConfigError);
  CHECK_THROWS_WITH_AS(config("[scenario]\nkind = master\n[cohomology]\nf = 1\n"),
                       "section [cohomology] is not used by kind 'master'", ConfigError);
  CHECK_THROWS_AS(config("[scenario]\nkind = master\nbroken line\n"), ConfigError);
  const auto c = config("[scenario]\nkind = flow\n[flow]\nT = 0.5\ndt = abc\n");
  CHECK(c.number("flow", "T", 0) == 0.5);
  CHECK(c.name == "flow");
  CHECK_THROWS_AS(c.number("flow", "dt", 0), ConfigError);
  CHECK(c.number("flow", "record_every", 3) == 3);
}

TEST_CASE("exit codes: configuration and domain errors give 2") {
  const auto neg = run_scenario_file(data("negative-f.cfg"));
  CHECK(neg.exit_code == 2);
  CHECK(neg.error == "defining form not positive");
  CHECK(neg.report["status"] == "error");
  CHECK(run_scenario_file(data("bad-expression.cfg")).exit_code == 2);
  CHECK(run_scenario_file(data("unknown-key.cfg")).exit_code == 2);
  CHECK(run_scenario_file(data("wrong-axis.cfg")).exit_code == 2);
  CHECK(run_scenario_file(data("missing.cfg")).exit_code == 2);
  const auto mut = config("[scenario]\nkind = master\n[grid]\naxes = x q1\nresolution = 8\n[debug]\nmutate = rate-sign\n");
  CHECK(run_scenario(mut).exit_code == 2);
}

TEST_CASE("mutation suite: corrupted formulas give exit code 1") {
  for (const char* name : {"master-mutated.cfg", "forms-mutated.cfg", "flow-mutated.cfg"}) {
    CAPTURE(name);
    const auto out = run_scenario_file(data(name));
    CHECK(out.exit_code == 1);
    CHECK(out.report["status"] == "fail");
  }
  const auto m = run_scenario_file(data("master-mutated.cfg"));
  CHECK(m.report["results"]["oracle_agreement"].get<double>() >= 1e-2);
}

TEST_CASE("overrides and report layout") {
  const auto cfg = load_config(bundled("master.cfg"));
  const auto base = run_scenario(cfg);
  REQUIRE(base.exit_code == 0);
  CHECK(base.report["schema_version"] == kReportSchema);
  CHECK(base.report["tolerances"]["tol"] == 1e-9);
  CHECK(base.report["sign_resolutions"]["basis_pairing_ef"] == -1);
  CHECK(base.report["grid"]["resolution"] == nlohmann::json::array({32, 32, 32}));
  RunOptions opt;
  opt.resolution = 16;
  opt.tol = 1e-30;
  const auto tight = run_scenario(cfg, opt);
  CHECK(tight.report["grid"]["resolution"] == nlohmann::json::array({16, 16, 16}));
  CHECK(tight.report["tolerances"]["tol"] == 1e-30);
  CHECK(tight.exit_code == 1);
}

TEST_CASE("identical configs give byte-identical reports") {
  for (const char* name : {"master.cfg", "coiso-t5.cfg", "flow-degree1.cfg"}) {
    const auto a = run_scenario_file(bundled(name));
    const auto b = run_scenario_file(bundled(name));
    CHECK(render_report(a.report) == render_report(b.report));
    CHECK(a.csv == b.csv);
  }
}
