#include "folcoil/scenario.hpp"

#include "folcoil/coiso_general.hpp"
#include "folcoil/contact_flow.hpp"
#include "folcoil/expr.hpp"
#include "folcoil/foliation.hpp"
#include "folcoil/legendrian_master.hpp"
#include "folcoil/random_fields.hpp"
#include "folcoil/twisted_cohomology.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace folcoil {

using json = nlohmann::ordered_json;

const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> kinds{"forms-selftest", "master",          "coiso",   "cohomology",
                                              "flow",           "certify-isotopy", "obstruct"};
  return kinds;
}

namespace {

// ---------------------------------------------------------------- schema

const std::map<std::string, std::vector<std::string>>& kind_sections() {
  static const std::map<std::string, std::vector<std::string>> m{
      {"forms-selftest", {"chart", "selftest"}},
      {"master", {"chart", "section"}},
      {"coiso", {"chart", "section"}},
      {"cohomology", {"chart", "cohomology"}},
      {"flow", {"chart", "section", "hamiltonian", "flow"}},
      {"certify-isotopy", {"chart", "section", "hamiltonian", "flow", "path"}},
      {"obstruct", {"chart", "cocycle", "path"}},
  };
  return m;
}

// Tolerance keys with their defaults; the first entry is the primary one
// that --tol replaces.
const std::vector<std::pair<std::string, double>>& tolerance_defaults(const std::string& kind) {
  static const std::map<std::string, std::vector<std::pair<std::string, double>>> m{
      {"forms-selftest", {{"tol", 1e-10}}},
      {"master", {{"tol", 1e-9}, {"coisotropic_tol", 1e-8}}},
      {"coiso", {{"tol", 1e-9}, {"pairing_tol", 1e-10}, {"classify_tol", 1e-8}}},
      {"cohomology", {{"tol", 1e-9}, {"roundtrip_tol", 1e-6}, {"certificate_tol", 1e-8}}},
      {"flow",
       {{"tol", 1e-6}, {"oracle_tol", 1e-9}, {"rate_ratio", 2.0}, {"rate_ratio_tol", 0.2}, {"collapse_tol", 1e-9}}},
      {"certify-isotopy", {{"tol", 1e-6}}},
      {"obstruct", {{"tol", 1e-12}, {"certificate_tol", 1e-6}, {"min_residual", 0.9}}},
  };
  return m.at(kind);
}

const char* expect_keys(const std::string& kind) {
  if (kind == "master" || kind == "coiso") return "coisotropic";
  if (kind == "cohomology") return "h0|h0_tw|coboundary";
  if (kind == "certify-isotopy") return "verdict";
  if (kind == "obstruct") return "certificate|verdict";
  return "";
}

std::string key_pattern(const std::string& kind, const std::string& section) {
  if (section == "scenario") return "kind|name|seed";
  if (section == "grid") return "axes|resolution";
  if (section == "output") return "report|csv";
  if (section == "debug") return "mutate";
  if (section == "expect") return expect_keys(kind);
  if (section == "tolerances") {
    std::string p;
    for (const auto& [k, v] : tolerance_defaults(kind)) p += (p.empty() ? "" : "|") + k;
    return p;
  }
  if (section == "chart") {
    if (kind == "cohomology") return "u";
    if (kind == "coiso") return "template|n|k|variant|amplitude|q_resolution|a[1-9]|b[1-9][1-9]|R[1-9][1-9]";
    return "template|rel|f|R[1-3]";
  }
  if (section == "section") return "s[1-3]";
  if (section == "selftest") return "samples";
  if (section == "hamiltonian") return "degree|H|w[1-3]|node_dt";
  if (section == "flow") return "T|dt|record_every|rate_law|order_r_check";
  if (section == "path") return kind == "obstruct" ? "nodes|dt|resolutions" : "source|nodes|dt|beta[1-3]|resolutions";
  if (section == "cocycle") return "zeta[12]";
  if (section == "cohomology") return "resolutions|threshold|f|primitive|closed_forms|leaves|nodes|T_leaf";
  return "";
}

bool section_allowed(const std::string& kind, const std::string& section) {
  static const std::vector<std::string> common{"scenario", "grid", "tolerances", "expect", "output", "debug"};
  if (std::find(common.begin(), common.end(), section) != common.end()) return true;
  const auto& ks = kind_sections().at(kind);
  return std::find(ks.begin(), ks.end(), section) != ks.end();
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

// ---------------------------------------------------------------- config

bool ScenarioConfig::has(const std::string& section, const std::string& key) const {
  const auto it = sections.find(section);
  return it != sections.end() && it->second.count(key) > 0;
}

const std::string& ScenarioConfig::get(const std::string& section, const std::string& key) const {
  const auto it = sections.find(section);
  if (it == sections.end() || !it->second.count(key))
    throw ConfigError("missing key '" + key + "' in [" + section + "]");
  return it->second.at(key);
}

std::string ScenarioConfig::get_or(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double ScenarioConfig::number(const std::string& section, const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string& s = get(section, key);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("[" + section + "] " + key + ": expected a number, got '" + s + "'");
  return v;
}

int ScenarioConfig::integer(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  const std::string& s = get(section, key);
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("[" + section + "] " + key + ": expected an integer, got '" + s + "'");
  return v;
}

bool ScenarioConfig::flag(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string& s = get(section, key);
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError("[" + section + "] " + key + ": expected true or false, got '" + s + "'");
}

std::vector<int> ScenarioConfig::integers(const std::string& section, const std::string& key) const {
  std::vector<int> out;
  for (const auto& w : split_ws(get(section, key))) {
    int v = 0;
    const auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size())
      throw ConfigError("[" + section + "] " + key + ": expected integers, got '" + w + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("[" + section + "] " + key + ": empty list");
  return out;
}

ScenarioConfig parse_config(const std::string& text, const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ScenarioConfig cfg;
  cfg.base_dir = base_dir;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside a section");
    auto& dst = cfg.sections[section];
    for (const auto& [key, value] : body) dst[key] = trim(value.data());
  }
  cfg.kind = cfg.get("scenario", "kind");
  const auto& kinds = scenario_kinds();
  if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
    throw ConfigError("unknown scenario kind '" + cfg.kind + "'");
  cfg.name = cfg.get_or("scenario", "name", cfg.kind);
  for (const auto& [section, keys] : cfg.sections) {
    if (!section_allowed(cfg.kind, section))
      throw ConfigError("section [" + section + "] is not used by kind '" + cfg.kind + "'");
    const std::regex re(key_pattern(cfg.kind, section));
    for (const auto& [key, value] : keys)
      if (!std::regex_match(key, re)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

std::string render_report(const json& report) { return report.dump(2) + "\n"; }

// ---------------------------------------------------------------- running

namespace {

class Checks {
 public:
  void at_most(const std::string& name, double value, double limit) {
    add(name, value, "<=", limit, std::isfinite(value) && value <= limit);
  }
  void at_least(const std::string& name, double value, double limit) {
    add(name, value, ">=", limit, std::isfinite(value) && value >= limit);
  }
  void within(const std::string& name, double value, double lo, double hi) {
    add(name, value, "in", json::array({lo, hi}), std::isfinite(value) && value >= lo && value <= hi);
  }
  void equal(const std::string& name, const json& value, const json& expected) {
    add(name, value, "==", expected, value == expected);
  }
  bool all_pass() const { return pass_; }
  const json& to_json() const { return list_; }

 private:
  void add(const std::string& name, const json& value, const char* rel, const json& limit, bool ok) {
    json c;
    c["name"] = name;
    c["value"] = value;
    c["relation"] = rel;
    c["limit"] = limit;
    c["pass"] = ok;
    list_.push_back(std::move(c));
    pass_ = pass_ && ok;
  }
  json list_ = json::array();
  bool pass_ = true;
};

struct Ctx {
  const ScenarioConfig& cfg;
  const RunOptions& opt;
  json grid = json::object();
  json tolerances = json::object();
  json inputs = json::object();
  json results = json::object();
  Checks checks;
  std::string csv;
  Rng rng;

  Ctx(const ScenarioConfig& c, const RunOptions& o)
      : cfg(c), opt(o), rng(static_cast<std::uint64_t>(c.integer("scenario", "seed", 1))) {}

  double tol(const std::string& key) const {
    const auto& defs = tolerance_defaults(cfg.kind);
    if (key == defs.front().first && opt.tol) return *opt.tol;
    for (const auto& [k, v] : defs)
      if (k == key) return cfg.number("tolerances", key, v);
    throw ConfigError("unknown tolerance '" + key + "'");
  }

  void record_tolerances() {
    for (const auto& [k, v] : tolerance_defaults(cfg.kind)) tolerances[k] = tol(k);
  }

  std::string mutation() const { return cfg.get_or("debug", "mutate", ""); }
};

void require_mutation(const Ctx& c, std::initializer_list<const char*> allowed) {
  const std::string m = c.mutation();
  if (m.empty()) return;
  for (const char* a : allowed)
    if (m == a) return;
  throw ConfigError("mutation '" + m + "' is not defined for kind '" + c.cfg.kind + "'");
}

ExprAst expr(Ctx& c, const std::string& section, const std::string& key, const std::string& fallback) {
  const std::string text = c.cfg.get_or(section, key, fallback);
  ExprAst e;
  try {
    e = parse_expr(text);
  } catch (const ExprError& err) {
    throw ExprError("[" + section + "] " + key + ": " + err.what(), err.offset());
  }
  c.inputs[section + "." + key] = e.to_string();
  return e;
}

ScalarField field(Ctx& c, const std::string& section, const std::string& key, const std::string& fallback,
                  const PeriodicGrid& g) {
  return evaluate_on_grid(expr(c, section, key, fallback), g);
}

std::vector<std::string> valid_axes(const ScenarioConfig& cfg) {
  const auto axes = split_ws(cfg.get("grid", "axes"));
  static const std::vector<std::string> allowed{"x", "y", "z", "y1", "y2", "y3", "q1", "q2", "q3"};
  for (const auto& a : axes)
    if (std::find(allowed.begin(), allowed.end(), a) == allowed.end())
      throw ConfigError("[grid] axes: '" + a + "' is not a coordinate name");
  return axes;
}

PeriodicGrid make_grid(Ctx& c, std::optional<int> force = std::nullopt) {
  const auto axes = valid_axes(c.cfg);
  std::vector<int> res = c.cfg.integers("grid", "resolution");
  if (res.size() == 1) res.assign(axes.size(), res.front());
  if (res.size() != axes.size()) throw ConfigError("[grid] resolution: need one value or one per axis");
  if (c.opt.resolution) res.assign(axes.size(), *c.opt.resolution);
  if (force) res.assign(axes.size(), *force);
  PeriodicGrid g(axes, res);
  c.grid["axes"] = g.axes();
  c.grid["resolution"] = g.resolutions();
  return g;
}

std::shared_ptr<const LegendrianChart> legendrian_chart(Ctx& c, const PeriodicGrid& g) {
  const int n = g.dim() - 1;
  if (n < 1 || n > 3) throw ConfigError("Legendrian charts need 2 to 4 grid axes (x and q1..q3)");
  if (c.cfg.has("chart", "template")) {
    if (c.cfg.get("chart", "template") != "random") throw ConfigError("[chart] template must be 'random'");
    const double rel = c.cfg.number("chart", "rel", 0.2);
    c.inputs["chart.template"] = "random";
    c.inputs["chart.rel"] = rel;
    std::vector<ScalarField> R;
    for (int i = 0; i < n; ++i) R.push_back(random_smooth_field(g, c.rng, 2, 0.5));
    return std::make_shared<const LegendrianChart>(random_positive_field(g, c.rng, 1.5, 1, rel), std::move(R));
  }
  ScalarField f = field(c, "chart", "f", "1", g);
  std::vector<ScalarField> R;
  for (int i = 1; i <= n; ++i) R.push_back(field(c, "chart", "R" + std::to_string(i), "0", g));
  return std::make_shared<const LegendrianChart>(std::move(f), std::move(R));
}

Section section_from(Ctx& c, const std::shared_ptr<const LegendrianChart>& chart) {
  std::vector<ScalarField> s;
  for (int i = 1; i <= chart->n(); ++i) s.push_back(field(c, "section", "s" + std::to_string(i), "0", chart->grid()));
  return Section(chart, std::move(s));
}

bool section_is_zero(const ScenarioConfig& cfg) {
  for (int i = 1; i <= 3; ++i) {
    const std::string k = "s" + std::to_string(i);
    if (cfg.has("section", k) && parse_expr(cfg.get("section", k)).to_string() != "0") return false;
  }
  return true;
}

TangentialForm random_tangential(const FoliationChart& fc, int degree, Rng& rng) {
  TangentialForm w = tangential_zero(fc, degree);
  for (int i = 0; i < w.size(); ++i) w[i] = random_smooth_field(chart_grid(fc), rng, 3);
  return w;
}

// ---------------------------------------------------------------- forms-selftest

void run_forms_selftest(Ctx& c) {
  require_mutation(c, {"mu-perturb"});
  const PeriodicGrid g = make_grid(c);
  const int samples = c.cfg.integer("selftest", "samples", 20);
  if (samples < 1) throw ConfigError("[selftest] samples must be positive");
  c.inputs["selftest.samples"] = samples;
  const bool random_chart = c.cfg.has("chart", "template");
  auto chart = legendrian_chart(c, g);
  const int n = chart->n();
  const bool perturb = c.mutation() == "mu-perturb";
  if (perturb && n < 2) throw ConfigError("mu-perturb needs at least two leaf coordinates");
  double dd = 0, dFdF = 0, twtw = 0, dmu = 0;
  for (int s = 0; s < samples; ++s) {
    if (random_chart && s > 0) chart = legendrian_chart(c, g);
    const FoliationChart fc = *chart;
    TangentialForm mu = compute_mu(fc);
    if (perturb) mu[0] += 0.1 * sin(ScalarField::from_function(g, [](const Eigen::VectorXd& p) { return p[2]; }));
    dmu = std::max(dmu, tangential_d(mu, fc).max_abs());
    for (int k = 0; k + 2 <= g.dim(); ++k) {
      FullForm w(g, g.dim(), k);
      for (int i = 0; i < w.size(); ++i) w[i] = random_smooth_field(g, c.rng, 3);
      dd = std::max(dd, exterior_d(exterior_d(w)).max_abs());
    }
    for (int k = 0; k + 2 <= n; ++k) {
      const auto w = random_tangential(fc, k, c.rng);
      dFdF = std::max(dFdF, tangential_d(tangential_d(w, fc), fc).max_abs());
      twtw = std::max(twtw, twisted_d(twisted_d(w, fc, mu), fc, mu).max_abs());
    }
  }
  c.results["samples"] = samples;
  c.results["d_d"] = dd;
  c.results["dF_dF"] = dFdF;
  c.results["twisted_twisted"] = twtw;
  c.results["dF_mu"] = dmu;
  const double tol = c.tol("tol");
  c.checks.at_most("d o d", dd, tol);
  c.checks.at_most("d_F o d_F", dFdF, tol);
  c.checks.at_most("d_F^lambda o d_F^lambda", twtw, tol);
  c.checks.at_most("d_F mu", dmu, tol);
}

// ---------------------------------------------------------------- master

void run_master(Ctx& c) {
  require_mutation(c, {"master-sign"});
  const PeriodicGrid g = make_grid(c);
  auto chart = legendrian_chart(c, g);
  const Section s = section_from(c, chart);
  detail::MasterMutation m;
  m.flip_f_derivative_term = c.mutation() == "master-sign";
  const auto coord = master_residual_coord(s, m);
  const auto oracle = coisotropy_oracle_fields(s);
  const double agreement = max_difference(coord, oracle);
  const double ctol = c.tol("coisotropic_tol");
  const bool coisotropic = coord.max() <= ctol;
  c.results["n"] = chart->n();
  c.results["resolution"] = g.resolution(0);
  c.results["res1_max"] = coord.res1_max;
  c.results["res2_max"] = coord.res2_max;
  c.results["oracle_max"] = oracle.max();
  c.results["oracle_agreement"] = agreement;
  c.results["certificate"] = coisotropic ? "coisotropic" : "not coisotropic";
  c.checks.at_most("|coordinate - oracle|", agreement, c.tol("tol"));
  if (c.cfg.has("expect", "coisotropic")) {
    const bool want = c.cfg.flag("expect", "coisotropic", true);
    if (want)
      c.checks.at_most("master residual (coisotropic expected)", coord.max(), ctol);
    else
      c.checks.at_least("master residual (non-coisotropic expected)", coord.max(), ctol);
  }
}

// ---------------------------------------------------------------- coiso

std::shared_ptr<const CoisoChart> coiso_chart(Ctx& c, PeriodicGrid& g) {
  const auto& cfg = c.cfg;
  if (cfg.has("chart", "template")) {
    const std::string t = cfg.get("chart", "template");
    if (t != "t4" && t != "t5") throw ConfigError("[chart] template must be t4 or t5");
    const std::string v = cfg.get_or("chart", "variant", "zero");
    ExampleR R = ExampleR::Zero;
    if (v == "sin-q1")
      R = ExampleR::SinQ1;
    else if (v == "rich")
      R = ExampleR::Rich;
    else if (v != "zero")
      throw ConfigError("[chart] variant must be zero, sin-q1 or rich");
    int res = cfg.integers("grid", "resolution").front();
    if (c.opt.resolution) res = *c.opt.resolution;
    const double amp = cfg.number("chart", "amplitude", 0.0);
    const int q_res = c.opt.resolution ? 0 : cfg.integer("chart", "q_resolution", 0);
    c.inputs["chart.template"] = t;
    c.inputs["chart.variant"] = v;
    c.inputs["chart.amplitude"] = amp;
    auto chart = std::make_shared<const CoisoChart>(example_coiso_chart(t == "t4" ? 2 : 3, res, R, amp, q_res));
    g = chart->grid();
    if (cfg.has("grid", "axes") && valid_axes(cfg) != g.axes())
      throw ConfigError("[grid] axes do not match the template axes");
    c.grid["axes"] = g.axes();
    c.grid["resolution"] = g.resolutions();
    return chart;
  }
  g = make_grid(c);
  const int n = cfg.integer("chart", "n", 0), k = cfg.integer("chart", "k", 0);
  if (n < 2 || k < 1 || k > n - 1 || n + k + 1 != g.dim())
    throw ConfigError("[chart] need 1 <= k <= n-1 and n + k + 1 grid axes");
  const int ny = 2 * k + 1, nq = n - k;
  std::vector<ScalarField> a;
  for (int i = 1; i <= ny; ++i) a.push_back(field(c, "chart", "a" + std::to_string(i), "0", g));
  std::vector<std::vector<ScalarField>> R(nq), b(2 * k);
  for (int al = 1; al <= nq; ++al)
    for (int i = 1; i <= ny; ++i)
      R[al - 1].push_back(field(c, "chart", "R" + std::to_string(al) + std::to_string(i), "0", g));
  for (int j = 1; j <= 2 * k; ++j)
    for (int l = 1; l <= ny; ++l)
      b[j - 1].push_back(field(c, "chart", "b" + std::to_string(j) + std::to_string(l), j == l ? "1" : "0", g));
  return std::make_shared<const CoisoChart>(n, k, std::move(a), std::move(R), std::move(b));
}

double max_entry_difference(const std::vector<FieldMatrix>& A, const std::vector<FieldMatrix>& B) {
  double m = 0;
  for (std::size_t a = 0; a < A.size(); ++a)
    for (std::size_t i = 0; i < A[a].size(); ++i)
      for (std::size_t j = 0; j < A[a][i].size(); ++j) m = std::max(m, (A[a][i][j] - B[a][i][j]).max_abs());
  return m;
}

json histogram(const std::vector<int>& v) {
  std::map<int, int> h;
  for (int r : v) ++h[r];
  json out = json::object();
  for (const auto& [r, count] : h) out[std::to_string(r)] = count;
  return out;
}

void run_coiso(Ctx& c) {
  require_mutation(c, {});
  PeriodicGrid g;
  auto chart = coiso_chart(c, g);
  std::vector<ScalarField> s;
  for (int al = 1; al <= chart->nq(); ++al) s.push_back(field(c, "section", "s" + std::to_string(al), "0", g));
  const GeneralSection sec(chart, std::move(s));
  const auto points = sample_points(g, 100, static_cast<std::uint64_t>(c.cfg.integer("scenario", "seed", 1)));

  const auto om = omega_and_residual(sec);
  const auto rank = rank_oracle(sec, points);
  const bool by_residual = om.residual_max <= c.tol("classify_tol");
  const auto pair = lifted_basis_check(sec, points);
  const auto ident = omega_identity_check(sec, points);
  const double curvature = max_entry_difference(curvature_F(*chart), curvature_F_bracket(*chart));
  FullForm lam(g, g.dim(), 1);
  for (int i = 0; i < chart->ny(); ++i) lam[i] = chart->a(i);
  const auto pre = precontact_rank(lam, points);

  c.results["n"] = chart->n();
  c.results["k"] = chart->k();
  c.results["resolution"] = g.resolution(0);
  c.results["residual_max"] = om.residual_max;
  c.results["coisotropic_by_residual"] = by_residual;
  c.results["coisotropic_by_rank"] = rank.all_coisotropic;
  c.results["oracle_agreement"] = by_residual == rank.all_coisotropic;
  c.results["rank_histogram"] = histogram(rank.ranks);
  c.results["basis_pairing_max_dev"] = pair.max_deviation();
  c.results["ef_sign"] = pair.ef_sign;
  c.results["omega_identity_max"] = ident.identity_max;
  c.results["omega_sign"] = ident.omega_sign;
  c.results["curvature_vs_bracket"] = curvature;
  c.results["precontact_rank_histogram"] = histogram(pre.ranks);

  const double tol = c.tol("tol");
  c.checks.equal("residual and rank oracle agree", by_residual, rank.all_coisotropic);
  c.checks.at_most("basis pairing deviation", pair.max_deviation(), c.tol("pairing_tol"));
  c.checks.at_most("Omega identity", ident.identity_max, tol);
  c.checks.at_most("curvature formula vs bracket", curvature, tol);
  c.checks.equal("defining form has constant rank 2k", pre.constant_rank ? pre.rank : -1, 2 * chart->k());
  if (c.cfg.has("expect", "coisotropic"))
    c.checks.equal("coisotropic", by_residual, c.cfg.flag("expect", "coisotropic", true));
}

// ---------------------------------------------------------------- cohomology

void run_cohomology(Ctx& c) {
  require_mutation(c, {});
  const PeriodicGrid g = make_grid(c);
  if (g.axes() != std::vector<std::string>{"x", "y"}) throw ConfigError("cohomology needs [grid] axes = x y");
  const TorusFoliationChart chart(field(c, "chart", "u", "0", g));
  const double threshold = c.cfg.number("cohomology", "threshold", 1e-8);
  c.inputs["cohomology.threshold"] = threshold;
  std::vector<int> Ns{g.resolution(0)};
  if (!c.opt.resolution && c.cfg.has("cohomology", "resolutions")) Ns = c.cfg.integers("cohomology", "resolutions");
  const int primary = g.resolution(0);
  if (std::find(Ns.begin(), Ns.end(), primary) == Ns.end()) Ns.insert(Ns.begin(), primary);

  json by_res = json::array();
  std::ostringstream csv;
  csv << "N,operator,index,sigma\n";
  csv.precision(17);
  for (int N : Ns) {
    const auto M = assemble_operator(chart, false, N);
    const auto Mt = assemble_operator(chart, true, N);
    json r;
    r["N"] = N;
    r["h0"] = kernel_dimension(M, threshold);
    r["h0_tw"] = kernel_dimension(Mt, threshold);
    r["gap"] = singular_value_gap(M, threshold);
    r["gap_tw"] = singular_value_gap(Mt, threshold);
    r["sigma_max"] = M.sigma_max();
    r["sigma_max_tw"] = Mt.sigma_max();
    r["sigma_min_tw"] = Mt.singular_values.size() ? Mt.singular_values[Mt.singular_values.size() - 1] : 0.0;
    for (const auto* op : {&M, &Mt})
      for (Eigen::Index i = 0; i < op->singular_values.size(); ++i)
        csv << N << ',' << (op == &M ? "d_F" : "d_F^lambda") << ',' << i << ',' << op->singular_values[i] << '\n';
    if (N == primary) {
      c.results["h0"] = r["h0"];
      c.results["h0_tw"] = r["h0_tw"];
      c.results["singular_value_gap"] = {{"untwisted", r["gap"]}, {"twisted", r["gap_tw"]}};
    }
    by_res.push_back(std::move(r));
  }
  c.results["by_resolution"] = by_res;
  c.csv = csv.str();
  for (const auto& r : by_res) {
    const std::string at = " at N = " + std::to_string(r["N"].get<int>());
    if (c.cfg.has("expect", "h0")) c.checks.equal("h0" + at, r["h0"], c.cfg.integer("expect", "h0", 0));
    if (c.cfg.has("expect", "h0_tw")) c.checks.equal("h0_tw" + at, r["h0_tw"], c.cfg.integer("expect", "h0_tw", 0));
  }

  const double tol = c.tol("tol");
  json cert = json::object();
  if (c.cfg.flag("cohomology", "closed_forms", true)) {
    // f' + f = cos x  ->  f = (cos x + sin x)/2 ; f' - f = cos x -> (sin x - cos x)/2
    CircleSample h;
    h.values.resize(64);
    for (int j = 0; j < 64; ++j) h.values[j] = std::cos(h.x(j));
    double perr = 0, pres = 0;
    for (int sign : {1, -1}) {
      const auto f = periodic_ode_solve(h, sign);
      for (int j = 0; j < 64; ++j) {
        const double x = h.x(j);
        perr = std::max(perr, std::abs(f.values[j] - 0.5 * (std::sin(x) + sign * std::cos(x))));
      }
      pres = std::max(pres, periodic_ode_residual(f, h, sign));
    }
    // f' + tanh t f = sech t  ->  f = t sech t
    LineSample lh{25, Eigen::VectorXd(4097)};
    for (int j = 0; j < lh.size(); ++j) lh.values[j] = 1 / std::cosh(lh.t(j));
    const auto lf = leaf_ode_solve(lh);
    double lerr = 0;
    for (int j = 0; j < lf.size(); ++j) lerr = std::max(lerr, std::abs(lf.values[j] - lf.t(j) / std::cosh(lf.t(j))));
    const double lres = leaf_ode_residual(lf, lh);
    cert["periodic_closed_form_error"] = perr;
    cert["periodic_residual"] = pres;
    cert["leaf_closed_form_error"] = lerr;
    cert["leaf_residual"] = lres;
    c.checks.at_most("periodic ODE closed form", perr, tol);
    c.checks.at_most("periodic ODE residual", pres, tol);
    c.checks.at_most("leaf ODE closed form", lerr, tol);
    c.checks.at_most("leaf ODE residual", lres, tol);
  }

  CertificateOptions copt;
  copt.leaves = c.cfg.integer("cohomology", "leaves", copt.leaves);
  copt.nodes = c.cfg.integer("cohomology", "nodes", copt.nodes);
  copt.T_leaf = c.cfg.number("cohomology", "T_leaf", copt.T_leaf);
  copt.tol = c.tol("certificate_tol");
  if (c.cfg.has("cohomology", "f")) {
    const auto f = field(c, "cohomology", "f", "0", g);
    const auto p = periods(f, chart);
    c.results["periods"] = {{"a0", p.a0}, {"api", p.api}};
    const auto rep = coboundary_certificate(f, chart, false, copt);
    cert["untwisted_max"] = rep.untwisted_max;
    cert["untwisted_phi_shift"] = rep.phi_shift;
    c.results["untwisted_coboundary"] = rep.coboundary;
    if (c.cfg.has("expect", "coboundary"))
      c.checks.equal("untwisted coboundary", rep.coboundary, c.cfg.flag("expect", "coboundary", true));
  }
  if (c.cfg.has("cohomology", "primitive")) {
    const auto gref = field(c, "cohomology", "primitive", "0", g);
    const auto rep = coboundary_certificate(torus_d(gref, chart, true), chart, true, copt, gref);
    cert["twisted_roundtrip"] = *rep.roundtrip_residual;
    cert["twisted_closed_leaf"] = rep.closed_leaf_residual;
    cert["twisted_leaf_ode"] = rep.leaf_ode_residual;
    cert["twisted_decay"] = rep.decay;
    c.checks.at_most("twisted coboundary round trip", *rep.roundtrip_residual, c.tol("roundtrip_tol"));
  }
  c.results["certificate_residuals"] = cert;
}

// ---------------------------------------------------------------- flow

HamiltonianPoly build_hamiltonian(Ctx& c, const PeriodicGrid& g, int n, double T, double sign) {
  const int r = c.cfg.integer("hamiltonian", "degree", 0);
  if (r < 0 || r > 3) throw ConfigError("[hamiltonian] degree must be 0..3");
  for (int j = r + 1; j <= 3; ++j)
    if (c.cfg.has("hamiltonian", "w" + std::to_string(j)))
      throw ConfigError("[hamiltonian] w" + std::to_string(j) + " exceeds the degree");
  if (r == 0 && !c.cfg.has("hamiltonian", "H")) throw ConfigError("missing key 'H' in [hamiltonian]");
  if (r > 0 && c.cfg.has("hamiltonian", "H")) throw ConfigError("[hamiltonian] H is for degree 0 only");

  std::vector<std::vector<ExprAst>> w;
  bool timed = false;
  if (r == 0) {
    w.push_back({expr(c, "hamiltonian", "H", "0")});
  } else {
    for (int j = 1; j <= r; ++j) {
      const std::string key = "w" + std::to_string(j);
      auto list = parse_expr_list(c.cfg.get("hamiltonian", key));
      if (static_cast<int>(list.size()) != n)
        throw ConfigError("[hamiltonian] " + key + ": need " + std::to_string(n) + " components");
      json txt = json::array();
      for (const auto& e : list) txt.push_back(e.to_string());
      c.inputs["hamiltonian." + key] = txt;
      w.push_back(std::move(list));
    }
  }
  for (const auto& list : w)
    for (const auto& e : list) {
      check_expr(e, g, true);
      timed = timed || e.variables().count("t");
    }
  c.inputs["hamiltonian.degree"] = r;

  auto nodal = [&](double t) {
    std::vector<std::vector<ScalarField>> vals;
    for (const auto& list : w) {
      std::vector<ScalarField> comp;
      for (const auto& e : list) comp.push_back(evaluate_on_grid(e, g, t));
      vals.push_back(std::move(comp));
    }
    for (auto& f : vals.front()) f *= sign;
    if (r == 0) return std::vector<ScalarField>{vals.front().front()};
    return HamiltonianPoly::product_of_vectors(vals).coefficients(0);
  };
  if (!timed) return HamiltonianPoly(n, r, {nodal(0)});
  const double node_dt = c.cfg.number("hamiltonian", "node_dt", T / 8);
  if (!(node_dt > 0)) throw ConfigError("[hamiltonian] node_dt must be positive");
  c.inputs["hamiltonian.node_dt"] = node_dt;
  const int K = std::max(4, static_cast<int>(std::ceil(T / node_dt - 1e-12)) + 1);
  std::vector<std::vector<ScalarField>> nodes;
  for (int k = 0; k < K; ++k) nodes.push_back(nodal(k * node_dt));
  return HamiltonianPoly(n, r, std::move(nodes), node_dt);
}

struct FlowParams {
  double T, dt;
  int record_every;
};

FlowParams flow_params(Ctx& c) {
  FlowParams p{c.cfg.number("flow", "T", 0.25), c.cfg.number("flow", "dt", 1e-3), c.cfg.integer("flow", "record_every", 10)};
  if (!(p.T > 0) || !(p.dt > 0) || p.record_every < 1) throw ConfigError("[flow] need T > 0, dt > 0, record_every >= 1");
  c.inputs["flow.T"] = p.T;
  c.inputs["flow.dt"] = p.dt;
  c.inputs["flow.record_every"] = p.record_every;
  return p;
}

void run_flow(Ctx& c) {
  require_mutation(c, {"rate-sign"});
  const PeriodicGrid g = make_grid(c);
  auto chart = legendrian_chart(c, g);
  const int n = chart->n();
  const Section s0 = section_from(c, chart);
  const FlowParams fp = flow_params(c);
  const HamiltonianPoly H = build_hamiltonian(c, g, n, fp.T, 1.0);
  const HamiltonianPoly Hev = c.mutation() == "rate-sign" ? build_hamiltonian(c, g, n, fp.T, -1.0) : H;

  // contact oracles at random points
  ContactChart cc(chart);
  const double pmax = std::min(0.1, 0.5 * chart->neighborhood_bound() / std::sqrt(double(n)));
  std::uniform_real_distribution<double> ang(0, kTwoPi), pp(-pmax, pmax);
  double reeb_alpha = 0, reeb_d = 0, xh_alpha = 0;
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd z(2 * n + 1);
    for (int a = 0; a <= n; ++a) z[a] = ang(c.rng);
    for (int i = 0; i < n; ++i) z[1 + n + i] = pp(c.rng);
    Eigen::VectorXd a;
    Eigen::MatrixXd W;
    cc.contact_form(z, a, W);
    const auto R = reeb_field(cc, z);
    reeb_alpha = std::max(reeb_alpha, std::abs(a.dot(R) - 1));
    reeb_d = std::max(reeb_d, (W.transpose() * R).cwiseAbs().maxCoeff());
    const auto X = hamiltonian_field(H, cc, z, 0);
    xh_alpha = std::max(xh_alpha, std::abs(a.dot(X) - H.at(z.head(n + 1), z.tail(n), 0).H));
  }
  const double otol = c.tol("oracle_tol");
  c.results["oracles"] = {{"alpha_R_minus_1", reeb_alpha}, {"dalpha_R", reeb_d}, {"alpha_XH_minus_H", xh_alpha}};
  c.checks.at_most("alpha(R) = 1", reeb_alpha, otol);
  c.checks.at_most("dalpha(R, .) = 0", reeb_d, otol);
  c.checks.at_most("alpha(X_H) = H", xh_alpha, otol);

  FlowOptions fo;
  fo.record_every = fp.record_every;
  const auto path = evolve_section(Hev, s0, fp.T, fp.dt, fo);
  json series = json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "t,master_residual,sup_norm\n";
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    series.push_back({{"t", path.states[k].t}, {"residual", path.residuals[k]}});
    csv << path.states[k].t << ',' << path.residuals[k] << ',' << path.states[k].section.sup_norm() << '\n';
  }
  c.csv = csv.str();
  c.results["dt"] = fp.dt;
  c.results["T"] = fp.T;
  c.results["residual_timeseries"] = series;
  c.results["max_residual"] = path.max_residual;
  c.results["step_halving_gap"] = path.step_halving_gap;
  c.results["final_sup_norm"] = path.states.back().section.sup_norm();
  c.checks.at_most("master residual along the flow", path.max_residual, c.tol("tol"));

  if (c.cfg.flag("flow", "rate_law", false)) {
    if (H.degree() != 0 || !section_is_zero(c.cfg))
      throw ConfigError("[flow] rate_law needs a degree-0 Hamiltonian and the zero initial section");
    const FoliationChart fc = *chart;
    const auto dlh = twisted_d(tangential_scalar(fc, H.coefficients(0)[0]), fc);
    auto err = [&](double dt) {
      const auto s = rk4_step(Hev, Section::zero(chart), 0, dt);
      return ((1 / dt) * s.as_form() + dlh).max_abs();
    };
    const double e0 = err(fp.dt), e1 = err(fp.dt / 2), e2 = err(fp.dt / 4);
    const double ratio = c.tol("rate_ratio"), rtol = c.tol("rate_ratio_tol");
    c.results["rate_law"] = {{"errors", {e0, e1, e2}}, {"ratios", {e0 / e1, e1 / e2}}};
    c.checks.within("rate-law ratio dt -> dt/2", e0 / e1, ratio - rtol, ratio + rtol);
    c.checks.within("rate-law ratio dt/2 -> dt/4", e1 / e2, ratio - rtol, ratio + rtol);
  }
  if (c.cfg.flag("flow", "order_r_check", false)) {
    if (H.degree() < 1) throw ConfigError("[flow] order_r_check needs degree >= 1");
    std::vector<std::vector<ScalarField>> w;
    for (int j = 1; j <= H.degree(); ++j) {
      std::vector<ScalarField> comp;
      for (const auto& e : parse_expr_list(c.cfg.get("hamiltonian", "w" + std::to_string(j))))
        comp.push_back(evaluate_on_grid(e, g, 0.0));
      w.push_back(std::move(comp));
    }
    const auto o = order_r_update(s0, w);
    c.results["order_r"] = {{"collapse", o.collapse},
                            {"displayed_corrected", o.displayed_corrected},
                            {"displayed_literal_vs_order0", o.displayed_vs_order0}};
    c.checks.at_most("order-r collapse", o.collapse, c.tol("collapse_tol"));
  }
}

// ---------------------------------------------------------------- certificates

std::vector<int> path_resolutions(Ctx& c, const PeriodicGrid& g) {
  if (c.opt.resolution || !c.cfg.has("path", "resolutions")) return {g.resolution(0)};
  return c.cfg.integers("path", "resolutions");
}

json certificate_json(const IsotopyReport& rep) {
  double fro = 0;
  for (double f : rep.frobenius) fro = std::max(fro, f);
  json j;
  j["residuals"] = rep.residuals;
  j["coarse_residuals"] = rep.coarse_residuals;
  j["max_residual"] = rep.max_residual();
  j["max_frobenius"] = fro;
  j["certificate"] = to_string(rep.verdict);
  j["conjectural_flag"] = rep.conjectural;
  return j;
}

void run_certify(Ctx& c) {
  require_mutation(c, {});
  const PeriodicGrid g0 = make_grid(c);
  const std::string source = c.cfg.get_or("path", "source", "expressions");
  if (source != "expressions" && source != "flow") throw ConfigError("[path] source must be expressions or flow");
  c.inputs["path.source"] = source;
  const double tol = c.tol("tol");
  const std::string expected = c.cfg.get_or("expect", "verdict", "ISOTOPY");
  json runs = json::array();
  for (int N : path_resolutions(c, g0)) {
    const PeriodicGrid g = make_grid(c, N);
    auto chart = legendrian_chart(c, g);
    const int n = chart->n();
    std::vector<TangentialForm> beta;
    double dt = 0;
    if (source == "flow") {
      const Section s0 = section_from(c, chart);
      const FlowParams fp = flow_params(c);
      FlowOptions fo;
      fo.record_every = fp.record_every;
      const auto path = evolve_section(build_hamiltonian(c, g, n, fp.T, 1.0), s0, fp.T, fp.dt, fo);
      for (const auto& st : path.states) beta.push_back(-1.0 * st.section.as_form());
      dt = fp.dt * fp.record_every;
    } else {
      const int K = c.cfg.integer("path", "nodes", 11);
      dt = c.cfg.number("path", "dt", 0.01);
      std::vector<ExprAst> comps;
      for (int i = 1; i <= n; ++i) comps.push_back(expr(c, "path", "beta" + std::to_string(i), "0"));
      for (int k = 0; k < K; ++k) {
        std::vector<ScalarField> f;
        for (const auto& e : comps) f.push_back(evaluate_on_grid(e, g, k * dt));
        beta.emplace_back(g, n, 1, std::move(f));
      }
      c.inputs["path.nodes"] = K;
    }
    c.inputs["path.dt"] = dt;
    const auto rep = isotopy_certificate(chart, beta, dt, tol);
    json r{{"N", N}, {"dt", dt}, {"T", dt * (static_cast<double>(beta.size()) - 1)}};
    r.update(certificate_json(rep));
    runs.push_back(r);
    const std::string at = " at N = " + std::to_string(N);
    c.checks.equal("certificate" + at, to_string(rep.verdict), expected);
    if (expected == "ISOTOPY") c.checks.at_most("certificate residual" + at, rep.max_residual(), tol);
  }
  c.results["runs"] = runs;
  c.results["certificate"] = runs.back()["certificate"];
  c.results["conjectural_flag"] = runs.back()["conjectural_flag"];
}

void run_obstruct(Ctx& c) {
  require_mutation(c, {});
  const PeriodicGrid g = make_grid(c);
  auto chart = legendrian_chart(c, g);
  if (chart->n() != 2) throw ConfigError("obstruct needs two leaf coordinates");
  auto zeta_on = [&](const PeriodicGrid& gg) {
    return TangentialForm(gg, 2, 1, {field(c, "cocycle", "zeta1", "0", gg), field(c, "cocycle", "zeta2", "0", gg)});
  };
  const TangentialForm zeta = zeta_on(g);
  const double tol = c.tol("tol");
  const double inf = infinitesimal_residual(zeta, *chart).max_abs();
  const auto ob = second_order_obstruction(zeta, *chart, tol);
  c.results["infinitesimal_residual"] = inf;
  c.results["omega_max"] = ob.omega.max_abs();
  c.results["certificate"] = {{"min", ob.certificate.min()}, {"max", ob.certificate.max()}, {"mean", ob.certificate.mean()}};
  c.checks.at_most("infinitesimal residual", inf, tol);
  if (c.cfg.has("expect", "certificate")) {
    const double want = c.cfg.number("expect", "certificate", 0);
    c.checks.at_most("second-order certificate - expected", (ob.certificate - want).max_abs(), tol);
  }
  if (!c.cfg.has_section("path")) return;
  const int K = c.cfg.integer("path", "nodes", 11);
  const double dt = c.cfg.number("path", "dt", 5e-6);
  c.inputs["path.nodes"] = K;
  c.inputs["path.dt"] = dt;
  const double ctol = c.tol("certificate_tol"), floor = c.tol("min_residual");
  const std::string expected = c.cfg.get_or("expect", "verdict", "OBSTRUCTED-AT-ORDER-0");
  json runs = json::array();
  for (int N : path_resolutions(c, g)) {
    const PeriodicGrid gN = make_grid(c, N);
    auto cN = legendrian_chart(c, gN);
    const TangentialForm z = zeta_on(gN);
    std::vector<TangentialForm> beta;
    for (int k = 0; k < K; ++k) beta.push_back((k * dt) * z);
    const auto rep = isotopy_certificate(cN, beta, dt, ctol);
    const double low = *std::min_element(rep.residuals.begin(), rep.residuals.end());
    json r{{"N", N}, {"min_residual", low}};
    r.update(certificate_json(rep));
    runs.push_back(r);
    const std::string at = " at N = " + std::to_string(N);
    c.checks.at_least("isotopy residual" + at, low, floor);
    c.checks.equal("flow certificate" + at, to_string(rep.verdict), expected);
  }
  make_grid(c);  // report the primary grid
  c.results["isotopy"] = runs;
  c.results["flow_certificate"] = runs.back()["certificate"];
  c.results["conjectural_flag"] = runs.back()["conjectural_flag"];
}

json sign_resolutions() {
  json s;
  s["basis_pairing_ef"] = -1;
  s["Omega_vs_omega"] = 1;
  s["antisymmetric_A_closed_form"] = "A_ab - A_ba";
  s["general_residual"] = "(A_ba - A_ab) - B_ia omega^ij B_jb";
  s["order_r_displayed_law"] = "(-1)^(r+1) times lambda_dot";
  s["graph_evolution"] = "transport under -H";
  return s;
}

}  // namespace

ScenarioOutcome run_scenario(const ScenarioConfig& cfg, const RunOptions& opt) {
  ScenarioOutcome out;
  json& rep = out.report;
  rep["schema_version"] = kReportSchema;
  rep["scenario"] = cfg.name;
  rep["kind"] = cfg.kind;
  try {
    Ctx c(cfg, opt);
    c.record_tolerances();
    if (!c.mutation().empty()) c.inputs["debug.mutate"] = c.mutation();
    if (cfg.kind == "forms-selftest")
      run_forms_selftest(c);
    else if (cfg.kind == "master")
      run_master(c);
    else if (cfg.kind == "coiso")
      run_coiso(c);
    else if (cfg.kind == "cohomology")
      run_cohomology(c);
    else if (cfg.kind == "flow")
      run_flow(c);
    else if (cfg.kind == "certify-isotopy")
      run_certify(c);
    else
      run_obstruct(c);
    out.exit_code = c.checks.all_pass() ? 0 : 1;
    rep["grid"] = c.grid;
    rep["tolerances"] = c.tolerances;
    rep["sign_resolutions"] = sign_resolutions();
    rep["inputs"] = c.inputs;
    rep["results"] = c.results;
    rep["checks"] = c.checks.to_json();
    rep["status"] = out.exit_code == 0 ? "pass" : "fail";
    out.csv = std::move(c.csv);
  } catch (const DomainError& e) {
    out.exit_code = 2;
    out.error = e.what();
    rep["status"] = "error";
    rep["error"] = out.error;
  }
  rep["exit_code"] = out.exit_code;
  return out;
}

ScenarioOutcome run_scenario_file(const std::string& path, const RunOptions& opt) {
  try {
    return run_scenario(load_config(path), opt);
  } catch (const DomainError& e) {
    ScenarioOutcome out;
    out.exit_code = 2;
    out.error = e.what();
    out.report = {{"schema_version", kReportSchema}, {"status", "error"}, {"error", out.error}, {"exit_code", 2}};
    return out;
  }
}

}  // namespace folcoil
