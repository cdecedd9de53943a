// folcoil <subcommand> --config <path> [--out <path>] [--resolution N] [--tol T] [--csv <path>]

#include "folcoil/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

bool write_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

std::string resolve(const std::string& base, const std::string& rel) {
  const std::filesystem::path p(rel);
  return p.is_absolute() ? rel : (std::filesystem::path(base) / p).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical checks for coisotropic deformations of Legendrian foliations"};
  app.require_subcommand(1);

  std::string config, out, csv;
  int resolution = 0;
  double tol = 0;
  for (const auto& kind : folcoil::scenario_kinds()) {
    auto* sub = app.add_subcommand(kind, "run a '" + kind + "' scenario");
    sub->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "report path (default: [output] report, else stdout)");
    sub->add_option("--resolution", resolution, "override every grid resolution")->check(CLI::PositiveNumber);
    sub->add_option("--tol", tol, "override the primary tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--csv", csv, "optional CSV dump path");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string kind = app.get_subcommands().front()->get_name();

  folcoil::ScenarioConfig cfg;
  try {
    cfg = folcoil::load_config(config);
    if (cfg.kind != kind) throw folcoil::ConfigError("config kind '" + cfg.kind + "' does not match subcommand '" + kind + "'");
  } catch (const folcoil::DomainError& e) {
    std::cerr << "folcoil: error: " << e.what() << '\n';
    return 2;
  }

  folcoil::RunOptions opt;
  if (resolution > 0) opt.resolution = resolution;
  if (tol > 0) opt.tol = tol;
  const auto result = folcoil::run_scenario(cfg, opt);

  if (out.empty() && cfg.has("output", "report")) out = resolve(cfg.base_dir, cfg.get("output", "report"));
  if (csv.empty() && cfg.has("output", "csv")) csv = resolve(cfg.base_dir, cfg.get("output", "csv"));
  const std::string text = folcoil::render_report(result.report);
  if (out.empty() || out == "-") {
    std::cout << text;
  } else if (!write_file(out, text)) {
    std::cerr << "folcoil: error: cannot write " << out << '\n';
    return 2;
  }
  if (!csv.empty() && !result.csv.empty() && !write_file(csv, result.csv)) {
    std::cerr << "folcoil: error: cannot write " << csv << '\n';
    return 2;
  }
  if (result.exit_code == 2) std::cerr << "folcoil: error: " << result.error << '\n';
  else
    std::cerr << "folcoil: " << cfg.name << ": " << (result.exit_code == 0 ? "PASS" : "FAIL") << '\n';
  return result.exit_code;
}
