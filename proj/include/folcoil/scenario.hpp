#pragma once

#include "folcoil/grid.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace folcoil {

/// Malformed or inconsistent scenario file (exit code 2).
class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

inline constexpr const char* kReportSchema = "folcoil.report/1";

/// Scenario kinds, one per CLI subcommand.
const std::vector<std::string>& scenario_kinds();

/// Sectioned key = value file after schema validation. Keys and sections
/// not recognized for the scenario kind are rejected.
struct ScenarioConfig {
  std::string kind;
  std::string name;
  std::string base_dir = ".";  // relative output paths resolve here
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const { return sections.count(section) > 0; }
  const std::string& get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const;
  double number(const std::string& section, const std::string& key, double fallback) const;
  int integer(const std::string& section, const std::string& key, int fallback) const;
  bool flag(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<int> integers(const std::string& section, const std::string& key) const;
};

ScenarioConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);

struct RunOptions {
  std::optional<int> resolution;  // replaces every grid resolution
  std::optional<double> tol;      // replaces the scenario's primary tolerance
};

struct ScenarioOutcome {
  int exit_code = 0;  // 0 all checks pass, 1 a check failed, 2 configuration or domain error
  nlohmann::ordered_json report;
  std::string csv;    // optional dump, empty when the kind has none
  std::string error;  // message when exit_code == 2
};

/// Runs one scenario. Never throws for configuration or domain errors;
/// those come back as exit code 2.
ScenarioOutcome run_scenario(const ScenarioConfig& cfg, const RunOptions& opt = {});

/// Loads and runs; parse failures also map to exit code 2.
ScenarioOutcome run_scenario_file(const std::string& path, const RunOptions& opt = {});

/// Deterministic text of a report (two-space indent, trailing newline).
std::string render_report(const nlohmann::ordered_json& report);

}  // namespace folcoil
