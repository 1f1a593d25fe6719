#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "conesolve/background.hpp"
#include "conesolve/divisor.hpp"
#include "conesolve/errors.hpp"
#include "conesolve/solver.hpp"

namespace conesolve {

struct TargetSpec {
  /// constant | expression | grid | manufactured
  std::string type = "constant";
  double value = 1.0;
  /// expression: a + b x + c y + d z; manufactured: polynomial factor of v
  std::array<double, 4> coefficients{1.0, 0.0, 0.0, 0.0};
  std::filesystem::path path;  ///< grid CSV
  double scale = 0.3;          ///< manufactured amplitude
};

struct MeshSpec {
  int base_level = 4;
  int grading_levels = 3;
  double grading_radius = 0.0;
};

struct JobConfig {
  Divisor divisor;
  TargetSpec target;
  MeshSpec mesh;
  double cutoff_radius = 0.0;
  RadiusModel radius_model = RadiusModel::Global;
  std::optional<WeightSpec> weights;
  SolverConfig solver;
  std::optional<std::filesystem::path> out_dir;
  bool dump_fields = true;
};

/// Parses a job description; every problem is reported as ConfigError
/// naming the offending field. Relative paths resolve against base_dir.
JobConfig parse_job(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
JobConfig load_job(const std::filesystem::path& file);

/// Resolved configuration with all defaults filled in.
nlohmann::json to_json(const JobConfig& cfg);

/// Manufactured factor v = scale * (c0 + c1 x + c2 y + c3 z) * prod_i (1 - x . p_i) / 2,
/// which vanishes at every cone point.
GridFunction manufactured_factor(const Divisor& divisor, const SphereMesh& mesh, double scale,
                                 const std::array<double, 4>& coefficients);

struct CommandResult {
  int exit_code = 0;
  nlohmann::json report;
};

CommandResult cmd_check(const JobConfig& cfg);
CommandResult cmd_solve(const JobConfig& cfg);
CommandResult cmd_spectrum(const JobConfig& cfg, int count);
CommandResult cmd_symmetries(const JobConfig& cfg);
CommandResult cmd_gauss_bonnet(const JobConfig& cfg);
/// name: football (uses k) or triangle (uses angles, degrees).
CommandResult cmd_example(const std::string& name, int k, const std::vector<double>& angles_deg,
                          const JobConfig& cfg);

/// Runs a command, mapping errors to exit codes: ConfigError and malformed
/// input -> 2, any other library error -> 1 with its name in the report.
template <class F>
CommandResult guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    return {2, {{"status", "error"}, {"error", e.name()}, {"message", e.what()}}};
  } catch (const nlohmann::json::exception& e) {
    return {2, {{"status", "error"}, {"error", "ConfigError"}, {"message", e.what()}}};
  } catch (const Error& e) {
    return {1, {{"status", "error"}, {"error", e.name()}, {"message", e.what()}}};
  }
}

}  // namespace conesolve
