// conesolve: prescribed curvature on conical spheres from the command line.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "conesolve/job.hpp"

using namespace conesolve;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Prescribed Gaussian curvature on spheres with conical singularities"};
  app.require_subcommand(1);

  std::string config_path, out_dir, example_name, angles_text;
  int count = 6, k = 2;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "job description (JSON)")->required();
    sub->add_option("--out", out_dir, "directory for report and field dumps");
  };
  auto* check = app.add_subcommand("check", "validate the divisor and weights");
  with_config(check);
  auto* solve = app.add_subcommand("solve", "solve for the conformal factor");
  with_config(solve);
  auto* spec = app.add_subcommand("spectrum", "low eigenvalues of the conical Laplacian");
  with_config(spec);
  spec->add_option("--count", count, "number of eigenvalues");
  auto* sym = app.add_subcommand("symmetries", "conformal symmetry group of the marked sphere");
  with_config(sym);
  auto* gb = app.add_subcommand("gauss-bonnet", "Gauss-Bonnet quadrature of the background");
  with_config(gb);
  auto* ex = app.add_subcommand("example", "football or triangle double with diagnostics");
  ex->add_option("--name", example_name, "football | triangle")->required();
  ex->add_option("--k", k, "football order");
  ex->add_option("--angles", angles_text, "triangle angles in degrees, a,b,c");
  ex->add_option("--config", config_path, "optional mesh/solver settings");
  ex->add_option("--out", out_dir, "directory for the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  JobConfig cfg;
  std::optional<nlohmann::json> resolved;
  CommandResult result = guarded([&]() -> CommandResult {
    if (!config_path.empty()) {
      cfg = load_job(config_path);
    } else {
      cfg.mesh.base_level = 5;
    }
    if (!out_dir.empty()) cfg.out_dir = fs::path(out_dir);
    resolved = to_json(cfg);
    if (check->parsed()) return cmd_check(cfg);
    if (solve->parsed()) return cmd_solve(cfg);
    if (spec->parsed()) return cmd_spectrum(cfg, count);
    if (sym->parsed()) return cmd_symmetries(cfg);
    if (gb->parsed()) return cmd_gauss_bonnet(cfg);
    std::vector<double> angles;
    if (!angles_text.empty()) {
      std::stringstream ss(angles_text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          angles.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw ConfigError("--angles: cannot parse '" + item + "'");
        }
      }
    } else {
      angles = {90.0, 90.0, 90.0};
    }
    return cmd_example(example_name, k, angles, cfg);
  });
  if (!result.report.contains("config") && resolved) result.report["config"] = *resolved;

  const std::string text = result.report.dump(2);
  std::cout << text << "\n";
  if (cfg.out_dir) {
    std::error_code ec;
    fs::create_directories(*cfg.out_dir, ec);
    std::ofstream os(*cfg.out_dir / "report.json");
    if (!os) {
      std::cerr << "cannot write " << (*cfg.out_dir / "report.json").string() << "\n";
      return 2;
    }
    os << text << "\n";
  }
  return result.exit_code;
}
