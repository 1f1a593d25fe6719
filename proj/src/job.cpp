#include "conesolve/job.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "conesolve/diagnostics.hpp"
#include "conesolve/moebius.hpp"
#include "conesolve/sphere_mesh.hpp"

namespace conesolve {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& msg) { throw ConfigError(field + ": " + msg); }

double number(const json& j, const std::string& field) {
  if (!j.is_number()) bad(field, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) bad(field, "not finite");
  return x;
}

int integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) bad(field, "expected an integer");
  return j.get<int>();
}

void require_object(const json& j, const std::string& field) {
  if (!j.is_object()) bad(field, "expected an object");
}

void reject_unknown(const json& obj, const std::string& field, std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) bad(field + "." + item.key(), "unknown field");
  }
}

Vec3 parse_position(const json& p, const std::string& field) {
  if (p.contains("position")) {
    const json& v = p.at("position");
    if (!v.is_array() || v.size() != 3) bad(field + ".position", "expected [x, y, z]");
    Vec3 x;
    for (int i = 0; i < 3; ++i) x[i] = number(v[std::size_t(i)], field + ".position[" + std::to_string(i) + "]");
    if (!(x.norm() > 1e-12)) bad(field + ".position", "zero vector");
    return x.normalized();
  }
  if (p.contains("lat") && p.contains("lon")) {
    const double lat = number(p.at("lat"), field + ".lat") * std::numbers::pi / 180.0;
    const double lon = number(p.at("lon"), field + ".lon") * std::numbers::pi / 180.0;
    if (std::abs(lat) > 0.5 * std::numbers::pi + 1e-15) bad(field + ".lat", "outside [-90, 90]");
    return Vec3(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)).normalized();
  }
  bad(field, "needs position [x, y, z] or lat/lon");
}

Divisor parse_divisor(const json& j) {
  if (!j.is_array()) bad("divisor", "expected a list of cone points");
  std::vector<ConePoint> points;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string field = "divisor[" + std::to_string(i) + "]";
    require_object(j[i], field);
    reject_unknown(j[i], field, {"position", "lat", "lon", "beta"});
    if (!j[i].contains("beta")) bad(field + ".beta", "missing");
    const double beta = number(j[i].at("beta"), field + ".beta");
    try {
      points.emplace_back(parse_position(j[i], field), beta);
    } catch (const DomainError& e) {
      bad(field, e.what());
    }
  }
  try {
    return Divisor(std::move(points));
  } catch (const DomainError& e) {
    bad("divisor", e.what());
  }
}

std::array<double, 4> parse_coefficients(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 4) bad(field, "expected [a, b, c, d]");
  std::array<double, 4> c{};
  for (std::size_t i = 0; i < 4; ++i) c[i] = number(j[i], field + "[" + std::to_string(i) + "]");
  return c;
}

double default_radius(const Divisor& d) { return std::min(0.5, 0.4 * d.min_pairwise_distance()); }

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json solver_report_json(const SolverReport& r) {
  json path = json::array();
  for (const auto& p : r.continuation_path) path.push_back({{"t", p.t}, {"iterations", p.iterations}, {"residual", p.residual}});
  return {{"converged", r.converged},
          {"final_residual_sup", r.final_residual_sup},
          {"newton_iterations_total", r.newton_iterations_total},
          {"continuation_path", path},
          {"gauss_bonnet_residual", r.gauss_bonnet_residual},
          {"warnings", r.warnings}};
}

json mesh_json(const SphereMesh& m) {
  return {{"vertices", m.num_vertices()},
          {"triangles", m.triangles().size()},
          {"h_max", m.max_edge_length()},
          {"h_min", m.min_edge_length()}};
}

json gauss_bonnet_json(const GaussBonnetReport& g) {
  return {{"integral", g.integral}, {"target", g.target}, {"residual", g.residual}};
}

struct Built {
  std::shared_ptr<const SphereMesh> mesh;
  ConicalBackground bg;
};

Built build(const JobConfig& cfg) {
  auto mesh = build_mesh(cfg.divisor, cfg.mesh.base_level, cfg.mesh.grading_levels, cfg.mesh.grading_radius);
  auto bg = build_background(cfg.divisor, mesh, cfg.cutoff_radius, cfg.radius_model);
  return {mesh, std::move(bg)};
}

GridFunction target_field(const JobConfig& cfg, const ConicalBackground& bg, GridFunction* manufactured) {
  const SphereMesh& mesh = bg.mesh();
  const TargetSpec& t = cfg.target;
  if (t.type == "constant") return GridFunction(mesh, t.value);
  if (t.type == "expression") {
    const auto& c = t.coefficients;
    return GridFunction::sample(mesh, [&](const Vec3& x) { return c[0] + c[1] * x.x() + c[2] * x.y() + c[3] * x.z(); });
  }
  if (t.type == "grid") {
    std::ifstream in(t.path);
    if (!in) bad("target.path", "cannot open " + t.path.string());
    return read_csv(mesh, in);
  }
  GridFunction v = manufactured_factor(cfg.divisor, mesh, t.scale, t.coefficients);
  if (manufactured) *manufactured = v;
  return curvature_map(bg, v);
}

void write_text(const fs::path& file, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(file);
  if (!os) throw ConfigError("cannot write " + file.string());
  body(os);
}

}  // namespace

JobConfig parse_job(const json& j, const fs::path& base_dir) {
  require_object(j, "config");
  reject_unknown(j, "config", {"divisor", "target", "mesh", "background", "weights", "solver", "outputs"});
  JobConfig cfg;
  if (!j.contains("divisor")) bad("divisor", "missing");
  cfg.divisor = parse_divisor(j.at("divisor"));
  const double radius = default_radius(cfg.divisor);
  cfg.mesh.grading_radius = radius;
  cfg.cutoff_radius = radius;

  if (j.contains("target")) {
    const json& t = j.at("target");
    require_object(t, "target");
    reject_unknown(t, "target", {"type", "value", "coefficients", "path", "scale"});
    if (t.contains("type")) {
      if (!t.at("type").is_string()) bad("target.type", "expected a string");
      cfg.target.type = t.at("type").get<std::string>();
    }
    const std::string& type = cfg.target.type;
    if (type != "constant" && type != "expression" && type != "grid" && type != "manufactured")
      bad("target.type", "unknown target type '" + type + "'");
    if (t.contains("value")) cfg.target.value = number(t.at("value"), "target.value");
    if (t.contains("coefficients")) cfg.target.coefficients = parse_coefficients(t.at("coefficients"), "target.coefficients");
    if (t.contains("scale")) cfg.target.scale = number(t.at("scale"), "target.scale");
    if (t.contains("path")) {
      if (!t.at("path").is_string()) bad("target.path", "expected a string");
      cfg.target.path = base_dir / t.at("path").get<std::string>();
    }
    if (type == "grid" && cfg.target.path.empty()) bad("target.path", "required for grid targets");
    if (type == "expression" && !t.contains("coefficients")) bad("target.coefficients", "required for expression targets");
  }

  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    require_object(m, "mesh");
    reject_unknown(m, "mesh", {"base_level", "grading_levels", "grading_radius"});
    if (m.contains("base_level")) cfg.mesh.base_level = integer(m.at("base_level"), "mesh.base_level");
    if (m.contains("grading_levels")) cfg.mesh.grading_levels = integer(m.at("grading_levels"), "mesh.grading_levels");
    if (m.contains("grading_radius")) cfg.mesh.grading_radius = number(m.at("grading_radius"), "mesh.grading_radius");
    if (cfg.mesh.base_level < 2 || cfg.mesh.base_level > 8) bad("mesh.base_level", "must lie in [2, 8]");
    if (cfg.mesh.grading_levels < 0 || cfg.mesh.grading_levels > 12) bad("mesh.grading_levels", "must lie in [0, 12]");
    if (!(cfg.mesh.grading_radius > 0.0)) bad("mesh.grading_radius", "must be positive");
  }

  if (j.contains("background")) {
    const json& b = j.at("background");
    require_object(b, "background");
    reject_unknown(b, "background", {"cutoff_radius", "radius_model"});
    if (b.contains("cutoff_radius")) cfg.cutoff_radius = number(b.at("cutoff_radius"), "background.cutoff_radius");
    if (!(cfg.cutoff_radius > 0.0)) bad("background.cutoff_radius", "must be positive");
    if (b.contains("radius_model")) {
      const json& r = b.at("radius_model");
      if (r == "global")
        cfg.radius_model = RadiusModel::Global;
      else if (r == "local_blend")
        cfg.radius_model = RadiusModel::LocalBlend;
      else
        bad("background.radius_model", "expected 'global' or 'local_blend'");
    }
  }

  if (j.contains("weights") && !j.at("weights").is_null()) {
    const json& w = j.at("weights");
    require_object(w, "weights");
    reject_unknown(w, "weights", {"gamma", "alpha", "k"});
    WeightSpec spec;
    if (!w.contains("gamma") || !w.at("gamma").is_array()) bad("weights.gamma", "expected a list");
    for (std::size_t i = 0; i < w.at("gamma").size(); ++i)
      spec.gamma.push_back(number(w.at("gamma")[i], "weights.gamma[" + std::to_string(i) + "]"));
    if (spec.gamma.size() != cfg.divisor.size()) bad("weights.gamma", "needs one entry per cone point");
    if (w.contains("alpha")) spec.holder_alpha = number(w.at("alpha"), "weights.alpha");
    if (w.contains("k")) spec.order_k = integer(w.at("k"), "weights.k");
    if (!(spec.holder_alpha > 0.0 && spec.holder_alpha < 1.0)) bad("weights.alpha", "must lie in (0, 1)");
    if (spec.order_k < 0) bad("weights.k", "must be non-negative");
    cfg.weights = spec;
  }

  bool explicit_normalization = false;
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    require_object(s, "solver");
    reject_unknown(s, "solver",
                   {"newton_tol", "max_newton_iters", "continuation_steps", "max_step_halvings", "damping", "linear_tol",
                    "normalization"});
    SolverConfig& c = cfg.solver;
    if (s.contains("newton_tol")) c.newton_tol = number(s.at("newton_tol"), "solver.newton_tol");
    if (s.contains("max_newton_iters")) c.max_newton_iters = integer(s.at("max_newton_iters"), "solver.max_newton_iters");
    if (s.contains("continuation_steps")) c.continuation_steps = integer(s.at("continuation_steps"), "solver.continuation_steps");
    if (s.contains("max_step_halvings")) c.max_step_halvings = integer(s.at("max_step_halvings"), "solver.max_step_halvings");
    if (s.contains("damping")) c.damping = integer(s.at("damping"), "solver.damping");
    if (s.contains("linear_tol")) c.linear_tol = number(s.at("linear_tol"), "solver.linear_tol");
    if (s.contains("normalization")) {
      const json& n = s.at("normalization");
      if (n == "pinned")
        c.normalization = Normalization::Pinned;
      else if (n == "natural")
        c.normalization = Normalization::Natural;
      else
        bad("solver.normalization", "expected \"pinned\" or \"natural\"");
      explicit_normalization = true;
    }
    c.validate();
  }
  // manufactured factors vanish at the cones; other targets need the cone values free
  if (!explicit_normalization)
    cfg.solver.normalization = cfg.target.type == "manufactured" ? Normalization::Pinned : Normalization::Natural;

  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    require_object(o, "outputs");
    reject_unknown(o, "outputs", {"directory", "fields"});
    if (o.contains("directory") && !o.at("directory").is_null()) {
      if (!o.at("directory").is_string()) bad("outputs.directory", "expected a string");
      cfg.out_dir = base_dir / o.at("directory").get<std::string>();
    }
    if (o.contains("fields")) {
      if (!o.at("fields").is_boolean()) bad("outputs.fields", "expected true or false");
      cfg.dump_fields = o.at("fields").get<bool>();
    }
  }
  return cfg;
}

JobConfig load_job(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return parse_job(j, file.parent_path());
}

json to_json(const JobConfig& cfg) {
  json divisor = json::array();
  for (const auto& p : cfg.divisor.points()) divisor.push_back({{"position", vec_json(p.position())}, {"beta", p.beta()}});
  json target = {{"type", cfg.target.type}};
  if (cfg.target.type == "constant") target["value"] = cfg.target.value;
  if (cfg.target.type == "expression" || cfg.target.type == "manufactured") target["coefficients"] = cfg.target.coefficients;
  if (cfg.target.type == "manufactured") target["scale"] = cfg.target.scale;
  if (cfg.target.type == "grid") target["path"] = cfg.target.path.string();
  json out = {
      {"divisor", divisor},
      {"target", target},
      {"mesh",
       {{"base_level", cfg.mesh.base_level},
        {"grading_levels", cfg.mesh.grading_levels},
        {"grading_radius", cfg.mesh.grading_radius}}},
      {"background",
       {{"cutoff_radius", cfg.cutoff_radius},
        {"radius_model", cfg.radius_model == RadiusModel::Global ? "global" : "local_blend"}}},
      {"solver",
       {{"newton_tol", cfg.solver.newton_tol},
        {"max_newton_iters", cfg.solver.max_newton_iters},
        {"continuation_steps", cfg.solver.continuation_steps},
        {"max_step_halvings", cfg.solver.max_step_halvings},
        {"damping", cfg.solver.damping},
        {"linear_tol", cfg.solver.linear_tol},
        {"normalization", cfg.solver.normalization == Normalization::Pinned ? "pinned" : "natural"}}},
      {"outputs",
       {{"directory", cfg.out_dir ? json(cfg.out_dir->string()) : json(nullptr)}, {"fields", cfg.dump_fields}}},
  };
  if (cfg.weights)
    out["weights"] = {{"gamma", cfg.weights->gamma}, {"alpha", cfg.weights->holder_alpha}, {"k", cfg.weights->order_k}};
  else
    out["weights"] = nullptr;
  return out;
}

GridFunction manufactured_factor(const Divisor& divisor, const SphereMesh& mesh, double scale,
                                 const std::array<double, 4>& c) {
  GridFunction v = GridFunction::sample(mesh, [&](const Vec3& x) {
    double f = scale * (c[0] + c[1] * x.x() + c[2] * x.y() + c[3] * x.z());
    for (const auto& p : divisor.points()) f *= 0.5 * (1.0 - x.dot(p.position()));
    return f;
  });
  for (int id : mesh.cone_vertex_ids()) v[std::size_t(id)] = 0.0;
  return v;
}

CommandResult cmd_check(const JobConfig& cfg) {
  const ScopeReport scope = solver_scope_check(cfg.divisor);
  json items = json::array();
  for (const auto& it : scope.items) items.push_back({{"name", it.name}, {"pass", it.pass}, {"detail", it.detail}});
  json report = {{"command", "check"}, {"config", to_json(cfg)}, {"euler_characteristic", scope.euler_characteristic}};
  report["scope"] = {{"pass", scope.pass}, {"items", items}};
  bool pass = scope.pass;
  if (cfg.divisor.size() >= 3) {
    const auto t = troyanov_check(cfg.divisor);
    report["troyanov"] = {{"pass", t.pass}, {"margins", t.margins}};
    pass = pass && t.pass;
  } else {
    report["troyanov"] = {{"pass", false}, {"detail", "requires n >= 3"}};
    pass = false;
  }
  if (cfg.weights) {
    const auto w = weight_admissible(*cfg.weights, cfg.divisor);
    report["weights"] = {{"pass", w.pass},
                         {"positive", w.positive},
                         {"nearest_forbidden", w.nearest_forbidden},
                         {"distance", w.distance}};
    pass = pass && w.pass;
  }
  report["status"] = pass ? "pass" : "fail";
  return {pass ? 0 : 1, report};
}

CommandResult cmd_solve(const JobConfig& cfg) {
  json report = {{"command", "solve"}, {"config", to_json(cfg)}};
  const Built b = build(cfg);
  report["mesh"] = mesh_json(*b.mesh);
  GridFunction manufactured;
  const GridFunction k = target_field(cfg, b.bg, &manufactured);
  auto [u, r] = continuation_solve(b.bg, k, cfg.solver);
  report["solver"] = solver_report_json(r);
  const bool pinned = cfg.solver.normalization == Normalization::Pinned;
  report["gauss_bonnet"] = gauss_bonnet_json(pinned ? gauss_bonnet(b.bg, u) : metric_gauss_bonnet(b.bg, u));
  if (cfg.target.type == "manufactured")
    report["manufactured_error"] = (u.values() - manufactured.values()).cwiseAbs().maxCoeff();
  report["u_sup"] = u.values().cwiseAbs().maxCoeff();
  if (cfg.weights) {
    const WeightedNorm wn = weighted_norm(b.bg, u, *cfg.weights);
    report["weighted_norm"] = {{"c0", wn.c0}, {"c1", wn.c1}, {"seminorm", wn.seminorm}, {"total", wn.total}};
  }
  if (cfg.out_dir && cfg.dump_fields) {
    fs::create_directories(*cfg.out_dir);
    const GridFunction achieved = pinned ? curvature_map(b.bg, u) : metric_curvature(b.bg, u);
    const std::pair<const char*, const GridFunction*> fields[] = {
        {"u.csv", &u}, {"K_achieved.csv", &achieved}, {"rho.csv", &b.bg.rho()}, {"K_beta.csv", &b.bg.k_beta()}};
    json files = json::array();
    for (const auto& [name, f] : fields) {
      write_text(*cfg.out_dir / name, [&](std::ostream& os) { write_csv(*b.mesh, *f, os); });
      files.push_back(name);
    }
    write_text(*cfg.out_dir / "mesh.off", [&](std::ostream& os) { write_off(*b.mesh, os); });
    files.push_back("mesh.off");
    report["files"] = files;
  }
  report["status"] = r.converged ? "converged" : "not_converged";
  return {r.converged ? 0 : 1, report};
}

CommandResult cmd_spectrum(const JobConfig& cfg, int count) {
  if (count < 1) throw ConfigError("--count must be at least 1");
  const Built b = build(cfg);
  const SpectralResult s = spectrum(b.bg, count);
  json report = {{"command", "spectrum"}, {"config", to_json(cfg)}, {"mesh", mesh_json(*b.mesh)},
                 {"eigenvalues", s.eigenvalues}, {"weighted", s.weighted}};
  if (count >= 2) report["lambda_1"] = s.eigenvalues[1];
  report["status"] = "ok";
  return {0, report};
}

CommandResult cmd_symmetries(const JobConfig& cfg) {
  const auto syms = enumerate_conformal_symmetries(cfg.divisor);
  json maps = json::array();
  for (const auto& s : syms) {
    auto cj = [](Complex z) { return json::array({z.real(), z.imag()}); };
    maps.push_back({{"permutation", s.permutation},
                    {"a", cj(s.map.a)},
                    {"b", cj(s.map.b)},
                    {"c", cj(s.map.c)},
                    {"d", cj(s.map.d)}});
  }
  json report = {{"command", "symmetries"}, {"config", to_json(cfg)}, {"group_order", syms.size()}, {"maps", maps}};
  report["status"] = "ok";
  return {0, report};
}

CommandResult cmd_gauss_bonnet(const JobConfig& cfg) {
  const Built b = build(cfg);
  json report = {{"command", "gauss-bonnet"}, {"config", to_json(cfg)}, {"mesh", mesh_json(*b.mesh)}};
  report["gauss_bonnet"] = gauss_bonnet_json(gauss_bonnet(b.bg, GridFunction(*b.mesh, 0.0)));
  report["status"] = "ok";
  return {0, report};
}

CommandResult cmd_example(const std::string& name, int k, const std::vector<double>& angles_deg, const JobConfig& base) {
  JobConfig cfg = base;
  json report = {{"command", "example"}, {"name", name}};
  if (name == "football") {
    if (k < 1) throw ConfigError("--k must be at least 1");
    cfg.divisor = football_divisor(k);
    report["k"] = k;
  } else if (name == "triangle") {
    if (angles_deg.size() != 3) throw ConfigError("--angles needs three values");
    const double s = std::numbers::pi / 180.0;
    try {
      cfg.divisor = triangle_double_divisor(angles_deg[0] * s, angles_deg[1] * s, angles_deg[2] * s);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("--angles: ") + e.what());
    }
    report["angles_deg"] = angles_deg;
  } else {
    throw ConfigError("unknown example '" + name + "' (expected football or triangle)");
  }
  const double radius = default_radius(cfg.divisor);
  cfg.mesh.grading_radius = std::min(cfg.mesh.grading_radius > 0 ? cfg.mesh.grading_radius : radius, radius);
  cfg.cutoff_radius = std::min(cfg.cutoff_radius > 0 ? cfg.cutoff_radius : radius, radius);
  report["config"] = to_json(cfg);
  report["euler_characteristic"] = euler_characteristic(cfg.divisor);

  const Built b = build(cfg);
  report["mesh"] = mesh_json(*b.mesh);
  bool ok = true;
  if (name == "football") {
    const GridFunction u = exact_football(k, *b.mesh);
    const GaussBonnetReport gb = metric_gauss_bonnet(b.bg, u);
    double area = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v)
      area += std::exp(2.0 * u[v]) * b.bg.mass_weight()[v] * b.mesh->node_areas()[Eigen::Index(v)];
    report["area"] = area;
    report["area_expected"] = 4.0 * std::numbers::pi / k;
    report["gauss_bonnet"] = gauss_bonnet_json(gb);
    const SpectralResult s = spectrum(b.bg, 5, &u);
    report["eigenvalues"] = s.eigenvalues;
    report["lambda_1"] = s.eigenvalues[1];
    report["conformal_killing_residual"] = conformal_killing_residual(b.bg, s.eigenfunctions[1], &u);
  } else {
    const ScopeReport scope = solver_scope_check(cfg.divisor);
    report["troyanov_margins"] = troyanov_check(cfg.divisor).margins;
    report["scope_pass"] = scope.pass;
    report["group_order"] = enumerate_conformal_symmetries(cfg.divisor).size();
    report["kernel_gap_background"] = kernel_gap(b.bg, GridFunction(*b.mesh, 0.0));
    if (scope.pass) {
      SolverConfig sc = cfg.solver;
      sc.normalization = Normalization::Natural;
      auto [u, r] = continuation_solve(b.bg, GridFunction(*b.mesh, 1.0), sc);
      report["solver"] = solver_report_json(r);
      const SpectralResult s = spectrum(b.bg, 5, &u);
      report["eigenvalues"] = s.eigenvalues;
      report["lambda_1"] = s.eigenvalues[1];
      ok = r.converged;
    } else {
      json failed = json::array();
      for (const auto& it : scope.items)
        if (!it.pass) failed.push_back(it.name);
      report["solve_skipped"] = failed;
    }
  }
  report["status"] = ok ? "ok" : "not_converged";
  return {ok ? 0 : 1, report};
}

}  // namespace conesolve
