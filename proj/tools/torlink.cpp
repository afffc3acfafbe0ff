// torlink command line: run scenario configs, list built-ins, compute mesh degrees.

#include "torlink/config.hpp"
#include "torlink/degree.hpp"
#include "torlink/error.hpp"
#include "torlink/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

torlink::ScenarioConfig load(const std::string& what) {
  if (std::filesystem::is_regular_file(what)) return torlink::parse_config(what);
  if (const auto* b = torlink::find_builtin(what)) return torlink::parse_config_text(b->text);
  throw torlink::Error(torlink::ErrorCode::Io, "no config file or built-in scenario named '" + what + "'");
}

std::optional<std::uint64_t> seed_from_env() {
  const char* env = std::getenv("TORLINK_SEED");
  if (!env || !*env) return std::nullopt;
  std::uint64_t v = 0;
  const std::string_view s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw torlink::ValidationError({"TORLINK_SEED must be a non-negative integer"});
  }
  return v;
}

int cmd_run(const std::string& config_arg, const std::string& out, int jobs, std::optional<double> tol) {
  torlink::ScenarioConfig cfg = load(config_arg);
  torlink::RunOptions opts;
  opts.out_dir = out;
  opts.jobs = jobs;
  opts.tol = tol;
  opts.seed = seed_from_env();
  const torlink::RunReport report = torlink::run(cfg, opts);
  for (const auto& e : report.experiments) {
    const char* tag = e.passed ? "PASS" : (e.asserted ? "FAIL" : "note");
    std::cout << std::left << std::setw(5) << tag << ' ' << std::setw(24) << e.label << ' ' << std::setw(22) << e.op
              << std::right << std::fixed << std::setprecision(3) << e.wall_time_s << " s";
    if (!e.error.empty()) std::cout << "  error: " << e.error;
    std::cout << '\n';
  }
  for (const auto& p : report.written) std::cout << "wrote " << p.string() << '\n';
  std::cout << (report.all_passed ? "all asserted experiments passed" : "some asserted experiments failed") << '\n';
  return report.all_passed ? 0 : kExitFail;
}

int cmd_list() {
  for (const auto& b : torlink::builtin_scenarios()) {
    std::string description;
    try {
      description = torlink::parse_config_text(b.text).description;
    } catch (const std::exception& e) {
      description = std::string("(invalid: ") + e.what() + ")";
    }
    std::cout << std::left << std::setw(22) << b.name << ' ' << description << '\n';
  }
  return 0;
}

int cmd_degree(const std::string& mesh_path, int jobs) {
  std::ifstream in(mesh_path);
  if (!in) throw torlink::Error(torlink::ErrorCode::Io, "cannot open mesh '" + mesh_path + "'");
  const torlink::MeshMap mesh = torlink::read_mesh(in);
  torlink::DegreeOptions opts;
  opts.jobs = jobs;
  const torlink::DegreeReport d = torlink::sphere_degree(mesh, nullptr, opts);
  nlohmann::ordered_json j = {{"surface", mesh.kind == torlink::SurfaceKind::Sphere ? "sphere" : "torus"},
                              {"degree", d.degree},
                              {"raw", d.raw},
                              {"residual", d.residual},
                              {"triangles", d.triangles},
                              {"max_image_diameter", d.max_image_diameter}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_mesh(int d_plus, int d_minus, int grid, int level, const std::string& kind) {
  torlink::MeshMap mesh;
  if (kind == "model") {
    mesh = torlink::torus_grid(grid, grid);
    torlink::sample(mesh, torlink::model_surface_map(d_plus, d_minus));
  } else {
    mesh = torlink::icosphere(level);
    const double sign = kind == "antipodal" ? -1.0 : 1.0;
    torlink::sample(mesh, [sign](const torlink::Vec3& u) { return torlink::Vec3(sign * u); });
  }
  torlink::write_mesh(std::cout, mesh);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"torlink: numerical checks for commuting vector fields on the solid torus"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(torlink::kToolkitVersion));

  std::string config_arg, out_dir = ".", mesh_path, kind = "model";
  int jobs = 0, degree_jobs = 1, d_plus = 1, d_minus = 0, grid = 64, level = 3;
  std::optional<double> tol;

  auto* run = app.add_subcommand("run", "run the experiments of a config file or built-in scenario");
  run->add_option("config", config_arg, "config path or built-in scenario name")->required();
  run->add_option("--out", out_dir, "output directory for the JSON report and CSV files");
  run->add_option("--jobs", jobs, "worker threads (default: config value)")->check(CLI::Range(1, 1024));
  run->add_option("--tol", tol, "integration and crossing tolerance override")->check(CLI::PositiveNumber);

  auto* list = app.add_subcommand("list-scenarios", "list the built-in scenarios");

  auto* degree = app.add_subcommand("degree", "Brouwer degree of a mesh map to the sphere");
  degree->add_option("--mesh", mesh_path, "mesh file")->required();
  degree->add_option("--jobs", degree_jobs, "worker threads")->check(CLI::Range(1, 1024));

  auto* mesh = app.add_subcommand("mesh", "write a sample mesh map (model map, identity or antipodal sphere)");
  mesh->add_option("--kind", kind, "model, identity or antipodal")
      ->check(CLI::IsMember({"model", "identity", "antipodal"}));
  mesh->add_option("--d-plus", d_plus, "winding on the upper half of the torus");
  mesh->add_option("--d-minus", d_minus, "winding on the lower half of the torus");
  mesh->add_option("--grid", grid, "torus grid size")->check(CLI::Range(2, 4096));
  mesh->add_option("--level", level, "icosphere subdivision level")->check(CLI::Range(0, 8));

  auto* show = app.add_subcommand("show-scenario", "print the config text of a built-in scenario");
  std::string show_name;
  show->add_option("name", show_name, "scenario name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_arg, out_dir, jobs, tol);
    if (*list) return cmd_list();
    if (*degree) return cmd_degree(mesh_path, degree_jobs);
    if (*mesh) return cmd_mesh(d_plus, d_minus, grid, level, kind);
    if (*show) {
      const auto* b = torlink::find_builtin(show_name);
      if (!b) throw torlink::Error(torlink::ErrorCode::Io, "no built-in scenario named '" + show_name + "'");
      std::cout << b->text;
      return 0;
    }
  } catch (const torlink::ParseError& e) {
    std::cerr << "torlink: " << e.what() << '\n';
    return kExitUsage;
  } catch (const torlink::ValidationError& e) {
    std::cerr << "torlink: invalid config:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "torlink: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitUsage;
}
