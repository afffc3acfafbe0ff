// One PASS/FAIL line per acceptance criterion.  Usage: acceptance [path/to/torlink]
// The determinism check is skipped (reported as FAIL) when no binary is given.

#include "torlink/config.hpp"
#include "torlink/degree.hpp"
#include "torlink/index.hpp"
#include "torlink/runner.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

namespace tl = torlink;
using json = nlohmann::ordered_json;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

int failures = 0;

void criterion(const std::string& id, const std::string& title, double time_limit_s,
               const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.require(false, std::string("exception: ") + e.what());
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit_s > 0) {
    std::ostringstream s;
    s << "took " << dt << " s, limit " << time_limit_s << " s";
    out.require(dt < time_limit_s, s.str());
  }
  if (!out.ok) ++failures;
  std::printf("%s %-5s %-44s %8.3f s%s%s\n", out.ok ? "PASS" : "FAIL", id.c_str(), title.c_str(), dt,
              out.detail.empty() ? "" : "  ", out.detail.c_str());
  std::fflush(stdout);
}

tl::ScenarioConfig scenario(const std::string& name) { return tl::parse_config_text(tl::find_builtin(name)->text); }

// Runs the first experiment of a built-in scenario with the given op.
json experiment(const std::string& name, const std::string& op, Outcome& out) {
  const tl::ScenarioConfig c = scenario(name);
  for (std::size_t i = 0; i < c.experiments.size(); ++i) {
    if (c.experiments[i].op != op) continue;
    const tl::ExperimentResult r = tl::run_experiment(c, c.experiments[i], tl::experiment_seed(c.seed, i), 4);
    out.require(r.error.empty(), name + "/" + op + " error: " + r.error);
    return r.results;
  }
  out.require(false, name + " has no " + op + " experiment");
  return json::object();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

json strip_times(json j) {
  if (j.is_object()) {
    j.erase("wall_time_s");
    for (auto& [k, v] : j.items()) v = strip_times(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_times(v);
  }
  return j;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  criterion("AC1", "sphere degree of identity and antipode", 0, [](Outcome& o) {
    for (int sign : {1, -1}) {
      const auto t0 = std::chrono::steady_clock::now();
      tl::MeshMap m = tl::icosphere(3);
      const tl::SurfaceMap f = [sign](const tl::Vec3& u) { return tl::Vec3(sign * u); };
      tl::sample(m, f);
      const tl::DegreeReport d = tl::sphere_degree(m, &f);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      o.require(m.triangles.size() >= 1280, "mesh too coarse");
      o.require(d.degree == sign, "degree " + std::to_string(d.degree));
      o.require(d.residual < 0.01, "residual " + fmt(d.residual));
      o.require(dt < 1.0, "runtime " + fmt(dt));
    }
  });

  criterion("AC2", "model map degrees for 25 winding pairs", 30, [](Outcome& o) {
    for (int dp = -2; dp <= 2; ++dp) {
      for (int dm = -2; dm <= 2; ++dm) {
        const std::string tag = "(" + std::to_string(dp) + "," + std::to_string(dm) + ")";
        tl::MeshMap m = tl::torus_grid(64, 64);
        const tl::SurfaceMap f = tl::model_surface_map(dp, dm);
        tl::sample(m, f);
        const tl::DegreeReport d = tl::sphere_degree(m, &f);
        o.require(std::abs(d.degree) == std::abs(dp - dm), tag + " degree " + std::to_string(d.degree));
        for (auto [s, expect] : {std::pair{0.25, dp}, std::pair{0.75, dm}}) {
          const tl::PlaneMap proj = [&, s = s](const tl::ChartPoint& q) {
            return tl::meridian_project(tl::model_map(dp, dm, s, q.theta()));
          };
          const tl::CircleDegree w = tl::circle_degree(proj, tl::PathSample::loop(0, 0, 64));
          o.require(w.degree == expect, tag + " winding at s=" + fmt(s));
        }
      }
    }
  });

  criterion("AC3", "indices of hyperbolic linear zeros", 5, [](Outcome& o) {
    const json r = experiment("model-map-suite", "hyperbolic_indices", o);
    const int expected[] = {1, -1, 1, -1};
    o.require(r.contains("fields") && r["fields"].size() == 4, "missing rows");
    if (!o.ok) return;
    for (int k = 0; k < 4; ++k) {
      const json& row = r["fields"][k];
      o.require(row["stable_dimension"] == k && row["index"] == expected[k], "dim " + std::to_string(k));
      o.require(row["residual"].get<double>() < 0.01, "residual at dim " + std::to_string(k));
    }
  });

  criterion("AC4", "index constant along X - sY", 30, [](Outcome& o) {
    const json r = experiment("split-winding", "index_region", o);
    o.require(r.value("constant", false), "index varies");
    o.require(r.contains("homotopy") && r["homotopy"].size() >= 5, "fewer than 5 homotopy values");
  });

  criterion("AC5", "commutator and tangent-flow invariance", 60, [](Outcome& o) {
    for (const char* name : {"rigid-rotation", "tilted-rotation"}) {
      const json c = experiment(name, "commutator", o);
      o.require(c.value("grid", 0) >= 20, std::string(name) + " grid below 20");
      o.require(c.value("max_residual", 1.0) < 1e-6, std::string(name) + " commutator " + fmt(c.value("max_residual", 1.0)));
      const json t = experiment(name, "tangent_flow", o);
      o.require(t.value("samples", 0) >= 50, std::string(name) + " fewer than 50 samples");
      o.require(t.value("max_residual", 1.0) < 1e-6, std::string(name) + " tangent flow " + fmt(t.value("max_residual", 1.0)));
    }
  });

  criterion("AC6", "holonomy invariance of the normal component", 60, [](Outcome& o) {
    for (const char* name : {"rigid-rotation", "tilted-rotation", "annulus-col", "normally-contracting"}) {
      const json r = experiment(name, "holonomy_invariance", o);
      o.require(r.value("samples", 0) >= 50 && r["times"].size() >= 3, std::string(name) + " sample count");
      const double res = r.value("max_relative_residual", 1.0);
      o.require(res < 1e-6, std::string(name) + " residual " + fmt(res));
    }
  });

  criterion("AC7", "derivative of the return time", 120, [](Outcome& o) {
    const tl::ScenarioConfig c = scenario("tilted-rotation");
    for (std::size_t i = 0; i < c.experiments.size(); ++i) {
      const tl::ExperimentSpec& e = c.experiments[i];
      if (e.op != "return_identity") continue;
      const json r = tl::run_experiment(c, e, tl::experiment_seed(c.seed, i), 4).results;
      if (e.text("expect") == "hold") {
        o.require(r.value("accepted", 0) >= 100, "accepted " + std::to_string(r.value("accepted", 0)));
        o.require(r.value("min_side", 0.0) >= 1e-3, "side floor below 1e-3");
        o.require(r.value("relative", false), "residual not relative");
        const double res = r["max_residual"].is_number() ? r["max_residual"].get<double>() : 1.0;
        o.require(res < 1e-5, "relative residual " + fmt(res));
      } else {
        const double res = r["max_residual"].is_number() ? r["max_residual"].get<double>() : 0.0;
        o.require(res > 1e-3, "control residual only " + fmt(res));
      }
    }
  });

  criterion("AC8", "index equals linking difference", 60, [](Outcome& o) {
    const std::pair<const char*, int> cases[] = {{"split-winding", 1}, {"normally-contracting", 0}, {"model-map-suite", 3}};
    for (auto [name, expect] : cases) {
      const json r = experiment(name, "verify_link_index", o);
      o.require(r.value("identity_holds", false), std::string(name) + " identity fails");
      o.require(r.value("lhs_abs_index", -1) == expect, std::string(name) + " index " + std::to_string(r.value("lhs_abs_index", -1)));
    }
  });

  criterion("AC9", "normally contracting spectrum and linking", 30, [](Outcome& o) {
    const json s = experiment("normally-contracting", "fixed_point_spectrum", o);
    o.require(s.contains("points") && !s["points"].empty(), "no points");
    if (!o.ok) return;
    for (const json& row : s["points"]) {
      o.require(row["class"] == "partially-hyperbolic", "class " + row["class"].get<std::string>());
      o.require(row["multiplier_residual"].get<double>() < 1e-5, "multiplier residual " + fmt(row["multiplier_residual"]));
    }
    const json l = experiment("normally-contracting", "linking_numbers", o);
    o.require(l.value("ell_plus", -1) == 0 && l.value("ell_minus", -1) == 0, "linking numbers not zero");
  });

  criterion("AC10", "stable limits of return iterates", 60, [](Outcome& o) {
    const json r = experiment("normally-contracting", "iterate_return", o);
    o.require(r.contains("seeds") && r["seeds"].size() >= 20, "fewer than 20 seeds");
    if (!o.ok) return;
    for (const json& row : r["seeds"]) {
      o.require(row["converged"] == true, "seed did not converge");
      if (!row["converged"].get<bool>()) continue;
      o.require(std::abs(row["nu_limit"].get<double>()) < 1e-6, "nu " + fmt(row["nu_limit"]));
      o.require(row["limit_residual"].get<double>() < 1e-8, "fixed residual " + fmt(row["limit_residual"]));
    }
  });

  criterion("AC11", "reports are reproducible across runs", 0, [&](Outcome& o) {
    o.require(!cli.empty(), "no torlink binary given");
    if (cli.empty()) return;
    const auto root = std::filesystem::temp_directory_path() / "torlink_acceptance_determinism";
    std::filesystem::remove_all(root);
    for (const auto& b : tl::builtin_scenarios()) {
      const std::string name(b.name);
      std::string reports[2];
      for (int k = 0; k < 2; ++k) {
        const auto dir = root / (name + "_" + std::to_string(k));
        std::filesystem::create_directories(dir);
        const std::string cmd = "\"" + cli + "\" run " + name + " --out \"" + dir.string() + "\" > /dev/null";
        const int rc = std::system(cmd.c_str());
        o.require(rc == 0, name + " run exited with " + std::to_string(rc));
        const auto path = dir / scenario(name).report_file;
        o.require(std::filesystem::exists(path), name + " report missing");
        if (std::filesystem::exists(path)) reports[k] = strip_times(json::parse(slurp(path))).dump();
      }
      o.require(!reports[0].empty() && reports[0] == reports[1], name + " reports differ");
    }
    std::filesystem::remove_all(root);
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
