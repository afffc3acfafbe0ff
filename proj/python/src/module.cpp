#include "torlink/config.hpp"
#include "torlink/degree.hpp"
#include "torlink/diagnostics.hpp"
#include "torlink/dynamics.hpp"
#include "torlink/error.hpp"
#include "torlink/index.hpp"
#include "torlink/runner.hpp"
#include "torlink/section.hpp"

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>

namespace py = pybind11;
namespace tl = torlink;

namespace {

using Triple = std::tuple<double, double, double>;

Triple triple(const tl::Vec3& v) { return {v.x(), v.y(), v.z()}; }
Triple triple(const tl::ChartPoint& p) { return {p.x(), p.y(), p.theta()}; }

py::list rows(const tl::Mat2& m) {
  py::list out;
  for (int i = 0; i < 2; ++i) out.append(py::make_tuple(m(i, 0), m(i, 1)));
  return out;
}

tl::ScenarioConfig load(const std::string& what) {
  if (std::filesystem::is_regular_file(what)) return tl::parse_config(what);
  if (const auto* b = tl::find_builtin(what)) return tl::parse_config_text(b->text);
  throw tl::Error(tl::ErrorCode::Io, "no config file or built-in scenario named '" + what + "'");
}

tl::FieldHandle make_field(const std::string& text, const tl::Expression::Constants& k, double fd_step) {
  const auto parts = tl::parse_field_triple(text, k);
  return std::make_shared<const tl::FieldSpec>(tl::expression_field(parts[0], parts[1], parts[2], fd_step));
}

// A field pair plus its frame, built once.
class PyPair {
 public:
  explicit PyPair(tl::FieldPair pair) : pair_(std::move(pair)), frame_(tl::build_frame(pair_)) {}

  static PyPair from_expressions(const std::string& x, const std::string& y, double tilt, double radius, bool col,
                                 const std::map<std::string, double>& params) {
    const tl::Expression::Constants k(params.begin(), params.end());
    tl::FieldPair p;
    p.X = make_field(x, k, p.tol.fd_step);
    p.Y = make_field(y, k, p.tol.fd_step);
    p.domain.disc_radius = radius;
    p.domain.fibration = tl::Fibration::tilted(tilt);
    if (col) p.declared_col = tl::ColAnnulus{};
    return PyPair(std::move(p));
  }

  static PyPair from_scenario(const std::string& name) { return PyPair(load(name).pair()); }

  tl::ChartPoint on_section(double x, double y) const { return tl::on_section(pair_, x, y); }

  Triple commutator(double x, double y, double theta) const {
    return triple(tl::commutator_residual(pair_, tl::ChartPoint(x, y, theta)).vector());
  }

  double collinearity(double x, double y, double theta) const {
    return tl::collinearity_residual(pair_, tl::ChartPoint(x, y, theta));
  }

  py::dict holonomy(double x, double y, double t) const {
    const tl::HolonomyRecord r = tl::holonomy(pair_, frame_, on_section(x, y), t);
    py::dict d;
    d["start"] = triple(r.start);
    d["end"] = triple(r.end);
    d["tau"] = r.tau;
    d["dP"] = rows(r.dP);
    d["dtau"] = py::make_tuple(r.dtau(0), r.dtau(1));
    return d;
  }

  py::dict return_identity(double x, double y) const {
    const tl::ReturnIdentity r = tl::return_identity_residual(pair_, frame_, on_section(x, y));
    py::dict d;
    d["lhs"] = r.lhs;
    d["rhs"] = r.rhs;
    d["residual"] = r.residual;
    return d;
  }

  std::pair<int, int> linking_numbers(double y_offset, double x0, int samples) const {
    const tl::LinkingReport r = tl::linking_numbers(pair_, frame_, y_offset, x0, samples);
    return {r.ell_plus, r.ell_minus};
  }

  int index_region(double radius, int grid, int jobs) const {
    tl::EssentialTorus torus;
    torus.radius = radius;
    torus.n_around = torus.n_along = grid;
    tl::DegreeOptions o;
    o.jobs = jobs;
    py::gil_scoped_release release;
    return tl::index_region(*pair_.X, frame_, torus, o).value;
  }

  py::dict fixed_point_spectrum(double x, double y, double fixed_tol) const {
    const tl::Spectrum s = tl::fixed_point_spectrum(pair_, frame_, on_section(x, y), fixed_tol);
    py::dict d;
    d["lambda1"] = s.lambda1;
    d["lambda2"] = s.lambda2;
    d["class"] = std::string(tl::to_string(s.classification));
    d["dP"] = rows(s.dP);
    d["tolerance"] = s.tolerance;
    return d;
  }

  py::dict iterate_return(double x, double y, int n_max, double tol) const {
    const tl::OrbitRecord o = tl::iterate_return(pair_, frame_, on_section(x, y), n_max, tol);
    py::list pts;
    for (const auto& p : o.points) pts.append(triple(p));
    py::dict d;
    d["points"] = pts;
    d["mu"] = o.mu;
    d["nu"] = o.nu;
    d["converged"] = o.converged;
    d["limit"] = o.limit ? py::cast(triple(*o.limit)) : py::none();
    d["limit_residual"] = o.limit_residual;
    return d;
  }

  double segment_sweep(double x, double y, int samples) const {
    return tl::segment_sweep(pair_, frame_, on_section(x, y), samples);
  }

  double cone_ratio(double x, double y) const { return tl::cone_ratio(pair_, frame_, on_section(x, y)); }

 private:
  tl::FieldPair pair_;
  tl::Frame frame_;
};

py::dict degree_dict(const tl::DegreeReport& d) {
  py::dict out;
  out["degree"] = d.degree;
  out["raw"] = d.raw;
  out["residual"] = d.residual;
  out["triangles"] = d.triangles;
  out["max_image_diameter"] = d.max_image_diameter;
  return out;
}

}  // namespace

PYBIND11_MODULE(_torlink, m) {
  m.doc() = "Bindings of the torlink C++ core";
  m.attr("__version__") = std::string(tl::kToolkitVersion);

  auto base = py::register_exception<tl::Error>(m, "TorlinkError");
  py::register_exception<tl::ParseError>(m, "ParseError", base.ptr());
  static py::exception<tl::ValidationError> validation(m, "ValidationError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const tl::ValidationError& e) {
      std::string msg = e.what();
      for (const auto& v : e.violations()) msg += "\n  " + v;
      py::set_error(validation, msg.c_str());
    }
  });

  m.def("list_scenarios", [] {
    std::vector<std::string> names;
    for (const auto& b : tl::builtin_scenarios()) names.emplace_back(b.name);
    return names;
  });
  m.def("scenario_text", [](const std::string& name) {
    const auto* b = tl::find_builtin(name);
    if (!b) throw tl::Error(tl::ErrorCode::Io, "no built-in scenario named '" + name + "'");
    return std::string(b->text);
  });
  m.def("_echo", [](const std::string& what) { return load(what).echo().dump(); });
  m.def(
      "_run",
      [](const std::string& what, int jobs, std::optional<std::uint64_t> seed, std::optional<double> tol,
         std::optional<std::string> out_dir) {
        const tl::ScenarioConfig cfg = load(what);
        tl::RunOptions o;
        o.jobs = jobs;
        o.seed = seed;
        o.tol = tol;
        o.write_files = out_dir.has_value();
        if (out_dir) o.out_dir = *out_dir;
        py::gil_scoped_release release;
        return tl::run(cfg, o).json.dump();
      },
      py::arg("config"), py::arg("jobs") = 0, py::arg("seed") = py::none(), py::arg("tol") = py::none(),
      py::arg("out_dir") = py::none());

  m.def(
      "model_map_degree",
      [](int d_plus, int d_minus, int grid, int jobs) {
        tl::MeshMap mesh = tl::torus_grid(grid, grid);
        const tl::SurfaceMap f = tl::model_surface_map(d_plus, d_minus);
        tl::sample(mesh, f, jobs);
        tl::DegreeOptions o;
        o.jobs = jobs;
        return degree_dict(tl::sphere_degree(mesh, &f, o));
      },
      py::arg("d_plus"), py::arg("d_minus"), py::arg("grid") = 64, py::arg("jobs") = 1,
      "Degree of the model torus map with windings d_plus and d_minus.");

  m.def(
      "sphere_degree",
      [](const std::vector<Triple>& vertices, const std::vector<std::array<int, 3>>& triangles,
         const std::vector<Triple>& values, const std::string& surface, int jobs) {
        tl::MeshMap mesh;
        if (surface != "sphere" && surface != "torus") {
          throw tl::Error(tl::ErrorCode::PreconditionFailed, "surface must be 'sphere' or 'torus'");
        }
        mesh.kind = surface == "sphere" ? tl::SurfaceKind::Sphere : tl::SurfaceKind::Torus;
        for (const auto& [a, b, c] : vertices) mesh.vertices.emplace_back(a, b, c);
        for (const auto& [a, b, c] : values) mesh.values.push_back(tl::Vec3(a, b, c).normalized());
        mesh.triangles = triangles;
        const int n = static_cast<int>(mesh.vertices.size());
        if (mesh.values.size() != mesh.vertices.size()) {
          throw tl::Error(tl::ErrorCode::PreconditionFailed, "one value per vertex is required");
        }
        for (const auto& t : triangles) {
          for (int i : t) {
            if (i < 0 || i >= n) throw tl::Error(tl::ErrorCode::PreconditionFailed, "triangle index out of range");
          }
        }
        tl::DegreeOptions o;
        o.jobs = jobs;
        return degree_dict(tl::sphere_degree(mesh, nullptr, o));
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("values"), py::arg("surface") = "sphere",
      py::arg("jobs") = 1, "Brouwer degree of a triangulated map to the unit sphere.");

  py::class_<PyPair>(m, "FieldPair")
      .def(py::init(&PyPair::from_expressions), py::arg("x"), py::arg("y"), py::arg("tilt") = 0.0,
           py::arg("radius") = 1.0, py::arg("col") = false, py::arg("params") = std::map<std::string, double>{},
           "Fields given as 'fx; fy; ftheta' expressions in x, y, theta.")
      .def_static("from_scenario", &PyPair::from_scenario, py::arg("name"))
      .def("commutator", &PyPair::commutator, py::arg("x"), py::arg("y"), py::arg("theta"))
      .def("collinearity", &PyPair::collinearity, py::arg("x"), py::arg("y"), py::arg("theta"))
      .def("holonomy", &PyPair::holonomy, py::arg("x"), py::arg("y"), py::arg("t") = 1.0)
      .def("return_identity", &PyPair::return_identity, py::arg("x"), py::arg("y"))
      .def("linking_numbers", &PyPair::linking_numbers, py::arg("y_offset"), py::arg("x0") = 0.0,
           py::arg("samples") = 128)
      .def("index_region", &PyPair::index_region, py::arg("radius") = 0.5, py::arg("grid") = 96, py::arg("jobs") = 1)
      .def("fixed_point_spectrum", &PyPair::fixed_point_spectrum, py::arg("x"), py::arg("y"),
           py::arg("fixed_tol") = 1e-8)
      .def("iterate_return", &PyPair::iterate_return, py::arg("x"), py::arg("y"), py::arg("n_max") = 500,
           py::arg("tol") = 1e-10)
      .def("segment_sweep", &PyPair::segment_sweep, py::arg("x"), py::arg("y"), py::arg("samples") = 256)
      .def("cone_ratio", &PyPair::cone_ratio, py::arg("x"), py::arg("y"));
}
