#include "torlink/runner.hpp"

#include "torlink/diagnostics.hpp"
#include "torlink/dynamics.hpp"
#include "torlink/error.hpp"
#include "torlink/flow.hpp"
#include "torlink/index.hpp"
#include "torlink/parallel.hpp"
#include "torlink/section.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <system_error>

#if defined(__unix__) || defined(__APPLE__)
#include <unistd.h>
#endif

namespace torlink {

namespace {

using json = nlohmann::ordered_json;
constexpr double kPi = std::numbers::pi;

const BuiltinScenario kBuiltins[] = {
#include "builtin_scenarios.inc"
};

/// Uniform reals from a standard-specified engine, so draws match on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  Vec2 disc(double r) {
    for (;;) {
      const Vec2 v(uniform(-r, r), uniform(-r, r));
      if (v.squaredNorm() <= r * r) return v;
    }
  }

 private:
  std::mt19937_64 engine_;
};

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }
json point(const ChartPoint& p) { return json::array({p.x(), p.y(), p.theta()}); }
json mat(const Mat2& m) { return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})}); }
json cplx(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

struct Context {
  const ScenarioConfig& config;
  const ExperimentSpec& spec;
  FieldPair pair;
  Rng rng;
  int jobs;
  const std::filesystem::path* csv_path;
  json results = json::object();
  bool passed = true;

  Frame frame() const { return build_frame(pair); }
  DegreeOptions degree_options() const {
    DegreeOptions o;
    o.jobs = jobs;
    return o;
  }
  ChartPoint section_point(double x, double y) const { return on_section(pair, x, y, 0.0); }
  ChartPoint random_section_point(double radius_fraction) {
    const Vec2 v = rng.disc(radius_fraction * pair.domain.disc_radius);
    return section_point(v.x(), v.y());
  }
};

struct MaxTracker {
  double value = -1.0;
  std::size_t index = 0;
  void update(double v, std::size_t i) {
    if (v > value || std::isnan(v)) {
      value = v;
      index = i;
    }
  }
};

// ---------------------------------------------------------------------------

void op_commutator(Context& c) {
  const int grid = c.spec.integer("grid");
  const double threshold = c.spec.real("threshold");
  const std::vector<ChartPoint> pts = scan_grid(c.pair.domain, grid);
  std::vector<Vec3> lhs(pts.size()), rhs(pts.size());
  parallel_for(pts.size(), c.jobs, [&](std::size_t i) {
    lhs[i] = jacobian_at(*c.pair.Y, pts[i]) * c.pair.X->value(pts[i]);
    rhs[i] = jacobian_at(*c.pair.X, pts[i]) * c.pair.Y->value(pts[i]);
  });
  MaxTracker worst;
  for (std::size_t i = 0; i < pts.size(); ++i) worst.update((lhs[i] - rhs[i]).norm(), i);
  c.results["grid"] = grid;
  c.results["points"] = pts.size();
  c.results["max_residual"] = worst.value;
  c.results["threshold"] = threshold;
  if (!pts.empty()) {
    c.results["worst"] = {{"point", point(pts[worst.index])}, {"lhs", vec(lhs[worst.index])}, {"rhs", vec(rhs[worst.index])}};
  }
  c.passed = worst.value < threshold;
}

void op_tangent_flow(Context& c) {
  const int n = c.spec.integer("samples");
  const double t_max = c.spec.real("t_max");
  const double radius = c.spec.real("radius");
  const double threshold = c.spec.real("threshold");
  std::vector<ChartPoint> pts;
  std::vector<double> times;
  for (int i = 0; i < n; ++i) {
    const Vec2 v = c.rng.disc(radius * c.pair.domain.disc_radius);
    pts.emplace_back(v.x(), v.y(), c.rng.uniform());
    times.push_back(c.rng.uniform(0.0, t_max));
  }
  const FlowOptions opts = FlowOptions::for_pair(c.pair);
  std::vector<Vec3> lhs(pts.size()), rhs(pts.size());
  parallel_for(pts.size(), c.jobs, [&](std::size_t i) {
    const FlowResult r = variational(*c.pair.Y, pts[i], times[i], opts);
    lhs[i] = *r.dflow * c.pair.X->value(pts[i]);
    rhs[i] = c.pair.X->value(r.endpoint);
  });
  MaxTracker worst;
  json table = json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double res = (lhs[i] - rhs[i]).norm();
    worst.update(res, i);
    table.push_back(json::array({pts[i].x(), pts[i].y(), pts[i].theta(), times[i], res}));
  }
  c.results["samples"] = pts.size();
  c.results["max_residual"] = worst.value;
  c.results["threshold"] = threshold;
  if (!pts.empty()) {
    c.results["worst"] = {{"point", point(pts[worst.index])},
                          {"t", times[worst.index]},
                          {"lhs", vec(lhs[worst.index])},
                          {"rhs", vec(rhs[worst.index])}};
  }
  c.results["table_columns"] = {"x", "y", "theta", "t", "residual"};
  c.results["table"] = table;
  c.passed = worst.value < threshold;
}

void op_holonomy_invariance(Context& c) {
  const int n = c.spec.integer("samples");
  const std::vector<double> times = c.spec.reals("times");
  const double radius = c.spec.real("radius");
  const double threshold = c.spec.real("threshold");
  const Frame frame = c.frame();
  std::vector<ChartPoint> pts;
  for (int i = 0; i < n; ++i) pts.push_back(c.random_section_point(radius));
  const std::size_t m = times.size();
  std::vector<Vec2> lhs(pts.size() * m), rhs(pts.size() * m);
  parallel_for(pts.size() * m, c.jobs, [&](std::size_t k) {
    const ChartPoint& x = pts[k / m];
    const HolonomyRecord rec = holonomy(c.pair, frame, x, times[k % m]);
    lhs[k] = rec.dP * normal_decompose(c.pair, frame, x).normal_coordinates();
    rhs[k] = normal_decompose(c.pair, frame, rec.end).normal_coordinates();
  });
  MaxTracker worst;
  for (std::size_t k = 0; k < lhs.size(); ++k) {
    worst.update((lhs[k] - rhs[k]).norm() / std::max(rhs[k].norm(), 1e-12), k);
  }
  c.results["samples"] = pts.size();
  c.results["times"] = times;
  c.results["max_relative_residual"] = worst.value;
  c.results["threshold"] = threshold;
  if (!lhs.empty()) {
    c.results["worst"] = {{"point", point(pts[worst.index / m])},
                          {"t", times[worst.index % m]},
                          {"lhs", vec(lhs[worst.index])},
                          {"rhs", vec(rhs[worst.index])}};
  }
  c.passed = worst.value < threshold;
}

void op_holonomy_derivative(Context& c) {
  const int n = c.spec.integer("samples");
  const double h = c.spec.real("step");
  const double radius = c.spec.real("radius");
  const double threshold = c.spec.real("threshold");
  const Frame frame = c.frame();
  std::vector<ChartPoint> pts;
  for (int i = 0; i < n; ++i) pts.push_back(c.random_section_point(radius));
  std::vector<double> err_dp(pts.size()), err_dtau(pts.size());
  parallel_for(pts.size(), c.jobs, [&](std::size_t i) {
    const ChartPoint& x = pts[i];
    const double level = c.pair.domain.fibration.level(x);
    const HolonomyRecord rec = holonomy(c.pair, frame, x, 1.0);
    Mat2 fd_dp;
    Eigen::RowVector2d fd_dtau;
    for (int j = 0; j < 2; ++j) {
      const Vec2 d = h * Vec2::Unit(j);
      const ChartPoint xp = c.pair.domain.fibration.point_on_level(x.x() + d.x(), x.y() + d.y(), level);
      const ChartPoint xm = c.pair.domain.fibration.point_on_level(x.x() - d.x(), x.y() - d.y(), level);
      const HolonomyRecord rp = holonomy(c.pair, frame, xp, 1.0);
      const HolonomyRecord rm = holonomy(c.pair, frame, xm, 1.0);
      fd_dp.col(j) = Vec2(rp.end.x() - rm.end.x(), rp.end.y() - rm.end.y()) / (2 * h);
      fd_dtau(j) = (rp.tau - rm.tau) / (2 * h);
    }
    err_dp[i] = (rec.dP - fd_dp).cwiseAbs().maxCoeff();
    err_dtau[i] = (rec.dtau - fd_dtau).cwiseAbs().maxCoeff();
  });
  const double max_dp = pts.empty() ? 0.0 : *std::max_element(err_dp.begin(), err_dp.end());
  const double max_dtau = pts.empty() ? 0.0 : *std::max_element(err_dtau.begin(), err_dtau.end());
  c.results["samples"] = pts.size();
  c.results["step"] = h;
  c.results["max_dp_error"] = max_dp;
  c.results["max_dtau_error"] = max_dtau;
  c.results["threshold"] = threshold;
  c.passed = max_dp < threshold && max_dtau < threshold;
}

void op_return_identity(Context& c) {
  const int n = c.spec.integer("samples");
  const double min_side = c.spec.real("min_side");
  const bool relative = c.spec.boolean("relative");
  const double threshold = c.spec.real("threshold");
  const std::string expect = c.spec.text("expect");
  const double radius = c.spec.real("radius");
  const int max_attempts = c.spec.integer("max_attempts");
  if (expect != "hold" && expect != "fail") throw Error(ErrorCode::ValidationError, "expect must be hold or fail");
  const Expression::Constants constants = c.config.constants();
  if (c.spec.has("x_field")) {
    const auto e = parse_field_triple(c.spec.text("x_field"), constants);
    c.pair.X = std::make_shared<const FieldSpec>(expression_field(e[0], e[1], e[2], c.pair.tol.fd_step));
  }
  if (c.spec.has("y_field")) {
    const auto e = parse_field_triple(c.spec.text("y_field"), constants);
    c.pair.Y = std::make_shared<const FieldSpec>(expression_field(e[0], e[1], e[2], c.pair.tol.fd_step));
  }
  if (c.spec.has("tilt")) c.pair.domain.fibration = Fibration::tilted(c.spec.real("tilt"));
  const Frame frame = c.frame();

  std::vector<ReturnIdentity> accepted;
  std::vector<ChartPoint> accepted_pts;
  int attempts = 0;
  const int batch = 64;
  while (static_cast<int>(accepted.size()) < n && attempts < max_attempts) {
    const int k = std::min(batch, max_attempts - attempts);
    std::vector<ChartPoint> pts;
    for (int i = 0; i < k; ++i) pts.push_back(c.random_section_point(radius));
    std::vector<ReturnIdentity> out(pts.size());
    parallel_for(pts.size(), c.jobs, [&](std::size_t i) { out[i] = return_identity_residual(c.pair, frame, pts[i]); });
    for (std::size_t i = 0; i < pts.size() && static_cast<int>(accepted.size()) < n; ++i) {
      ++attempts;
      if (std::min(std::abs(out[i].lhs), std::abs(out[i].rhs)) >= min_side) {
        accepted.push_back(out[i]);
        accepted_pts.push_back(pts[i]);
      }
    }
  }
  MaxTracker worst;
  json table = json::array();
  double smallest_side = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    const ReturnIdentity& r = accepted[i];
    const double scale = std::max({std::abs(r.lhs), std::abs(r.rhs), 1e-300});
    const double res = relative ? std::abs(r.lhs - r.rhs) / scale : std::abs(r.lhs - r.rhs);
    worst.update(res, i);
    smallest_side = std::min(smallest_side, std::min(std::abs(r.lhs), std::abs(r.rhs)));
    table.push_back(json::array({accepted_pts[i].x(), accepted_pts[i].y(), r.lhs, r.rhs, res}));
  }
  c.results["expect"] = expect;
  c.results["relative"] = relative;
  c.results["requested"] = n;
  c.results["accepted"] = accepted.size();
  c.results["attempts"] = attempts;
  c.results["min_side"] = min_side;
  c.results["smallest_side"] = accepted.empty() ? json(nullptr) : json(smallest_side);
  c.results["max_residual"] = accepted.empty() ? json(nullptr) : json(worst.value);
  c.results["threshold"] = threshold;
  if (!accepted.empty()) {
    const ReturnIdentity& w = accepted[worst.index];
    c.results["worst"] = {{"point", point(accepted_pts[worst.index])}, {"lhs", w.lhs}, {"rhs", w.rhs}};
  }
  c.results["table_columns"] = {"x", "y", "lhs", "rhs", "residual"};
  c.results["table"] = table;
  if (expect == "hold") {
    c.passed = static_cast<int>(accepted.size()) >= n && worst.value < threshold;
  } else {
    c.passed = !accepted.empty() && worst.value > threshold;
  }
}

void op_collinearity(Context& c) {
  const int grid = c.spec.integer("grid");
  const double refine_tol = c.spec.real("refine_tol");
  const double nu_bound = c.spec.real("nu_bound");
  const int probe = c.spec.integer("probe");
  const std::vector<ChartPoint> pts = find_collinearity(c.pair, grid, refine_tol, c.jobs);
  const std::size_t total = scan_grid(c.pair.domain, grid).size();
  const bool everywhere = pts.size() >= total;
  c.results["points_found"] = pts.size();
  c.results["grid_points"] = total;
  c.results["everywhere_collinear"] = everywhere;
  if (everywhere) {
    c.results["note"] = "X and Y are collinear on the whole grid; not processed further";
    c.passed = false;
    return;
  }
  double max_nu = 0.0;
  for (const ChartPoint& p : pts) max_nu = std::max(max_nu, std::abs(p.y()));
  c.results["declared_col"] = c.pair.declared_col.has_value();
  c.results["max_abs_nu"] = max_nu;
  c.results["nu_bound"] = nu_bound;

  // Prepared condition: dtau != 0 on Col, probed at evenly spaced Col points.
  const Frame frame = c.frame();
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(std::max(probe, 0)), pts.size());
  std::vector<double> dtau(m);
  parallel_for(m, c.jobs, [&](std::size_t i) {
    const ChartPoint& p = pts[i * pts.size() / m];
    const ChartPoint q = on_section(c.pair, p.x(), p.y(), 0.0);
    dtau[i] = holonomy(c.pair, frame, q, 1.0).dtau.norm();
  });
  const double min_dtau = m ? *std::min_element(dtau.begin(), dtau.end()) : 0.0;
  c.results["probed"] = m;
  c.results["min_dtau_norm"] = min_dtau;
  c.results["prepared"] = m > 0 && min_dtau > 1e-8;
  c.passed = !pts.empty() && (!c.pair.declared_col || max_nu < nu_bound);
}

void op_linking_numbers(Context& c) {
  const std::vector<double> offsets = c.spec.reals("offsets");
  const double x0 = c.spec.real("x0");
  const int samples = c.spec.integer("samples");
  const Frame frame = c.frame();
  json rows = json::array();
  bool consistent = true;
  std::optional<std::pair<int, int>> first;
  for (double off : offsets) {
    const LinkingReport r = linking_numbers(c.pair, frame, off, x0, samples);
    rows.push_back({{"y_offset", off},
                    {"ell_plus", r.ell_plus},
                    {"ell_minus", r.ell_minus},
                    {"residual_plus", r.residual_plus},
                    {"residual_minus", r.residual_minus}});
    if (!first) first = std::make_pair(r.ell_plus, r.ell_minus);
    consistent = consistent && first->first == r.ell_plus && first->second == r.ell_minus;
  }
  c.results["x0"] = x0;
  c.results["loops"] = rows;
  c.results["consistent"] = consistent;
  c.passed = consistent && first.has_value();
  if (first) {
    c.results["ell_plus"] = first->first;
    c.results["ell_minus"] = first->second;
    if (c.spec.has("expect_plus")) {
      c.results["expect_plus"] = c.spec.integer("expect_plus");
      c.passed = c.passed && first->first == c.spec.integer("expect_plus");
    }
    if (c.spec.has("expect_minus")) {
      c.results["expect_minus"] = c.spec.integer("expect_minus");
      c.passed = c.passed && first->second == c.spec.integer("expect_minus");
    }
  }
}

json index_json(const IndexReport& r) {
  return {{"value", r.value},
          {"raw", r.raw},
          {"residual", r.residual},
          {"triangles", r.triangles},
          {"max_image_diameter", r.max_image_diameter},
          {"method", std::string(to_string(r.method))}};
}

EssentialTorus torus_from(const ExperimentSpec& spec) {
  EssentialTorus t;
  t.radius = spec.real("radius");
  t.n_around = spec.integer("grid");
  t.n_along = spec.integer("grid");
  return t;
}

void op_index_region(Context& c) {
  const EssentialTorus torus = torus_from(c.spec);
  const std::vector<double> svals = c.spec.reals("homotopy");
  const Frame frame = c.frame();
  json rows = json::array();
  std::optional<int> first;
  bool constant = true;
  for (double s : svals) {
    const FieldSpec field = s == 0.0 ? *c.pair.X : linear_combination(c.pair.X, 1.0, c.pair.Y, -s);
    const IndexReport r = index_region(field, frame, torus, c.degree_options());
    json row = index_json(r);
    row["s"] = s;
    rows.push_back(row);
    if (!first) first = r.value;
    constant = constant && *first == r.value;
  }
  c.results["torus"] = {{"radius", torus.radius}, {"grid", torus.n_around}};
  c.results["homotopy"] = rows;
  c.results["constant"] = constant;
  c.passed = constant && first.has_value();
  if (first) {
    c.results["index"] = *first;
    if (c.spec.has("expect")) {
      c.results["expect_abs"] = c.spec.integer("expect");
      c.passed = c.passed && std::abs(*first) == c.spec.integer("expect");
    }
  }
}

void op_verify_link_index(Context& c) {
  const EssentialTorus torus = torus_from(c.spec);
  const Frame frame = c.frame();
  const LinkIndexReport r =
      verify_link_index(c.pair, frame, torus, c.spec.real("y_offset"), c.spec.real("x0"), c.degree_options());
  c.results["torus"] = {{"radius", torus.radius}, {"grid", torus.n_around}};
  c.results["index"] = index_json(r.index);
  c.results["linking"] = {{"y_offset", c.spec.real("y_offset")},
                          {"ell_plus", r.linking.ell_plus},
                          {"ell_minus", r.linking.ell_minus},
                          {"residual_plus", r.linking.residual_plus},
                          {"residual_minus", r.linking.residual_minus}};
  c.results["lhs_abs_index"] = std::abs(r.index.value);
  c.results["rhs_abs_linking_difference"] = std::abs(r.linking.ell_plus - r.linking.ell_minus);
  c.results["identity_holds"] = r.identity_holds;
  c.passed = r.identity_holds;
}

void op_fixed_point_spectrum(Context& c) {
  const std::vector<Vec2> pts = c.spec.points("points");
  const double threshold = c.spec.real("threshold");
  const double fixed_tol = c.spec.real("fixed_tol");
  std::optional<Expression> multiplier;
  if (c.spec.has("multiplier")) multiplier = Expression::parse(c.spec.text("multiplier"), c.config.constants());
  const Frame frame = c.frame();
  std::vector<Spectrum> out(pts.size());
  std::vector<ChartPoint> at(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) at[i] = c.section_point(pts[i].x(), pts[i].y());
  parallel_for(pts.size(), c.jobs, [&](std::size_t i) { out[i] = fixed_point_spectrum(c.pair, frame, at[i], fixed_tol); });
  json rows = json::array();
  bool ok = !pts.empty();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Spectrum& s = out[i];
    json row = {{"point", point(at[i])},
                {"lambda1", cplx(s.lambda1)},
                {"lambda2", cplx(s.lambda2)},
                {"class", std::string(to_string(s.classification))},
                {"tolerance", s.tolerance},
                {"fixed_residual", s.fixed_residual},
                {"dP", mat(s.dP)}};
    if (c.spec.has("expect")) ok = ok && to_string(s.classification) == c.spec.text("expect");
    if (multiplier) {
      const double m = (*multiplier)(at[i].x(), at[i].y(), at[i].theta());
      const double dist = std::min(std::abs(s.lambda1 - m), std::abs(s.lambda2 - m));
      row["closed_form_multiplier"] = m;
      row["multiplier_residual"] = dist;
      ok = ok && dist < threshold;
    }
    rows.push_back(row);
  }
  if (c.spec.has("expect")) c.results["expect"] = c.spec.text("expect");
  c.results["threshold"] = threshold;
  c.results["points"] = rows;
  c.passed = ok;
}

void op_iterate_return(Context& c) {
  const int seeds = c.spec.integer("seeds");
  const int n_max = c.spec.integer("n_max");
  const double tol = c.spec.real("tol");
  const double radius = c.spec.real("radius");
  const double nu_bound = c.spec.real("nu_bound");
  const double fixed_bound = c.spec.real("fixed_bound");
  const bool on_col = c.spec.boolean("on_col");
  const Frame frame = c.frame();
  std::vector<ChartPoint> starts;
  while (static_cast<int>(starts.size()) < seeds) {
    const ChartPoint p = c.random_section_point(radius);
    if (std::abs(transverse_coordinate(c.pair, p)) >= 0.05) starts.push_back(p);
  }
  std::vector<OrbitRecord> orbits(starts.size());
  parallel_for(starts.size(), c.jobs,
               [&](std::size_t i) { orbits[i] = iterate_return(c.pair, frame, starts[i], n_max, tol); });
  json rows = json::array();
  bool ok = !orbits.empty();
  double ratio_bound = 0.0;
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    const OrbitRecord& o = orbits[i];
    json row = {{"start", point(starts[i])}, {"converged", o.converged}, {"iterations", o.points.size() - 1}};
    for (std::size_t k = 0; k + 1 < o.points.size(); ++k) {
      const double dnu = std::abs(o.nu[k + 1] - o.nu[k]);
      if (dnu > 0.0) ratio_bound = std::max(ratio_bound, std::abs(o.mu[k + 1] - o.mu[k]) / dnu);
    }
    if (o.converged) {
      const double nu = transverse_coordinate(c.pair, *o.limit);
      row["limit"] = point(*o.limit);
      row["nu_limit"] = nu;
      row["mu_limit"] = normal_decompose(c.pair, frame, *o.limit).mu;
      row["limit_residual"] = o.limit_residual;
      ok = ok && (!on_col || std::abs(nu) < nu_bound) && o.limit_residual < fixed_bound;
    } else {
      ok = false;
    }
    rows.push_back(row);
  }
  c.results["seeds"] = rows;
  c.results["limits_on_col_required"] = on_col;
  c.results["nu_bound"] = nu_bound;
  c.results["fixed_bound"] = fixed_bound;
  c.results["mu_nu_ratio_bound"] = ratio_bound;
  if (c.csv_path && c.spec.boolean("csv")) {
    std::ostringstream csv;
    csv << kOrbitCsvHeader << '\n';
    for (std::size_t i = 0; i < orbits.size(); ++i) write_orbit_rows(csv, static_cast<int>(i), orbits[i]);
    write_atomically(*c.csv_path, csv.str());
    c.results["csv"] = c.csv_path->filename().string();
  }
  c.passed = ok;
}

void op_cone_ratio(Context& c) {
  const std::vector<Vec2> starts = c.spec.points("start");
  const int count = c.spec.integer("count");
  const double factor = c.spec.real("factor");
  const Frame frame = c.frame();
  json rays = json::array();
  bool ok = true;
  for (const Vec2& s : starts) {
    std::vector<ChartPoint> pts;
    for (int k = 0; k < count; ++k) pts.push_back(c.section_point(s.x(), s.y() * std::pow(factor, k)));
    std::vector<ConeMeasurement> m(pts.size());
    parallel_for(pts.size(), c.jobs, [&](std::size_t i) { m[i] = cone_measure(c.pair, frame, pts[i]); });
    json rows = json::array();
    bool decreasing = true;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      rows.push_back(json::array({pts[i].x(), pts[i].y(), m[i].ratio, m[i].mu_change, m[i].displacement}));
      if (i > 0 && m[i].ratio > m[i - 1].ratio) decreasing = false;
      if (c.spec.has("bound")) ok = ok && m[i].ratio <= c.spec.real("bound");
    }
    rays.push_back({{"start", vec(s)}, {"monotone_decreasing", decreasing}, {"rows", rows}});
  }
  c.results["columns"] = {"x", "y", "ratio", "mu_change", "displacement"};
  c.results["rays"] = rays;
  if (c.spec.has("bound")) c.results["bound"] = c.spec.real("bound");
  c.passed = ok;
}

void op_segment_sweep(Context& c) {
  const std::vector<Vec2> pts = c.spec.points("points");
  const int samples = c.spec.integer("samples");
  const double threshold = c.spec.real("threshold");
  const Frame frame = c.frame();
  json rows = json::array();
  bool ok = !pts.empty();
  for (const Vec2& p : pts) {
    const double sweep = segment_sweep(c.pair, frame, c.section_point(p.x(), p.y()), samples);
    json row = {{"point", vec(p)}, {"sweep", sweep}};
    if (c.spec.has("expect")) {
      const double res = std::abs(sweep - c.spec.real("expect"));
      row["expect"] = c.spec.real("expect");
      row["residual"] = res;
      ok = ok && res < threshold;
    }
    if (c.spec.has("bound")) ok = ok && std::abs(sweep) < c.spec.real("bound");
    rows.push_back(row);
  }
  if (c.spec.has("bound")) c.results["bound"] = c.spec.real("bound");
  c.results["threshold"] = threshold;
  c.results["segments"] = rows;
  c.passed = ok;
}

void op_model_map_table(Context& c) {
  const int range = c.spec.integer("range");
  const int grid = c.spec.integer("grid");
  json rows = json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "d_plus,d_minus,degree,expected_abs,residual,winding_quarter,winding_three_quarter\n";
  bool ok = true;
  for (int dp = -range; dp <= range; ++dp) {
    for (int dm = -range; dm <= range; ++dm) {
      MeshMap mesh = torus_grid(grid, grid);
      const SurfaceMap map = model_surface_map(dp, dm);
      sample(mesh, map, c.jobs);
      const DegreeReport d = sphere_degree(mesh, &map, c.degree_options());
      int windings[2];
      double wres[2];
      for (int k = 0; k < 2; ++k) {
        const double s = k == 0 ? 0.25 : 0.75;
        const PlaneMap meridian = [&](const ChartPoint& q) { return meridian_project(model_map(dp, dm, s, q.theta())); };
        const CircleDegree w = circle_degree(meridian, PathSample::loop(s, 0.0, 128));
        windings[k] = w.degree;
        wres[k] = w.residual;
      }
      const bool row_ok = std::abs(d.degree) == std::abs(dp - dm) && windings[0] == dp && windings[1] == dm;
      ok = ok && row_ok;
      rows.push_back({{"d_plus", dp},
                      {"d_minus", dm},
                      {"degree", d.degree},
                      {"expected_abs", std::abs(dp - dm)},
                      {"residual", d.residual},
                      {"triangles", d.triangles},
                      {"winding_quarter", windings[0]},
                      {"winding_three_quarter", windings[1]},
                      {"winding_residuals", {wres[0], wres[1]}},
                      {"passed", row_ok}});
      csv << dp << ',' << dm << ',' << d.degree << ',' << std::abs(dp - dm) << ',' << d.residual << ',' << windings[0]
          << ',' << windings[1] << '\n';
    }
  }
  c.results["grid"] = grid;
  c.results["table"] = rows;
  if (c.csv_path && c.spec.boolean("csv")) {
    write_atomically(*c.csv_path, csv.str());
    c.results["csv"] = c.csv_path->filename().string();
  }
  c.passed = ok;
}

void op_degree_engine(Context& c) {
  const int level = c.spec.integer("level");
  const double limit = c.spec.real("residual");
  json rows = json::array();
  bool ok = true;
  for (int sign : {1, -1}) {
    const auto t0 = std::chrono::steady_clock::now();
    MeshMap mesh = icosphere(level);
    const SurfaceMap map = [sign](const Vec3& u) { return Vec3(sign * u); };
    sample(mesh, map, c.jobs);
    const DegreeReport d = sphere_degree(mesh, &map, c.degree_options());
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && d.degree == sign && d.residual < limit && mesh.triangles.size() >= 1280;
    rows.push_back({{"map", sign > 0 ? "identity" : "antipodal"},
                    {"degree", d.degree},
                    {"expected", sign},
                    {"raw", d.raw},
                    {"residual", d.residual},
                    {"triangles", d.triangles},
                    {"wall_time_s", dt}});
  }
  c.results["residual_limit"] = limit;
  c.results["maps"] = rows;
  c.passed = ok;
}

void op_hyperbolic_indices(Context& c) {
  const int level = c.spec.integer("level");
  const double radius = c.spec.real("radius");
  const double limit = c.spec.real("residual");
  const ChartPoint p(0.0, 0.0, 0.5);
  // Fixed orthogonal change of basis and a nilpotent part, so the fields are not diagonal.
  const Mat3 q = (Eigen::AngleAxisd(0.4, Vec3::UnitZ()) * Eigen::AngleAxisd(0.7, Vec3(1, 1, 0).normalized())).matrix();
  Mat3 nil = Mat3::Zero();
  nil(0, 1) = 0.3;
  nil(1, 2) = -0.2;
  json rows = json::array();
  bool ok = true;
  for (int stable = 0; stable <= 3; ++stable) {
    Mat3 d = Mat3::Zero();
    const double mags[3] = {1.0, 2.0, 0.5};
    for (int i = 0; i < 3; ++i) d(i, i) = (i < stable ? -1.0 : 1.0) * mags[i];
    const Mat3 a = q * (d + nil) * q.transpose();
    const FieldSpec field([a, p](const ChartPoint& y) { return Vec3(a * p.delta_to(y)); },
                          [a](const ChartPoint&) { return a; });
    const IndexReport r = index_isolated_zero(field, p, radius, level, c.degree_options());
    const int expected = stable % 2 == 0 ? 1 : -1;
    ok = ok && r.value == expected && r.residual < limit;
    rows.push_back({{"stable_dimension", stable},
                    {"index", r.value},
                    {"expected", expected},
                    {"raw", r.raw},
                    {"residual", r.residual},
                    {"triangles", r.triangles}});
  }
  c.results["radius"] = radius;
  c.results["residual_limit"] = limit;
  c.results["fields"] = rows;
  c.passed = ok;
}

void op_no_antipode(Context& c) {
  const int n = c.spec.integer("samples");
  const double radius = c.spec.real("radius");
  const double band = c.spec.real("band");
  const double angle_tol = c.spec.real("angle_tol");
  const Frame frame = c.frame();
  std::vector<ChartPoint> pts;
  std::vector<double> times, phis;
  while (static_cast<int>(pts.size()) < n) {
    const double x = c.rng.uniform(-radius, radius) * c.pair.domain.disc_radius;
    const double y = c.rng.uniform(-band, band);
    const double t = c.rng.uniform(0.0, 1.0);
    const double phi = c.rng.uniform(0.0, 2 * kPi);
    if (x * x + y * y > c.pair.domain.disc_radius * c.pair.domain.disc_radius) continue;
    pts.push_back(c.section_point(x, y));
    times.push_back(t);
    phis.push_back(phi);
  }
  std::vector<double> gap(pts.size());
  parallel_for(pts.size(), c.jobs, [&](std::size_t i) {
    const Vec2 v(std::cos(phis[i]), std::sin(phis[i]));
    const Vec2 w = holonomy(c.pair, frame, pts[i], times[i]).dP * v;
    gap[i] = kPi - std::atan2(std::abs(v.x() * w.y() - v.y() * w.x()), v.dot(w));
  });
  const double min_gap = gap.empty() ? 0.0 : *std::min_element(gap.begin(), gap.end());
  c.results["samples"] = pts.size();
  c.results["min_angle_to_antipode"] = min_gap;
  c.results["angle_tol"] = angle_tol;
  c.passed = min_gap > angle_tol;
}

using OpFn = void (*)(Context&);

OpFn find_impl(std::string_view op) {
  static const std::pair<std::string_view, OpFn> table[] = {
      {"commutator", op_commutator},
      {"tangent_flow", op_tangent_flow},
      {"holonomy_invariance", op_holonomy_invariance},
      {"holonomy_derivative", op_holonomy_derivative},
      {"return_identity", op_return_identity},
      {"collinearity", op_collinearity},
      {"linking_numbers", op_linking_numbers},
      {"index_region", op_index_region},
      {"verify_link_index", op_verify_link_index},
      {"fixed_point_spectrum", op_fixed_point_spectrum},
      {"iterate_return", op_iterate_return},
      {"cone_ratio", op_cone_ratio},
      {"segment_sweep", op_segment_sweep},
      {"model_map_table", op_model_map_table},
      {"degree_engine", op_degree_engine},
      {"hyperbolic_indices", op_hyperbolic_indices},
      {"no_antipode", op_no_antipode},
  };
  for (const auto& [name, fn] : table) {
    if (name == op) return fn;
  }
  return nullptr;
}

bool writes_csv(std::string_view op) { return op == "iterate_return" || op == "model_map_table"; }

}  // namespace

const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> all(std::begin(kBuiltins), std::end(kBuiltins));
  return all;
}

const BuiltinScenario* find_builtin(std::string_view name) {
  if (name.size() > 4 && name.substr(name.size() - 4) == ".cfg") name.remove_suffix(4);
  for (const BuiltinScenario& b : builtin_scenarios()) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

void write_atomically(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
#if defined(__unix__) || defined(__APPLE__)
  tmp += ".tmp." + std::to_string(::getpid());
#else
  tmp += ".tmp";
#endif
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::Io, "cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

std::uint64_t experiment_seed(std::uint64_t run_seed, std::size_t index) {
  // splitmix64 finalizer over (seed, index).
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ExperimentResult run_experiment(const ScenarioConfig& config, const ExperimentSpec& spec, std::uint64_t seed, int jobs,
                                const std::filesystem::path* csv_path) {
  ExperimentResult r;
  r.label = spec.label;
  r.op = spec.op;
  r.asserted = spec.asserted;
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx{config, spec, config.pair(), Rng(seed), std::max(jobs, 1), csv_path};
  try {
    const OpFn fn = find_impl(spec.op);
    if (!fn) throw Error(ErrorCode::ValidationError, "unknown experiment '" + spec.op + "'");
    fn(ctx);
    r.passed = ctx.passed;
    r.results = std::move(ctx.results);
  } catch (const std::exception& e) {
    r.passed = false;
    r.error = e.what();
    r.results = std::move(ctx.results);
  }
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

RunReport run(const ScenarioConfig& input, const RunOptions& options) {
  ScenarioConfig config = input;
  if (options.tol) {
    config.tol.flow = *options.tol;
    config.tol.crossing = *options.tol;
  }
  const std::uint64_t seed = options.seed.value_or(config.seed);
  const int jobs = options.jobs > 0 ? options.jobs : config.jobs;
  const auto t0 = std::chrono::steady_clock::now();
  if (options.write_files) std::filesystem::create_directories(options.out_dir);

  RunReport report;
  json experiments = json::array();
  std::size_t asserted = 0, failed = 0;
  for (std::size_t i = 0; i < config.experiments.size(); ++i) {
    const ExperimentSpec& spec = config.experiments[i];
    const std::uint64_t es = experiment_seed(seed, i);
    std::filesystem::path csv = options.out_dir / (config.csv_prefix + "." + spec.label + ".csv");
    const bool csv_here = options.write_files && writes_csv(spec.op);
    ExperimentResult r = run_experiment(config, spec, es, jobs, csv_here ? &csv : nullptr);
    if (csv_here && r.results.contains("csv")) report.written.push_back(csv);
    if (r.asserted) {
      ++asserted;
      if (!r.passed) {
        ++failed;
        report.all_passed = false;
      }
    }
    json ej;
    ej["label"] = r.label;
    ej["op"] = r.op;
    ej["assert"] = r.asserted;
    ej["seed"] = es;
    ej["passed"] = r.passed;
    ej["status"] = r.error.empty() ? "ok" : "error";
    ej["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    ej["results"] = r.results;
    ej["wall_time_s"] = r.wall_time_s;
    experiments.push_back(ej);
    report.experiments.push_back(std::move(r));
  }

  json& j = report.json;
  j["toolkit"] = kToolkitName;
  j["version"] = kToolkitVersion;
  j["scenario"] = config.name;
  j["seed"] = seed;
  j["seed_source"] = options.seed ? "override" : "config";
  j["config"] = config.echo();
  j["experiments"] = experiments;
  j["summary"] = {{"experiments", config.experiments.size()}, {"asserted", asserted}, {"failed_asserted", failed}};
  j["all_passed"] = report.all_passed;
  j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (options.write_files) {
    const std::filesystem::path path = options.out_dir / config.report_file;
    write_atomically(path, j.dump(2) + "\n");
    report.written.insert(report.written.begin(), path);
  }
  return report;
}

}  // namespace torlink
