// Randomized checks of the structural properties the toolkit promises.

#include "support.hpp"

#include "torlink/degree.hpp"
#include "torlink/diagnostics.hpp"
#include "torlink/dynamics.hpp"
#include "torlink/flow.hpp"
#include "torlink/index.hpp"
#include "torlink/section.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numbers>

namespace {

const char* const kCommuting[] = {"trivial-suspension", "rigid-rotation", "tilted-rotation", "annulus-col",
                                  "normally-contracting"};

tl::ChartPoint random_point(std::mt19937_64& g, double r) {
  double x, y;
  do {
    x = testing::uniform(g, -r, r);
    y = testing::uniform(g, -r, r);
  } while (x * x + y * y > r * r);
  return {x, y, testing::uniform(g, 0, 1)};
}

tl::Vec3 azimuth_power(int k, const tl::Vec3& u) {
  const double r = std::hypot(u.x(), u.y());
  const double phi = k * std::atan2(u.y(), u.x());
  return {r * std::cos(phi), r * std::sin(phi), u.z()};
}

}  // namespace

TEST_CASE("field evaluators agree at theta and theta + 1") {
  std::mt19937_64 g(101);
  for (const auto& b : tl::builtin_scenarios()) {
    const tl::FieldPair p = testing::builtin_pair(std::string(b.name));
    for (int i = 0; i < 20; ++i) {
      const tl::ChartPoint q = random_point(g, 0.9);
      const tl::ChartPoint shifted(q.x(), q.y(), q.theta() + 1.0);
      // theta + 1 reduces back to theta up to one rounding
      CHECK((p.X->value(q) - p.X->value(shifted)).norm() < 1e-13);
      CHECK((p.Y->value(q) - p.Y->value(shifted)).norm() < 1e-13);
    }
  }
}

TEST_CASE("collinear points are exactly where mu reconstructs X") {
  std::mt19937_64 g(102);
  for (const char* name : {"normally-contracting", "annulus-col", "rigid-rotation"}) {
    const tl::FieldPair p = testing::builtin_pair(name);
    for (int i = 0; i < 100; ++i) {
      tl::ChartPoint q = random_point(g, 0.8);
      if (i % 2 == 0) q = tl::ChartPoint(q.x(), 0.0, q.theta());
      const tl::Vec3 x = p.X->value(q), y = p.Y->value(q);
      const double recon = (x - tl::ratio_mu(p, q) * y).norm();
      const bool collinear = tl::collinearity_residual(p, q) < 1e-14;
      CHECK(collinear == (recon < 1e-10 * (x.norm() + y.norm())));
    }
  }
}

TEST_CASE("mu ignores adding 0 Y and scales with X") {
  const tl::FieldPair p = testing::builtin_pair("tilted-rotation");
  tl::FieldPair plus_zero = p, scaled = p;
  plus_zero.X = std::make_shared<const tl::FieldSpec>(tl::linear_combination(p.X, 1.0, p.Y, 0.0));
  scaled.X = std::make_shared<const tl::FieldSpec>(tl::linear_combination(p.X, -2.5, p.Y, 0.0));
  std::mt19937_64 g(103);
  for (int i = 0; i < 50; ++i) {
    const tl::ChartPoint q = random_point(g, 0.9);
    CHECK(tl::ratio_mu(plus_zero, q) == tl::ratio_mu(p, q));
    CHECK(tl::ratio_mu(scaled, q) == doctest::Approx(-2.5 * tl::ratio_mu(p, q)).epsilon(1e-14));
  }
}

TEST_CASE("frames are fiber tangent at 1000 random points") {
  std::mt19937_64 g(104);
  for (const char* name : {"tilted-rotation", "normally-contracting", "annulus-col"}) {
    const tl::FieldPair p = testing::builtin_pair(name);
    const tl::Frame frame = tl::build_frame(p);
    CHECK(frame.y_field() == p.Y);
    for (int i = 0; i < 1000; ++i) {
      const tl::ChartPoint q = random_point(g, 0.95);
      const tl::Vec3 grad = p.domain.fibration.gradient(q);
      CHECK(std::abs(grad.dot(frame.e1(q))) < 1e-12);
      CHECK(std::abs(grad.dot(frame.e2(q))) < 1e-12);
      CHECK(std::abs(frame.matrix(q).determinant()) > frame.det_threshold());
    }
    // along the declared Col {y = 0}, e1 has no y component
    if (p.declared_col) CHECK(frame.e1(tl::ChartPoint(0.3, 0.0, 0.4)).y() == 0.0);
  }
}

TEST_CASE("flow error estimates, orientation and the group property") {
  std::mt19937_64 g(105);
  for (const char* name : kCommuting) {
    const tl::FieldPair p = testing::builtin_pair(name);
    tl::FlowOptions o = tl::FlowOptions::for_pair(p);
    o.disc_radius = 10.0;
    for (int i = 0; i < 10; ++i) {
      const tl::ChartPoint q = random_point(g, 0.5);
      const double s = testing::uniform(g, 0, 0.5), t = testing::uniform(g, -0.5, 0.5);
      const tl::FlowResult whole = tl::variational(*p.Y, q, s + t, o);
      const tl::FlowResult first = tl::integrate(*p.Y, q, s, o);
      const tl::FlowResult second = tl::integrate(*p.Y, first.endpoint, t, o);
      CHECK(whole.est_error <= o.tol);
      CHECK(whole.dflow->determinant() > 0.0);
      CHECK(second.endpoint.distance(whole.endpoint) < 10 * o.tol * (1 + whole.endpoint.vector().norm()));
    }
  }
}

TEST_CASE("commuting partners are invariant under the tangent flow") {
  std::mt19937_64 g(106);
  for (const char* name : kCommuting) {
    const tl::FieldPair p = testing::builtin_pair(name);
    for (double t : {0.1, 0.5, 1.0}) {
      for (int i = 0; i < 50; ++i) {
        const tl::ChartPoint q = random_point(g, 0.5);
        const tl::FlowResult r = tl::variational(*p.Y, q, t, tl::FlowOptions::for_pair(p));
        const tl::Vec3 xq = p.X->value(q);
        CHECK((*r.dflow * xq - p.X->value(r.endpoint)).norm() <= 1e-6 * std::max(xq.norm(), 1e-12));
      }
    }
  }
}

TEST_CASE("crossings land on the target fiber") {
  std::mt19937_64 g(107);
  const tl::FieldPair p = testing::builtin_pair("tilted-rotation");
  const tl::FlowOptions o = tl::FlowOptions::for_pair(p);
  for (int i = 0; i < 50; ++i) {
    const tl::ChartPoint q = random_point(g, 0.5);
    const double level = testing::uniform(g, 0, 1);
    const tl::CrossingEvent e = tl::cross_fiber(*p.Y, p.domain.fibration, q, level, 0.0, o);
    CHECK(std::abs(tl::circle_delta(p.domain.fibration.level(e.point), level)) < o.crossing_tol);
  }
}

TEST_CASE("holonomy records: zero level, endpoint on the orbit, finite differences") {
  std::mt19937_64 g(108);
  const tl::FieldPair p = testing::builtin_pair("tilted-rotation");
  const tl::Frame frame = tl::build_frame(p);
  const tl::HolonomyRecord zero = tl::holonomy(p, frame, tl::on_section(p, 0.2, 0.1), 0.0);
  CHECK(zero.dP == tl::Mat2::Identity());
  CHECK(zero.dtau.norm() == 0.0);
  CHECK(zero.end == zero.start);

  const double h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const tl::ChartPoint x0 = random_point(g, 0.6);
    const tl::ChartPoint x = tl::on_section(p, x0.x(), x0.y());
    const tl::HolonomyRecord rec = tl::return_map(p, frame, x);
    const tl::FlowResult along = tl::integrate(*p.Y, x, rec.tau, tl::FlowOptions::for_pair(p));
    CHECK(along.endpoint.distance(rec.end) < 1e-9);
    // section coordinates are (x, y) because e1, e2 project to the chart axes
    for (int k = 0; k < 2; ++k) {
      const double dx = k == 0 ? h : 0.0, dy = k == 1 ? h : 0.0;
      const tl::HolonomyRecord a = tl::return_map(p, frame, tl::on_section(p, x.x() + dx, x.y() + dy));
      const tl::HolonomyRecord b = tl::return_map(p, frame, tl::on_section(p, x.x() - dx, x.y() - dy));
      const tl::Vec2 fd((a.end.x() - b.end.x()) / (2 * h), (a.end.y() - b.end.y()) / (2 * h));
      CHECK((rec.dP.col(k) - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
      const double fd_tau = (a.tau - b.tau) / (2 * h);
      CHECK(std::abs(rec.dtau(k) - fd_tau) < 1e-5 * std::max(1.0, std::abs(fd_tau)));
    }
  }
}

TEST_CASE("Col points are fixed by the return map") {
  for (const char* name : {"annulus-col", "normally-contracting", "trivial-suspension"}) {
    const tl::FieldPair p = testing::builtin_pair(name);
    const tl::Frame frame = tl::build_frame(p);
    for (double x : {-0.6, -0.2, 0.1, 0.5}) {
      const tl::ChartPoint q = tl::on_section(p, x, 0.0);
      CHECK(tl::return_map(p, frame, q).end.distance(q) < p.tol.crossing);
    }
  }
}

TEST_CASE("sphere degrees survive one refinement") {
  std::vector<tl::SurfaceMap> maps = {
      [](const tl::Vec3& u) { return u; },
      [](const tl::Vec3& u) { return tl::Vec3(-u); },
      [](const tl::Vec3& u) { return azimuth_power(2, u); },
      [](const tl::Vec3& u) { return azimuth_power(-3, u); },
  };
  for (const auto& f : maps) {
    tl::MeshMap coarse = tl::icosphere(3);
    tl::sample(coarse, f);
    tl::MeshMap fine = tl::refine(coarse);
    tl::sample(fine, f);
    CHECK(tl::sphere_degree(coarse, &f).degree == tl::sphere_degree(fine, &f).degree);
  }
  for (int dp = -2; dp <= 2; ++dp) {
    const tl::SurfaceMap f = tl::model_surface_map(dp, 1);
    tl::MeshMap coarse = tl::torus_grid(32, 32);
    tl::sample(coarse, f);
    tl::MeshMap fine = tl::refine(coarse);
    tl::sample(fine, f);
    CHECK(tl::sphere_degree(coarse, &f).degree == tl::sphere_degree(fine, &f).degree);
  }
}

TEST_CASE("rotation-symmetric sphere maps: degree equals the equator winding") {
  for (int k : {-2, -1, 1, 2, 3}) {
    const tl::SurfaceMap f = [k](const tl::Vec3& u) { return azimuth_power(k, u); };
    tl::MeshMap m = tl::icosphere(3);
    tl::sample(m, f);
    const tl::PlaneMap equator = [&](const tl::ChartPoint& q) {
      const double a = 2 * std::numbers::pi * q.theta();
      return tl::meridian_project(f(tl::Vec3(std::cos(a), std::sin(a), 0.0)));
    };
    CHECK(tl::sphere_degree(m, &f).degree == tl::circle_degree(equator, tl::PathSample::loop(0, 0, 64)).degree);
  }
}

TEST_CASE("angular variation is additive under concatenation") {
  const tl::FieldPair p = testing::builtin_pair("split-winding");
  const tl::Frame frame = tl::build_frame(p);
  const tl::PlaneMap normal = [&](const tl::ChartPoint& q) { return tl::normal_decompose(p, frame, q).normal_coordinates(); };
  std::mt19937_64 g(109);
  for (int i = 0; i < 20; ++i) {
    const tl::ChartPoint a(0.1, 0.3, testing::uniform(g, 0, 1)), b(-0.2, 0.5, testing::uniform(g, 0, 1)),
        c(0.3, 0.2, testing::uniform(g, 0, 1));
    const double ab = tl::angular_variation(normal, tl::PathSample::segment(a, b));
    const double bc = tl::angular_variation(normal, tl::PathSample::segment(b, c));
    tl::PathSample joined = tl::PathSample::segment(a, b);
    const tl::PathSample tail = tl::PathSample::segment(b, c);
    joined.points.insert(joined.points.end(), tail.points.begin() + 1, tail.points.end());
    CHECK(tl::angular_variation(normal, joined) == doctest::Approx(ab + bc).epsilon(1e-9));
  }
}

TEST_CASE("isolated-zero indices do not depend on the chart orientation") {
  // Swap x and y: the field becomes S X(S p) with S the swap.
  const tl::ChartPoint centre(0, 0, 0.5);
  struct Case {
    const char *fx, *fy, *ft, *sx, *sy, *st;
  };
  const Case cases[] = {
      {"x^2 - y^2", "2*x*y", "theta - 0.5", "2*x*y", "y^2 - x^2", "theta - 0.5"},
      {"-x + 0.3*y", "2*y", "theta - 0.5", "2*x", "-y + 0.3*x", "theta - 0.5"},
      {"x", "-y + x^2", "0.5 - theta", "-x + y^2", "y", "0.5 - theta"},
  };
  for (const Case& c : cases) {
    const int a = tl::index_isolated_zero(*testing::field(c.fx, c.fy, c.ft), centre, 0.1).value;
    const int b = tl::index_isolated_zero(*testing::field(c.sx, c.sy, c.st), centre, 0.1).value;
    CHECK(a == b);
  }
}

TEST_CASE("linking numbers do not depend on the loop in a component") {
  const tl::FieldPair p = testing::builtin_pair("split-winding");
  const tl::Frame frame = tl::build_frame(p);
  const tl::LinkingReport a = tl::linking_numbers(p, frame, 0.2), b = tl::linking_numbers(p, frame, 0.45, 0.1);
  CHECK(a.ell_plus == b.ell_plus);
  CHECK(a.ell_minus == b.ell_minus);
  const tl::PlaneMap normal = [&](const tl::ChartPoint& q) { return tl::normal_decompose(p, frame, q).normal_coordinates(); };
  for (double sign : {1.0, -1.0}) {
    tl::PathSample wiggle;
    wiggle.closed = true;
    for (int i = 0; i <= 256; ++i) {
      const double s = i / 256.0, w = 2 * std::numbers::pi * s;
      wiggle.points.emplace_back(0.2 * std::cos(3 * w), sign * (0.3 + 0.1 * std::sin(2 * w)), s);
    }
    wiggle.points.back() = wiggle.points.front();
    const int expect = sign > 0 ? a.ell_plus : a.ell_minus;
    CHECK(tl::circle_degree(normal, wiggle).degree == expect);
  }
}

TEST_CASE("orbit records follow the return map and stop on fixed points") {
  const tl::FieldPair nc = testing::builtin_pair("normally-contracting");
  const tl::Frame frame = tl::build_frame(nc);
  const tl::OrbitRecord o = tl::iterate_return(nc, frame, tl::on_section(nc, 0.3, 0.2));
  for (std::size_t i = 0; i + 1 < o.points.size() && i < 10; ++i) {
    CHECK(tl::return_map(nc, frame, o.points[i]).end.distance(o.points[i + 1]) < nc.tol.crossing);
  }
  REQUIRE(o.converged);
  CHECK(tl::collinearity_residual(nc, *o.limit) < nc.tol.collinearity);
  CHECK(o.limit_residual < 10 * 1e-10);

  const tl::ChartPoint on_col = tl::on_section(nc, 0.3, 0.0);
  const tl::OrbitRecord fixed = tl::iterate_return(nc, frame, on_col);
  CHECK(fixed.converged);
  CHECK(fixed.points.size() == 1);
  CHECK(*fixed.limit == on_col);

  const tl::FieldPair trivial = testing::builtin_pair("trivial-suspension");
  const tl::Frame tf = tl::build_frame(trivial);
  const tl::OrbitRecord t = tl::iterate_return(trivial, tf, tl::on_section(trivial, 0.3, 0.4));
  CHECK(t.converged);
  CHECK(t.points.size() == 1);
  CHECK(tl::segment_sweep(trivial, tf, tl::on_section(trivial, 0.3, 0.4)) == 0.0);
}
