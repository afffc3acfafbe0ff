#include "support.hpp"

#include "torlink/diagnostics.hpp"
#include "torlink/flow.hpp"
#include "torlink/section.hpp"

#include <cmath>
#include <numbers>

namespace {

constexpr double kA = 0.7;

// Closed-form flow of X = radial + rho^2 Y for the rotation pair.
tl::Vec3 rotation_x_flow(const tl::ChartPoint& p, double t) {
  const double r0 = p.radius(), phi0 = std::atan2(p.y(), p.x());
  const double grow = r0 * r0 * (std::exp(2 * t) - 1) / 2;
  const double r = r0 * std::exp(t), phi = phi0 + kA * grow;
  return {r * std::cos(phi), r * std::sin(phi), p.theta() + grow};
}

// Return time of the rotation Y-flow to the level one turn further on the
// fibration theta - c x, solved as a scalar root.
double tilted_return_time(double x0, double y0, double c) {
  auto g = [&](double t) { return t - c * (x0 * std::cos(kA * t) - y0 * std::sin(kA * t) - x0) - 1.0; };
  double lo = 0.0, hi = 3.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("integrator reproduces the closed-form rotation flows") {
  const tl::FieldPair p = testing::rotation_pair(kA, 0.0);
  std::mt19937_64 g(17);
  for (int i = 0; i < 20; ++i) {
    const tl::ChartPoint start(testing::uniform(g, -0.4, 0.4), testing::uniform(g, -0.4, 0.4),
                               testing::uniform(g, 0, 1));
    const double t = testing::uniform(g, -0.5, 0.5);
    const tl::FlowResult r = tl::integrate(*p.X, start, t);
    const tl::ChartPoint expect = tl::ChartPoint::from_vector(rotation_x_flow(start, t));
    CHECK(r.endpoint.distance(expect) < 1e-9);
    CHECK(r.time == doctest::Approx(t));
    // Y rotates by kA * t radians and advances theta by t
    const tl::FlowResult ry = tl::integrate(*p.Y, start, t);
    const double c = std::cos(kA * t), s = std::sin(kA * t);
    const tl::ChartPoint ey(c * start.x() - s * start.y(), s * start.x() + c * start.y(), start.theta() + t);
    CHECK(ry.endpoint.distance(ey) < 1e-9);
    CHECK(ry.theta_lifted == doctest::Approx(start.theta() + t).epsilon(1e-10));
  }
}

TEST_CASE("variational solution matches finite differences of the flow") {
  const tl::FieldPair p = testing::rotation_pair(kA, 0.0);
  const tl::ChartPoint start(0.2, 0.1, 0.3);
  const double t = 0.4, h = 1e-6;
  const tl::FlowResult r = tl::variational(*p.X, start, t);
  REQUIRE(r.dflow.has_value());
  for (int k = 0; k < 3; ++k) {
    const tl::Vec3 d = h * tl::Vec3::Unit(k);
    const tl::Vec3 fd = (rotation_x_flow(start.displaced(d), t) - rotation_x_flow(start.displaced(-d), t)) / (2 * h);
    CHECK((r.dflow->col(k) - fd).norm() < 1e-6);
  }
}

TEST_CASE("leaving the disc raises LeftDomain with the exit time") {
  const tl::FieldPair p = testing::rotation_pair(kA, 0.0);
  tl::FlowOptions o;
  o.disc_radius = 1.0;
  try {
    tl::integrate(*p.X, tl::ChartPoint(0.5, 0, 0), 2.0, o);
    FAIL("expected LeftDomain");
  } catch (const tl::Error& e) {
    CHECK(e.code() == tl::ErrorCode::LeftDomain);
    CHECK(e.value() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }
}

TEST_CASE("fiber crossings on untilted and tilted fibrations") {
  const tl::FieldPair p = testing::rotation_pair(kA, 0.0);
  const tl::CrossingEvent e = tl::cross_fiber(*p.Y, p.domain.fibration, tl::ChartPoint(0.3, 0, 0.2), 0.7, 0.0);
  CHECK(e.time == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(e.direction == 1);

  for (double c : {0.3, -0.5}) {
    const tl::Fibration f = tl::Fibration::tilted(c);
    const tl::ChartPoint start = f.point_on_level(0.4, -0.2, 0.0);
    const tl::CrossingEvent a = tl::advance_levels(*p.Y, f, start, 1.0);
    CHECK(a.time == doctest::Approx(tilted_return_time(0.4, -0.2, c)).epsilon(1e-10));
  }
}

TEST_CASE("crossings beyond the horizon and tangent fields are reported") {
  CHECK_THROWS_CODE(tl::cross_fiber(*testing::field("-y", "x", "0"), tl::Fibration::tilted(0.0),
                                    tl::ChartPoint(0.3, 0, 0.2), 0.7, 0.0),
                    tl::ErrorCode::NotTransverse);
  const auto f = testing::field("-y", "x", "0.01");
  tl::FlowOptions o;
  o.horizon = 5.0;
  CHECK_THROWS_CODE(tl::cross_fiber(*f, tl::Fibration::tilted(0.0), tl::ChartPoint(0.3, 0, 0.2), 0.7, 0.0, o),
                    tl::ErrorCode::NoCrossing);
}

TEST_CASE("rotation holonomy is the rigid rotation with constant return time") {
  const tl::FieldPair p = testing::rotation_pair(kA, 0.0);
  const tl::Frame frame = tl::build_frame(p);
  const tl::HolonomyRecord h = tl::return_map(p, frame, tl::on_section(p, 0.3, 0.2));
  const double c = std::cos(kA), s = std::sin(kA);
  CHECK(h.tau == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(h.end.x() == doctest::Approx(c * 0.3 - s * 0.2).epsilon(1e-10));
  tl::Mat2 rot;
  rot << c, -s, s, c;
  CHECK((h.dP - rot).norm() < 1e-9);
  CHECK(h.dtau.norm() < 1e-9);
}

TEST_CASE("tilted holonomy derivatives match finite differences of the oracle") {
  const double c = 0.3;
  const tl::FieldPair p = testing::rotation_pair(kA, c);
  const tl::Frame frame = tl::build_frame(p);
  const double x0 = 0.25, y0 = -0.15, h = 1e-6;
  const tl::HolonomyRecord rec = tl::return_map(p, frame, tl::on_section(p, x0, y0));
  CHECK(rec.tau == doctest::Approx(tilted_return_time(x0, y0, c)).epsilon(1e-10));
  const double dx = (tilted_return_time(x0 + h, y0, c) - tilted_return_time(x0 - h, y0, c)) / (2 * h);
  const double dy = (tilted_return_time(x0, y0 + h, c) - tilted_return_time(x0, y0 - h, c)) / (2 * h);
  CHECK(rec.dtau(0) == doctest::Approx(dx).epsilon(1e-5));
  CHECK(rec.dtau(1) == doctest::Approx(dy).epsilon(1e-5));
}

TEST_CASE("holonomy composes over partial levels") {
  const tl::FieldPair p = testing::rotation_pair(kA, 0.3);
  const tl::Frame frame = tl::build_frame(p);
  const tl::ChartPoint x = tl::on_section(p, 0.2, 0.2);
  const tl::HolonomyRecord a = tl::holonomy(p, frame, x, 0.4);
  const tl::HolonomyRecord b = tl::holonomy(p, frame, a.end, 0.6);
  const tl::HolonomyRecord full = tl::return_map(p, frame, x);
  CHECK(b.end.distance(full.end) < 1e-9);
  CHECK(a.tau + b.tau == doctest::Approx(full.tau).epsilon(1e-10));
  CHECK((b.dP * a.dP - full.dP).norm() < 1e-8);
}

TEST_CASE("normal decomposition reconstructs X") {
  const tl::FieldPair p = testing::rotation_pair(kA, 0.3);
  const tl::Frame frame = tl::build_frame(p);
  const tl::ChartPoint x = tl::on_section(p, 0.3, -0.1);
  const tl::NormalDecomposition d = tl::normal_decompose(p, frame, x);
  CHECK((d.n_vec.vector() + d.mu * p.Y->value(x)).isApprox(p.X->value(x)));
  CHECK((d.alpha * frame.e1(x) + d.beta * frame.e2(x)).isApprox(d.n_vec.vector()));
}

TEST_CASE("return identity holds for commuting pairs and fails for a non-commuting one") {
  for (double c : {0.0, 0.3}) {
    const tl::FieldPair p = testing::rotation_pair(kA, c);
    const tl::Frame frame = tl::build_frame(p);
    std::mt19937_64 g(23);
    for (int i = 0; i < 10; ++i) {
      const tl::ChartPoint x = tl::on_section(p, testing::uniform(g, -0.4, 0.4), testing::uniform(g, -0.4, 0.4));
      const tl::ReturnIdentity r = tl::return_identity_residual(p, frame, x);
      CHECK(r.residual < 1e-8);
      CHECK(r.residual == doctest::Approx(std::abs(r.lhs - r.rhs)));
    }
  }
  const tl::FieldPair bad = testing::make_pair(testing::field("1", "0", "0"), testing::field("-y", "x", "1"), 0.3);
  const tl::Frame frame = tl::build_frame(bad);
  CHECK(tl::return_identity_residual(bad, frame, tl::on_section(bad, 0.3, 0.2)).residual > 1e-3);
}
