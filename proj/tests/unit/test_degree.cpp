#include "support.hpp"

#include "torlink/degree.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

tl::PlaneMap power_map(int k, double x0 = 0.0) {
  return [=](const tl::ChartPoint& p) {
    const std::complex<double> z = std::polar(1.0, kTwoPi * p.theta());
    const std::complex<double> w = k >= 0 ? std::pow(z, k) : std::pow(std::conj(z), -k);
    return tl::Vec2(w.real() + x0, w.imag());
  };
}

tl::Vec3 doubled_azimuth(const tl::Vec3& u) {
  const double r = std::hypot(u.x(), u.y());
  if (r == 0) return u;
  const double c = u.x() / r, s = u.y() / r;
  return {r * (c * c - s * s), r * 2 * c * s, u.z()};
}

}  // namespace

TEST_CASE("circle degree of z^k along the core loop") {
  const tl::PathSample loop = tl::PathSample::loop(0, 0, 16);
  for (int k = -3; k <= 3; ++k) {
    const tl::CircleDegree d = tl::circle_degree(power_map(k), loop);
    CHECK(d.degree == k);
    CHECK(d.residual < 1e-12);
  }
  CHECK(tl::circle_degree(power_map(1, 2.0), loop).degree == 0);
}

TEST_CASE("adaptive lift resolves coarse samples of a fast winding") {
  const tl::AngleLift lift = tl::angle_lift(power_map(5), tl::PathSample::loop(0, 0, 12));
  CHECK(lift.total == doctest::Approx(5 * kTwoPi));
  for (std::size_t i = 1; i < lift.values.size(); ++i) CHECK(std::abs(lift.values[i] - lift.values[i - 1]) < std::numbers::pi);
}

TEST_CASE("lift fails on a vanishing map") {
  const tl::PlaneMap zero_crossing = [](const tl::ChartPoint& p) { return tl::Vec2(p.theta() - 0.5, 0.0); };
  CHECK_THROWS_CODE(tl::angle_lift(zero_crossing, tl::PathSample::loop(0, 0, 8)), tl::ErrorCode::UnwrapFailure);
}

TEST_CASE("meridian projection rejects poles") {
  CHECK(tl::meridian_project(tl::Vec3(0.6, 0.0, 0.8)).isApprox(tl::Vec2(1, 0)));
  CHECK_THROWS_CODE(tl::meridian_project(tl::Vec3(0, 0, 1)), tl::ErrorCode::AtPole);
}

TEST_CASE("icosphere and torus grid counts") {
  for (int level = 0; level <= 3; ++level) {
    const tl::MeshMap m = tl::icosphere(level);
    const std::size_t f = 20u << (2 * level);
    CHECK(m.triangles.size() == f);
    CHECK(m.vertices.size() == f / 2 + 2);
    for (const auto& v : m.vertices) CHECK(v.norm() == doctest::Approx(1.0));
  }
  const tl::MeshMap t = tl::torus_grid(5, 7);
  CHECK(t.vertices.size() == 35);
  CHECK(t.triangles.size() == 70);
  CHECK(tl::refine(t).triangles.size() == 280);
}

TEST_CASE("solid angles of an octant and orientation") {
  const tl::Vec3 a = tl::Vec3::UnitX(), b = tl::Vec3::UnitY(), c = tl::Vec3::UnitZ();
  CHECK(tl::solid_angle(a, b, c) == doctest::Approx(std::numbers::pi / 2));
  CHECK(tl::solid_angle(a, c, b) == doctest::Approx(-std::numbers::pi / 2));
}

TEST_CASE("sphere degrees of identity, antipode and doubled azimuth") {
  tl::MeshMap m = tl::icosphere(3);
  tl::sample(m, [](const tl::Vec3& u) { return u; });
  CHECK(tl::sphere_degree(m).degree == 1);
  tl::sample(m, [](const tl::Vec3& u) { return tl::Vec3(-u); });
  CHECK(tl::sphere_degree(m).degree == -1);
  tl::sample(m, [](const tl::Vec3& u) { return tl::Vec3(u.x(), u.y(), std::abs(u.z()) + 0.0); });
  const tl::SurfaceMap folded = [](const tl::Vec3& u) { return tl::Vec3(u.x(), u.y(), std::abs(u.z())); };
  CHECK(tl::sphere_degree(m, &folded).degree == 0);

  const tl::SurfaceMap twice = doubled_azimuth;
  tl::MeshMap coarse = tl::icosphere(1);
  tl::sample(coarse, twice);
  const tl::DegreeReport d = tl::sphere_degree(coarse, &twice);
  CHECK(d.degree == 2);
  CHECK(d.residual < 0.01);
  CHECK(d.triangles > coarse.triangles.size());
}

TEST_CASE("degree sums are bit-identical across worker counts") {
  tl::MeshMap m = tl::torus_grid(96, 96);
  tl::sample(m, tl::model_surface_map(2, -1));
  tl::DegreeOptions one, many;
  many.jobs = 5;
  const tl::DegreeReport a = tl::sphere_degree(m, nullptr, one), b = tl::sphere_degree(m, nullptr, many);
  CHECK(a.raw == b.raw);
  CHECK(a.degree == b.degree);
}

TEST_CASE("model map degree is the difference of the windings") {
  for (auto [dp, dm] : {std::pair{1, 0}, {2, -1}, {0, 0}, {3, 3}, {-2, 1}}) {
    tl::MeshMap m = tl::torus_grid(64, 64);
    const tl::SurfaceMap f = tl::model_surface_map(dp, dm);
    tl::sample(m, f);
    const tl::DegreeReport d = tl::sphere_degree(m, &f);
    CHECK_MESSAGE(std::abs(d.degree) == std::abs(dp - dm), dp << ", " << dm);
    CHECK(d.residual < 0.01);
  }
  const tl::Vec3 v = tl::model_map(2, -1, 0.25, 0.125);
  CHECK(v.isApprox(tl::Vec3(0, 1, 0), 1e-12));
}

TEST_CASE("mesh text round trip") {
  tl::MeshMap m = tl::icosphere(1);
  tl::sample(m, doubled_azimuth);
  std::stringstream s;
  tl::write_mesh(s, m);
  const tl::MeshMap back = tl::read_mesh(s);
  CHECK(back.kind == tl::SurfaceKind::Sphere);
  CHECK(back.triangles == m.triangles);
  REQUIRE(back.values.size() == m.values.size());
  for (std::size_t i = 0; i < m.values.size(); ++i) CHECK((back.values[i] - m.values[i]).norm() < 1e-15);
  std::istringstream bad("surface sphere\nv 1 0 0 1 0 0\nf 0 1 2\n");
  CHECK_THROWS_AS(tl::read_mesh(bad), tl::Error);
}
