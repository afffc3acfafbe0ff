#include "torlink/index.hpp"

#include "torlink/diagnostics.hpp"
#include "torlink/error.hpp"
#include "torlink/section.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace torlink {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

IndexReport from_degree(const DegreeReport& d, IndexMethod method) {
  IndexReport r;
  r.value = d.degree;
  r.raw = d.raw;
  r.residual = d.residual;
  r.triangles = d.triangles;
  r.max_image_diameter = d.max_image_diameter;
  r.method = method;
  return r;
}

}  // namespace

std::string_view to_string(IndexMethod m) {
  return m == IndexMethod::SphereOfZero ? "sphere" : "essential-torus";
}

std::string_view to_string(FixedPointClass c) {
  switch (c) {
    case FixedPointClass::IdentityLike: return "identity-like";
    case FixedPointClass::Parabolic: return "parabolic";
    case FixedPointClass::Elliptic: return "elliptic";
    case FixedPointClass::PartiallyHyperbolic: return "partially-hyperbolic";
  }
  return "unknown";
}

ChartPoint EssentialTorus::point(double s, double t) const {
  return {center_x + radius * std::cos(kTwoPi * s), center_y + radius * std::sin(kTwoPi * s), t};
}

IndexReport index_isolated_zero(const FieldSpec& X, const ChartPoint& p, double radius, int mesh_level,
                                const DegreeOptions& opts, double zero_threshold) {
  if (!(radius > 0.0)) throw Error(ErrorCode::PreconditionFailed, "sphere radius must be positive");
  const SurfaceMap map = [&](const Vec3& u) -> Vec3 {
    const Vec3 v = X.value(p.displaced(radius * u));
    if (!(v.norm() >= zero_threshold)) {
      throw Error(ErrorCode::ZeroOnSphere, "field vanishes on the index sphere", v.norm());
    }
    return v;
  };
  MeshMap mesh = icosphere(mesh_level);
  sample(mesh, map, opts.jobs);
  return from_degree(sphere_degree(mesh, &map, opts), IndexMethod::SphereOfZero);
}

IndexReport index_region(const FieldSpec& X, const Frame& frame, const EssentialTorus& torus,
                         const DegreeOptions& opts, double zero_threshold) {
  if (!(torus.radius > 0.0)) throw Error(ErrorCode::PreconditionFailed, "torus radius must be positive");
  const SurfaceMap map = [&](const Vec3& st) -> Vec3 {
    const ChartPoint q = torus.point(st.x(), st.y());
    const Vec3 c = frame.coordinates(q, X.value(q));
    if (!(c.norm() >= zero_threshold)) {
      throw Error(ErrorCode::ZeroOnTorus, "field vanishes on the essential torus", c.norm());
    }
    return c;
  };
  MeshMap mesh = torus_grid(torus.n_around, torus.n_along);
  sample(mesh, map, opts.jobs);
  return from_degree(sphere_degree(mesh, &map, opts), IndexMethod::EssentialTorus);
}

LinkingReport linking_numbers(const FieldPair& pair, const Frame& frame, double y_offset, double x0, int samples) {
  if (!(y_offset > 0.0)) throw Error(ErrorCode::PreconditionFailed, "loop offset must be positive");
  const PlaneMap normal = [&](const ChartPoint& p) { return normal_decompose(pair, frame, p).normal_coordinates(); };
  LinkingReport r;
  r.loop_plus = PathSample::loop(x0, y_offset, samples);
  r.loop_minus = PathSample::loop(x0, -y_offset, samples);
  for (const PathSample* loop : {&r.loop_plus, &r.loop_minus}) {
    for (const ChartPoint& p : loop->points) {
      const double c = collinearity_residual(pair, p);
      if (!(c > pair.tol.collinearity)) {
        throw Error(ErrorCode::LoopMeetsCol, "linking loop meets the collinearity set", c);
      }
    }
  }
  const CircleDegree plus = circle_degree(normal, r.loop_plus);
  const CircleDegree minus = circle_degree(normal, r.loop_minus);
  r.ell_plus = plus.degree;
  r.ell_minus = minus.degree;
  r.residual_plus = plus.residual;
  r.residual_minus = minus.residual;
  return r;
}

LinkIndexReport verify_link_index(const FieldPair& pair, const Frame& frame, const EssentialTorus& torus,
                                  double y_offset, double x0, const DegreeOptions& opts) {
  bool all_collinear = true;
  for (const ChartPoint& p : scan_grid(pair.domain, 8)) {
    if (collinearity_residual(pair, p) > pair.tol.collinearity) {
      all_collinear = false;
      break;
    }
  }
  if (all_collinear) {
    throw Error(ErrorCode::PreconditionFailed, "X and Y are collinear everywhere; the normal component is zero");
  }
  LinkIndexReport r;
  r.index = index_region(*pair.X, frame, torus, opts);
  r.linking = linking_numbers(pair, frame, y_offset, x0);
  r.identity_holds = std::abs(r.index.value) == std::abs(r.linking.ell_plus - r.linking.ell_minus);
  return r;
}

Spectrum classify_derivative(const Mat2& dP, double base_tol) {
  Spectrum s;
  s.dP = dP;
  const double tr = dP.trace();
  const double det = dP.determinant();
  const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * det));
  s.lambda1 = 0.5 * (tr + disc);
  s.lambda2 = 0.5 * (tr - disc);
  const Eigen::JacobiSVD<Mat2> svd(dP);
  const Vec2 sv = svd.singularValues();
  const double cond = sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
  s.tolerance = base_tol * std::max(1.0, cond);
  const bool off_one = std::abs(s.lambda1 - 1.0) > s.tolerance || std::abs(s.lambda2 - 1.0) > s.tolerance;
  const bool on_circle =
      std::abs(std::abs(s.lambda1) - 1.0) <= s.tolerance && std::abs(std::abs(s.lambda2) - 1.0) <= s.tolerance;
  if (off_one && on_circle && std::abs(s.lambda1.imag()) > s.tolerance) {
    s.classification = FixedPointClass::Elliptic;
  } else if (off_one) {
    s.classification = FixedPointClass::PartiallyHyperbolic;
  } else if ((dP - Mat2::Identity()).norm() <= s.tolerance) {
    s.classification = FixedPointClass::IdentityLike;
  } else {
    s.classification = FixedPointClass::Parabolic;
  }
  return s;
}

Spectrum fixed_point_spectrum(const FieldPair& pair, const Frame& frame, const ChartPoint& x, double fixed_tol,
                              double base_tol) {
  const HolonomyRecord rec = return_map(pair, frame, x);
  const double moved = rec.end.distance(x);
  if (!(moved < fixed_tol)) throw Error(ErrorCode::NotFixed, "point is not fixed by the return map", moved);
  Spectrum s = classify_derivative(rec.dP, base_tol);
  s.fixed_residual = moved;
  return s;
}

}  // namespace torlink
