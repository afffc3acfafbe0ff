#pragma once

#include "torlink/chart.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <vector>

namespace torlink {

// ---------------------------------------------------------------------------
// Circle-valued maps along paths

/// Ordered chart points; closed paths repeat their first point at the end.
struct PathSample {
  std::vector<ChartPoint> points;
  bool closed = false;

  /// {(x0, y0)} x R/Z traversed once in the positive theta direction.
  static PathSample loop(double x0, double y0, int samples = 128);
  /// Straight chart segment from a to b (shortest arc in theta).
  static PathSample segment(const ChartPoint& a, const ChartPoint& b, int samples = 64);
};

/// Unwrapped angles (radians) along a refined path; |values[i+1] - values[i]| < pi.
struct AngleLift {
  std::vector<double> values;
  double total = 0.0;
};

struct AngleOptions {
  /// Consecutive samples whose angles differ by more than this are bisected.
  double max_jump = std::numbers::pi / 2;
  int max_depth = 30;
  /// Map values shorter than this count as zeros of the map.
  double zero_threshold = 1e-300;
};

using PlaneMap = std::function<Vec2(const ChartPoint&)>;

/// Lift of p -> map(p)/|map(p)| along the path with adaptive bisection.
/// Throws UnwrapFailure when the depth cap is hit or the map vanishes.
AngleLift angle_lift(const PlaneMap& map, const PathSample& path, const AngleOptions& opts = {});

inline double angular_variation(const PlaneMap& map, const PathSample& path, const AngleOptions& opts = {}) {
  return angle_lift(map, path, opts).total;
}

struct CircleDegree {
  int degree = 0;
  double raw = 0.0;       // angular variation / 2 pi
  double residual = 0.0;  // |raw - degree|
};

/// Winding number along a closed path; throws NonIntegral when the residual
/// reaches `residual_limit`.
CircleDegree circle_degree(const PlaneMap& map, const PathSample& closed_path, const AngleOptions& opts = {},
                           double residual_limit = 0.05);

/// Projection of a sphere point onto the equator along meridians; throws AtPole.
Vec2 meridian_project(const Vec3& p, double pole_threshold = 1e-12);

// ---------------------------------------------------------------------------
// Sphere-valued maps on triangulated surfaces

enum class SurfaceKind { Sphere, Torus };

/// Triangulated sphere (vertices are unit vectors) or torus (vertices are
/// parameters (s, t, 0) in [0,1)^2), with one unit value per vertex.
struct MeshMap {
  SurfaceKind kind = SurfaceKind::Sphere;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> values;
};

/// Maps a domain point of a MeshMap (sphere point or torus parameter) to S^2.
using SurfaceMap = std::function<Vec3(const Vec3&)>;

/// Icosahedral sphere, outward orientation, 20 * 4^level triangles.
MeshMap icosphere(int level);
/// ns x nt periodic parameter grid, two triangles per cell, (s, t) orientation.
MeshMap torus_grid(int ns, int nt);
/// One 1-to-4 subdivision of the domain triangulation (values cleared).
MeshMap refine(const MeshMap& mesh);
/// Domain midpoint consistent with the surface kind.
Vec3 domain_midpoint(SurfaceKind kind, const Vec3& a, const Vec3& b);
/// Fill values from a map (normalized); evaluation may run on `jobs` threads.
void sample(MeshMap& mesh, const SurfaceMap& map, int jobs = 1);

struct DegreeOptions {
  int jobs = 1;
  /// Image triangles with an edge longer than this (radians) are subdivided
  /// when a resampling map is available.
  double subdivide_above = 0.5;
  int max_depth = 12;
  double residual_limit = 0.05;
};

struct DegreeReport {
  int degree = 0;
  double raw = 0.0;
  double residual = 0.0;
  std::size_t triangles = 0;         // after automatic subdivision
  double max_image_diameter = 0.0;   // largest image edge (radians)
};

/// Brouwer degree as the sum of signed solid angles of the image triangles
/// divided by 4 pi.  Triangle contributions are summed in fixed-size blocks in
/// mesh order with compensated summation, so the result is bit-identical for
/// any worker count.  Throws DegenerateTriangle or NonIntegral.
DegreeReport sphere_degree(const MeshMap& mesh, const SurfaceMap* resample = nullptr, const DegreeOptions& opts = {});

/// Signed solid angle of the geodesic triangle (a, b, c) on the unit sphere.
double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c);

/// Model map T^2 -> S^2 with winding d_plus on s in [0, 1/2] and d_minus on
/// [1/2, 1]: (|sin 2 pi s| e^{2 pi i d t}, cos 2 pi s).
Vec3 model_map(int d_plus, int d_minus, double s, double t);

inline SurfaceMap model_surface_map(int d_plus, int d_minus) {
  return [=](const Vec3& st) { return model_map(d_plus, d_minus, st.x(), st.y()); };
}

/// Indexed-triangle text format: `surface sphere|torus`, `v px py pz fx fy fz`,
/// `f i j k` (0-based), `#` comments.
MeshMap read_mesh(std::istream& in);
void write_mesh(std::ostream& out, const MeshMap& mesh);

}  // namespace torlink
