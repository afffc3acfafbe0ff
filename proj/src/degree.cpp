#include "torlink/degree.hpp"

#include "torlink/error.hpp"
#include "torlink/parallel.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

namespace torlink {

namespace {

constexpr double kPi = std::numbers::pi;

double angle_between(const Vec2& a, const Vec2& b) {
  return std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
}

double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

}  // namespace

PathSample PathSample::loop(double x0, double y0, int samples) {
  PathSample path;
  path.closed = true;
  path.points.reserve(samples + 1);
  for (int k = 0; k < samples; ++k) path.points.emplace_back(x0, y0, static_cast<double>(k) / samples);
  path.points.push_back(path.points.front());
  return path;
}

PathSample PathSample::segment(const ChartPoint& a, const ChartPoint& b, int samples) {
  PathSample path;
  samples = std::max(samples, 1);
  for (int k = 0; k <= samples; ++k) path.points.push_back(interpolate(a, b, static_cast<double>(k) / samples));
  return path;
}

AngleLift angle_lift(const PlaneMap& map, const PathSample& path, const AngleOptions& opts) {
  AngleLift lift;
  if (path.points.empty()) return lift;

  auto eval = [&](const ChartPoint& p) {
    const Vec2 v = map(p);
    if (!v.allFinite() || v.norm() <= opts.zero_threshold) {
      throw Error(ErrorCode::UnwrapFailure, "map vanishes or is not finite on the path");
    }
    return v;
  };

  Vec2 prev = eval(path.points.front());
  double angle = std::atan2(prev.y(), prev.x());
  lift.values.push_back(angle);

  // Depth-first bisection of a segment until each step turns by <= max_jump.
  struct Pending {
    ChartPoint b;
    Vec2 vb;
    int depth;
  };
  std::vector<Pending> stack;
  for (std::size_t i = 1; i < path.points.size(); ++i) {
    const ChartPoint& a0 = path.points[i - 1];
    const ChartPoint& b0 = path.points[i];
    stack.push_back({b0, eval(b0), 0});
    ChartPoint cur = a0;
    while (!stack.empty()) {
      Pending seg = stack.back();
      const double jump = angle_between(prev, seg.vb);
      if (std::abs(jump) <= opts.max_jump) {
        angle += jump;
        lift.values.push_back(angle);
        prev = seg.vb;
        cur = seg.b;
        stack.pop_back();
        continue;
      }
      if (seg.depth >= opts.max_depth) {
        throw Error(ErrorCode::UnwrapFailure, "angle unwrapping hit the refinement depth cap");
      }
      const ChartPoint mid = interpolate(cur, seg.b, 0.5);
      stack.back().depth = seg.depth + 1;
      stack.push_back({mid, eval(mid), seg.depth + 1});
    }
  }
  lift.total = lift.values.back() - lift.values.front();
  return lift;
}

CircleDegree circle_degree(const PlaneMap& map, const PathSample& closed_path, const AngleOptions& opts,
                           double residual_limit) {
  if (!closed_path.closed) throw Error(ErrorCode::PreconditionFailed, "circle_degree needs a closed path");
  CircleDegree d;
  d.raw = angular_variation(map, closed_path, opts) / (2.0 * kPi);
  d.degree = static_cast<int>(std::lround(d.raw));
  d.residual = std::abs(d.raw - d.degree);
  if (d.residual >= residual_limit) throw Error(ErrorCode::NonIntegral, "winding is not close to an integer", d.residual);
  return d;
}

Vec2 meridian_project(const Vec3& p, double pole_threshold) {
  const double r2 = p.x() * p.x() + p.y() * p.y();
  if (r2 <= pole_threshold) throw Error(ErrorCode::AtPole, "point is a pole of the sphere");
  const double r = std::sqrt(r2);
  return {p.x() / r, p.y() / r};
}

// ---------------------------------------------------------------------------

MeshMap icosphere(int level) {
  MeshMap mesh;
  mesh.kind = SurfaceKind::Sphere;
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::array<Vec3, 12> base = {Vec3(-1, t, 0), Vec3(1, t, 0),   Vec3(-1, -t, 0), Vec3(1, -t, 0),
                                     Vec3(0, -1, t), Vec3(0, 1, t),   Vec3(0, -1, -t), Vec3(0, 1, -t),
                                     Vec3(t, 0, -1), Vec3(t, 0, 1),   Vec3(-t, 0, -1), Vec3(-t, 0, 1)};
  for (const auto& v : base) mesh.vertices.push_back(v.normalized());
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                    {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                    {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) mesh = refine(mesh);
  return mesh;
}

MeshMap torus_grid(int ns, int nt) {
  if (ns < 3 || nt < 3) throw Error(ErrorCode::PreconditionFailed, "torus grid needs at least 3x3 cells");
  MeshMap mesh;
  mesh.kind = SurfaceKind::Torus;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j) mesh.vertices.emplace_back(static_cast<double>(i) / ns, static_cast<double>(j) / nt, 0.0);
  auto id = [nt, ns](int i, int j) { return (i % ns) * nt + (j % nt); };
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < nt; ++j) {
      mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return mesh;
}

Vec3 domain_midpoint(SurfaceKind kind, const Vec3& a, const Vec3& b) {
  if (kind == SurfaceKind::Sphere) return (a + b).normalized();
  return {reduce_turns(a.x() + 0.5 * circle_delta(a.x(), b.x())), reduce_turns(a.y() + 0.5 * circle_delta(a.y(), b.y())),
          0.0};
}

MeshMap refine(const MeshMap& mesh) {
  MeshMap out;
  out.kind = mesh.kind;
  out.vertices = mesh.vertices;
  std::map<std::pair<int, int>, int> midpoints;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
    const int idx = static_cast<int>(out.vertices.size());
    out.vertices.push_back(domain_midpoint(mesh.kind, mesh.vertices[a], mesh.vertices[b]));
    midpoints.emplace(key, idx);
    return idx;
  };
  out.triangles.reserve(mesh.triangles.size() * 4);
  for (const auto& [a, b, c] : mesh.triangles) {
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    out.triangles.push_back({a, ab, ca});
    out.triangles.push_back({ab, b, bc});
    out.triangles.push_back({ca, bc, c});
    out.triangles.push_back({ab, bc, ca});
  }
  return out;
}

void sample(MeshMap& mesh, const SurfaceMap& map, int jobs) {
  mesh.values.assign(mesh.vertices.size(), Vec3::Zero());
  parallel_for(mesh.vertices.size(), jobs, [&](std::size_t i) {
    const Vec3 v = map(mesh.vertices[i]);
    if (!v.allFinite() || v.norm() == 0.0) {
      throw Error(ErrorCode::DegenerateTriangle, "surface map value is zero or not finite at a mesh vertex");
    }
    mesh.values[i] = v.normalized();
  });
}

double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double num = a.dot(b.cross(c));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

namespace {

struct TriangleSum {
  CompensatedSum omega;
  std::size_t triangles = 0;
  double max_edge = 0.0;
};

void accumulate(SurfaceKind kind, const SurfaceMap* resample, const DegreeOptions& opts, const Vec3& da,
                const Vec3& db, const Vec3& dc, const Vec3& va, const Vec3& vb, const Vec3& vc, int depth,
                TriangleSum& acc) {
  const double edge = std::max({angle_between(va, vb), angle_between(vb, vc), angle_between(vc, va)});
  if (edge > opts.subdivide_above && resample != nullptr && depth < opts.max_depth) {
    const Vec3 dab = domain_midpoint(kind, da, db), dbc = domain_midpoint(kind, db, dc),
               dca = domain_midpoint(kind, dc, da);
    auto value = [&](const Vec3& d) {
      const Vec3 v = (*resample)(d);
      if (!v.allFinite() || v.norm() == 0.0) {
        throw Error(ErrorCode::DegenerateTriangle, "surface map value is zero or not finite during subdivision");
      }
      return Vec3(v.normalized());
    };
    const Vec3 vab = value(dab), vbc = value(dbc), vca = value(dca);
    accumulate(kind, resample, opts, da, dab, dca, va, vab, vca, depth + 1, acc);
    accumulate(kind, resample, opts, dab, db, dbc, vab, vb, vbc, depth + 1, acc);
    accumulate(kind, resample, opts, dca, dbc, dc, vca, vbc, vc, depth + 1, acc);
    accumulate(kind, resample, opts, dab, dbc, dca, vab, vbc, vca, depth + 1, acc);
    return;
  }
  if (!(edge < kPi / 2)) {
    throw Error(ErrorCode::DegenerateTriangle, "image triangle too large for an unambiguous solid angle", edge);
  }
  acc.omega.add(solid_angle(va, vb, vc));
  acc.triangles += 1;
  acc.max_edge = std::max(acc.max_edge, edge);
}

}  // namespace

DegreeReport sphere_degree(const MeshMap& mesh, const SurfaceMap* resample, const DegreeOptions& opts) {
  if (mesh.values.size() != mesh.vertices.size()) {
    throw Error(ErrorCode::PreconditionFailed, "mesh values do not match its vertices");
  }
  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (mesh.triangles.size() + kBlock - 1) / kBlock;
  std::vector<TriangleSum> partial(blocks);
  parallel_for(blocks, opts.jobs, [&](std::size_t b) {
    const std::size_t end = std::min(mesh.triangles.size(), (b + 1) * kBlock);
    for (std::size_t t = b * kBlock; t < end; ++t) {
      const auto [i, j, k] = mesh.triangles[t];
      accumulate(mesh.kind, resample, opts, mesh.vertices[i], mesh.vertices[j], mesh.vertices[k], mesh.values[i],
                 mesh.values[j], mesh.values[k], 0, partial[b]);
    }
  });
  CompensatedSum total;
  DegreeReport r;
  for (const auto& p : partial) {
    total.add(p.omega.value());
    r.triangles += p.triangles;
    r.max_image_diameter = std::max(r.max_image_diameter, p.max_edge);
  }
  r.raw = total.value() / (4.0 * kPi);
  r.degree = static_cast<int>(std::lround(r.raw));
  r.residual = std::abs(r.raw - r.degree);
  if (r.residual >= opts.residual_limit) {
    throw Error(ErrorCode::NonIntegral, "degree sum is not close to an integer", r.residual);
  }
  return r;
}

Vec3 model_map(int d_plus, int d_minus, double s, double t) {
  s = reduce_turns(s);
  t = reduce_turns(t);
  if (s == 0.0) return {0.0, 0.0, 1.0};
  if (s == 0.5) return {0.0, 0.0, -1.0};
  const int d = s < 0.5 ? d_plus : d_minus;
  const double r = std::abs(std::sin(2.0 * kPi * s));
  const double phase = 2.0 * kPi * d * t;
  return {r * std::cos(phase), r * std::sin(phase), std::cos(2.0 * kPi * s)};
}

MeshMap read_mesh(std::istream& in) {
  MeshMap mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "surface") {
      std::string kind;
      ss >> kind;
      if (kind == "sphere") {
        mesh.kind = SurfaceKind::Sphere;
      } else if (kind == "torus") {
        mesh.kind = SurfaceKind::Torus;
      } else {
        throw ParseError(lineno, 1, "unknown surface kind '" + kind + "'");
      }
    } else if (tag == "v") {
      Vec3 p, v;
      if (!(ss >> p.x() >> p.y() >> p.z() >> v.x() >> v.y() >> v.z())) {
        throw ParseError(lineno, 1, "vertex line needs six numbers");
      }
      mesh.vertices.push_back(p);
      mesh.values.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      if (!(ss >> f[0] >> f[1] >> f[2])) throw ParseError(lineno, 1, "face line needs three indices");
      mesh.triangles.push_back(f);
    } else {
      throw ParseError(lineno, 1, "unknown record '" + tag + "'");
    }
  }
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& f : mesh.triangles)
    for (int i : f)
      if (i < 0 || i >= n) throw Error(ErrorCode::DegenerateTriangle, "face index out of range");
  for (auto& v : mesh.values) {
    if (std::abs(v.norm() - 1.0) > 1e-12) {
      if (v.norm() == 0.0) throw Error(ErrorCode::DegenerateTriangle, "zero value in mesh file");
      v.normalize();
    }
  }
  return mesh;
}

void write_mesh(std::ostream& out, const MeshMap& mesh) {
  out << "# torlink mesh: v = domain point and map value, f = 0-based triangle\n";
  out << "surface " << (mesh.kind == SurfaceKind::Sphere ? "sphere" : "torus") << '\n';
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& p = mesh.vertices[i];
    const Vec3 v = i < mesh.values.size() ? mesh.values[i] : Vec3::Zero();
    out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
  for (const auto& [a, b, c] : mesh.triangles) out << "f " << a << ' ' << b << ' ' << c << '\n';
  out.precision(old);
}

}  // namespace torlink
