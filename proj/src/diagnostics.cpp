#include "torlink/diagnostics.hpp"

#include "torlink/error.hpp"
#include "torlink/parallel.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <array>
#include <cstdint>
#include <optional>

namespace torlink {

Mat3 jacobian_at(const FieldSpec& f, const ChartPoint& p) {
  if (f.has_jacobian()) {
    Mat3 j = f.analytic_jacobian()(p);
    if (!j.allFinite()) throw Error(ErrorCode::NonFinite, "analytic Jacobian is not finite");
    return j;
  }
  const double h = f.fd_step();
  Mat3 j;
  for (int c = 0; c < 3; ++c) {
    Vec3 step = Vec3::Zero();
    step[c] = h;
    j.col(c) = (f.value(p.displaced(step)) - f.value(p.displaced(-step))) / (2.0 * h);
  }
  return j;
}

TangentVector commutator_residual(const FieldPair& pair, const ChartPoint& p) {
  const Vec3 x = pair.X->value(p);
  const Vec3 y = pair.Y->value(p);
  const Vec3 bracket = jacobian_at(*pair.Y, p) * x - jacobian_at(*pair.X, p) * y;
  return {p, bracket};
}

double collinearity_residual(const FieldPair& pair, const ChartPoint& p) {
  return pair.X->value(p).cross(pair.Y->value(p)).norm();
}

double ratio_mu(const FieldPair& pair, const ChartPoint& p) {
  const Vec3 x = pair.X->value(p);
  const Vec3 y = pair.Y->value(p);
  const double yy = y.squaredNorm();
  if (std::sqrt(yy) < pair.tol.zero_denominator) {
    throw Error(ErrorCode::ZeroDenominator, "Y vanishes at the requested point", std::sqrt(yy));
  }
  return x.dot(y) / yy;
}

namespace {

struct Grid {
  int n = 0;
  double radius = 0.0;
  std::vector<std::int64_t> slot;  // linear (i, j, k) -> index into points or -1

  double coord(int i) const { return n == 1 ? 0.0 : -radius + 2.0 * radius * i / (n - 1); }
  std::int64_t linear(int i, int j, int k) const { return (static_cast<std::int64_t>(i) * n + j) * n + k; }
};

Grid make_grid(const SolidTorusDomain& domain, int grid_res, std::vector<ChartPoint>& points) {
  Grid g;
  g.n = grid_res;
  g.radius = domain.disc_radius;
  g.slot.assign(static_cast<std::size_t>(grid_res) * grid_res * grid_res, -1);
  for (int i = 0; i < grid_res; ++i) {
    for (int j = 0; j < grid_res; ++j) {
      const double x = g.coord(i), y = g.coord(j);
      if (x * x + y * y > domain.disc_radius * domain.disc_radius * (1.0 + 1e-12)) continue;
      for (int k = 0; k < grid_res; ++k) {
        g.slot[g.linear(i, j, k)] = static_cast<std::int64_t>(points.size());
        points.emplace_back(x, y, static_cast<double>(k) / grid_res);
      }
    }
  }
  return g;
}

}  // namespace

std::vector<ChartPoint> scan_grid(const SolidTorusDomain& domain, int grid_res) {
  std::vector<ChartPoint> points;
  make_grid(domain, grid_res, points);
  return points;
}

std::vector<ChartPoint> find_collinearity(const FieldPair& pair, int grid_res, double refine_tol, int jobs) {
  if (grid_res < 8) throw Error(ErrorCode::PreconditionFailed, "find_collinearity needs grid_res >= 8");
  std::vector<ChartPoint> points;
  const Grid grid = make_grid(pair.domain, grid_res, points);

  auto cross_at = [&](const ChartPoint& p) { return Vec3(pair.X->value(p).cross(pair.Y->value(p))); };

  std::vector<Vec3> cross(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t i) { cross[i] = cross_at(points[i]); });

  // Each grid point owns its own hit flag and up to three forward edges.
  struct Slot {
    std::optional<ChartPoint> vertex;
    std::array<std::optional<ChartPoint>, 3> edge;
  };
  std::vector<Slot> slots(points.size());

  const int n = grid.n;
  std::vector<std::array<int, 3>> ijk(points.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (auto s = grid.slot[grid.linear(i, j, k)]; s >= 0) ijk[s] = {i, j, k};

  parallel_for(points.size(), jobs, [&](std::size_t a) {
    if (cross[a].norm() < refine_tol) {
      slots[a].vertex = points[a];
      return;
    }
    const auto [i, j, k] = ijk[a];
    const std::array<std::array<int, 3>, 3> nbr = {{{i + 1, j, k}, {i, j + 1, k}, {i, j, (k + 1) % n}}};
    for (int d = 0; d < 3; ++d) {
      const auto [ni, nj, nk] = nbr[d];
      if (ni >= n || nj >= n) continue;
      const auto b = grid.slot[grid.linear(ni, nj, nk)];
      if (b < 0 || cross[b].norm() < refine_tol) continue;
      if (cross[a].dot(cross[b]) >= 0.0) continue;
      // Orientation flip of the cross product: bisect the signed proxy.
      const Vec3 ref = cross[a];
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cross_at(interpolate(points[a], points[b], mid)).dot(ref) > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const ChartPoint candidate = interpolate(points[a], points[b], 0.5 * (lo + hi));
      if (cross_at(candidate).norm() < refine_tol) slots[a].edge[d] = candidate;
    }
  });

  std::vector<ChartPoint> out;
  auto push_unique = [&](const ChartPoint& p) {
    for (const auto& q : out)
      if (q.distance(p) < refine_tol) return;
    out.push_back(p);
  };
  for (const auto& s : slots) {
    if (s.vertex) push_unique(*s.vertex);
    for (const auto& e : s.edge)
      if (e) push_unique(*e);
  }
  return out;
}

Frame build_frame(const FieldPair& pair, int sample_res) {
  Frame frame(pair.Y, pair.domain.fibration, pair.tol.frame_det);
  for (const auto& p : scan_grid(pair.domain, std::max(sample_res, 2))) {
    frame.checked_matrix(p);
  }
  return frame;
}

}  // namespace torlink
