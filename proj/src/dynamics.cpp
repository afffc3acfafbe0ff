#include "torlink/dynamics.hpp"

#include "torlink/diagnostics.hpp"
#include "torlink/error.hpp"
#include "torlink/section.hpp"

#include <cmath>
#include <ostream>

namespace torlink {

namespace {

double aitken(double a, double b, double c) {
  const double denom = c - 2.0 * b + a;
  if (std::abs(denom) < 1e-300) return c;
  const double v = c - (c - b) * (c - b) / denom;
  // Reject extrapolations that jump far past the last step.
  if (!std::isfinite(v) || std::abs(v - c) > 1e3 * std::abs(c - b) + 1e-300) return c;
  return v;
}

std::optional<ChartPoint> aitken_point(const FieldPair& pair, const std::vector<ChartPoint>& pts, double level) {
  if (pts.size() < 3) return std::nullopt;
  const ChartPoint& a = pts[pts.size() - 3];
  const ChartPoint& b = pts[pts.size() - 2];
  const ChartPoint& c = pts[pts.size() - 1];
  const double x = aitken(a.x(), b.x(), c.x());
  const double y = aitken(a.y(), b.y(), c.y());
  if (x == c.x() && y == c.y()) return std::nullopt;
  try {
    return pair.domain.fibration.point_on_level(x, y, level);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

double transverse_coordinate(const FieldPair& pair, const ChartPoint& p) {
  return pair.declared_col ? pair.declared_col->nu(p) : p.y();
}

OrbitRecord iterate_return(const FieldPair& pair, const Frame& frame, const ChartPoint& x, int n_max, double tol) {
  if (n_max < 0) throw Error(ErrorCode::PreconditionFailed, "n_max must be non-negative");
  const double level = pair.domain.fibration.level(x);
  OrbitRecord r;
  r.points.push_back(x);
  for (int k = 0; k <= n_max; ++k) {
    const ChartPoint cur = r.points.back();
    const HolonomyRecord h = return_map(pair, frame, cur);
    const double step = h.end.distance(cur);
    if (step < tol) {
      r.converged = true;
      r.limit = cur;
      r.limit_residual = step;
      break;
    }
    if (k == n_max) break;
    r.points.push_back(h.end);
    // Near slowly converging fixed points, accept an extrapolated limit early.
    if (step < 1e-4) {
      if (const auto guess = aitken_point(pair, r.points, level)) {
        const double res = return_map(pair, frame, *guess).end.distance(*guess);
        if (res < tol) {
          r.converged = true;
          r.limit = *guess;
          r.limit_residual = res;
          break;
        }
      }
    }
  }
  r.mu.reserve(r.points.size());
  r.nu.reserve(r.points.size());
  for (const ChartPoint& p : r.points) {
    r.mu.push_back(normal_decompose(pair, frame, p).mu);
    r.nu.push_back(transverse_coordinate(pair, p));
  }
  return r;
}

ConeMeasurement cone_measure(const FieldPair& pair, const Frame& frame, const ChartPoint& x, double fixed_threshold) {
  const HolonomyRecord h = return_map(pair, frame, x);
  ConeMeasurement m;
  m.displacement = h.end.distance(x);
  if (!(m.displacement >= fixed_threshold)) {
    throw Error(ErrorCode::FixedPoint, "cone ratio is undefined at a fixed point", m.displacement);
  }
  m.mu_change = std::abs(normal_decompose(pair, frame, h.end).mu - normal_decompose(pair, frame, x).mu);
  m.ratio = m.mu_change / m.displacement;
  return m;
}

double segment_sweep(const FieldPair& pair, const Frame& frame, const ChartPoint& x, int samples) {
  if (samples < 2) throw Error(ErrorCode::PreconditionFailed, "segment needs at least two samples");
  const ChartPoint p1 = return_map(pair, frame, x).end;
  const ChartPoint p2 = return_map(pair, frame, p1).end;
  const Fibration& fib = pair.domain.fibration;
  const double level = fib.level(x);

  PathSample seg;
  seg.points.reserve(static_cast<std::size_t>(samples) + 1);
  for (int i = 0; i <= samples; ++i) {
    const double s = static_cast<double>(i) / samples;
    seg.points.push_back(fib.point_on_level((1 - s) * x.x() + s * p2.x(), (1 - s) * x.y() + s * p2.y(), level));
  }

  if (pair.declared_col) {
    double prev = pair.declared_col->nu(seg.points.front());
    for (const ChartPoint& p : seg.points) {
      const double nu = pair.declared_col->nu(p);
      if (nu == 0.0 || (nu > 0.0) != (prev > 0.0)) {
        throw Error(ErrorCode::SegmentMeetsCol, "segment from x to P^2(x) meets Col", nu);
      }
      prev = nu;
    }
  } else {
    for (const ChartPoint& p : seg.points) {
      const double c = collinearity_residual(pair, p);
      if (!(c > pair.tol.collinearity)) {
        throw Error(ErrorCode::SegmentMeetsCol, "segment from x to P^2(x) meets a collinear point", c);
      }
    }
  }

  const PlaneMap normal = [&](const ChartPoint& p) { return normal_decompose(pair, frame, p).normal_coordinates(); };
  return angular_variation(normal, seg);
}

void write_orbit_rows(std::ostream& out, int orbit, const OrbitRecord& record) {
  const auto old = out.precision(17);
  for (std::size_t k = 0; k < record.points.size(); ++k) {
    const ChartPoint& p = record.points[k];
    out << orbit << ',' << k << ',' << p.x() << ',' << p.y() << ',' << p.theta() << ',' << record.mu[k] << ','
        << record.nu[k] << '\n';
  }
  out.precision(old);
}

}  // namespace torlink
