#include "torlink/section.hpp"

#include "torlink/error.hpp"

#include <Eigen/LU>

namespace torlink {

HolonomyRecord holonomy(const FieldPair& pair, const Frame& frame, const ChartPoint& x, double t) {
  HolonomyRecord rec;
  rec.start = x;
  rec.end = x;
  rec.level_change = t;
  if (t == 0.0) return rec;
  if (t < 0.0) throw Error(ErrorCode::PreconditionFailed, "holonomy level change must be non-negative");

  const CrossingEvent ev = advance_levels(*pair.Y, pair.domain.fibration, x, t, FlowOptions::for_pair(pair), true);
  rec.end = ev.point;
  rec.tau = ev.time;
  rec.dflow = *ev.dflow;

  // DY_tau v = DP v - (Dtau v) Y(P): decompose in the frame at the end point.
  Eigen::Matrix<double, 3, 2> start_basis;
  start_basis.col(0) = frame.e1(x);
  start_basis.col(1) = frame.e2(x);
  const Eigen::Matrix<double, 3, 2> image = rec.dflow * start_basis;
  const Eigen::Matrix<double, 3, 2> coords = frame.checked_matrix(rec.end).partialPivLu().solve(image);
  rec.dP = coords.topRows<2>();
  rec.dtau = -coords.row(2);
  return rec;
}

NormalDecomposition normal_decompose(const FieldPair& pair, const Frame& frame, const ChartPoint& x) {
  const Vec3 c = frame.coordinates(x, pair.X->value(x));
  NormalDecomposition nd;
  nd.alpha = c[0];
  nd.beta = c[1];
  nd.mu = c[2];
  nd.n_vec = TangentVector(x, c[0] * frame.e1(x) + c[1] * frame.e2(x));
  return nd;
}

ReturnIdentity return_identity_residual(const FieldPair& pair, const Frame& frame, const ChartPoint& x) {
  ReturnIdentity out;
  out.holonomy = return_map(pair, frame, x);
  const NormalDecomposition at_x = normal_decompose(pair, frame, x);
  const NormalDecomposition at_px = normal_decompose(pair, frame, out.holonomy.end);
  out.lhs = -out.holonomy.dtau.dot(at_x.normal_coordinates());
  out.rhs = at_px.mu - at_x.mu;
  out.residual = std::abs(out.lhs - out.rhs);
  return out;
}

}  // namespace torlink
