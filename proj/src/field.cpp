#include "torlink/field.hpp"

#include "torlink/error.hpp"

#include <Eigen/LU>

namespace torlink {

FieldSpec::FieldSpec(Evaluator evaluator, JacobianFn jacobian, double fd_step)
    : evaluator_(std::move(evaluator)), jacobian_(std::move(jacobian)), fd_step_(fd_step) {
  if (!(fd_step_ > 0.0)) throw Error(ErrorCode::PreconditionFailed, "fd_step must be positive");
}

FieldSpec FieldSpec::constant(const Vec3& v) {
  return FieldSpec([v](const ChartPoint&) { return v; }, [](const ChartPoint&) { return Mat3::Zero().eval(); });
}

FieldSpec linear_combination(const FieldHandle& x, double a, const FieldHandle& y, double b) {
  FieldSpec::JacobianFn jac;
  if (x->has_jacobian() && y->has_jacobian()) {
    jac = [x, a, y, b](const ChartPoint& p) {
      return Mat3(a * x->analytic_jacobian()(p) + b * y->analytic_jacobian()(p));
    };
  }
  return FieldSpec([x, a, y, b](const ChartPoint& p) { return Vec3(a * x->value(p) + b * y->value(p)); },
                   std::move(jac), std::min(x->fd_step(), y->fd_step()));
}

Vec3 FieldSpec::value(const ChartPoint& p) const {
  Vec3 v = evaluator_(p);
  if (!v.allFinite()) throw Error(ErrorCode::NonFinite, "field evaluation produced a non-finite value");
  return v;
}

Frame::Frame(FieldHandle y, Fibration fibration, double det_threshold)
    : y_(std::move(y)), fibration_(std::move(fibration)), det_threshold_(det_threshold) {}

Vec3 Frame::e1(const ChartPoint& p) const {
  const Vec3 g = fibration_.gradient(p);
  return {1.0, 0.0, -g.x() / g.z()};
}

Vec3 Frame::e2(const ChartPoint& p) const {
  const Vec3 g = fibration_.gradient(p);
  return {0.0, 1.0, -g.y() / g.z()};
}

Mat3 Frame::matrix(const ChartPoint& p) const {
  Mat3 m;
  m.col(0) = e1(p);
  m.col(1) = e2(p);
  m.col(2) = e3(p);
  return m;
}

Mat3 Frame::checked_matrix(const ChartPoint& p) const {
  Mat3 m = matrix(p);
  const double det = m.determinant();
  if (!(std::abs(det) >= det_threshold_)) {
    throw Error(ErrorCode::DegenerateFrame, "frame determinant below threshold", det);
  }
  return m;
}

Vec3 Frame::coordinates(const ChartPoint& p, const Vec3& v) const {
  return checked_matrix(p).partialPivLu().solve(v);
}

}  // namespace torlink
