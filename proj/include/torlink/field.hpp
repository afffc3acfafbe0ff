#pragma once

#include "torlink/chart.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace torlink {

/// A C^1 vector field on the chart.  The evaluator always receives a point with
/// reduced theta, which makes every FieldSpec theta-periodic by construction.
class FieldSpec {
 public:
  using Evaluator = std::function<Vec3(const ChartPoint&)>;
  using JacobianFn = std::function<Mat3(const ChartPoint&)>;

  static constexpr double kDefaultFdStep = 1e-5;

  explicit FieldSpec(Evaluator evaluator, JacobianFn jacobian = {}, double fd_step = kDefaultFdStep);

  /// Constant field; its Jacobian is the zero matrix.
  static FieldSpec constant(const Vec3& v);

  /// Field value; throws NonFinite on NaN/Inf.
  Vec3 value(const ChartPoint& p) const;
  TangentVector tangent(const ChartPoint& p) const { return {p, value(p)}; }

  bool has_jacobian() const { return static_cast<bool>(jacobian_); }
  const JacobianFn& analytic_jacobian() const { return jacobian_; }
  double fd_step() const { return fd_step_; }

 private:
  Evaluator evaluator_;
  JacobianFn jacobian_;
  double fd_step_;
};

using FieldHandle = std::shared_ptr<const FieldSpec>;

/// a*X + b*Y; carries an analytic Jacobian when both inputs do.
FieldSpec linear_combination(const FieldHandle& x, double a, const FieldHandle& y, double b);

/// Declared collinearity annulus {y = 0}; nu is the transverse coordinate.
struct ColAnnulus {
  double nu(const ChartPoint& p) const { return p.y(); }
};

struct Tolerances {
  double fd_step = FieldSpec::kDefaultFdStep;
  double collinearity = 1e-8;
  double frame_det = 1e-6;
  double zero_denominator = 1e-14;
  double flow = 1e-10;
  double crossing = 1e-10;
};

struct FieldPair {
  FieldHandle X;
  FieldHandle Y;
  SolidTorusDomain domain;
  std::optional<ColAnnulus> declared_col;
  Tolerances tol;
};

/// Basis (e1, e2, e3) with e3 = Y and e1, e2 the fiber-tangent lifts of the
/// chart directions d/dx, d/dy.  On an untilted fibration this is the canonical
/// chart frame; along a declared Col {y = 0}, e1 is tangent to Col.
class Frame {
 public:
  Frame(FieldHandle y, Fibration fibration, double det_threshold = 1e-6);

  Vec3 e1(const ChartPoint& p) const;
  Vec3 e2(const ChartPoint& p) const;
  Vec3 e3(const ChartPoint& p) const { return y_->value(p); }

  /// Columns e1, e2, e3.
  Mat3 matrix(const ChartPoint& p) const;

  /// Coordinates of v in the frame at p; throws DegenerateFrame.
  Vec3 coordinates(const ChartPoint& p, const Vec3& v) const;

  /// Frame matrix at p, checked against the determinant threshold.
  Mat3 checked_matrix(const ChartPoint& p) const;

  const FieldHandle& y_field() const { return y_; }
  const Fibration& fibration() const { return fibration_; }
  double det_threshold() const { return det_threshold_; }

 private:
  FieldHandle y_;
  Fibration fibration_;
  double det_threshold_;
};

}  // namespace torlink
