#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>

namespace torlink {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Reduce an angular coordinate (units of full turns) into [0, 1).
double reduce_turns(double theta);

/// Signed shortest difference b - a on the circle R/Z, in (-1/2, 1/2].
double circle_delta(double a, double b);

/// Point of the solid torus D^2 x (R/Z) in the flat chart (x, y, theta).
/// theta is kept reduced modulo 1 at all times.
class ChartPoint {
 public:
  ChartPoint() = default;
  ChartPoint(double x, double y, double theta) : x_(x), y_(y), theta_(reduce_turns(theta)) {}

  /// Build from a chart vector whose third component may be unreduced.
  static ChartPoint from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

  double x() const { return x_; }
  double y() const { return y_; }
  double theta() const { return theta_; }
  double radius() const { return std::hypot(x_, y_); }

  Vec3 vector() const { return {x_, y_, theta_}; }

  /// p + v in the chart, theta re-reduced.
  ChartPoint displaced(const Vec3& v) const { return {x_ + v.x(), y_ + v.y(), theta_ + v.z()}; }

  /// q - p with the theta component taken along the shortest arc.
  Vec3 delta_to(const ChartPoint& q) const { return {q.x_ - x_, q.y_ - y_, circle_delta(theta_, q.theta_)}; }

  /// Flat chart distance with the circle metric in theta.
  double distance(const ChartPoint& q) const { return delta_to(q).norm(); }

  bool operator==(const ChartPoint&) const = default;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double theta_ = 0.0;
};

/// Linear interpolation along the chart segment from a to b (shortest arc in theta).
ChartPoint interpolate(const ChartPoint& a, const ChartPoint& b, double s);

struct TangentVector {
  ChartPoint base;
  double vx = 0.0;
  double vy = 0.0;
  double vtheta = 0.0;

  TangentVector() = default;
  TangentVector(const ChartPoint& p, const Vec3& v) : base(p), vx(v.x()), vy(v.y()), vtheta(v.z()) {}

  Vec3 vector() const { return {vx, vy, vtheta}; }
  double norm() const { return vector().norm(); }
};

/// Submersion of the solid torus onto R/Z whose fibers are the sections.
///
/// Stored in lifted form: `lifted(x, y, s)` is a real-valued function of the
/// unreduced angular coordinate s with lifted(x, y, s + 1) = lifted(x, y, s) + 1.
/// Levels of the fibration are the lifted values reduced modulo 1.
class Fibration {
 public:
  using Lifted = std::function<double(double, double, double)>;
  using Gradient = std::function<Vec3(double, double, double)>;

  /// theta - c*x; c = 0 is the plain angular projection.
  static Fibration tilted(double c);
  /// User supplied lifted submersion; gradient by central differences when absent.
  static Fibration custom(Lifted lifted, Gradient gradient = {});

  double lifted(const Vec3& state) const { return lifted_(state.x(), state.y(), state.z()); }
  double level(const ChartPoint& p) const { return reduce_turns(lifted_(p.x(), p.y(), p.theta())); }
  Vec3 gradient(const Vec3& state) const;
  Vec3 gradient(const ChartPoint& p) const { return gradient(p.vector()); }

  /// Point of the fiber Sigma_level above (x, y) (Newton solve in theta).
  ChartPoint point_on_level(double x, double y, double level) const;

  /// Tilt coefficient when built by `tilted`, NaN for custom fibrations.
  double tilt() const { return tilt_; }

 private:
  Lifted lifted_;
  Gradient gradient_;
  double tilt_ = std::numeric_limits<double>::quiet_NaN();
};

struct SolidTorusDomain {
  double disc_radius = 1.0;
  Fibration fibration = Fibration::tilted(0.0);

  bool contains(const ChartPoint& p, double slack = 0.0) const {
    return p.x() * p.x() + p.y() * p.y() <= (disc_radius + slack) * (disc_radius + slack);
  }
};

}  // namespace torlink
