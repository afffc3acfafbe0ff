#include "torlink/chart.hpp"

#include "torlink/error.hpp"

namespace torlink {

double reduce_turns(double theta) {
  double r = theta - std::floor(theta);
  // floor can return theta itself for tiny negative inputs: r == 1.0
  return r >= 1.0 ? 0.0 : r;
}

double circle_delta(double a, double b) {
  double d = reduce_turns(b - a);
  return d > 0.5 ? d - 1.0 : d;
}

ChartPoint interpolate(const ChartPoint& a, const ChartPoint& b, double s) {
  return a.displaced(s * a.delta_to(b));
}

Fibration Fibration::tilted(double c) {
  Fibration f;
  f.lifted_ = [c](double x, double, double s) { return s - c * x; };
  f.gradient_ = [c](double, double, double) { return Vec3(-c, 0.0, 1.0); };
  f.tilt_ = c;
  return f;
}

Fibration Fibration::custom(Lifted lifted, Gradient gradient) {
  Fibration f;
  f.lifted_ = std::move(lifted);
  f.gradient_ = std::move(gradient);
  return f;
}

Vec3 Fibration::gradient(const Vec3& s) const {
  if (gradient_) return gradient_(s.x(), s.y(), s.z());
  constexpr double h = 1e-6;
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 a = s, b = s;
    a[i] += h;
    b[i] -= h;
    g[i] = (lifted(a) - lifted(b)) / (2 * h);
  }
  return g;
}

ChartPoint Fibration::point_on_level(double x, double y, double level) const {
  // lifted(x, y, s) - level must hit an integer; start from the nearest one.
  double s = level;
  const double target = level + std::round(lifted_(x, y, s) - level);
  for (int it = 0; it < 60; ++it) {
    double g = lifted_(x, y, s) - target;
    if (std::abs(g) < 1e-15) break;
    double ds = gradient(Vec3(x, y, s)).z();
    if (std::abs(ds) < 1e-14) {
      throw Error(ErrorCode::NotTransverse, "fibration has no theta-derivative at the requested point");
    }
    s -= g / ds;
  }
  return {x, y, s};
}

}  // namespace torlink
