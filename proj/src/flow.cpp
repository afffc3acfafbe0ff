#include "torlink/flow.hpp"

#include "torlink/diagnostics.hpp"
#include "torlink/error.hpp"

#include <algorithm>
#include <cmath>

namespace torlink {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

// Orbit state (x, y, lifted theta), optionally followed by the column-major
// 3x3 variational matrix.
template <int N>
using State = Eigen::Matrix<double, N, 1>;

template <int N>
class Stepper {
 public:
  Stepper(const FieldSpec& f, const FlowOptions& opts) : f_(f), opts_(opts) {}

  State<N> rhs(const State<N>& s) const {
    State<N> d;
    const ChartPoint p = ChartPoint::from_vector(s.template head<3>());
    d.template head<3>() = f_.value(p);
    if constexpr (N == 12) {
      const Mat3 j = jacobian_at(f_, p);
      Eigen::Map<const Mat3> phi(s.data() + 3);
      Eigen::Map<Mat3> dphi(d.data() + 3);
      dphi = j * phi;
    }
    return d;
  }

  struct Trial {
    State<N> y;
    State<N> k_end;
    double err_norm;
    double err_abs;
  };

  // One Dormand-Prince step of size h from y with first stage k1.
  Trial step(const State<N>& y, const State<N>& k1, double h) const {
    const State<N> k2 = rhs(y + h * (a21 * k1));
    const State<N> k3 = rhs(y + h * (a31 * k1 + a32 * k2));
    const State<N> k4 = rhs(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const State<N> k5 = rhs(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const State<N> k6 = rhs(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Trial t;
    t.y = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    t.k_end = rhs(t.y);
    const State<N> err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * t.k_end);
    double norm = 0.0;
    for (int i = 0; i < N; ++i) {
      const double scale = opts_.tol + opts_.tol * std::max(std::abs(y[i]), std::abs(t.y[i]));
      norm = std::max(norm, std::abs(err[i]) / scale);
    }
    t.err_norm = norm;
    t.err_abs = err.template lpNorm<Eigen::Infinity>();
    return t;
  }

  double initial_step(const State<N>& y, const State<N>& k1, double direction) const {
    auto scaled = [&](const State<N>& v) {
      double m = 0.0;
      for (int i = 0; i < N; ++i) m = std::max(m, std::abs(v[i]) / (opts_.tol + opts_.tol * std::abs(y[i])));
      return m;
    };
    const double d0 = scaled(y), d1 = scaled(k1);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, 0.1);
    const State<N> k2 = rhs(y + direction * h0 * k1);
    const double d2 = scaled(k2 - k1) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
    return std::min({100.0 * h0, h1, 0.1});
  }

  bool inside(const State<N>& y) const { return y[0] * y[0] + y[1] * y[1] <= opts_.disc_radius * opts_.disc_radius; }

  void check_domain(const State<N>& y, double t) const {
    if (!inside(y)) throw left_domain(t);
  }

  // Accepted step y0 -> y1 of signed length h from time t0: when it ends
  // outside the disc, the exit time is located by bisection on the step.
  void check_step(const State<N>& y0, const State<N>& k0, double t0, double h, const State<N>& y1) const {
    if (inside(y1)) return;
    if (!inside(y0)) throw left_domain(t0);
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (inside(step(y0, k0, mid * h).y) ? lo : hi) = mid;
    }
    throw left_domain(t0 + hi * h);
  }

  static Error left_domain(double t) {
    return Error(ErrorCode::LeftDomain, "orbit left the solid torus at t = " + std::to_string(t), t);
  }

 private:
  const FieldSpec& f_;
  const FlowOptions& opts_;
};

// Step-size controller state shared by the fixed-end and event drivers.
struct Controller {
  double h = 0.0;
  double err_old = 1e-4;
  bool last_rejected = false;

  // Returns true if the trial is accepted; updates h either way.
  bool update(double err_norm) {
    constexpr double safety = 0.9, alpha = 0.7 / 5.0, beta = 0.4 / 5.0;
    if (err_norm <= 1.0) {
      const double e = std::max(err_norm, 1e-10);
      double fac = safety * std::pow(e, -alpha) * std::pow(err_old, beta);
      fac = std::clamp(fac, 0.2, 5.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      err_old = std::max(err_norm, 1e-4);
      last_rejected = false;
      return true;
    }
    h *= std::max(0.2, safety * std::pow(err_norm, -alpha));
    last_rejected = true;
    return false;
  }
};

template <int N>
State<N> initial_state(const ChartPoint& p) {
  State<N> s = State<N>::Zero();
  s.template head<3>() = p.vector();
  if constexpr (N == 12) {
    Eigen::Map<Mat3>(s.data() + 3) = Mat3::Identity();
  }
  return s;
}

template <int N>
FlowResult to_result(const State<N>& y, double t, std::size_t steps, double est) {
  FlowResult r;
  r.endpoint = ChartPoint::from_vector(y.template head<3>());
  r.time = t;
  r.steps = steps;
  r.est_error = est;
  r.theta_lifted = y[2];
  if constexpr (N == 12) r.dflow = Eigen::Map<const Mat3>(y.data() + 3);
  return r;
}

template <int N>
FlowResult run_fixed(const FieldSpec& f, const ChartPoint& p, double t_end, const FlowOptions& opts) {
  Stepper<N> stepper(f, opts);
  State<N> y = initial_state<N>(p);
  if (t_end == 0.0) return to_result<N>(y, 0.0, 0, 0.0);
  const double dir = t_end > 0 ? 1.0 : -1.0;
  State<N> k1 = stepper.rhs(y);
  Controller ctl;
  ctl.h = stepper.initial_step(y, k1, dir);
  double t = 0.0, est = 0.0;
  std::size_t steps = 0;
  while (dir * (t_end - t) > 0.0) {
    if (steps++ > opts.max_steps) throw Error(ErrorCode::StepUnderflow, "step budget exhausted", t);
    const double remaining = std::abs(t_end - t);
    const bool last = ctl.h >= remaining;
    const double h = last ? remaining : ctl.h;
    if (h < 1e-14 * std::max(1.0, std::abs(t))) throw Error(ErrorCode::StepUnderflow, "step size underflow", t);
    auto trial = stepper.step(y, k1, dir * h);
    const double h_used = h;
    ctl.h = h;
    if (ctl.update(trial.err_norm)) {
      stepper.check_step(y, k1, t, dir * h_used, trial.y);
      t = last ? t_end : t + dir * h_used;
      y = trial.y;
      k1 = trial.k_end;
      est = std::max(est, trial.err_norm * opts.tol);
    }
  }
  return to_result<N>(y, t, steps, est);
}

template <int N>
CrossingEvent run_event(const FieldSpec& f, const Fibration& fib, const ChartPoint& p, double min_time,
                        const std::function<double(double lifted_at_min_time, int direction)>& pick_level,
                        const FlowOptions& opts) {
  Stepper<N> stepper(f, opts);
  State<N> y = initial_state<N>(p);
  double t = 0.0;
  std::size_t steps = 0;
  if (min_time > 0.0) {
    const FlowResult pre = run_fixed<N>(f, p, min_time, opts);
    y.template head<3>() = Vec3(pre.endpoint.x(), pre.endpoint.y(), pre.theta_lifted);
    if constexpr (N == 12) Eigen::Map<Mat3>(y.data() + 3) = *pre.dflow;
    t = min_time;
    steps = pre.steps;
  }

  auto speed = [&](const State<N>& s, const State<N>& k) { return fib.gradient(Vec3(s.template head<3>())).dot(k.template head<3>()); };

  State<N> k1 = stepper.rhs(y);
  const double v0 = speed(y, k1);
  if (v0 == 0.0) throw Error(ErrorCode::NotTransverse, "field is tangent to the fiber at the start point");
  const int direction = v0 > 0 ? 1 : -1;
  const double target = pick_level(fib.lifted(Vec3(y.template head<3>())), direction);
  auto g = [&](const State<N>& s) { return direction * (fib.lifted(Vec3(s.template head<3>())) - target); };

  Controller ctl;
  ctl.h = stepper.initial_step(y, k1, 1.0);
  double g0 = g(y);
  while (true) {
    if (t - min_time > opts.horizon) {
      throw Error(ErrorCode::NoCrossing, "no section crossing within the horizon", opts.horizon);
    }
    if (steps++ > opts.max_steps) throw Error(ErrorCode::StepUnderflow, "step budget exhausted", t);
    if (ctl.h < 1e-14 * std::max(1.0, t)) throw Error(ErrorCode::StepUnderflow, "step size underflow", t);
    const double h = ctl.h;
    auto trial = stepper.step(y, k1, h);
    if (!ctl.update(trial.err_norm)) continue;

    const double g1 = g(trial.y);
    if (direction * speed(trial.y, trial.k_end) <= 0.0) {
      throw Error(ErrorCode::NotTransverse, "fibration derivative changed sign along the orbit", t + h);
    }
    if (g1 >= 0.0) {
      // Bracketed in (0, h]: Illinois regula falsi safeguarded by bisection.
      double lo = 0.0, hi = h, glo = g0, ghi = g1;
      State<N> best = trial.y;
      double best_s = h, best_g = g1;
      int side = 0;
      for (int it = 0; it < 80; ++it) {
        if (std::abs(best_g) < 1e-13 || hi - lo < 1e-15) break;
        double s = hi - ghi * (hi - lo) / (ghi - glo);
        if (!(s > lo && s < hi) || it % 4 == 3) s = 0.5 * (lo + hi);
        const State<N> ys = stepper.step(y, k1, s).y;
        const double gs = g(ys);
        if (std::abs(gs) < std::abs(best_g)) {
          best = ys;
          best_s = s;
          best_g = gs;
        }
        if (gs < 0.0) {
          lo = s;
          glo = gs;
          if (side == -1) ghi *= 0.5;
          side = -1;
        } else {
          hi = s;
          ghi = gs;
          if (side == 1) glo *= 0.5;
          side = 1;
        }
      }
      if (std::abs(best_g) > opts.crossing_tol) {
        throw Error(ErrorCode::NoCrossing, "crossing refinement did not reach the tolerance", best_g);
      }
      stepper.check_step(y, k1, t, best_s, best);
      CrossingEvent ev;
      ev.point = ChartPoint::from_vector(best.template head<3>());
      ev.time = t + best_s;
      ev.direction = direction;
      ev.lifted_level = target;
      ev.steps = steps;
      if constexpr (N == 12) ev.dflow = Eigen::Map<const Mat3>(best.data() + 3);
      return ev;
    }
    stepper.check_step(y, k1, t, h, trial.y);
    t += h;
    y = trial.y;
    k1 = trial.k_end;
    g0 = g1;
  }
}

}  // namespace

FlowResult integrate(const FieldSpec& f, const ChartPoint& p, double t, const FlowOptions& opts) {
  return run_fixed<3>(f, p, t, opts);
}

FlowResult variational(const FieldSpec& f, const ChartPoint& p, double t, const FlowOptions& opts) {
  return run_fixed<12>(f, p, t, opts);
}

CrossingEvent cross_fiber(const FieldSpec& f, const Fibration& fibration, const ChartPoint& p, double target_level,
                          double min_time, const FlowOptions& opts, bool with_dflow) {
  if (min_time < 0.0) throw Error(ErrorCode::PreconditionFailed, "min_time must be non-negative");
  const double level = reduce_turns(target_level);
  auto pick = [level](double lifted, int direction) {
    // Next lifted value congruent to `level`, strictly ahead of `lifted`.
    if (direction > 0) return level + std::floor(lifted - level) + 1.0;
    return level + std::ceil(lifted - level) - 1.0;
  };
  return with_dflow ? run_event<12>(f, fibration, p, min_time, pick, opts)
                    : run_event<3>(f, fibration, p, min_time, pick, opts);
}

CrossingEvent advance_levels(const FieldSpec& f, const Fibration& fibration, const ChartPoint& p, double delta_level,
                             const FlowOptions& opts, bool with_dflow) {
  if (!(delta_level > 0.0)) throw Error(ErrorCode::PreconditionFailed, "delta_level must be positive");
  auto pick = [delta_level](double lifted, int direction) { return lifted + direction * delta_level; };
  return with_dflow ? run_event<12>(f, fibration, p, 0.0, pick, opts)
                    : run_event<3>(f, fibration, p, 0.0, pick, opts);
}

}  // namespace torlink
