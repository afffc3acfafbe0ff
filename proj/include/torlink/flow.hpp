#pragma once

#include "torlink/field.hpp"

#include <cstddef>
#include <limits>
#include <optional>

namespace torlink {

struct FlowOptions {
  /// Absolute and relative local tolerance of the 5(4) pair.
  double tol = 1e-10;
  /// Orbits leaving the disc of this radius raise LeftDomain.
  double disc_radius = std::numeric_limits<double>::infinity();
  /// Time horizon of section-crossing searches.
  double horizon = 100.0;
  /// |fibration - target| accepted at a located crossing.
  double crossing_tol = 1e-10;
  std::size_t max_steps = 2'000'000;

  static FlowOptions for_pair(const FieldPair& pair) {
    FlowOptions o;
    o.tol = pair.tol.flow;
    o.disc_radius = pair.domain.disc_radius;
    o.crossing_tol = pair.tol.crossing;
    return o;
  }
};

struct FlowResult {
  ChartPoint endpoint;
  double time = 0.0;
  /// D(flow_t) at the start point; present for variational solves.
  std::optional<Mat3> dflow;
  std::size_t steps = 0;
  /// Largest accepted local error estimate (absolute units); <= tol on success.
  double est_error = 0.0;
  /// Unreduced angular coordinate at the endpoint.
  double theta_lifted = 0.0;
};

struct CrossingEvent {
  ChartPoint point;
  double time = 0.0;
  /// Sign of d(fibration o orbit)/dt at the crossing.
  int direction = 1;
  /// Lifted fibration value reached (target level plus an integer).
  double lifted_level = 0.0;
  std::optional<Mat3> dflow;
  std::size_t steps = 0;
};

/// Time-t flow of f from p (t may be negative).  Throws LeftDomain with the
/// exit time as value(), or StepUnderflow.
FlowResult integrate(const FieldSpec& f, const ChartPoint& p, double t, const FlowOptions& opts = {});

/// Same as integrate, jointly solving dPhi/dt = Df(orbit) Phi, Phi(0) = I.
FlowResult variational(const FieldSpec& f, const ChartPoint& p, double t, const FlowOptions& opts = {});

/// First crossing, at time >= min_time, of the fiber fibration = target_level
/// (mod 1) along the forward orbit of p.  Throws NoCrossing (value = horizon)
/// or NotTransverse.
CrossingEvent cross_fiber(const FieldSpec& f, const Fibration& fibration, const ChartPoint& p, double target_level,
                          double min_time, const FlowOptions& opts = {}, bool with_dflow = false);

/// Follow the orbit of p until the lifted fibration value has changed by
/// `delta_level` (> 0 along increasing orbits).  Used by the holonomy maps.
CrossingEvent advance_levels(const FieldSpec& f, const Fibration& fibration, const ChartPoint& p, double delta_level,
                             const FlowOptions& opts = {}, bool with_dflow = false);

}  // namespace torlink
