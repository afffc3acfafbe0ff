#pragma once

#include "torlink/field.hpp"
#include "torlink/flow.hpp"

namespace torlink {

/// Transition along Y-orbits from the fiber through `start` to the fiber
/// `t` levels further on.  dP and dtau are written in frame coordinates
/// (e1, e2) at start for the domain and at end for the codomain.
struct HolonomyRecord {
  ChartPoint start;
  ChartPoint end;
  double level_change = 0.0;
  double tau = 0.0;
  Mat2 dP = Mat2::Identity();
  Eigen::RowVector2d dtau = Eigen::RowVector2d::Zero();
  /// Variational solution DY_tau at start.
  Mat3 dflow = Mat3::Identity();
};

/// X(p) = n_vec + mu * Y(p) with n_vec = alpha e1 + beta e2.
struct NormalDecomposition {
  TangentVector n_vec;
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  Vec2 normal_coordinates() const { return {alpha, beta}; }
};

/// Both sides of -Dtau(x) N(x) = mu(P(x)) - mu(x) and their difference.
struct ReturnIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  HolonomyRecord holonomy;
};

HolonomyRecord holonomy(const FieldPair& pair, const Frame& frame, const ChartPoint& x, double t);

/// First return map P = holonomy over one full level.
inline HolonomyRecord return_map(const FieldPair& pair, const Frame& frame, const ChartPoint& x) {
  return holonomy(pair, frame, x, 1.0);
}

NormalDecomposition normal_decompose(const FieldPair& pair, const Frame& frame, const ChartPoint& x);

ReturnIdentity return_identity_residual(const FieldPair& pair, const Frame& frame, const ChartPoint& x);

/// Point of Sigma_0 above the disc coordinates (x, y).
inline ChartPoint on_section(const FieldPair& pair, double x, double y, double level = 0.0) {
  return pair.domain.fibration.point_on_level(x, y, level);
}

}  // namespace torlink
