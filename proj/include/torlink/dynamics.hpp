#pragma once

#include "torlink/degree.hpp"
#include "torlink/field.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace torlink {

/// Forward orbit of the first return map on Sigma_0.
struct OrbitRecord {
  std::vector<ChartPoint> points;
  std::vector<double> mu;
  std::vector<double> nu;
  bool converged = false;
  /// Extrapolated limit; set iff converged.
  std::optional<ChartPoint> limit;
  /// |P(limit) - limit| for the reported limit.
  double limit_residual = 0.0;
};

/// Iterates P from x until |P(x_k) - x_k| < tol or n_max steps; the limit is
/// refined by componentwise Aitken extrapolation of the last three iterates
/// when that lowers the fixed-point residual.
OrbitRecord iterate_return(const FieldPair& pair, const Frame& frame, const ChartPoint& x, int n_max = 500,
                           double tol = 1e-10);

/// Transverse coordinate: the declared Col coordinate when present, else y.
double transverse_coordinate(const FieldPair& pair, const ChartPoint& p);

struct ConeMeasurement {
  double ratio = 0.0;
  double mu_change = 0.0;
  double displacement = 0.0;
};

/// |mu(P(x)) - mu(x)| / |P(x) - x|; throws FixedPoint when P(x) = x.
ConeMeasurement cone_measure(const FieldPair& pair, const Frame& frame, const ChartPoint& x,
                             double fixed_threshold = 1e-13);

inline double cone_ratio(const FieldPair& pair, const Frame& frame, const ChartPoint& x) {
  return cone_measure(pair, frame, x).ratio;
}

/// Angular variation of the normalized normal component along the Sigma_0
/// segment from x to P^2(x).  Throws SegmentMeetsCol when the segment crosses
/// the declared Col (sign change of nu) or, without one, meets a collinear point.
double segment_sweep(const FieldPair& pair, const Frame& frame, const ChartPoint& x, int samples = 256);

/// CSV rows `orbit,step,x,y,theta,mu,nu` for one orbit (no header).
void write_orbit_rows(std::ostream& out, int orbit, const OrbitRecord& record);
inline constexpr const char* kOrbitCsvHeader = "orbit,step,x,y,theta,mu,nu";

}  // namespace torlink
