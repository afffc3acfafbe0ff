#pragma once

#include "torlink/field.hpp"

#include <vector>

namespace torlink {

/// Analytic Jacobian when the field carries one, else central differences
/// with the field's fd_step (theta column wraps periodically).
Mat3 jacobian_at(const FieldSpec& f, const ChartPoint& p);

/// Lie bracket [X, Y](p) = DY(p) X(p) - DX(p) Y(p).
TangentVector commutator_residual(const FieldPair& pair, const ChartPoint& p);

/// Chart cross-product norm |X(p) x Y(p)|.
double collinearity_residual(const FieldPair& pair, const ChartPoint& p);

/// Projection coefficient <X, Y> / <Y, Y>; equals the ratio mu on Col.
double ratio_mu(const FieldPair& pair, const ChartPoint& p);

/// Regular scan grid over the domain: grid_res samples per axis, x and y over
/// [-R, R] (points outside the disc dropped), theta = k / grid_res.
std::vector<ChartPoint> scan_grid(const SolidTorusDomain& domain, int grid_res);

/// Numerical localization of Col(X, Y): grid points below refine_tol plus
/// bisection along grid edges where the cross product flips orientation.
/// Output is ordered by grid index and deduplicated within refine_tol.
/// When X and Y are collinear everywhere, every grid point is returned; compare
/// the size against scan_grid(...).size() to detect that case.
std::vector<ChartPoint> find_collinearity(const FieldPair& pair, int grid_res, double refine_tol, int jobs = 1);

/// Canonical frame e3 = Y with fiber-tangent e1, e2; checked on a sample grid
/// of `sample_res`^3 points.  Throws DegenerateFrame.
Frame build_frame(const FieldPair& pair, int sample_res = 8);

}  // namespace torlink
