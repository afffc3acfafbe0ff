#pragma once

#include "torlink/degree.hpp"
#include "torlink/field.hpp"

#include <complex>
#include <string_view>

namespace torlink {

enum class IndexMethod { SphereOfZero, EssentialTorus };

std::string_view to_string(IndexMethod m);

struct IndexReport {
  int value = 0;
  double raw = 0.0;
  double residual = 0.0;
  std::size_t triangles = 0;
  double max_image_diameter = 0.0;
  IndexMethod method = IndexMethod::SphereOfZero;
};

struct LinkingReport {
  int ell_plus = 0;
  int ell_minus = 0;
  double residual_plus = 0.0;
  double residual_minus = 0.0;
  PathSample loop_plus;
  PathSample loop_minus;
};

struct LinkIndexReport {
  IndexReport index;
  LinkingReport linking;
  bool identity_holds = false;
};

/// Boundary {(cx + r cos 2 pi s, cy + r sin 2 pi s, t)} of a tubular
/// neighbourhood of the core circle, meshed as an n_around x n_along grid.
struct EssentialTorus {
  double radius = 0.5;
  int n_around = 96;
  int n_along = 96;
  double center_x = 0.0;
  double center_y = 0.0;

  ChartPoint point(double s, double t) const;
};

/// Degree of y -> X(y)/|X(y)| on the chart sphere of the given radius around p,
/// meshed as an icosphere of `mesh_level`.  Throws ZeroOnSphere.
IndexReport index_isolated_zero(const FieldSpec& X, const ChartPoint& p, double radius, int mesh_level = 3,
                                const DegreeOptions& opts = {}, double zero_threshold = 1e-12);

/// Degree of the frame-coordinate Gauss map (alpha, beta, mu)/|.| on an
/// essential torus; equals Ind(X, U).  Throws ZeroOnTorus.
IndexReport index_region(const FieldSpec& X, const Frame& frame, const EssentialTorus& torus,
                         const DegreeOptions& opts = {}, double zero_threshold = 1e-12);

/// Windings of the normalized normal component along {(x0, +/-y_offset)} x R/Z.
/// Throws LoopMeetsCol when a loop sample is collinear.
LinkingReport linking_numbers(const FieldPair& pair, const Frame& frame, double y_offset, double x0 = 0.0,
                              int samples = 128);

/// Essential-torus index next to the two linking numbers; identity_holds iff
/// |index| = |ell_plus - ell_minus|.  Throws PreconditionFailed when X and Y are
/// collinear on the whole sample grid.
LinkIndexReport verify_link_index(const FieldPair& pair, const Frame& frame, const EssentialTorus& torus,
                                  double y_offset, double x0 = 0.0, const DegreeOptions& opts = {});

enum class FixedPointClass { IdentityLike, Parabolic, Elliptic, PartiallyHyperbolic };

std::string_view to_string(FixedPointClass c);

struct Spectrum {
  std::complex<double> lambda1;
  std::complex<double> lambda2;
  Mat2 dP = Mat2::Identity();
  FixedPointClass classification = FixedPointClass::IdentityLike;
  double tolerance = 0.0;
  double fixed_residual = 0.0;
};

/// Eigenvalues and class of a 2x2 return-map derivative; the eigenvalue
/// tolerance is base_tol scaled by the condition number of dP.
Spectrum classify_derivative(const Mat2& dP, double base_tol = 1e-6);

/// Spectrum of dP at a fixed point of the first return map.  Throws NotFixed
/// when |P(x) - x| >= fixed_tol.
Spectrum fixed_point_spectrum(const FieldPair& pair, const Frame& frame, const ChartPoint& x, double fixed_tol = 1e-8,
                              double base_tol = 1e-6);

}  // namespace torlink
