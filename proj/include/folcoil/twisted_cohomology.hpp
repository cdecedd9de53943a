#pragma once

#include "folcoil/charts.hpp"
#include "folcoil/field.hpp"

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <vector>

namespace folcoil {

/// Degree-0 operator g -> X g - m g on a two-torus chart, X = d_x - u d_y,
/// assembled in a Galerkin basis. Columns are the complex exponentials
/// e^{i(kx x + ky y)} with |kx| <= Kx, |ky| <= Ky, chosen so the image stays
/// below the half band and is exact on the grid. Rows are grid samples
/// scaled by 1/sqrt(N) per axis, so the matrix is an isometry for m = u = 0
/// up to the derivative factors.
///
/// When u and m depend on y only the operator splits into one block per x
/// mode (rows: the N samples in y). Otherwise a single dense block with all
/// grid points as rows is used.
struct OperatorMatrix {
  struct Block {
    int kx = 0;                              // x mode for split blocks
    std::vector<std::pair<int, int>> modes;  // (kx, ky) per column
    Eigen::MatrixXcd matrix;
  };

  int N = 0;
  int Kx = 0;
  int Ky = 0;
  bool split = false;
  std::vector<Block> blocks;
  Eigen::VectorXd singular_values;  // all blocks, descending

  Eigen::Index rows() const;
  Eigen::Index cols() const;
  double sigma_max() const { return singular_values.size() ? singular_values[0] : 0.0; }

  /// Applies the assembled matrix to a field whose spectrum lies in the
  /// column space; returns unscaled grid samples of the image.
  ScalarField apply(const ScalarField& g) const;
};

/// Assembles d_F (twisted = false) or d_F^lambda with mu(X) = -d_y u.
/// u is resampled onto an N x N grid. N must be a power of two >= 16.
OperatorMatrix assemble_operator(const TorusFoliationChart& chart, bool twisted, int N);

/// Same operator with an explicit zeroth-order coefficient: g -> X g - m g.
/// Used for the gauge check (m = mu(X) + X h).
OperatorMatrix assemble_operator_with_m(const TorusFoliationChart& chart, const ScalarField& m, int N);

/// Number of singular values <= threshold * sigma_max. A zero matrix
/// reports its full column count.
int kernel_dimension(const OperatorMatrix& M, double threshold);

/// Smallest singular value above the kernel cut, relative to sigma_max.
double singular_value_gap(const OperatorMatrix& M, double threshold);

struct Periods {
  double a0 = 0;
  double api = 0;
};

/// Means of f over the closed leaves y = 0 and y = pi.
Periods periods(const ScalarField& f, const TorusFoliationChart& chart);

/// Uniform samples on [0, 2pi).
struct CircleSample {
  Eigen::VectorXd values;
  double x(int j) const { return 2 * M_PI * j / static_cast<double>(values.size()); }
};

/// Uniform samples on [-T, T], endpoints included.
struct LineSample {
  double T = 20;
  Eigen::VectorXd values;
  int size() const { return static_cast<int>(values.size()); }
  double step() const { return 2 * T / (size() - 1); }
  double t(int j) const { return -T + j * step(); }
  Eigen::VectorXd nodes() const;
};

/// Unique 2pi-periodic solution of f' + c f = h, c = +1 or -1, evaluated on
/// the trigonometric interpolant of h.
CircleSample periodic_ode_solve(const CircleSample& h, int c = 1);

/// Spectral residual max |f' + c f - h|.
double periodic_ode_residual(const CircleSample& f, const CircleSample& h, int c = 1);

/// f(t) = sech t * int_0^t h cosh, the solution of f' + tanh t f = h with
/// f(0) = 0. Requires |h(+-T)| <= 1e-10 and an odd sample count (t = 0 is a
/// node). Throws "not Schwartz at this truncation" otherwise, and also when
/// the output fails the decay bound at +-T.
LineSample leaf_ode_solve(const LineSample& h);

/// Max |f' + tanh t f - h| using eighth-order finite differences.
double leaf_ode_residual(const LineSample& f, const LineSample& h);

/// Composite eighth-order integral over [-T, T].
double line_integral(const LineSample& h);

/// Lower cylinder leaves (0 < y < pi): t -> (x0 + t, 2 arccot e^t).
/// Upper cylinder leaves (pi < y < 2pi): t -> (x0 + t, 2pi - 2 arccot e^t).
Eigen::Vector2d leaf_point(bool upper, double x0, double t);

struct CertificateOptions {
  int leaves = 32;      // per cylinder
  int nodes = 4097;     // per leaf
  double T_leaf = 26;   // truncation radius
  double tol = 1e-8;
};

struct CoboundaryReport {
  bool twisted = false;
  // untwisted
  Periods periods;
  std::vector<double> phi_lower;  // normalized leaf integrals
  std::vector<double> phi_upper;
  double phi_shift = 0;           // common constant removed from both
  double untwisted_max = 0;       // max(|a0|, |api|, |phi|)
  // twisted
  CircleSample p0, ppi;
  double closed_leaf_residual = 0;
  double leaf_ode_residual = 0;
  double decay = 0;
  std::optional<double> roundtrip_residual;
  // overall verdict against options.tol (untwisted) or 1e-6 (twisted)
  bool coboundary = false;
};

/// Coboundary certificate on the sin-y chart family. For the twisted case an
/// optional reference primitive enables the round-trip residual.
CoboundaryReport coboundary_certificate(const ScalarField& f, const TorusFoliationChart& chart, bool twisted,
                                        const CertificateOptions& opt = {},
                                        const std::optional<ScalarField>& reference = std::nullopt);

/// Untwisted coboundary d_F g and twisted coboundary d_F^lambda g as fields.
ScalarField torus_d(const ScalarField& g, const TorusFoliationChart& chart, bool twisted);

}  // namespace folcoil
