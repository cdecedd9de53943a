#pragma once

#include "folcoil/legendrian_master.hpp"
#include "folcoil/spectral.hpp"

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace folcoil {

/// Contact Hamiltonian homogeneous of degree r in p on a Legendrian chart:
/// H = H0(x,q) for r = 0, H = w^{i1..ir} p_{i1}...p_{ir} for r >= 1. The
/// coefficient tensor is stored flattened (n^r entries, first index slowest)
/// and symmetrized at construction. Several time nodes with spacing dt give
/// a time-dependent H (cubic Lagrange interpolation in t); one node means
/// time-independent.
class HamiltonianPoly {
 public:
  HamiltonianPoly(int n, int r, std::vector<std::vector<ScalarField>> nodes, double dt = 0);

  static HamiltonianPoly order0(const ScalarField& H0, int n);
  /// H = prod_j (p . w_j), w_j given by n component fields.
  static HamiltonianPoly product_of_vectors(const std::vector<std::vector<ScalarField>>& w);

  int n() const { return n_; }
  int degree() const { return r_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  double node_dt() const { return dt_; }
  const PeriodicGrid& grid() const { return nodes_.front().front().grid(); }
  /// Interpolated coefficient fields at time t.
  std::vector<ScalarField> coefficients(double t) const;

  struct PointJet {
    double H = 0, H_x = 0;
    Eigen::VectorXd H_q, H_p;
  };
  /// Values and first partials at (x, q, p), partials in x and q at fixed p.
  PointJet at(const Eigen::VectorXd& xq, const Eigen::VectorXd& p, double t) const;

  struct GridJet {
    ScalarField H, H_x;
    std::vector<ScalarField> H_q, H_p;
  };
  /// Same quantities on the grid for p = P(x, q). Products are collocated.
  GridJet on_graph(const std::vector<ScalarField>& P, double t) const;

 private:
  std::vector<double> time_weights(double t, std::vector<int>& idx) const;

  int n_, r_;
  double dt_;
  std::vector<std::vector<ScalarField>> nodes_;
  std::vector<std::vector<SpectralInterpolant<double>>> interp_;
};

/// Pointwise access to f, R and their first partials.
class ContactChart {
 public:
  explicit ContactChart(std::shared_ptr<const LegendrianChart> chart);

  const LegendrianChart& chart() const { return *chart_; }
  int n() const { return chart_->n(); }

  struct Jet {
    double f = 0;
    Eigen::VectorXd df;  // d/dx, d/dq^1..
    Eigen::VectorXd R;   // R^i
    Eigen::MatrixXd dR;  // dR(i, a) = d_a R^i, a = 0 is x
  };
  Jet jet(const Eigen::VectorXd& xq) const;

  /// alpha = (f + R.p) dx - p dq at a point of (x, q, p) space, with
  /// dalpha as an antisymmetric matrix (dalpha(u, w) = u^T W w).
  void contact_form(const Eigen::VectorXd& point, Eigen::VectorXd& alpha, Eigen::MatrixXd& W) const;

 private:
  std::shared_ptr<const LegendrianChart> chart_;
  SpectralInterpolant<double> f_;
  std::vector<SpectralInterpolant<double>> R_;
};

/// Reeb field at (x, q, p); 2n+1 components ordered (x, q, p).
Eigen::VectorXd reeb_field(const ContactChart& chart, const Eigen::VectorXd& point);

/// Contact Hamiltonian vector field X_H at (x, q, p) and time t.
Eigen::VectorXd hamiltonian_field(const HamiltonianPoly& H, const ContactChart& chart, const Eigen::VectorXd& point,
                                  double t);

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> state;
  bool left_neighborhood = false;
};

/// Classical RK4 integration of X_H from (x0, q0, p0) over [0, T].
Trajectory particle_flow(const HamiltonianPoly& H, const ContactChart& chart, const Eigen::VectorXd& start, double T,
                         double dt);

struct FlowState {
  double t = 0;
  Section section;
};

struct FlowOptions {
  int record_every = 10;          // steps between recorded states
  double abort_residual = 1e-3;   // master residual blow-up
  bool monitor_residual = true;
};

struct FlowPath {
  std::vector<FlowState> states;
  std::vector<double> residuals;  // master residual at each recorded state
  double max_residual = 0;
  /// |one step of dt - two steps of dt/2| at t = 0, sup norm.
  double step_halving_gap = 0;
};

/// Right-hand side of the graph evolution: d/dt p_i(x, q) as displayed for a
/// p-polynomial Hamiltonian (includes the full p dependence).
std::vector<ScalarField> isotopy_rate(const HamiltonianPoly& H, const Section& s, double t);

/// Method-of-lines RK4 of isotopy_rate from s0 over [0, T]. Throws on
/// neighborhood exit or when the master residual exceeds abort_residual.
FlowPath evolve_section(const HamiltonianPoly& H, const Section& s0, double T, double dt, const FlowOptions& opt = {});

/// One RK4 step (exposed for the rate-law check).
Section rk4_step(const HamiltonianPoly& H, const Section& s, double t, double dt);

/// lambda_t = (f + R.p) dx - p dq as a full form.
FullForm lambda_t(const Section& s);

struct DeltaResult {
  TangentialForm delta;
  FullForm delta_bar;
  double frobenius = 0;       // sup |lambda_t ^ d lambda_t|
  double reconstruction = 0;  // sup |d lambda_t - delta_bar ^ lambda_t|
};

/// Unique tangential delta with d lambda_t = delta_bar ^ lambda_t and
/// delta_bar(L) = 0, from delta_bar = -i_v d lambda_t, lambda_t(v) = 1.
/// Throws when lambda_t is not integrable to 1e-8.
DeltaResult delta_form(const LegendrianChart& chart, const FullForm& lambda);

struct UpdateResult {
  FullForm coordinate;
  FullForm invariant;
  double discrepancy = 0;
};

/// lambda_dot for a p-independent H two ways: coordinate expansion and
/// lift(d_{F_t} H) - H delta_bar_t.
UpdateResult order0_update(const Section& s, const ScalarField& H0);

struct OrderRResult {
  FullForm displayed;     // (prod lambda_t(w)) delta_bar - lift(d_{F_t} prod lambda_t(w))
  FullForm coordinate;    // graph evolution of H = prod (p . w_j), pushed to lambda_dot
  FullForm order0;        // order0 invariant form with H = prod (p . w_j) on the graph
  double collapse = 0;    // sup |coordinate - order0|
  double displayed_vs_order0 = 0;   // sup |displayed - order0 with H = prod lambda_t(w)|
  double displayed_corrected = 0;   // sup |(-1)^{r+1} displayed - order0|
};

/// Degree-r law for w_1..w_r (each n component fields along the leaves).
OrderRResult order_r_update(const Section& s, const std::vector<std::vector<ScalarField>>& w);

struct IsotopyOptions {
  int max_iterations = 400;
  double lsqr_tol = 1e-12;
  int dense_limit = 1024;      // unknowns solved by orthogonal factorization
  bool check_coarser = true;   // re-solve at half resolution for obstruction verdicts
};

enum class IsotopyVerdict { Isotopy, ObstructedConjectural, Inconclusive };

struct IsotopyReport {
  std::vector<double> residuals;          // relative, per node
  std::vector<double> coarse_residuals;   // same at half resolution (if computed)
  std::vector<double> frobenius;          // per node
  IsotopyVerdict verdict = IsotopyVerdict::Inconclusive;
  bool conjectural = false;
  double max_residual() const;
};

const char* to_string(IsotopyVerdict v);

/// Least-squares solvability of lift(d_{F_t} H) - H delta_bar_t = beta_dot_t
/// at each node of a path lambda_t = lambda + lift(beta_t).
IsotopyReport isotopy_certificate(const std::shared_ptr<const LegendrianChart>& chart,
                                  const std::vector<TangentialForm>& beta, double dt, double tol,
                                  const IsotopyOptions& opt = {});

}  // namespace folcoil
