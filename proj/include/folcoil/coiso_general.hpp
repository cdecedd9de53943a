#pragma once

#include "folcoil/foliation.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>

namespace folcoil {

using FieldMatrix = std::vector<std::vector<ScalarField>>;

/// Leafwise 1-form s = s_alpha dq^alpha on a CoisoChart.
class GeneralSection {
 public:
  GeneralSection(std::shared_ptr<const CoisoChart> chart, std::vector<ScalarField> s);
  static GeneralSection zero(std::shared_ptr<const CoisoChart> chart);

  const CoisoChart& chart() const { return *chart_; }
  std::shared_ptr<const CoisoChart> chart_ptr() const { return chart_; }
  const ScalarField& operator[](int alpha) const { return s_.at(alpha); }
  const std::vector<ScalarField>& components() const { return s_; }
  TangentialForm as_form() const;

 private:
  std::shared_ptr<const CoisoChart> chart_;
  std::vector<ScalarField> s_;
};

/// Deterministic sample of grid points; all points when count >= grid size.
std::vector<Eigen::Index> sample_points(const PeriodicGrid& g, int count = 100, std::uint64_t seed = 0x5eedULL);

struct PhiPsi {
  Eigen::MatrixXd Phi, Phi_inv, Psi, Psi_inv;
};
PhiPsi phi_psi(const GeneralSection& s, Eigen::Index point);

/// F[alpha][i][j], i,j < 2k, from the closed formula.
std::vector<FieldMatrix> curvature_F(const CoisoChart& chart);
/// Same tensor from Pi of the bracket of the g-fields, by spectral derivatives.
std::vector<FieldMatrix> curvature_F_bracket(const CoisoChart& chart);

struct ABTensors {
  FieldMatrix A;  // A[alpha][beta]
  FieldMatrix B;  // B[i][alpha]
};
ABTensors AB_tensors(const GeneralSection& s);
/// Closed form of A_ab - A_ba along the section.
FieldMatrix antisymmetric_A_closed_form(const GeneralSection& s);

struct OmegaResidual {
  FieldMatrix omega;     // omega[i][j] = dlambda(g_i, g_j) + F^a_ij s_a
  FieldMatrix residual;  // (A_ba - A_ab) - B_ia omega^ij B_jb
  double residual_max = 0;
};
OmegaResidual omega_and_residual(const GeneralSection& s);

struct PairingReport {
  double ee = 0, ff = 0, eg = 0, fg = 0;
  double ef_deviation = 0;  // max | dalpha(e_a, f^b) - sign * delta_ab |
  int ef_sign = 0;          // realized global sign, 0 if neither fits
  double gg_deviation = 0;  // max | dalpha(g_i,g_j) - dlambda(g_i,g_j) - F p |
  double max_deviation() const;
};
PairingReport lifted_basis_check(const GeneralSection& s, const std::vector<Eigen::Index>& points);

struct OmegaIdentityReport {
  double identity_max = 0;  // max | ds-bar(G_i,G_j) + F^c_ij s_c |
  int omega_sign = 0;       // Omega_ij = omega_sign * omega_ij
  double sign_deviation = 0;
};
OmegaIdentityReport omega_identity_check(const GeneralSection& s, const std::vector<Eigen::Index>& points);

/// mu_alpha = sum_i a_i d_alpha a_i / |a|^2, collocated.
TangentialForm general_mu(const CoisoChart& chart);
TangentialForm general_twisted_d(const TangentialForm& w, const CoisoChart& chart);

struct RankReport {
  std::vector<int> ranks;  // rank of dalpha on TY_s cap xi, per sample point
  int expected_rank = 0;   // 2k
  bool all_coisotropic = false;
};
RankReport rank_oracle(const GeneralSection& s, const std::vector<Eigen::Index>& points);

struct PrecontactReport {
  std::vector<int> ranks;
  bool constant_rank = false;
  int rank = -1;                // common rank when constant
  int characteristic_dim = -1;  // dim - rank - 1 when constant
};
PrecontactReport precontact_rank(const FullForm& alpha, const std::vector<Eigen::Index>& points);

enum class ExampleR { Zero, SinQ1, Rich };
/// Chart with axes (y1,y2,y3,q1..) , a = r(q) (cos y3, sin y3, 0) with
/// r = 1 + scale_amplitude cos q1, b1 = (-sin y3, cos y3, 0), b2 = (0,0,1).
/// n = 2 gives the four-torus example, n = 3 a five-torus chart. q_res > 0
/// sets a separate resolution for the q axes.
CoisoChart example_coiso_chart(int n, int res, ExampleR R = ExampleR::Zero, double scale_amplitude = 0.0,
                               int q_res = 0);

}  // namespace folcoil
