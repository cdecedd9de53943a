#pragma once

#include "folcoil/foliation.hpp"

#include <array>
#include <map>
#include <memory>

namespace folcoil {

/// Tangential 1-form s = s_i dq^i on a Legendrian chart; its graph p = s is
/// the candidate deformation.
class Section {
 public:
  Section(std::shared_ptr<const LegendrianChart> chart, std::vector<ScalarField> s);
  static Section zero(std::shared_ptr<const LegendrianChart> chart);
  static Section from_form(std::shared_ptr<const LegendrianChart> chart, const TangentialForm& w);

  const LegendrianChart& chart() const { return *chart_; }
  std::shared_ptr<const LegendrianChart> chart_ptr() const { return chart_; }
  int n() const { return static_cast<int>(s_.size()); }
  const ScalarField& operator[](int i) const { return s_.at(i); }
  const std::vector<ScalarField>& components() const { return s_; }
  TangentialForm as_form() const;
  /// sup over the grid of the pointwise Euclidean norm of s.
  double sup_norm() const;

 private:
  std::shared_ptr<const LegendrianChart> chart_;
  std::vector<ScalarField> s_;
};

struct MasterResidual {
  std::map<std::pair<int, int>, ScalarField> res1;
  std::map<std::array<int, 3>, ScalarField> res2;
  double res1_max = 0;
  double res2_max = 0;
  double max() const { return std::max(res1_max, res2_max); }
};

double max_difference(const MasterResidual& a, const MasterResidual& b);

namespace detail {
/// Formula corruption used by mutation tests only.
struct MasterMutation {
  bool flip_f_derivative_term = false;
};
}  // namespace detail

/// Coordinate master equations: res1 = LHS - RHS of the (a,b) equation,
/// res2 = LHS of the (a,b,c) equation.
MasterResidual master_residual_coord(const Section& s, const detail::MasterMutation& mutation = {});

/// Direct evaluation of alpha ^ d alpha on the graph tangent frame, per point,
/// from the thickened contact form; same index layout as the coordinate
/// residual.
MasterResidual coisotropy_oracle_fields(const Section& s);
double coisotropy_oracle(const Section& s);

struct InvariantResidual {
  FullForm ambient;        // s^ds - s^dlambda - ds^lambda (lifted s)
  TangentialForm leafwise; // s ^ d_F s
};
InvariantResidual master_residual_invariant(const Section& s);

/// d_F^lambda zeta.
TangentialForm infinitesimal_residual(const TangentialForm& zeta, const LegendrianChart& chart);

struct DeformedForm {
  FullForm lambda_prime;  // s-bar - lambda
  FullForm frobenius;     // lambda' ^ d lambda'
  double frobenius_residual = 0;
};
DeformedForm deformed_form(const Section& s);

/// Rescales m so that m(L) = -f and returns its leaf part.
Section foliation_to_section(const FullForm& m, std::shared_ptr<const LegendrianChart> chart);

struct ObstructionResult {
  TangentialForm omega;      // zeta ^ d_z zeta
  ScalarField certificate;   // leafwise mean of its coefficient
};
/// Second-order test on a chart with f = 1, R = 0 and two leaf coordinates.
ObstructionResult second_order_obstruction(const TangentialForm& zeta, const LegendrianChart& chart,
                                           double tol = 1e-10);

/// lambda = f dx as an ambient form.
FullForm lambda_form(const LegendrianChart& chart);

}  // namespace folcoil
