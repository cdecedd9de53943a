#pragma once

#include "folcoil/field.hpp"

#include <variant>
#include <vector>

namespace folcoil {

/// Foliated chart (x, q^1..q^n) with defining form lambda = f dx, leaves
/// {x = const} and transverse line field L spanned by d_x + R^i d_{q^i}.
/// Grid axis 0 is the transverse coordinate, axes 1..n are the leaf
/// coordinates; the axis names are free (the flat T^3 example uses z, x, y).
class LegendrianChart {
 public:
  LegendrianChart(ScalarField f, std::vector<ScalarField> R, double neighborhood_factor = 0.2);

  int n() const { return static_cast<int>(R_.size()); }
  const PeriodicGrid& grid() const { return f_.grid(); }
  const ScalarField& f() const { return f_; }
  const std::vector<ScalarField>& R() const { return R_; }
  const ScalarField& R(int i) const { return R_.at(i); }
  /// Largest admissible sup|s| for sections.
  double neighborhood_bound() const { return bound_; }
  int leaf_axis(int i) const { return i + 1; }

 private:
  ScalarField f_;
  std::vector<ScalarField> R_;
  double bound_;
};

/// Two-torus chart with lambda = dy + u dx, leaf direction X = d_x - u d_y
/// and transverse line L = <d_y>. Tangential 1-forms are stored by their
/// value on X.
class TorusFoliationChart {
 public:
  explicit TorusFoliationChart(ScalarField u);

  const PeriodicGrid& grid() const { return u_.grid(); }
  const ScalarField& u() const { return u_; }

 private:
  ScalarField u_;
};

/// General chart (y^1..y^{2k+1}, q^1..q^{n-k}) with lambda = a_i dy^i,
/// transverse distribution spanned by g_j = b_{jl}(d_{y^l} + R^a_l d_{q^a}).
class CoisoChart {
 public:
  CoisoChart(int n, int k, std::vector<ScalarField> a, std::vector<std::vector<ScalarField>> R,
             std::vector<std::vector<ScalarField>> b);

  int n() const { return n_; }
  int k() const { return k_; }
  int ny() const { return 2 * k_ + 1; }
  int nq() const { return n_ - k_; }
  const PeriodicGrid& grid() const { return a_.front().grid(); }
  const ScalarField& a(int i) const { return a_.at(i); }
  const ScalarField& R(int alpha, int i) const { return R_.at(alpha).at(i); }
  const ScalarField& b(int j, int l) const { return b_.at(j).at(l); }
  int y_axis(int i) const { return i; }
  int q_axis(int alpha) const { return ny() + alpha; }

 private:
  int n_, k_;
  std::vector<ScalarField> a_;
  std::vector<std::vector<ScalarField>> R_;
  std::vector<std::vector<ScalarField>> b_;
};

using FoliationChart = std::variant<LegendrianChart, TorusFoliationChart, CoisoChart>;

/// Leaf dimension and, for coordinate-leaf charts, the grid axes of the leaf
/// coordinates (empty for the torus chart, whose leaves are not coordinate).
int leaf_dimension(const FoliationChart& chart);
std::vector<int> leaf_axes(const FoliationChart& chart);
const PeriodicGrid& chart_grid(const FoliationChart& chart);

}  // namespace folcoil
