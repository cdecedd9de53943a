#include "folcoil/charts.hpp"

#include "folcoil/spectral.hpp"

#include <Eigen/Dense>

namespace folcoil {

LegendrianChart::LegendrianChart(ScalarField f, std::vector<ScalarField> R, double neighborhood_factor)
    : f_(std::move(f)), R_(std::move(R)) {
  const int n = static_cast<int>(R_.size());
  if (n < 1) throw DomainError("chart needs at least one leaf coordinate");
  if (f_.grid().dim() != n + 1) throw DomainError("chart grid must have n+1 axes");
  for (const auto& r : R_) f_.check_same_grid(r);
  if (f_.min() <= 0) throw DomainError("defining form not positive");
  bound_ = neighborhood_factor * f_.min();
}

TorusFoliationChart::TorusFoliationChart(ScalarField u) : u_(std::move(u)) {
  if (u_.grid().dim() != 2) throw DomainError("torus chart needs a 2-grid (x, y)");
}

CoisoChart::CoisoChart(int n, int k, std::vector<ScalarField> a, std::vector<std::vector<ScalarField>> R,
                       std::vector<std::vector<ScalarField>> b)
    : n_(n), k_(k), a_(std::move(a)), R_(std::move(R)), b_(std::move(b)) {
  if (k < 1 || k > n - 1) throw DomainError("need 1 <= k <= n-1");
  const int ny = 2 * k + 1, nq = n - k;
  if (static_cast<int>(a_.size()) != ny) throw DomainError("a needs 2k+1 fields");
  if (static_cast<int>(R_.size()) != nq) throw DomainError("R needs n-k rows");
  if (static_cast<int>(b_.size()) != 2 * k) throw DomainError("b needs 2k rows");
  const auto& g = a_.front().grid();
  if (g.dim() != ny + nq) throw DomainError("chart grid must have n+k+1 axes");
  for (const auto& f : a_) g == f.grid() ? void() : throw DomainError("grid mismatch");
  for (const auto& row : R_) {
    if (static_cast<int>(row.size()) != ny) throw DomainError("R rows need 2k+1 fields");
    for (const auto& f : row) g == f.grid() ? void() : throw DomainError("grid mismatch");
  }
  for (const auto& row : b_) {
    if (static_cast<int>(row.size()) != ny) throw DomainError("b rows need 2k+1 fields");
    for (const auto& f : row) g == f.grid() ? void() : throw DomainError("grid mismatch");
  }

  // partials of a along every axis, for the s = 0 nondegeneracy check
  std::vector<std::vector<ScalarField>> da(g.dim());
  for (int c = 0; c < g.dim(); ++c)
    for (int m = 0; m < ny; ++m) da[c].push_back(spectral_partial(a_[m], c));

  Eigen::MatrixXd U(g.dim(), 2 * k);
  for (Eigen::Index p = 0; p < g.size(); ++p) {
    double a2 = 0;
    for (int m = 0; m < ny; ++m) a2 += a_[m][p] * a_[m][p];
    if (a2 <= 0) throw DomainError("defining form not positive");
    Eigen::MatrixXd B(2 * k, ny);
    for (int j = 0; j < 2 * k; ++j) {
      double dot = 0;
      for (int l = 0; l < ny; ++l) {
        B(j, l) = b_[j][l][p];
        dot += B(j, l) * a_[l][p];
      }
      if (std::abs(dot) > 1e-12) throw DomainError("b rows not orthogonal to a");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svdb(B);
    if (svdb.singularValues().minCoeff() <= 1e-8) throw DomainError("b rows degenerate");

    U.setZero();
    for (int j = 0; j < 2 * k; ++j)
      for (int l = 0; l < ny; ++l) {
        U(l, j) += B(j, l);
        for (int al = 0; al < nq; ++al) U(ny + al, j) += B(j, l) * R_[al][l][p];
      }
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2 * k, 2 * k);
    for (int i = 0; i < 2 * k; ++i)
      for (int j = 0; j < 2 * k; ++j)
        for (int c = 0; c < g.dim(); ++c)
          for (int m = 0; m < ny; ++m) W(i, j) += da[c][m][p] * (U(c, i) * U(m, j) - U(c, j) * U(m, i));
    Eigen::JacobiSVD<Eigen::MatrixXd> svdw(W);
    if (svdw.singularValues().minCoeff() <= 1e-8 * std::max(1.0, svdw.singularValues().maxCoeff()))
      throw DomainError("rank degeneracy: d lambda not symplectic on the transverse distribution");
  }
}

int leaf_dimension(const FoliationChart& chart) {
  return std::visit(
      [](const auto& c) -> int {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LegendrianChart>)
          return c.n();
        else if constexpr (std::is_same_v<T, TorusFoliationChart>)
          return 1;
        else
          return c.nq();
      },
      chart);
}

std::vector<int> leaf_axes(const FoliationChart& chart) {
  return std::visit(
      [](const auto& c) -> std::vector<int> {
        using T = std::decay_t<decltype(c)>;
        std::vector<int> ax;
        if constexpr (std::is_same_v<T, LegendrianChart>) {
          for (int i = 0; i < c.n(); ++i) ax.push_back(c.leaf_axis(i));
        } else if constexpr (std::is_same_v<T, CoisoChart>) {
          for (int a = 0; a < c.nq(); ++a) ax.push_back(c.q_axis(a));
        }
        return ax;
      },
      chart);
}

const PeriodicGrid& chart_grid(const FoliationChart& chart) {
  return std::visit([](const auto& c) -> const PeriodicGrid& { return c.grid(); }, chart);
}

}  // namespace folcoil
