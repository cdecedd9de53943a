#pragma once

#include "folcoil/spectral.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace folcoil {

using MultiIndex = std::vector<int>;

/// Strictly increasing k-subsets of {0..m-1} in lexicographic order.
const std::vector<MultiIndex>& basis_indices(int m, int k);
int basis_position(int m, const MultiIndex& I);
int binomial(int m, int k);

/// Sign and sorted union of I ++ J; sign 0 when they overlap.
int wedge_sign(const MultiIndex& I, const MultiIndex& J, MultiIndex& out);

struct FullTag {};
struct TangentialTag {};

/// Degree-k form with one component field per increasing multi-index over a
/// space of dimension m. For FullForm m is the grid dimension; for
/// TangentialForm m is the leaf dimension of the chart it lives on.
template <class Tag>
class Form {
 public:
  Form() = default;

  Form(const PeriodicGrid& grid, int space_dim, int degree)
      : grid_(grid), m_(space_dim), k_(degree) {
    if (degree < 0) throw DomainError("bad form degree");
    comps_.assign(binomial(m_, k_), ScalarField::zero(grid));
  }

  Form(const PeriodicGrid& grid, int space_dim, int degree, std::vector<ScalarField> comps)
      : grid_(grid), m_(space_dim), k_(degree), comps_(std::move(comps)) {
    if (static_cast<int>(comps_.size()) != binomial(m_, k_)) throw DomainError("wrong component count");
    for (const auto& c : comps_)
      if (!(c.grid() == grid_)) throw DomainError("grid mismatch");
  }

  static Form scalar(const ScalarField& f, int space_dim) { return Form(f.grid(), space_dim, 0, {f}); }

  const PeriodicGrid& grid() const { return grid_; }
  int space_dim() const { return m_; }
  int degree() const { return k_; }
  int size() const { return static_cast<int>(comps_.size()); }
  const std::vector<MultiIndex>& indices() const { return basis_indices(m_, k_); }

  const ScalarField& operator[](int i) const { return comps_.at(i); }
  ScalarField& operator[](int i) { return comps_.at(i); }
  const ScalarField& at(const MultiIndex& I) const { return comps_.at(basis_position(m_, I)); }
  ScalarField& at(const MultiIndex& I) { return comps_.at(basis_position(m_, I)); }
  const std::vector<ScalarField>& components() const { return comps_; }

  double max_abs() const {
    double m = 0;
    for (const auto& c : comps_) m = std::max(m, c.max_abs());
    return m;
  }

  Form& operator+=(const Form& o) {
    check_compatible(o);
    for (int i = 0; i < size(); ++i) comps_[i] += o.comps_[i];
    return *this;
  }
  Form& operator-=(const Form& o) {
    check_compatible(o);
    for (int i = 0; i < size(); ++i) comps_[i] -= o.comps_[i];
    return *this;
  }
  Form& operator*=(double c) {
    for (auto& f : comps_) f *= c;
    return *this;
  }
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator*(Form a, double c) { return a *= c; }
  friend Form operator*(double c, Form a) { return a *= c; }
  Form operator-() const { return Form(*this) *= -1.0; }

  void check_compatible(const Form& o) const {
    if (m_ != o.m_ || k_ != o.k_ || !(grid_ == o.grid_)) throw DomainError("incompatible forms");
  }

 private:
  PeriodicGrid grid_;
  int m_ = 0;
  int k_ = 0;
  std::vector<ScalarField> comps_;
};

using FullForm = Form<FullTag>;
using TangentialForm = Form<TangentialTag>;

/// Component-wise wedge product; products are dealiased.
template <class Tag>
Form<Tag> wedge(const Form<Tag>& a, const Form<Tag>& b) {
  if (a.space_dim() != b.space_dim() || !(a.grid() == b.grid())) throw DomainError("incompatible forms");
  Form<Tag> out(a.grid(), a.space_dim(), a.degree() + b.degree());
  if (out.size() == 0) return out;
  const auto& ia = a.indices();
  const auto& ib = b.indices();
  MultiIndex u;
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < b.size(); ++j) {
      const int s = wedge_sign(ia[i], ib[j], u);
      if (s == 0) continue;
      const ScalarField p = mul(a[i], b[j]);
      if (s > 0)
        out.at(u) += p;
      else
        out.at(u) -= p;
    }
  return out;
}

/// g * omega with a dealiased product per component.
template <class Tag>
Form<Tag> scale(const ScalarField& g, const Form<Tag>& w) {
  std::vector<ScalarField> c;
  c.reserve(w.size());
  for (int i = 0; i < w.size(); ++i) c.push_back(mul(g, w[i]));
  return Form<Tag>(w.grid(), w.space_dim(), w.degree(), std::move(c));
}

/// Coordinate exterior derivative where coordinate l of the form's space is
/// grid axis axis_of[l].
template <class Tag>
Form<Tag> coordinate_d(const Form<Tag>& w, const std::vector<int>& axis_of) {
  const int m = w.space_dim();
  Form<Tag> out(w.grid(), m, w.degree() + 1);
  if (out.size() == 0) return out;
  const auto& in_idx = w.indices();
  for (int i = 0; i < w.size(); ++i) {
    if (w[i].max_abs() == 0) continue;
    for (int l = 0; l < m; ++l) {
      MultiIndex u;
      const int s = wedge_sign({l}, in_idx[i], u);
      if (s == 0) continue;
      const ScalarField dv = spectral_partial(w[i], axis_of[l]);
      if (s > 0)
        out.at(u) += dv;
      else
        out.at(u) -= dv;
    }
  }
  return out;
}

FullForm exterior_d(const FullForm& w);

/// Value of a degree-k form at grid point `point` on k vectors (columns of
/// V, expressed in the form's coordinates): sum_I w_I det(V restricted to I).
template <class Tag>
double evaluate(const Form<Tag>& w, Eigen::Index point, const Eigen::MatrixXd& V) {
  const int k = w.degree();
  if (V.cols() != k || V.rows() != w.space_dim()) throw DomainError("evaluate: bad vector block");
  if (k == 0) return w[0][point];
  const auto& idx = w.indices();
  double acc = 0;
  Eigen::MatrixXd sub(k, k);
  for (int i = 0; i < w.size(); ++i) {
    for (int r = 0; r < k; ++r) sub.row(r) = V.row(idx[i][r]);
    acc += w[i][point] * sub.determinant();
  }
  return acc;
}

}  // namespace folcoil
