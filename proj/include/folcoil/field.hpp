#pragma once

#include "folcoil/grid.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <string>

namespace folcoil {

/// Real samples of a function on a PeriodicGrid, row-major. Immutable by
/// convention: every operation returns a new field.
template <typename Scalar>
class BasicField {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicField() = default;

  BasicField(PeriodicGrid grid, Array values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size())
      throw DomainError("field length does not match grid point count");
    if (!values_.allFinite()) throw DomainError("field has non-finite values");
  }

  static BasicField constant(const PeriodicGrid& grid, Scalar c) {
    return BasicField(grid, Array::Constant(grid.size(), c));
  }
  static BasicField zero(const PeriodicGrid& grid) { return constant(grid, 0); }

  /// Samples fn(point) at every grid point; point holds axis coordinates.
  template <class Fn>
  static BasicField from_function(const PeriodicGrid& grid, Fn&& fn) {
    Array v(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      v[i] = static_cast<Scalar>(fn(grid.point(i)));
    return BasicField(grid, std::move(v));
  }

  const PeriodicGrid& grid() const { return grid_; }
  const Array& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  Scalar operator[](Eigen::Index i) const { return values_[i]; }
  bool empty() const { return values_.size() == 0; }

  Scalar max_abs() const { return values_.size() ? values_.abs().maxCoeff() : Scalar(0); }
  Scalar min() const { return values_.minCoeff(); }
  Scalar max() const { return values_.maxCoeff(); }

  /// Mean with a fixed left-to-right summation order.
  Scalar mean() const {
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < values_.size(); ++i) acc += values_[i];
    return acc / static_cast<Scalar>(values_.size());
  }

  BasicField operator-() const { return BasicField(grid_, -values_); }

  BasicField& operator+=(const BasicField& o) {
    check_same_grid(o);
    values_ += o.values_;
    return *this;
  }
  BasicField& operator-=(const BasicField& o) {
    check_same_grid(o);
    values_ -= o.values_;
    return *this;
  }
  BasicField& operator*=(Scalar c) {
    values_ *= c;
    return *this;
  }

  friend BasicField operator+(BasicField a, const BasicField& b) { return a += b; }
  friend BasicField operator-(BasicField a, const BasicField& b) { return a -= b; }
  friend BasicField operator*(BasicField a, Scalar c) { return a *= c; }
  friend BasicField operator*(Scalar c, BasicField a) { return a *= c; }
  friend BasicField operator+(BasicField a, Scalar c) {
    a.values_ += c;
    return a;
  }
  friend BasicField operator+(Scalar c, BasicField a) { return std::move(a) + c; }
  friend BasicField operator-(BasicField a, Scalar c) {
    a.values_ -= c;
    return a;
  }
  friend BasicField operator-(Scalar c, const BasicField& a) {
    return BasicField(a.grid_, c - a.values_);
  }

  void check_same_grid(const BasicField& o) const {
    if (!(grid_ == o.grid_)) throw DomainError("grid mismatch");
  }

 private:
  PeriodicGrid grid_;
  Array values_;
};

using ScalarField = BasicField<double>;

/// Collocated product, no dealiasing. Used where the operand spectra are known
/// to be resolved, and in pointwise formulas evaluated at grid points.
template <typename Scalar>
BasicField<Scalar> pointwise_mul(const BasicField<Scalar>& a, const BasicField<Scalar>& b) {
  a.check_same_grid(b);
  return BasicField<Scalar>(a.grid(), a.values() * b.values());
}

/// Collocated quotient; the denominator must stay above 1e-12 * max|b|.
template <typename Scalar>
BasicField<Scalar> div(const BasicField<Scalar>& a, const BasicField<Scalar>& b) {
  a.check_same_grid(b);
  const Scalar floor = Scalar(1e-12) * b.max_abs();
  if (b.values().abs().minCoeff() <= floor || b.max_abs() == 0)
    throw DomainError("division by near-zero field");
  return BasicField<Scalar>(a.grid(), a.values() / b.values());
}

template <typename Scalar, class Fn>
BasicField<Scalar> map(const BasicField<Scalar>& a, Fn&& fn) {
  typename BasicField<Scalar>::Array v(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) v[i] = fn(a[i]);
  return BasicField<Scalar>(a.grid(), std::move(v));
}

template <typename Scalar>
BasicField<Scalar> sin(const BasicField<Scalar>& a) { return map(a, [](Scalar v) { return std::sin(v); }); }
template <typename Scalar>
BasicField<Scalar> cos(const BasicField<Scalar>& a) { return map(a, [](Scalar v) { return std::cos(v); }); }
template <typename Scalar>
BasicField<Scalar> exp(const BasicField<Scalar>& a) { return map(a, [](Scalar v) { return std::exp(v); }); }
template <typename Scalar>
BasicField<Scalar> tanh(const BasicField<Scalar>& a) { return map(a, [](Scalar v) { return std::tanh(v); }); }
template <typename Scalar>
BasicField<Scalar> sech(const BasicField<Scalar>& a) {
  return map(a, [](Scalar v) { return Scalar(1) / std::cosh(v); });
}
template <typename Scalar>
BasicField<Scalar> log(const BasicField<Scalar>& a) {
  if (a.min() <= 0) throw DomainError("log of non-positive field");
  return map(a, [](Scalar v) { return std::log(v); });
}

}  // namespace folcoil
