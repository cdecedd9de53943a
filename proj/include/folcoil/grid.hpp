#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace folcoil {

/// Raised for invalid inputs to numerical operations (bad grids, non-positive
/// defining forms, divergent sections, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr int kMaxGridDim = 5;

/// Uniform periodic grid on [0, 2pi)^dim. Storage is row-major: the last axis
/// varies fastest.
class PeriodicGrid {
 public:
  PeriodicGrid() = default;

  PeriodicGrid(std::vector<std::string> axes, std::vector<int> resolution)
      : axes_(std::move(axes)), res_(std::move(resolution)) {
    if (axes_.empty() || static_cast<int>(axes_.size()) > kMaxGridDim)
      throw DomainError("grid dimension must be between 1 and " +
                        std::to_string(kMaxGridDim));
    if (axes_.size() != res_.size())
      throw DomainError("grid axes and resolutions differ in length");
    for (std::size_t a = 0; a < axes_.size(); ++a) {
      const int n = res_[a];
      if (n < 8 || (n & (n - 1)) != 0)
        throw DomainError("resolution on axis '" + axes_[a] +
                          "' must be a power of two >= 8");
      for (std::size_t b = 0; b < a; ++b)
        if (axes_[a] == axes_[b])
          throw DomainError("duplicate axis '" + axes_[a] + "'");
    }
    strides_.assign(res_.size(), 1);
    for (int a = dim() - 2; a >= 0; --a)
      strides_[a] = strides_[a + 1] * res_[a + 1];
    size_ = strides_[0] * res_[0];
  }

  /// Same resolution on every axis.
  PeriodicGrid(std::vector<std::string> axes, int resolution)
      : PeriodicGrid(axes, std::vector<int>(axes.size(), resolution)) {}

  int dim() const { return static_cast<int>(axes_.size()); }
  Eigen::Index size() const { return size_; }
  int resolution(int axis) const { return res_.at(axis); }
  const std::vector<int>& resolutions() const { return res_; }
  const std::vector<std::string>& axes() const { return axes_; }
  const std::string& axis_name(int axis) const { return axes_.at(axis); }
  Eigen::Index stride(int axis) const { return strides_.at(axis); }

  bool has_axis(const std::string& name) const {
    for (const auto& a : axes_)
      if (a == name) return true;
    return false;
  }

  int axis_index(const std::string& name) const {
    for (int a = 0; a < dim(); ++a)
      if (axes_[a] == name) return a;
    throw DomainError("unknown axis '" + name + "'");
  }

  double spacing(int axis) const { return kTwoPi / res_.at(axis); }
  double coordinate(int axis, int i) const { return i * spacing(axis); }

  /// Multi-index of a flat position.
  std::vector<int> unravel(Eigen::Index flat) const {
    std::vector<int> idx(res_.size());
    for (int a = 0; a < dim(); ++a) {
      idx[a] = static_cast<int>(flat / strides_[a]);
      flat %= strides_[a];
    }
    return idx;
  }

  Eigen::Index ravel(const std::vector<int>& idx) const {
    Eigen::Index flat = 0;
    for (int a = 0; a < dim(); ++a) flat += idx[a] * strides_[a];
    return flat;
  }

  /// Coordinates of a flat position.
  Eigen::VectorXd point(Eigen::Index flat) const {
    Eigen::VectorXd p(dim());
    for (int a = 0; a < dim(); ++a) {
      p[a] = coordinate(a, static_cast<int>(flat / strides_[a]));
      flat %= strides_[a];
    }
    return p;
  }

  PeriodicGrid with_resolution(int n) const {
    return PeriodicGrid(axes_, std::vector<int>(axes_.size(), n));
  }
  PeriodicGrid with_resolutions(std::vector<int> r) const {
    return PeriodicGrid(axes_, std::move(r));
  }

  friend bool operator==(const PeriodicGrid& a, const PeriodicGrid& b) {
    return a.axes_ == b.axes_ && a.res_ == b.res_;
  }

 private:
  std::vector<std::string> axes_;
  std::vector<int> res_;
  std::vector<Eigen::Index> strides_;
  Eigen::Index size_ = 0;
};

}  // namespace folcoil
