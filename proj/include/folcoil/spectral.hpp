#pragma once

#include "folcoil/field.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <set>
#include <string>
#include <vector>

namespace folcoil {

template <typename Scalar>
using Spectrum = std::vector<std::complex<Scalar>>;

namespace detail {

template <typename Scalar>
Eigen::FFT<Scalar>& fft_engine() {
  thread_local Eigen::FFT<Scalar> engine = [] {
    Eigen::FFT<Scalar> e;
    e.SetFlag(Eigen::FFT<Scalar>::Unscaled);
    return e;
  }();
  return engine;
}

inline std::vector<Eigen::Index> strides_of(const std::vector<int>& shape) {
  std::vector<Eigen::Index> s(shape.size(), 1);
  for (int a = static_cast<int>(shape.size()) - 2; a >= 0; --a) s[a] = s[a + 1] * shape[a + 1];
  return s;
}

inline Eigen::Index total_of(const std::vector<int>& shape) {
  Eigen::Index t = 1;
  for (int n : shape) t *= n;
  return t;
}

/// Signed wavenumber of DFT slot j on n points; the Nyquist slot maps to -n/2.
inline int wavenumber(int j, int n) { return j < n / 2 ? j : j - n; }

/// Applies fn(line) to every 1-D line along `axis`.
template <typename Scalar, class Fn>
void for_each_line(Spectrum<Scalar>& data, const std::vector<int>& shape, int axis, Fn&& fn) {
  const auto strides = strides_of(shape);
  const int n = shape[axis];
  const Eigen::Index s = strides[axis];
  const Eigen::Index block = s * n;
  const Eigen::Index total = total_of(shape);
  std::vector<std::complex<Scalar>> line(n);
  for (Eigen::Index outer = 0; outer < total; outer += block)
    for (Eigen::Index inner = 0; inner < s; ++inner) {
      const Eigen::Index base = outer + inner;
      for (int j = 0; j < n; ++j) line[j] = data[base + j * s];
      fn(line);
      for (int j = 0; j < n; ++j) data[base + j * s] = line[j];
    }
}

template <typename Scalar>
void fft_axis(Spectrum<Scalar>& data, const std::vector<int>& shape, int axis, bool forward) {
  auto& engine = fft_engine<Scalar>();
  std::vector<std::complex<Scalar>> out(shape[axis]);
  for_each_line<Scalar>(data, shape, axis, [&](std::vector<std::complex<Scalar>>& line) {
    if (forward)
      engine.fwd(out, line);
    else
      engine.inv(out, line);
    line.swap(out);
  });
}

/// Changes the number of Fourier slots along one axis (zero-pad or truncate),
/// keeping the represented trigonometric polynomial where possible. The
/// Nyquist coefficient is split on padding and folded on truncation.
template <typename Scalar>
Spectrum<Scalar> resize_axis(const Spectrum<Scalar>& in, std::vector<int>& shape, int axis, int m) {
  const int n = shape[axis];
  if (m == n) return in;
  std::vector<int> out_shape = shape;
  out_shape[axis] = m;
  const auto si = strides_of(shape);
  const auto so = strides_of(out_shape);
  Spectrum<Scalar> out(total_of(out_shape));
  const Eigen::Index outer_count = total_of(shape) / (si[axis] * n);
  for (Eigen::Index outer = 0; outer < outer_count; ++outer)
    for (Eigen::Index inner = 0; inner < si[axis]; ++inner) {
      const Eigen::Index bi = outer * si[axis] * n + inner;
      const Eigen::Index bo = outer * so[axis] * m + inner;
      auto src = [&](int j) { return in[bi + j * si[axis]]; };
      auto dst = [&](int j) -> std::complex<Scalar>& { return out[bo + j * so[axis]]; };
      if (m > n) {
        for (int j = 0; j < n; ++j) {
          const int k = wavenumber(j, n);
          if (k == -n / 2) {
            dst(n / 2) += Scalar(0.5) * src(j);
            dst(m - n / 2) += Scalar(0.5) * src(j);
          } else {
            dst(k >= 0 ? k : m + k) = src(j);
          }
        }
      } else {
        for (int j = 0; j < n; ++j) {
          const int k = wavenumber(j, n);
          if (k > -m / 2 && k < m / 2)
            dst(k >= 0 ? k : m + k) = src(j);
          else if (k == m / 2 || k == -m / 2)
            dst(m / 2) += src(j);
        }
      }
    }
  shape = out_shape;
  return out;
}

}  // namespace detail

/// Normalized Fourier coefficients: values = sum_k c_k exp(i k.x).
template <typename Scalar>
Spectrum<Scalar> spectrum(const BasicField<Scalar>& f) {
  const auto& shape = f.grid().resolutions();
  Spectrum<Scalar> data(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) data[i] = f[i];
  for (int a = 0; a < f.grid().dim(); ++a) detail::fft_axis<Scalar>(data, shape, a, true);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(f.size());
  for (auto& c : data) c *= inv;
  return data;
}

/// Real part of the trigonometric sum with the given coefficients.
template <typename Scalar>
BasicField<Scalar> from_spectrum(const PeriodicGrid& grid, Spectrum<Scalar> data) {
  for (int a = 0; a < grid.dim(); ++a)
    detail::fft_axis<Scalar>(data, grid.resolutions(), a, false);
  typename BasicField<Scalar>::Array v(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) v[i] = data[i].real();
  return BasicField<Scalar>(grid, std::move(v));
}

/// Exact derivative of the trigonometric interpolant along one axis.
template <typename Scalar>
BasicField<Scalar> spectral_partial(const BasicField<Scalar>& f, int axis) {
  const auto& g = f.grid();
  if (axis < 0 || axis >= g.dim()) throw DomainError("unknown axis");
  const int n = g.resolution(axis);
  Spectrum<Scalar> data(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) data[i] = f[i];
  auto& engine = detail::fft_engine<Scalar>();
  std::vector<std::complex<Scalar>> tmp(n);
  const Scalar scale = Scalar(1) / n;
  detail::for_each_line<Scalar>(data, g.resolutions(), axis, [&](std::vector<std::complex<Scalar>>& line) {
    engine.fwd(tmp, line);
    for (int j = 0; j < n; ++j) {
      const int k = detail::wavenumber(j, n);
      tmp[j] = (k == -n / 2) ? std::complex<Scalar>(0)
                             : tmp[j] * std::complex<Scalar>(0, k * scale);
    }
    engine.inv(line, tmp);
  });
  typename BasicField<Scalar>::Array v(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) v[i] = data[i].real();
  return BasicField<Scalar>(g, std::move(v));
}

template <typename Scalar>
BasicField<Scalar> spectral_partial(const BasicField<Scalar>& f, const std::string& axis) {
  return spectral_partial(f, f.grid().axis_index(axis));
}

/// Largest |k| along `axis` carrying a coefficient above rel_tol * max|c|.
template <typename Scalar>
int highest_mode(const Spectrum<Scalar>& c, const PeriodicGrid& g, int axis, Scalar rel_tol = Scalar(1e-14)) {
  Scalar cmax = 0;
  for (const auto& z : c) cmax = std::max(cmax, std::abs(z));
  if (cmax == 0) return 0;
  const int n = g.resolution(axis);
  const Eigen::Index s = g.stride(axis);
  int kmax = 0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(c.size()); ++i)
    if (std::abs(c[i]) > rel_tol * cmax) {
      const int j = static_cast<int>((i / s) % n);
      kmax = std::max(kmax, std::abs(detail::wavenumber(j, n)));
    }
  return kmax;
}

/// Product with 3/2-rule dealiasing. Axes where the two operand spectra can
/// reach the half band (Ka + Kb >= N/2) are padded to 3N/2 before the
/// pointwise multiply and truncated afterwards; otherwise the collocated
/// product is already exact.
template <typename Scalar>
BasicField<Scalar> mul(const BasicField<Scalar>& a, const BasicField<Scalar>& b) {
  a.check_same_grid(b);
  const auto& g = a.grid();
  const auto ca = spectrum(a);
  const auto cb = spectrum(b);
  std::vector<int> padded = g.resolutions();
  bool any = false;
  for (int ax = 0; ax < g.dim(); ++ax) {
    const int n = g.resolution(ax);
    if (highest_mode(ca, g, ax) + highest_mode(cb, g, ax) >= n / 2) {
      padded[ax] = 3 * n / 2;
      any = true;
    }
  }
  if (!any) return pointwise_mul(a, b);

  auto lift = [&](Spectrum<Scalar> c) {
    std::vector<int> shape = g.resolutions();
    for (int ax = 0; ax < g.dim(); ++ax) c = detail::resize_axis<Scalar>(c, shape, ax, padded[ax]);
    for (int ax = 0; ax < g.dim(); ++ax) detail::fft_axis<Scalar>(c, shape, ax, false);
    return c;
  };
  Spectrum<Scalar> pa = lift(ca);
  const Spectrum<Scalar> pb = lift(cb);
  Eigen::Index total = detail::total_of(padded);
  for (Eigen::Index i = 0; i < total; ++i) pa[i] = std::complex<Scalar>(pa[i].real() * pb[i].real(), 0);
  for (int ax = 0; ax < g.dim(); ++ax) detail::fft_axis<Scalar>(pa, padded, ax, true);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(total);
  for (auto& z : pa) z *= inv;
  // the retained band is |k| < N/2 on every padded axis, Nyquist included
  for (int ax = 0; ax < g.dim(); ++ax) {
    if (padded[ax] == g.resolution(ax)) continue;
    const int n = g.resolution(ax);
    const int m = padded[ax];
    detail::for_each_line<Scalar>(pa, padded, ax, [&](std::vector<std::complex<Scalar>>& line) {
      for (int j = 0; j < m; ++j)
        if (std::abs(detail::wavenumber(j, m)) >= n / 2) line[j] = 0;
    });
  }
  std::vector<int> shape = padded;
  for (int ax = 0; ax < g.dim(); ++ax) pa = detail::resize_axis<Scalar>(pa, shape, ax, g.resolution(ax));
  return from_spectrum<Scalar>(g, std::move(pa));
}

/// Fourier interpolation onto another resolution (same axes).
template <typename Scalar>
BasicField<Scalar> resample(const BasicField<Scalar>& f, const PeriodicGrid& target) {
  if (target.axes() != f.grid().axes()) throw DomainError("resample: axis mismatch");
  if (target == f.grid()) return f;
  auto c = spectrum(f);
  std::vector<int> shape = f.grid().resolutions();
  for (int ax = 0; ax < target.dim(); ++ax)
    c = detail::resize_axis<Scalar>(c, shape, ax, target.resolution(ax));
  return from_spectrum<Scalar>(target, std::move(c));
}

/// Average over the given axes, broadcast back along them.
template <typename Scalar>
BasicField<Scalar> leafwise_mean(const BasicField<Scalar>& f, const std::vector<int>& leaf_axes) {
  if (leaf_axes.empty()) return f;
  const auto& g = f.grid();
  std::vector<bool> is_leaf(g.dim(), false);
  Eigen::Index count = 1;
  for (int a : leaf_axes) {
    if (a < 0 || a >= g.dim()) throw DomainError("unknown axis");
    if (!is_leaf[a]) count *= g.resolution(a);
    is_leaf[a] = true;
  }
  auto key = [&](Eigen::Index i) {
    auto idx = g.unravel(i);
    for (int a = 0; a < g.dim(); ++a)
      if (is_leaf[a]) idx[a] = 0;
    return g.ravel(idx);
  };
  Eigen::Array<Scalar, Eigen::Dynamic, 1> acc = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) acc[key(i)] += f[i];
  typename BasicField<Scalar>::Array v(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) v[i] = acc[key(i)] / static_cast<Scalar>(count);
  return BasicField<Scalar>(g, std::move(v));
}

template <typename Scalar>
BasicField<Scalar> leafwise_mean(const BasicField<Scalar>& f, const std::set<std::string>& leaf_axes) {
  std::vector<int> idx;
  for (const auto& name : leaf_axes) idx.push_back(f.grid().axis_index(name));
  return leafwise_mean(f, idx);
}

/// Evaluates the trigonometric interpolant of a field (and its gradient) at
/// arbitrary points. The Nyquist term is carried as a cosine and contributes
/// nothing to the gradient, matching spectral_partial.
template <typename Scalar>
class SpectralInterpolant {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SpectralInterpolant() = default;
  explicit SpectralInterpolant(const BasicField<Scalar>& f) : grid_(f.grid()), coeff_(spectrum(f)) {}

  const PeriodicGrid& grid() const { return grid_; }

  Scalar value(const Vector& x) const {
    Scalar v;
    evaluate(x, v, nullptr);
    return v;
  }

  /// Returns the value; fills grad (size dim).
  Scalar value_and_gradient(const Vector& x, Vector& grad) const {
    Scalar v;
    grad.resize(grid_.dim());
    evaluate(x, v, &grad);
    return v;
  }

 private:
  using C = std::complex<Scalar>;

  void evaluate(const Vector& x, Scalar& value, Vector* grad) const {
    const int d = grid_.dim();
    std::vector<std::vector<C>> w(d), dw(d);
    for (int a = 0; a < d; ++a) {
      const int n = grid_.resolution(a);
      w[a].resize(n);
      dw[a].resize(n);
      for (int j = 0; j < n; ++j) {
        const int k = detail::wavenumber(j, n);
        if (k == -n / 2) {
          w[a][j] = C(std::cos(Scalar(n / 2) * x[a]), 0);
          dw[a][j] = C(0);
        } else {
          w[a][j] = std::polar(Scalar(1), Scalar(k) * x[a]);
          dw[a][j] = C(0, Scalar(k)) * w[a][j];
        }
      }
    }
    value = contract(w, w, -1);
    if (grad)
      for (int b = 0; b < d; ++b) (*grad)[b] = contract(w, dw, b);
  }

  Scalar contract(const std::vector<std::vector<C>>& w, const std::vector<std::vector<C>>& dw, int dax) const {
    std::vector<C> cur(coeff_.begin(), coeff_.end());
    for (int a = grid_.dim() - 1; a >= 0; --a) {
      const int n = grid_.resolution(a);
      const auto& wa = (a == dax) ? dw[a] : w[a];
      const std::size_t m = cur.size() / n;
      std::vector<C> next(m);
      for (std::size_t o = 0; o < m; ++o) {
        C acc(0);
        const C* row = cur.data() + o * n;
        for (int j = 0; j < n; ++j) acc += row[j] * wa[j];
        next[o] = acc;
      }
      cur.swap(next);
    }
    return cur[0].real();
  }

  PeriodicGrid grid_;
  Spectrum<Scalar> coeff_;
};

}  // namespace folcoil
