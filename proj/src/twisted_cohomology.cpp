#include "folcoil/twisted_cohomology.hpp"

#include "folcoil/spectral.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>

namespace folcoil {
namespace {

using C = std::complex<double>;

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

PeriodicGrid torus_grid(int N) { return PeriodicGrid({"x", "y"}, N); }

ScalarField on_grid(const ScalarField& f, int N) {
  const PeriodicGrid g(f.grid().axes(), N);
  return resample(f, g);
}

int degree_along(const ScalarField& f, int axis) {
  if (f.max_abs() == 0) return 0;
  return highest_mode(spectrum(f), f.grid(), axis, 1e-13);
}

double y_of(int j, int N) { return 2 * M_PI * j / N; }

OperatorMatrix assemble(const ScalarField& u, const ScalarField& m, int N) {
  if (N < 16 || !power_of_two(N)) throw DomainError("operator resolution must be a power of two >= 16");
  const int dx = std::max(degree_along(u, 0), degree_along(m, 0));
  const int dy = std::max(degree_along(u, 1), degree_along(m, 1));
  OperatorMatrix M;
  M.N = N;
  M.Kx = N / 2 - 1 - dx;
  M.Ky = N / 2 - 1 - dy;
  if (M.Kx < 0 || M.Ky < 0) throw DomainError("operator coefficients under-resolved");
  M.split = (dx == 0);
  const int ncy = 2 * M.Ky + 1;

  if (M.split) {
    // u, m constant in x: sample them along the first column
    std::vector<double> uy(N), my(N);
    for (int j = 0; j < N; ++j) {
      uy[j] = u[j];
      my[j] = m[j];
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(N));
    for (int kx = -M.Kx; kx <= M.Kx; ++kx) {
      OperatorMatrix::Block b;
      b.kx = kx;
      b.matrix.resize(N, ncy);
      for (int ky = -M.Ky; ky <= M.Ky; ++ky) {
        b.modes.emplace_back(kx, ky);
        const int c = ky + M.Ky;
        for (int j = 0; j < N; ++j) {
          const C e = std::polar(1.0, ky * y_of(j, N));
          b.matrix(j, c) = (C(0, kx) - C(0, ky) * uy[j] - my[j]) * e * s;
        }
      }
      M.blocks.push_back(std::move(b));
    }
  } else {
    if (N > 32) throw DomainError("dense assembly limited to N <= 32");
    OperatorMatrix::Block b;
    const int ncx = 2 * M.Kx + 1;
    b.matrix.resize(static_cast<Eigen::Index>(N) * N, static_cast<Eigen::Index>(ncx) * ncy);
    const double s = 1.0 / N;
    for (int kx = -M.Kx; kx <= M.Kx; ++kx)
      for (int ky = -M.Ky; ky <= M.Ky; ++ky) {
        const Eigen::Index c = static_cast<Eigen::Index>(kx + M.Kx) * ncy + (ky + M.Ky);
        b.modes.emplace_back(kx, ky);
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < N; ++j) {
            const Eigen::Index r = static_cast<Eigen::Index>(i) * N + j;
            const C e = std::polar(1.0, kx * y_of(i, N) + ky * y_of(j, N));
            b.matrix(r, c) = (C(0, kx) - C(0, ky) * u[r] - m[r]) * e * s;
          }
      }
    M.blocks.push_back(std::move(b));
  }

  std::vector<double> sv;
  for (const auto& b : M.blocks) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(b.matrix);
    const auto& v = svd.singularValues();
    sv.insert(sv.end(), v.data(), v.data() + v.size());
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  M.singular_values = Eigen::Map<Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
  return M;
}

/// Weights w_j with sum_j w_j p(s_j) = L(p) for all polynomials of degree
/// < size(s), where moments[m] = L(x^m).
Eigen::VectorXd moment_weights(const std::vector<double>& s, const Eigen::VectorXd& moments) {
  const int n = static_cast<int>(s.size());
  Eigen::MatrixXd V(n, n);
  for (int m = 0; m < n; ++m)
    for (int j = 0; j < n; ++j) V(m, j) = std::pow(s[j], m);
  return V.fullPivLu().solve(moments);
}

constexpr int kQuadPoints = 8;
constexpr int kDiffPoints = 9;

/// Interval weights on unit-spaced nodes: weights[a] integrates over
/// [a, a+1] using nodes 0..7.
const std::vector<Eigen::VectorXd>& interval_weights() {
  static const std::vector<Eigen::VectorXd> w = [] {
    std::vector<Eigen::VectorXd> out;
    const double c = 0.5 * (kQuadPoints - 1);
    std::vector<double> s(kQuadPoints);
    for (int j = 0; j < kQuadPoints; ++j) s[j] = j - c;
    for (int a = 0; a < kQuadPoints - 1; ++a) {
      Eigen::VectorXd mom(kQuadPoints);
      const double lo = a - c, hi = a + 1 - c;
      for (int m = 0; m < kQuadPoints; ++m) mom[m] = (std::pow(hi, m + 1) - std::pow(lo, m + 1)) / (m + 1);
      out.push_back(moment_weights(s, mom));
    }
    return out;
  }();
  return w;
}

/// First-derivative weights at node a of nodes 0..8 (unit spacing).
const std::vector<Eigen::VectorXd>& derivative_weights() {
  static const std::vector<Eigen::VectorXd> w = [] {
    std::vector<Eigen::VectorXd> out;
    const double c = 0.5 * (kDiffPoints - 1);
    std::vector<double> s(kDiffPoints);
    for (int j = 0; j < kDiffPoints; ++j) s[j] = j - c;
    for (int a = 0; a < kDiffPoints; ++a) {
      Eigen::VectorXd mom = Eigen::VectorXd::Zero(kDiffPoints);
      const double x = a - c;
      for (int m = 1; m < kDiffPoints; ++m) mom[m] = m * std::pow(x, m - 1);
      out.push_back(moment_weights(s, mom));
    }
    return out;
  }();
  return w;
}

/// Cumulative integral from node 0.
Eigen::VectorXd cumulative(const Eigen::VectorXd& g, double h) {
  const int M = static_cast<int>(g.size());
  if (M < kQuadPoints) throw DomainError("too few line samples");
  const auto& W = interval_weights();
  Eigen::VectorXd F(M);
  F[0] = 0;
  for (int i = 0; i + 1 < M; ++i) {
    const int s = std::clamp(i - (kQuadPoints / 2 - 1), 0, M - kQuadPoints);
    const auto& w = W[i - s];
    double acc = 0;
    for (int j = 0; j < kQuadPoints; ++j) acc += w[j] * g[s + j];
    F[i + 1] = F[i] + h * acc;
  }
  return F;
}

Eigen::VectorXd derivative(const Eigen::VectorXd& f, double h) {
  const int M = static_cast<int>(f.size());
  if (M < kDiffPoints) throw DomainError("too few line samples");
  const auto& W = derivative_weights();
  Eigen::VectorXd d(M);
  for (int i = 0; i < M; ++i) {
    const int s = std::clamp(i - kDiffPoints / 2, 0, M - kDiffPoints);
    const auto& w = W[i - s];
    double acc = 0;
    for (int j = 0; j < kDiffPoints; ++j) acc += w[j] * f[s + j];
    d[i] = acc / h;
  }
  return d;
}

constexpr double kSchwartzLevel = 1e-10;
constexpr double kDecayFactor = 1e2;

ScalarField circle_field(const CircleSample& c) {
  const int n = static_cast<int>(c.values.size());
  if (n < 8 || !power_of_two(n)) throw DomainError("circle samples must be a power of two >= 8");
  return ScalarField(PeriodicGrid({"x"}, n), c.values.array());
}

CircleSample row(const ScalarField& f, int j) {
  const int nx = f.grid().resolution(0), ny = f.grid().resolution(1);
  CircleSample c;
  c.values.resize(nx);
  for (int i = 0; i < nx; ++i) c.values[i] = f[static_cast<Eigen::Index>(i) * ny + j];
  return c;
}

/// Mean-zero antiderivative of a mean-zero circle sample.
CircleSample antiderivative(const CircleSample& h) {
  auto c = spectrum(circle_field(h));
  const int n = static_cast<int>(c.size());
  for (int j = 0; j < n; ++j) {
    const int k = detail::wavenumber(j, n);
    c[j] = (k == 0 || k == -n / 2) ? C(0) : c[j] / C(0, k);
  }
  CircleSample out;
  out.values = from_spectrum(PeriodicGrid({"x"}, n), std::move(c)).values().matrix();
  return out;
}

/// Field p0(x)(1 + cos y)/2 + ppi(x)(1 - cos y)/2.
ScalarField closed_leaf_extension(const CircleSample& p0, const CircleSample& ppi, const PeriodicGrid& g) {
  const int nx = g.resolution(0), ny = g.resolution(1);
  ScalarField::Array v(g.size());
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const double cy = std::cos(y_of(j, ny));
      v[static_cast<Eigen::Index>(i) * ny + j] = p0.values[i] * 0.5 * (1 + cy) + ppi.values[i] * 0.5 * (1 - cy);
    }
  return ScalarField(g, std::move(v));
}

/// Samples a field along the leaf family: out[l](node) for leaves with
/// x-offsets 2 pi l / L. The y-sum is shared across leaves at each node.
std::vector<Eigen::VectorXd> sample_leaves(const ScalarField& f, bool upper, int leaves, const LineSample& line) {
  const int nx = f.grid().resolution(0), ny = f.grid().resolution(1);
  const auto c = spectrum(f);
  const int M = line.size();
  std::vector<Eigen::VectorXd> out(leaves, Eigen::VectorXd(M));
  std::vector<C> wy(ny), inner(nx);
  for (int q = 0; q < M; ++q) {
    const double t = line.t(q);
    const Eigen::Vector2d p0 = leaf_point(upper, 0.0, t);
    for (int j = 0; j < ny; ++j) {
      const int k = detail::wavenumber(j, ny);
      wy[j] = (k == -ny / 2) ? C(std::cos(ny / 2 * p0[1])) : std::polar(1.0, k * p0[1]);
    }
    for (int i = 0; i < nx; ++i) {
      C acc(0);
      const C* rowp = c.data() + static_cast<std::ptrdiff_t>(i) * ny;
      for (int j = 0; j < ny; ++j) acc += rowp[j] * wy[j];
      inner[i] = acc;
    }
    for (int l = 0; l < leaves; ++l) {
      const double x = p0[0] + 2 * M_PI * l / leaves;
      C acc(0);
      for (int i = 0; i < nx; ++i) {
        const int k = detail::wavenumber(i, nx);
        acc += inner[i] * ((k == -nx / 2) ? C(std::cos(nx / 2 * x)) : std::polar(1.0, k * x));
      }
      out[l][q] = acc.real();
    }
  }
  return out;
}

void require_sin_chart(const TorusFoliationChart& chart) {
  const auto want = ScalarField::from_function(chart.grid(), [](const Eigen::VectorXd& p) { return std::sin(p[1]); });
  if ((chart.u() - want).max_abs() > 1e-10) throw DomainError("leaf certificate requires the u = sin y chart");
}

}  // namespace

Eigen::Index OperatorMatrix::rows() const {
  Eigen::Index r = 0;
  for (const auto& b : blocks) r += b.matrix.rows();
  return r;
}

Eigen::Index OperatorMatrix::cols() const {
  Eigen::Index c = 0;
  for (const auto& b : blocks) c += b.matrix.cols();
  return c;
}

ScalarField OperatorMatrix::apply(const ScalarField& g) const {
  const PeriodicGrid grid = torus_grid(N);
  const auto c = spectrum(on_grid(g, N));
  auto coeff = [&](int kx, int ky) {
    const int jx = kx >= 0 ? kx : N + kx, jy = ky >= 0 ? ky : N + ky;
    return c[static_cast<std::size_t>(jx) * N + jy];
  };
  double cmax = 0, outside = 0;
  for (int jx = 0; jx < N; ++jx)
    for (int jy = 0; jy < N; ++jy) {
      const double a = std::abs(c[static_cast<std::size_t>(jx) * N + jy]);
      cmax = std::max(cmax, a);
      const int kx = detail::wavenumber(jx, N), ky = detail::wavenumber(jy, N);
      if (std::abs(kx) > Kx || std::abs(ky) > Ky || kx == -N / 2 || ky == -N / 2) outside = std::max(outside, a);
    }
  if (outside > 1e-12 * std::max(cmax, 1.0)) throw DomainError("field outside operator domain");

  Eigen::ArrayXcd out = Eigen::ArrayXcd::Zero(grid.size());
  for (const auto& b : blocks) {
    Eigen::VectorXcd v(b.matrix.cols());
    for (Eigen::Index col = 0; col < v.size(); ++col) v[col] = coeff(b.modes[col].first, b.modes[col].second);
    const Eigen::VectorXcd r = b.matrix * v;
    if (split) {
      const double s = std::sqrt(static_cast<double>(N));
      for (int i = 0; i < N; ++i) {
        const C e = std::polar(1.0, b.kx * y_of(i, N)) * s;
        for (int j = 0; j < N; ++j) out[static_cast<Eigen::Index>(i) * N + j] += r[j] * e;
      }
    } else {
      out += r.array() * static_cast<double>(N);
    }
  }
  return ScalarField(grid, out.real());
}

OperatorMatrix assemble_operator(const TorusFoliationChart& chart, bool twisted, int N) {
  const ScalarField u = on_grid(chart.u(), N);
  const ScalarField m = twisted ? -spectral_partial(u, 1) : ScalarField::zero(u.grid());
  return assemble(u, m, N);
}

OperatorMatrix assemble_operator_with_m(const TorusFoliationChart& chart, const ScalarField& m, int N) {
  return assemble(on_grid(chart.u(), N), on_grid(m, N), N);
}

int kernel_dimension(const OperatorMatrix& M, double threshold) {
  const double cut = threshold * M.sigma_max();
  int n = 0;
  for (Eigen::Index i = 0; i < M.singular_values.size(); ++i)
    if (M.singular_values[i] <= cut) ++n;
  return n;
}

double singular_value_gap(const OperatorMatrix& M, double threshold) {
  const double smax = M.sigma_max();
  if (smax == 0) return 0;
  double best = smax;
  for (Eigen::Index i = 0; i < M.singular_values.size(); ++i)
    if (M.singular_values[i] > threshold * smax) best = std::min(best, M.singular_values[i]);
  return best / smax;
}

Periods periods(const ScalarField& f, const TorusFoliationChart& chart) {
  if (f.grid().dim() != 2 || f.grid().resolution(1) % 2 != 0) throw DomainError("periods need a 2-grid");
  const auto& u = chart.u();
  const int ny = u.grid().resolution(1);
  const double scale = std::max(1.0, u.max_abs());
  for (int j : {0, ny / 2}) {
    const auto r = row(u, j);
    if (r.values.cwiseAbs().maxCoeff() > 1e-10 * scale) throw DomainError("no closed leaf");
  }
  const int fy = f.grid().resolution(1);
  return {row(f, 0).values.mean(), row(f, fy / 2).values.mean()};
}

Eigen::VectorXd LineSample::nodes() const {
  Eigen::VectorXd t(size());
  for (int j = 0; j < size(); ++j) t[j] = this->t(j);
  return t;
}

CircleSample periodic_ode_solve(const CircleSample& h, int c) {
  if (c != 1 && c != -1) throw DomainError("periodic ODE coefficient must be +1 or -1");
  const int n = static_cast<int>(h.values.size());
  auto s = spectrum(circle_field(h));
  for (int j = 0; j < n; ++j) {
    const int k = detail::wavenumber(j, n);
    if (k == -n / 2) {
      // cosine Nyquist term: f = h (c cos + (n/2) sin)/(c^2 + (n/2)^2), sine vanishes on nodes
      s[j] *= double(c) / (1.0 + 0.25 * n * n);
    } else {
      s[j] /= C(c, k);
    }
  }
  CircleSample out;
  out.values = from_spectrum(PeriodicGrid({"x"}, n), std::move(s)).values().matrix();
  return out;
}

double periodic_ode_residual(const CircleSample& f, const CircleSample& h, int c) {
  const auto F = circle_field(f);
  const auto r = spectral_partial(F, 0) + double(c) * F - circle_field(h);
  return r.max_abs();
}

LineSample leaf_ode_solve(const LineSample& h) {
  const int M = h.size();
  if (M % 2 == 0 || M < 2 * kDiffPoints) throw DomainError("leaf samples need an odd count (t = 0 a node)");
  if (!(h.T > 0) || h.T > 300) throw DomainError("leaf truncation radius out of range");
  if (std::abs(h.values[0]) > kSchwartzLevel || std::abs(h.values[M - 1]) > kSchwartzLevel)
    throw DomainError("not Schwartz at this truncation");
  const Eigen::VectorXd t = h.nodes();
  Eigen::VectorXd g(M);
  for (int j = 0; j < M; ++j) g[j] = h.values[j] * std::cosh(t[j]);
  const Eigen::VectorXd F = cumulative(g, h.step());
  const double F0 = F[(M - 1) / 2];
  LineSample f{h.T, Eigen::VectorXd(M)};
  for (int j = 0; j < M; ++j) f.values[j] = (F[j] - F0) / std::cosh(t[j]);
  const double bound = kDecayFactor * kSchwartzLevel;
  if (std::abs(f.values[0]) > bound || std::abs(f.values[M - 1]) > bound)
    throw DomainError("not Schwartz at this truncation");
  return f;
}

double leaf_ode_residual(const LineSample& f, const LineSample& h) {
  if (f.size() != h.size()) throw DomainError("leaf sample size mismatch");
  const Eigen::VectorXd d = derivative(f.values, f.step());
  const Eigen::VectorXd t = f.nodes();
  double r = 0;
  for (int j = 0; j < f.size(); ++j) r = std::max(r, std::abs(d[j] + std::tanh(t[j]) * f.values[j] - h.values[j]));
  return r;
}

double line_integral(const LineSample& h) {
  const Eigen::VectorXd F = cumulative(h.values, h.step());
  return F[h.size() - 1];
}

Eigen::Vector2d leaf_point(bool upper, double x0, double t) {
  const double y = 2 * std::atan(std::exp(-t));  // 2 arccot(e^t)
  return {x0 + t, upper ? 2 * M_PI - y : y};
}

ScalarField torus_d(const ScalarField& g, const TorusFoliationChart& chart, bool twisted) {
  const ScalarField u = resample(chart.u(), g.grid());
  ScalarField out = spectral_partial(g, 0) - mul(u, spectral_partial(g, 1));
  if (twisted) out += mul(spectral_partial(u, 1), g);
  return out;
}

CoboundaryReport coboundary_certificate(const ScalarField& f, const TorusFoliationChart& chart, bool twisted,
                                        const CertificateOptions& opt,
                                        const std::optional<ScalarField>& reference) {
  require_sin_chart(chart);
  if (opt.leaves < 1 || opt.nodes % 2 == 0) throw DomainError("bad leaf sampling options");
  const auto& g = f.grid();
  const int ny = g.resolution(1);
  CoboundaryReport rep;
  rep.twisted = twisted;
  LineSample line{opt.T_leaf, Eigen::VectorXd::Zero(opt.nodes)};
  const auto cosy = ScalarField::from_function(g, [](const Eigen::VectorXd& p) { return std::cos(p[1]); });
  const auto half_plus = 0.5 * (ScalarField::constant(g, 1.0) + cosy);
  const auto half_minus = 0.5 * (ScalarField::constant(g, 1.0) - cosy);

  if (!twisted) {
    rep.periods = periods(f, chart);
    CircleSample r0 = row(f, 0), rpi = row(f, ny / 2);
    r0.values.array() -= rep.periods.a0;
    rpi.values.array() -= rep.periods.api;
    const auto E = closed_leaf_extension(antiderivative(r0), antiderivative(rpi), g);
    const ScalarField fred =
        f - rep.periods.a0 * half_plus - rep.periods.api * half_minus - torus_d(E, chart, false);
    for (bool upper : {false, true}) {
      const auto vals = sample_leaves(fred, upper, opt.leaves, line);
      auto& phi = upper ? rep.phi_upper : rep.phi_lower;
      for (const auto& v : vals) phi.push_back(line_integral(LineSample{opt.T_leaf, v}));
    }
    double sum = 0;
    for (double v : rep.phi_lower) sum += v;
    for (double v : rep.phi_upper) sum += v;
    rep.phi_shift = sum / (rep.phi_lower.size() + rep.phi_upper.size());
    rep.untwisted_max = std::max(std::abs(rep.periods.a0), std::abs(rep.periods.api));
    for (auto* phi : {&rep.phi_lower, &rep.phi_upper})
      for (double& v : *phi) {
        v -= rep.phi_shift;
        rep.untwisted_max = std::max(rep.untwisted_max, std::abs(v));
      }
    rep.coboundary = rep.untwisted_max <= opt.tol;
    return rep;
  }

  rep.p0 = periodic_ode_solve(row(f, 0), 1);
  rep.ppi = periodic_ode_solve(row(f, ny / 2), -1);
  rep.closed_leaf_residual = std::max(periodic_ode_residual(rep.p0, row(f, 0), 1),
                                      periodic_ode_residual(rep.ppi, row(f, ny / 2), -1));
  const auto E = closed_leaf_extension(rep.p0, rep.ppi, g);
  const ScalarField fred = f - torus_d(E, chart, true);
  rep.closed_leaf_residual = std::max(
      {rep.closed_leaf_residual, row(fred, 0).values.cwiseAbs().maxCoeff(), row(fred, ny / 2).values.cwiseAbs().maxCoeff()});

  double roundtrip = 0;
  for (bool upper : {false, true}) {
    const auto hs = sample_leaves(fred, upper, opt.leaves, line);
    std::vector<Eigen::VectorXd> gs, es;
    if (reference) {
      gs = sample_leaves(resample(*reference, g), upper, opt.leaves, line);
      es = sample_leaves(E, upper, opt.leaves, line);
    }
    for (int l = 0; l < opt.leaves; ++l) {
      const LineSample h{opt.T_leaf, hs[l]};
      const LineSample P = leaf_ode_solve(h);
      rep.leaf_ode_residual = std::max(rep.leaf_ode_residual, leaf_ode_residual(P, h));
      rep.decay = std::max({rep.decay, std::abs(P.values[0]), std::abs(P.values[P.size() - 1])});
      if (reference) {
        const int mid = (P.size() - 1) / 2;
        const double c0 = gs[l][mid] - es[l][mid];
        for (int q = 0; q < P.size(); ++q) {
          const double want = gs[l][q] - es[l][q] - c0 / std::cosh(line.t(q));
          roundtrip = std::max(roundtrip, std::abs(want - P.values[q]));
        }
      }
    }
  }
  if (reference) rep.roundtrip_residual = roundtrip;
  rep.coboundary = std::max({rep.closed_leaf_residual, rep.leaf_ode_residual, rep.decay}) <= 1e-6;
  return rep;
}

}  // namespace folcoil
