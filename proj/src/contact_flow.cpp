#include "folcoil/contact_flow.hpp"

#include "folcoil/foliation.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace folcoil {
namespace {

using Array = ScalarField::Array;

int ipow(int b, int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

/// Multi-index (i1..ir) of flat position `flat`, first index slowest.
std::vector<int> unflatten(int flat, int n, int r) {
  std::vector<int> I(r);
  for (int m = r - 1; m >= 0; --m) {
    I[m] = flat % n;
    flat /= n;
  }
  return I;
}

ScalarField field_of(const PeriodicGrid& g, Array a) { return ScalarField(g, std::move(a)); }

/// Chart partials reused across right-hand-side evaluations.
struct ChartDerivs {
  Array f, inv_f;
  std::vector<Array> R;
  std::vector<Array> f_q;               // d f / d q^i
  std::vector<std::vector<Array>> R_q;  // R_q[j][i] = d R^j / d q^i

  explicit ChartDerivs(const LegendrianChart& c) {
    const int n = c.n();
    f = c.f().values();
    inv_f = f.inverse();
    for (int j = 0; j < n; ++j) R.push_back(c.R(j).values());
    for (int i = 0; i < n; ++i) f_q.push_back(spectral_partial(c.f(), c.leaf_axis(i)).values());
    R_q.resize(n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) R_q[j].push_back(spectral_partial(c.R(j), c.leaf_axis(i)).values());
  }
};

std::vector<Array> rate_arrays(const HamiltonianPoly& H, const LegendrianChart& chart, const ChartDerivs& cd,
                               const std::vector<ScalarField>& P, double t) {
  const int n = chart.n();
  const auto jet = H.on_graph(P, t);
  const Array& h = jet.H.values();
  Array G = h;
  for (int k = 0; k < n; ++k) G -= P[k].values() * jet.H_p[k].values();
  Array Phi = jet.H_x.values();
  for (int k = 0; k < n; ++k) Phi += cd.R[k] * jet.H_q[k].values();
  for (int j = 0; j < n; ++j) {
    Array c = cd.f_q[j];
    for (int k = 0; k < n; ++k) c += P[k].values() * cd.R_q[k][j];
    Phi -= c * jet.H_p[j].values();
  }
  std::vector<Array> out;
  for (int i = 0; i < n; ++i) {
    const Array Px = spectral_partial(P[i], 0).values();
    std::vector<Array> Pq;
    for (int k = 0; k < n; ++k) Pq.push_back(spectral_partial(P[i], chart.leaf_axis(k)).values());
    Array A = Px + cd.f_q[i];
    for (int j = 0; j < n; ++j) A += P[j].values() * cd.R_q[j][i];
    for (int k = 0; k < n; ++k) A += cd.R[k] * Pq[k];
    Array r = A * G * cd.inv_f - jet.H_q[i].values() - Phi * P[i].values() * cd.inv_f;
    for (int k = 0; k < n; ++k) r -= Pq[k] * jet.H_p[k].values();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScalarField> to_fields(const PeriodicGrid& g, const std::vector<Array>& a) {
  std::vector<ScalarField> out;
  for (const auto& x : a) out.push_back(field_of(g, x));
  return out;
}

std::vector<ScalarField> axpy(const std::vector<ScalarField>& P, const std::vector<Array>& k, double h) {
  std::vector<ScalarField> out;
  for (std::size_t i = 0; i < P.size(); ++i) out.push_back(field_of(P[i].grid(), P[i].values() + h * k[i]));
  return out;
}

std::vector<ScalarField> rk4_fields(const HamiltonianPoly& H, const LegendrianChart& chart, const ChartDerivs& cd,
                                    const std::vector<ScalarField>& P, double t, double dt) {
  const auto k1 = rate_arrays(H, chart, cd, P, t);
  const auto k2 = rate_arrays(H, chart, cd, axpy(P, k1, dt / 2), t + dt / 2);
  const auto k3 = rate_arrays(H, chart, cd, axpy(P, k2, dt / 2), t + dt / 2);
  const auto k4 = rate_arrays(H, chart, cd, axpy(P, k3, dt), t + dt);
  std::vector<ScalarField> out;
  for (std::size_t i = 0; i < P.size(); ++i)
    out.push_back(field_of(P[i].grid(), P[i].values() + dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])));
  return out;
}

FoliationChart as_variant(const LegendrianChart& c) { return c; }

/// Interior product of a 2-form with the vector field v (components on the
/// form's coordinates).
FullForm interior(const std::vector<ScalarField>& v, const FullForm& w) {
  const int m = w.space_dim();
  FullForm out(w.grid(), m, 1);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      const ScalarField& comp = w.at({std::min(a, b), std::max(a, b)});
      const ScalarField p = mul(v[a], comp);
      if (a < b)
        out[b] += p;
      else
        out[b] -= p;
    }
  return out;
}

/// dX - v(X) lambda_t with v = L / f.
FullForm extended_tangential_d(const ScalarField& X, const LegendrianChart& c, const FullForm& lam) {
  const int n = c.n();
  const auto& g = X.grid();
  FullForm dX(g, n + 1, 1);
  dX[0] = spectral_partial(X, 0);
  ScalarField vX = dX[0];
  for (int i = 0; i < n; ++i) {
    dX[1 + i] = spectral_partial(X, c.leaf_axis(i));
    vX += mul(c.R(i), dX[1 + i]);
  }
  vX = field_of(g, vX.values() / c.f().values());
  return dX - scale(vX, lam);
}

FullForm lambda_dot_from_rate(const LegendrianChart& c, const std::vector<ScalarField>& pdot) {
  const int n = c.n();
  FullForm out(c.grid(), n + 1, 1);
  for (int k = 0; k < n; ++k) {
    out[0] += mul(c.R(k), pdot[k]);
    out[1 + k] = -pdot[k];
  }
  return out;
}

/// Linear map H -> (d_{q^i} H - beta_i v(H) - delta_i H)_i with pointwise
/// coefficients, and its transpose. Spectral differentiation is
/// antisymmetric, which gives the adjoint directly.
struct CertificateOperator {
  PeriodicGrid grid;
  int n = 0;
  Array inv_f;
  std::vector<Array> R, beta, delta;

  Eigen::Index unknowns() const { return grid.size(); }
  Eigen::Index rows() const { return n * grid.size(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& h) const {
    const ScalarField H(grid, h.array());
    Array vH = spectral_partial(H, 0).values();
    std::vector<Array> Hq;
    for (int i = 0; i < n; ++i) {
      Hq.push_back(spectral_partial(H, i + 1).values());
      vH += R[i] * Hq[i];
    }
    vH *= inv_f;
    Eigen::VectorXd out(rows());
    const Eigen::Index M = grid.size();
    for (int i = 0; i < n; ++i) out.segment(i * M, M) = (Hq[i] - beta[i] * vH - delta[i] * h.array()).matrix();
    return out;
  }

  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const {
    const Eigen::Index M = grid.size();
    Array c = Array::Zero(M);
    Array out = Array::Zero(M);
    for (int i = 0; i < n; ++i) {
      const Array yi = y.segment(i * M, M).array();
      out -= spectral_partial(ScalarField(grid, yi), i + 1).values();
      out -= delta[i] * yi;
      c += beta[i] * yi;
    }
    c *= inv_f;
    out += spectral_partial(ScalarField(grid, c), 0).values();
    for (int k = 0; k < n; ++k) out += spectral_partial(ScalarField(grid, R[k] * c), k + 1).values();
    return out.matrix();
  }
};

/// Paige-Saunders LSQR; returns the solution.
Eigen::VectorXd lsqr(const CertificateOperator& A, const Eigen::VectorXd& b, int max_it, double tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(A.unknowns());
  double beta = b.norm();
  if (beta == 0) return x;
  Eigen::VectorXd u = b / beta;
  Eigen::VectorXd v = A.apply_transpose(u);
  double alpha = v.norm();
  if (alpha == 0) return x;
  v /= alpha;
  Eigen::VectorXd w = v;
  double phibar = beta, rhobar = alpha, anorm2 = alpha * alpha;
  for (int it = 0; it < max_it; ++it) {
    u = A.apply(v) - alpha * u;
    beta = u.norm();
    if (beta > 0) u /= beta;
    anorm2 += beta * beta;
    v = A.apply_transpose(u) - beta * v;
    alpha = v.norm();
    if (alpha > 0) v /= alpha;
    anorm2 += alpha * alpha;
    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho, s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;
    x += (phi / rho) * w;
    w = v - (theta / rho) * w;
    if (phibar <= tol * b.norm()) break;
    if (phibar * alpha * std::abs(c) <= tol * std::sqrt(anorm2) * phibar) break;
    if (alpha == 0) break;
  }
  return x;
}

double solve_relative_residual(const CertificateOperator& A, const Eigen::VectorXd& b, const IsotopyOptions& opt) {
  const double bn = b.norm();
  if (bn == 0) return 0;
  Eigen::VectorXd x;
  if (A.unknowns() <= opt.dense_limit) {
    Eigen::MatrixXd D(A.rows(), A.unknowns());
    Eigen::VectorXd e = Eigen::VectorXd::Zero(A.unknowns());
    for (Eigen::Index j = 0; j < A.unknowns(); ++j) {
      e[j] = 1;
      D.col(j) = A.apply(e);
      e[j] = 0;
    }
    x = D.completeOrthogonalDecomposition().solve(b);
  } else {
    x = lsqr(A, b, opt.max_iterations, opt.lsqr_tol);
  }
  return (A.apply(x) - b).norm() / bn;
}

std::vector<TangentialForm> beta_dot(const std::vector<TangentialForm>& beta, double dt) {
  const int K = static_cast<int>(beta.size());
  std::vector<TangentialForm> out;
  for (int k = 0; k < K; ++k) {
    if (k == 0)
      out.push_back((-3.0 * beta[0] + 4.0 * beta[1] - beta[2]) * (1 / (2 * dt)));
    else if (k == K - 1)
      out.push_back((3.0 * beta[K - 1] - 4.0 * beta[K - 2] + beta[K - 3]) * (1 / (2 * dt)));
    else
      out.push_back((beta[k + 1] - beta[k - 1]) * (1 / (2 * dt)));
  }
  return out;
}

struct NodeResult {
  double residual = 0;
  double frobenius = 0;
};

std::vector<NodeResult> certificate_nodes(const LegendrianChart& chart, const std::vector<TangentialForm>& beta,
                                          double dt, const IsotopyOptions& opt) {
  const int n = chart.n();
  const auto fc = as_variant(chart);
  const auto bdot = beta_dot(beta, dt);
  const FullForm lam = lambda_form(chart);
  std::vector<NodeResult> out;
  for (std::size_t k = 0; k < beta.size(); ++k) {
    const FullForm lt = lam + lift_L(beta[k], fc);
    DeltaResult d;
    try {
      d = delta_form(chart, lt);
    } catch (const DomainError& e) {
      throw DomainError("path node " + std::to_string(k) + ": " + e.what());
    }
    CertificateOperator A;
    A.grid = chart.grid();
    A.n = n;
    A.inv_f = chart.f().values().inverse();
    for (int i = 0; i < n; ++i) {
      A.R.push_back(chart.R(i).values());
      A.beta.push_back(beta[k][i].values());
      A.delta.push_back(d.delta[i].values());
    }
    Eigen::VectorXd b(A.rows());
    const Eigen::Index M = A.grid.size();
    for (int i = 0; i < n; ++i) b.segment(i * M, M) = bdot[k][i].values().matrix();
    out.push_back({solve_relative_residual(A, b, opt), d.frobenius});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Hamiltonian

HamiltonianPoly::HamiltonianPoly(int n, int r, std::vector<std::vector<ScalarField>> nodes, double dt)
    : n_(n), r_(r), dt_(dt), nodes_(std::move(nodes)) {
  if (n < 1 || r < 0) throw DomainError("bad Hamiltonian shape");
  if (nodes_.empty()) throw DomainError("Hamiltonian needs at least one time node");
  if (nodes_.size() > 1 && !(dt_ > 0)) throw DomainError("time-dependent Hamiltonian needs dt > 0");
  const int count = ipow(n, r);
  const PeriodicGrid& g = nodes_.front().front().grid();
  if (g.dim() != n + 1) throw DomainError("Hamiltonian grid does not match n");
  for (auto& node : nodes_) {
    if (static_cast<int>(node.size()) != count) throw DomainError("Hamiltonian needs n^r coefficient fields per node");
    for (const auto& c : node)
      if (!(c.grid() == g)) throw DomainError("grid mismatch");
    if (r > 1) {
      // average over permutations: group by sorted multi-index
      std::vector<ScalarField> sym = node;
      for (int a = 0; a < count; ++a) {
        auto Ia = unflatten(a, n, r);
        std::sort(Ia.begin(), Ia.end());
        Array acc = Array::Zero(g.size());
        int m = 0;
        for (int b = 0; b < count; ++b) {
          auto Ib = unflatten(b, n, r);
          std::sort(Ib.begin(), Ib.end());
          if (Ib == Ia) {
            acc += node[b].values();
            ++m;
          }
        }
        sym[a] = ScalarField(g, acc / m);
      }
      node = std::move(sym);
    }
  }
  for (const auto& node : nodes_) {
    std::vector<SpectralInterpolant<double>> row;
    for (const auto& c : node) row.emplace_back(c);
    interp_.push_back(std::move(row));
  }
}

HamiltonianPoly HamiltonianPoly::order0(const ScalarField& H0, int n) { return HamiltonianPoly(n, 0, {{H0}}); }

HamiltonianPoly HamiltonianPoly::product_of_vectors(const std::vector<std::vector<ScalarField>>& w) {
  if (w.empty()) throw DomainError("need at least one vector field");
  const int r = static_cast<int>(w.size());
  const int n = static_cast<int>(w.front().size());
  const int count = ipow(n, r);
  const PeriodicGrid& g = w.front().front().grid();
  std::vector<ScalarField> coeff;
  for (int a = 0; a < count; ++a) {
    const auto I = unflatten(a, n, r);
    Array acc = Array::Ones(g.size());
    for (int m = 0; m < r; ++m) acc *= w.at(m).at(I[m]).values();
    coeff.emplace_back(g, std::move(acc));
  }
  return HamiltonianPoly(n, r, {coeff});
}

std::vector<double> HamiltonianPoly::time_weights(double t, std::vector<int>& idx) const {
  idx.clear();
  const int K = node_count();
  if (K == 1) {
    idx.push_back(0);
    return {1.0};
  }
  const int m = std::min(K, 4);
  const int base = std::clamp(static_cast<int>(std::floor(t / dt_)) - (m / 2 - 1), 0, K - m);
  std::vector<double> w(m);
  for (int a = 0; a < m; ++a) {
    idx.push_back(base + a);
    double l = 1;
    for (int b = 0; b < m; ++b)
      if (b != a) l *= (t - (base + b) * dt_) / ((a - b) * dt_);
    w[a] = l;
  }
  return w;
}

std::vector<ScalarField> HamiltonianPoly::coefficients(double t) const {
  std::vector<int> idx;
  const auto w = time_weights(t, idx);
  std::vector<ScalarField> out;
  const int count = static_cast<int>(nodes_.front().size());
  for (int c = 0; c < count; ++c) {
    Array acc = Array::Zero(grid().size());
    for (std::size_t a = 0; a < idx.size(); ++a) acc += w[a] * nodes_[idx[a]][c].values();
    out.emplace_back(grid(), std::move(acc));
  }
  return out;
}

HamiltonianPoly::PointJet HamiltonianPoly::at(const Eigen::VectorXd& xq, const Eigen::VectorXd& p, double t) const {
  std::vector<int> idx;
  const auto w = time_weights(t, idx);
  const int count = static_cast<int>(nodes_.front().size());
  PointJet J;
  J.H_q = Eigen::VectorXd::Zero(n_);
  J.H_p = Eigen::VectorXd::Zero(n_);
  Eigen::VectorXd grad;
  for (int c = 0; c < count; ++c) {
    double val = 0;
    Eigen::VectorXd dv = Eigen::VectorXd::Zero(n_ + 1);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      val += w[a] * interp_[idx[a]][c].value_and_gradient(xq, grad);
      dv += w[a] * grad;
    }
    const auto I = unflatten(c, n_, r_);
    double mono = 1;
    for (int i : I) mono *= p[i];
    J.H += val * mono;
    J.H_x += dv[0] * mono;
    for (int k = 0; k < n_; ++k) J.H_q[k] += dv[1 + k] * mono;
    for (int m = 0; m < r_; ++m) {
      double rest = 1;
      for (int m2 = 0; m2 < r_; ++m2)
        if (m2 != m) rest *= p[I[m2]];
      J.H_p[I[m]] += val * rest;
    }
  }
  return J;
}

HamiltonianPoly::GridJet HamiltonianPoly::on_graph(const std::vector<ScalarField>& P, double t) const {
  if (static_cast<int>(P.size()) != n_) throw DomainError("section has wrong component count");
  const auto coeff = coefficients(t);
  const PeriodicGrid& g = grid();
  const Eigen::Index M = g.size();
  Array H = Array::Zero(M), Hx = Array::Zero(M);
  std::vector<Array> Hq(n_, Array::Zero(M)), Hp(n_, Array::Zero(M));
  for (std::size_t c = 0; c < coeff.size(); ++c) {
    if (coeff[c].max_abs() == 0) continue;
    const auto I = unflatten(static_cast<int>(c), n_, r_);
    Array mono = Array::Ones(M);
    for (int i : I) mono *= P[i].values();
    const Array& wc = coeff[c].values();
    H += wc * mono;
    Hx += spectral_partial(coeff[c], 0).values() * mono;
    for (int k = 0; k < n_; ++k) Hq[k] += spectral_partial(coeff[c], k + 1).values() * mono;
    for (int m = 0; m < r_; ++m) {
      Array rest = Array::Ones(M);
      for (int m2 = 0; m2 < r_; ++m2)
        if (m2 != m) rest *= P[I[m2]].values();
      Hp[I[m]] += wc * rest;
    }
  }
  GridJet J{ScalarField(g, H), ScalarField(g, Hx), {}, {}};
  for (int k = 0; k < n_; ++k) {
    J.H_q.emplace_back(g, Hq[k]);
    J.H_p.emplace_back(g, Hp[k]);
  }
  return J;
}

// ---------------------------------------------------------------- pointwise

ContactChart::ContactChart(std::shared_ptr<const LegendrianChart> chart) : chart_(std::move(chart)), f_(chart_->f()) {
  for (int i = 0; i < chart_->n(); ++i) R_.emplace_back(chart_->R(i));
}

ContactChart::Jet ContactChart::jet(const Eigen::VectorXd& xq) const {
  const int n = this->n();
  Jet J;
  J.f = f_.value_and_gradient(xq, J.df);
  J.R.resize(n);
  J.dR.resize(n, n + 1);
  Eigen::VectorXd g;
  for (int i = 0; i < n; ++i) {
    J.R[i] = R_[i].value_and_gradient(xq, g);
    J.dR.row(i) = g.transpose();
  }
  return J;
}

void ContactChart::contact_form(const Eigen::VectorXd& point, Eigen::VectorXd& alpha, Eigen::MatrixXd& W) const {
  const int n = this->n(), D = 2 * n + 1;
  const Eigen::VectorXd xq = point.head(n + 1), p = point.tail(n);
  const auto J = jet(xq);
  alpha = Eigen::VectorXd::Zero(D);
  alpha[0] = J.f + J.R.dot(p);
  for (int i = 0; i < n; ++i) alpha[1 + i] = -p[i];
  Eigen::VectorXd dg = Eigen::VectorXd::Zero(D);
  for (int a = 0; a <= n; ++a) dg[a] = J.df[a] + J.dR.col(a).dot(p);
  for (int i = 0; i < n; ++i) dg[1 + n + i] = J.R[i];
  Eigen::VectorXd ex = Eigen::VectorXd::Zero(D);
  ex[0] = 1;
  W = dg * ex.transpose() - ex * dg.transpose();
  for (int i = 0; i < n; ++i) {
    W(1 + n + i, 1 + i) -= 1;
    W(1 + i, 1 + n + i) += 1;
  }
}

Eigen::VectorXd reeb_field(const ContactChart& chart, const Eigen::VectorXd& point) {
  const int n = chart.n();
  if (point.size() != 2 * n + 1) throw DomainError("point needs 2n+1 coordinates");
  const Eigen::VectorXd p = point.tail(n);
  const auto J = chart.jet(point.head(n + 1));
  if (!(J.f > 0)) throw DomainError("defining form not positive");
  Eigen::VectorXd v(2 * n + 1);
  v[0] = 1 / J.f;
  for (int i = 0; i < n; ++i) {
    v[1 + i] = J.R[i] / J.f;
    v[1 + n + i] = -(J.df[1 + i] + J.dR.col(1 + i).dot(p)) / J.f;
  }
  return v;
}

Eigen::VectorXd hamiltonian_field(const HamiltonianPoly& H, const ContactChart& chart, const Eigen::VectorXd& point,
                                  double t) {
  const int n = chart.n();
  if (point.size() != 2 * n + 1) throw DomainError("point needs 2n+1 coordinates");
  const Eigen::VectorXd xq = point.head(n + 1), p = point.tail(n);
  const auto J = chart.jet(xq);
  if (!(J.f > 0)) throw DomainError("defining form not positive");
  const auto h = H.at(xq, p, t);
  const double G = h.H - p.dot(h.H_p);
  double Phi = h.H_x + J.R.dot(h.H_q);
  for (int j = 0; j < n; ++j) Phi -= (J.df[1 + j] + J.dR.col(1 + j).dot(p)) * h.H_p[j];
  Eigen::VectorXd v(2 * n + 1);
  v[0] = G / J.f;
  for (int i = 0; i < n; ++i) {
    v[1 + i] = (h.H * J.R[i] - J.f * h.H_p[i] - J.R[i] * p.dot(h.H_p)) / J.f;
    v[1 + n + i] = -(G * (J.df[1 + i] + J.dR.col(1 + i).dot(p)) - Phi * p[i] - J.f * h.H_q[i]) / J.f;
  }
  return v;
}

Trajectory particle_flow(const HamiltonianPoly& H, const ContactChart& chart, const Eigen::VectorXd& start, double T,
                         double dt) {
  if (!(dt > 0) || dt > 1e-2) throw DomainError("particle step must satisfy 0 < dt <= 1e-2");
  if (T < 0) throw DomainError("negative horizon");
  const int n = chart.n();
  const double bound = chart.chart().neighborhood_bound();
  const int steps = static_cast<int>(std::lround(T / dt));
  Trajectory tr;
  Eigen::VectorXd y = start;
  double t = 0;
  tr.t.push_back(t);
  tr.state.push_back(y);
  for (int s = 0; s < steps; ++s) {
    const auto k1 = hamiltonian_field(H, chart, y, t);
    const auto k2 = hamiltonian_field(H, chart, y + dt / 2 * k1, t + dt / 2);
    const auto k3 = hamiltonian_field(H, chart, y + dt / 2 * k2, t + dt / 2);
    const auto k4 = hamiltonian_field(H, chart, y + dt * k3, t + dt);
    const Eigen::VectorXd next = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (next.tail(n).norm() > bound) {
      tr.left_neighborhood = true;
      break;
    }
    y = next;
    t = (s + 1) * dt;
    tr.t.push_back(t);
    tr.state.push_back(y);
  }
  return tr;
}

// ---------------------------------------------------------------- sections

std::vector<ScalarField> isotopy_rate(const HamiltonianPoly& H, const Section& s, double t) {
  const ChartDerivs cd(s.chart());
  return to_fields(s.chart().grid(), rate_arrays(H, s.chart(), cd, s.components(), t));
}

Section rk4_step(const HamiltonianPoly& H, const Section& s, double t, double dt) {
  const ChartDerivs cd(s.chart());
  return Section(s.chart_ptr(), rk4_fields(H, s.chart(), cd, s.components(), t, dt));
}

FlowPath evolve_section(const HamiltonianPoly& H, const Section& s0, double T, double dt, const FlowOptions& opt) {
  if (!(dt > 0) || T < 0) throw DomainError("bad time stepping");
  if (H.n() != s0.n() || !(H.grid() == s0.chart().grid())) throw DomainError("Hamiltonian does not match chart");
  const int steps = static_cast<int>(std::lround(T / dt));
  if (std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T)) throw DomainError("T must be a multiple of dt");
  const auto& chart = s0.chart();
  const ChartDerivs cd(chart);
  FlowPath path;
  {
    const auto one = rk4_fields(H, chart, cd, s0.components(), 0, dt);
    const auto half = rk4_fields(H, chart, cd, rk4_fields(H, chart, cd, s0.components(), 0, dt / 2), dt / 2, dt / 2);
    for (std::size_t i = 0; i < one.size(); ++i)
      path.step_halving_gap = std::max(path.step_halving_gap, (one[i] - half[i]).max_abs());
  }
  auto record = [&](double t, const Section& s) {
    path.states.push_back({t, s});
    if (opt.monitor_residual) {
      const double r = master_residual_coord(s).max();
      path.residuals.push_back(r);
      path.max_residual = std::max(path.max_residual, r);
      if (r > opt.abort_residual) {
        std::ostringstream os;
        os << "master residual blow-up at t=" << t << ": " << r;
        throw DomainError(os.str());
      }
    }
  };
  std::vector<ScalarField> P = s0.components();
  record(0, s0);
  for (int k = 0; k < steps; ++k) {
    P = rk4_fields(H, chart, cd, P, k * dt, dt);
    const Section s(s0.chart_ptr(), P);  // throws on neighborhood exit
    if ((k + 1) % std::max(1, opt.record_every) == 0 || k + 1 == steps) record((k + 1) * dt, s);
  }
  return path;
}

FullForm lambda_t(const Section& s) {
  const auto& c = s.chart();
  const int n = c.n();
  FullForm out(c.grid(), n + 1, 1);
  out[0] = c.f();
  for (int i = 0; i < n; ++i) {
    out[0] += mul(c.R(i), s[i]);
    out[1 + i] = -s[i];
  }
  return out;
}

DeltaResult delta_form(const LegendrianChart& chart, const FullForm& lambda) {
  const int n = chart.n();
  if (lambda.degree() != 1 || lambda.space_dim() != n + 1) throw DomainError("delta_form needs a full 1-form");
  const auto& g = chart.grid();
  ScalarField lamL = lambda[0];
  for (int i = 0; i < n; ++i) lamL += mul(chart.R(i), lambda[1 + i]);
  if (lamL.values().abs().minCoeff() <= 1e-12) throw DomainError("defining form vanishes on L");
  DeltaResult out;
  const FullForm dl = exterior_d(lambda);
  out.frobenius = wedge(lambda, dl).max_abs();
  if (out.frobenius > 1e-8) {
    std::ostringstream os;
    os << "not integrable: Frobenius residual " << out.frobenius;
    throw DomainError(os.str());
  }
  std::vector<ScalarField> v;
  const Array inv = lamL.values().inverse();
  v.emplace_back(g, inv);
  for (int i = 0; i < n; ++i) v.emplace_back(g, chart.R(i).values() * inv);
  out.delta_bar = -interior(v, dl);
  out.delta = project_pi(out.delta_bar, as_variant(chart));
  out.reconstruction = (dl - wedge(out.delta_bar, lambda)).max_abs();
  return out;
}

UpdateResult order0_update(const Section& s, const ScalarField& H0) {
  const auto& c = s.chart();
  UpdateResult r;
  const auto H = HamiltonianPoly::order0(H0, c.n());
  r.coordinate = lambda_dot_from_rate(c, isotopy_rate(H, s, 0));
  const FullForm lam = lambda_t(s);
  const auto d = delta_form(c, lam);
  r.invariant = extended_tangential_d(H0, c, lam) - scale(H0, d.delta_bar);
  r.discrepancy = (r.coordinate - r.invariant).max_abs();
  return r;
}

OrderRResult order_r_update(const Section& s, const std::vector<std::vector<ScalarField>>& w) {
  const auto& c = s.chart();
  const int n = c.n();
  const int r = static_cast<int>(w.size());
  if (r < 1) throw DomainError("order r needs at least one vector field");
  for (const auto& wj : w)
    if (static_cast<int>(wj.size()) != n) throw DomainError("vector field needs n components");
  const FullForm lam = lambda_t(s);
  const auto d = delta_form(c, lam);
  // H = prod (p . w_j) on the graph; lambda_t(w_j) = -p . w_j
  ScalarField Hg = ScalarField::constant(c.grid(), 1.0);
  for (const auto& wj : w) {
    ScalarField pw = ScalarField::zero(c.grid());
    for (int k = 0; k < n; ++k) pw += mul(s[k], wj[k]);
    Hg = mul(Hg, pw);
  }
  const ScalarField Lw = (r % 2 == 0) ? Hg : -Hg;
  OrderRResult out;
  out.displayed = scale(Lw, d.delta_bar) - extended_tangential_d(Lw, c, lam);
  out.coordinate = lambda_dot_from_rate(c, isotopy_rate(HamiltonianPoly::product_of_vectors(w), s, 0));
  out.order0 = extended_tangential_d(Hg, c, lam) - scale(Hg, d.delta_bar);
  out.collapse = (out.coordinate - out.order0).max_abs();
  const FullForm order0_L = extended_tangential_d(Lw, c, lam) - scale(Lw, d.delta_bar);
  out.displayed_vs_order0 = (out.displayed - order0_L).max_abs();
  const double sign = (r % 2 == 0) ? -1.0 : 1.0;  // (-1)^{r+1}
  out.displayed_corrected = (sign * out.displayed - out.order0).max_abs();
  return out;
}

// ---------------------------------------------------------------- certificate

double IsotopyReport::max_residual() const {
  return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
}

const char* to_string(IsotopyVerdict v) {
  switch (v) {
    case IsotopyVerdict::Isotopy: return "ISOTOPY";
    case IsotopyVerdict::ObstructedConjectural: return "OBSTRUCTED-AT-ORDER-0";
    default: return "INCONCLUSIVE";
  }
}

IsotopyReport isotopy_certificate(const std::shared_ptr<const LegendrianChart>& chart,
                                  const std::vector<TangentialForm>& beta, double dt, double tol,
                                  const IsotopyOptions& opt) {
  if (beta.size() < 11) throw DomainError("path needs at least 11 time nodes");
  if (!(dt > 0)) throw DomainError("path step must be positive");
  for (const auto& b : beta)
    if (b.degree() != 1 || b.space_dim() != chart->n() || !(b.grid() == chart->grid()))
      throw DomainError("path entries must be tangential 1-forms on the chart");
  IsotopyReport rep;
  for (const auto& nr : certificate_nodes(*chart, beta, dt, opt)) {
    rep.residuals.push_back(nr.residual);
    rep.frobenius.push_back(nr.frobenius);
  }
  const bool all_ok = rep.max_residual() <= tol;
  if (all_ok) {
    rep.verdict = IsotopyVerdict::Isotopy;
    return rep;
  }
  const auto& g = chart->grid();
  bool can_coarsen = opt.check_coarser;
  for (int a = 0; a < g.dim(); ++a) can_coarsen = can_coarsen && g.resolution(a) >= 16;
  if (!can_coarsen) return rep;
  std::vector<int> half;
  for (int a = 0; a < g.dim(); ++a) half.push_back(g.resolution(a) / 2);
  const PeriodicGrid gc(g.axes(), half);
  std::vector<ScalarField> Rc;
  for (int i = 0; i < chart->n(); ++i) Rc.push_back(resample(chart->R(i), gc));
  const LegendrianChart coarse(resample(chart->f(), gc), Rc);
  std::vector<TangentialForm> bc;
  for (const auto& b : beta) {
    std::vector<ScalarField> comps;
    for (int i = 0; i < b.size(); ++i) comps.push_back(resample(b[i], gc));
    bc.emplace_back(gc, b.space_dim(), 1, std::move(comps));
  }
  for (const auto& nr : certificate_nodes(coarse, bc, dt, opt)) rep.coarse_residuals.push_back(nr.residual);
  for (std::size_t k = 0; k < rep.residuals.size(); ++k)
    if (rep.residuals[k] > tol && rep.coarse_residuals[k] > tol) {
      rep.verdict = IsotopyVerdict::ObstructedConjectural;
      rep.conjectural = true;
      break;
    }
  return rep;
}

}  // namespace folcoil
