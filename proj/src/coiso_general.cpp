#include "folcoil/coiso_general.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace folcoil {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kMaxCondition = 1e8;
constexpr double kRankRelTol = 1e-6;
constexpr double kRankAbsFloor = 1e-9;

double condition(const MatrixXd& M) {
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
}

int numerical_rank(const MatrixXd& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  const double cut = std::max(kRankRelTol * sv(0), kRankAbsFloor);
  int r = 0;
  for (Index i = 0; i < sv.size(); ++i) r += sv(i) > cut;
  return r;
}

FieldMatrix zero_matrix(const PeriodicGrid& g, int rows, int cols) {
  return FieldMatrix(rows, std::vector<ScalarField>(cols, ScalarField::zero(g)));
}

// Pointwise data of a chart and optional section, with partials along every
// grid axis.
struct Local {
  VectorXd a;               // ny
  MatrixXd R;               // nq x ny
  MatrixXd b;               // 2k x ny
  MatrixXd da;              // ny x dim
  std::vector<MatrixXd> dR; // nq entries, ny x dim
  VectorXd s;               // nq
  MatrixXd ds;              // nq x dim
};

class Jet {
 public:
  explicit Jet(const CoisoChart& c, const std::vector<ScalarField>* s = nullptr) : c_(c), s_(s) {
    const int dim = c.grid().dim();
    for (int i = 0; i < c.ny(); ++i) {
      da_.emplace_back();
      for (int ax = 0; ax < dim; ++ax) da_.back().push_back(spectral_partial(c.a(i), ax));
    }
    dR_.resize(c.nq());
    for (int al = 0; al < c.nq(); ++al)
      for (int i = 0; i < c.ny(); ++i) {
        dR_[al].emplace_back();
        for (int ax = 0; ax < dim; ++ax) dR_[al].back().push_back(spectral_partial(c.R(al, i), ax));
      }
    if (s_)
      for (int al = 0; al < c.nq(); ++al) {
        ds_.emplace_back();
        for (int ax = 0; ax < dim; ++ax) ds_.back().push_back(spectral_partial((*s_)[al], ax));
      }
  }

  Local at(Index p) const {
    const int ny = c_.ny(), nq = c_.nq(), dim = c_.grid().dim(), m = 2 * c_.k();
    Local L;
    L.a.resize(ny);
    L.R.resize(nq, ny);
    L.b.resize(m, ny);
    L.da.resize(ny, dim);
    L.dR.assign(nq, MatrixXd(ny, dim));
    L.s = VectorXd::Zero(nq);
    L.ds = MatrixXd::Zero(nq, dim);
    for (int i = 0; i < ny; ++i) {
      L.a(i) = c_.a(i)[p];
      for (int ax = 0; ax < dim; ++ax) L.da(i, ax) = da_[i][ax][p];
      for (int j = 0; j < m; ++j) L.b(j, i) = c_.b(j, i)[p];
      for (int al = 0; al < nq; ++al) {
        L.R(al, i) = c_.R(al, i)[p];
        for (int ax = 0; ax < dim; ++ax) L.dR[al](i, ax) = dR_[al][i][ax][p];
      }
    }
    if (s_)
      for (int al = 0; al < nq; ++al) {
        L.s(al) = (*s_)[al][p];
        for (int ax = 0; ax < dim; ++ax) L.ds(al, ax) = ds_[al][ax][p];
      }
    return L;
  }

 private:
  const CoisoChart& c_;
  const std::vector<ScalarField>* s_;
  std::vector<std::vector<ScalarField>> da_;
  std::vector<std::vector<std::vector<ScalarField>>> dR_;
  std::vector<std::vector<ScalarField>> ds_;
};

double curvature_entry(const CoisoChart& c, const Local& L, int al, int i, int j) {
  double acc = 0;
  for (int s = 0; s < c.ny(); ++s)
    for (int t = 0; t < c.ny(); ++t) {
      double v = L.dR[al](t, c.y_axis(s)) - L.dR[al](s, c.y_axis(t));
      for (int be = 0; be < c.nq(); ++be)
        v += L.R(be, s) * L.dR[al](t, c.q_axis(be)) - L.R(be, t) * L.dR[al](s, c.q_axis(be));
      acc += L.b(i, s) * L.b(j, t) * v;
    }
  return acc;
}

// Pointwise algebra at fiber coordinate p.
struct Algebra {
  const CoisoChart& c;
  const Local& L;
  VectorXd p;
  MatrixXd Phi, Phi_inv, Psi, Psi_inv;
  VectorXd phi;    // Phi^{i1}
  MatrixXd dPhi1;  // ny x dim, partials of a_j + p_g R^g_j at fixed p

  Algebra(const CoisoChart& chart, const Local& local, const VectorXd& fiber) : c(chart), L(local), p(fiber) {
    const int ny = c.ny(), nq = c.nq();
    Phi.resize(ny, ny);
    Phi.row(0) = (L.a + L.R.transpose() * p).transpose();
    Phi.bottomRows(ny - 1) = L.b;
    if (condition(Phi) > kMaxCondition) throw DomainError("chart degenerate at point");
    Phi_inv = Phi.inverse();
    phi = Phi_inv.col(0);
    Psi = MatrixXd::Identity(nq, nq) - p * (L.R * phi).transpose();
    if (condition(Psi) > kMaxCondition) throw DomainError("chart degenerate at point");
    Psi_inv = Psi.inverse();
    dPhi1 = L.da;
    for (int g = 0; g < nq; ++g) dPhi1 += p(g) * L.dR[g];
  }

  int y(int i) const { return c.y_axis(i); }
  int q(int a) const { return c.q_axis(a); }

  // g-field i on Y as a (y,q) vector.
  VectorXd g_field(int i) const {
    VectorXd v(c.ny() + c.nq());
    v.head(c.ny()) = L.b.row(i).transpose();
    v.tail(c.nq()) = L.R * L.b.row(i).transpose();
    return v;
  }

  // d lambda on Y as M_uv = d_u lambda_v - d_v lambda_u.
  MatrixXd dlambda() const {
    const int ny = c.ny(), nq = c.nq();
    MatrixXd M = MatrixXd::Zero(ny + nq, ny + nq);
    for (int s = 0; s < ny; ++s)
      for (int t = 0; t < ny; ++t) M(s, t) = L.da(t, y(s)) - L.da(s, y(t));
    for (int al = 0; al < nq; ++al)
      for (int t = 0; t < ny; ++t) {
        M(ny + al, t) = L.da(t, q(al));
        M(t, ny + al) = -L.da(t, q(al));
      }
    return M;
  }

  // d alpha on E in coordinates (y, q, p).
  MatrixXd dalpha() const {
    const int ny = c.ny(), nq = c.nq();
    MatrixXd M = MatrixXd::Zero(ny + 2 * nq, ny + 2 * nq);
    for (int s = 0; s < ny; ++s)
      for (int t = 0; t < ny; ++t) M(s, t) = dPhi1(t, y(s)) - dPhi1(s, y(t));
    for (int al = 0; al < nq; ++al) {
      for (int t = 0; t < ny; ++t) {
        M(ny + al, t) = dPhi1(t, q(al));
        M(t, ny + al) = -dPhi1(t, q(al));
        M(ny + nq + al, t) = L.R(al, t);
        M(t, ny + nq + al) = -L.R(al, t);
      }
      M(ny + nq + al, ny + al) = -1;
      M(ny + al, ny + nq + al) = 1;
    }
    return M;
  }

  VectorXd alpha() const {
    VectorXd v = VectorXd::Zero(c.ny() + 2 * c.nq());
    v.head(c.ny()) = Phi.row(0).transpose();
    v.segment(c.ny(), c.nq()) = -p;
    return v;
  }

  double F(int al, int i, int j) const { return curvature_entry(c, L, al, i, j); }

  MatrixXd omega() const {
    const int m = 2 * c.k();
    const MatrixXd D = dlambda();
    MatrixXd W = MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        double v = g_field(i).dot(D * g_field(j));
        for (int al = 0; al < c.nq(); ++al) v += F(al, i, j) * p(al);
        W(i, j) = v;
        W(j, i) = -v;
      }
    return W;
  }

  // Requires p = s.
  MatrixXd A() const {
    const int ny = c.ny(), nq = c.nq();
    MatrixXd out(nq, nq);
    for (int al = 0; al < nq; ++al)
      for (int be = 0; be < nq; ++be) {
        double v = 0;
        for (int ga = 0; ga < nq; ++ga) {
          double t = L.ds(ga, q(al));
          for (int i = 0; i < ny; ++i) t += p(al) * phi(i) * L.ds(ga, y(i));
          v += t * Psi(be, ga);
        }
        for (int i = 0; i < ny; ++i) v -= dPhi1(i, q(al)) * p(be) * phi(i);
        out(al, be) = v;
      }
    return out;
  }

  MatrixXd B() const {
    const int ny = c.ny(), nq = c.nq(), m = 2 * c.k();
    MatrixXd out(m, nq);
    for (int i = 0; i < m; ++i)
      for (int al = 0; al < nq; ++al) {
        double v = 0;
        for (int j = 0; j < ny; ++j) {
          double t = dPhi1(j, q(al));
          for (int ga = 0; ga < nq; ++ga) {
            double dsg = L.ds(ga, y(j));
            for (int nu = 0; nu < nq; ++nu) dsg += L.R(nu, j) * L.ds(ga, q(nu));
            t += dsg * Psi(al, ga);
          }
          for (int s = 0; s < ny; ++s) {
            t += p(al) * phi(s) * (dPhi1(j, y(s)) - dPhi1(s, y(j)));
            for (int nu = 0; nu < nq; ++nu) t -= p(al) * L.R(nu, j) * phi(s) * dPhi1(s, q(nu));
          }
          v += L.b(i, j) * t;
        }
        out(i, al) = v;
      }
    return out;
  }
};

}  // namespace

GeneralSection::GeneralSection(std::shared_ptr<const CoisoChart> chart, std::vector<ScalarField> s)
    : chart_(std::move(chart)), s_(std::move(s)) {
  if (!chart_) throw DomainError("section without chart");
  if (static_cast<int>(s_.size()) != chart_->nq()) throw DomainError("section has wrong component count");
  for (const auto& c : s_)
    if (!(c.grid() == chart_->grid())) throw DomainError("grid mismatch");
  // Phi and Psi only involve values of s, so no derivatives are needed here.
  const auto& g = chart_->grid();
  const int ny = chart_->ny(), nq = chart_->nq();
  VectorXd a(ny), p(nq);
  MatrixXd R(nq, ny), Phi(ny, ny);
  for (Index pt = 0; pt < g.size(); ++pt) {
    for (int i = 0; i < ny; ++i) {
      a(i) = chart_->a(i)[pt];
      for (int al = 0; al < nq; ++al) R(al, i) = chart_->R(al, i)[pt];
      for (int j = 0; j < ny - 1; ++j) Phi(j + 1, i) = chart_->b(j, i)[pt];
    }
    for (int al = 0; al < nq; ++al) p(al) = s_[al][pt];
    Phi.row(0) = (a + R.transpose() * p).transpose();
    if (condition(Phi) > kMaxCondition) throw DomainError("chart degenerate at point");
    const VectorXd phi = Phi.inverse().col(0);
    const MatrixXd Psi = MatrixXd::Identity(nq, nq) - p * (R * phi).transpose();
    if (condition(Psi) > kMaxCondition) throw DomainError("chart degenerate at point");
  }
}

GeneralSection GeneralSection::zero(std::shared_ptr<const CoisoChart> chart) {
  std::vector<ScalarField> s(chart->nq(), ScalarField::zero(chart->grid()));
  return GeneralSection(std::move(chart), std::move(s));
}

TangentialForm GeneralSection::as_form() const { return TangentialForm(chart_->grid(), chart_->nq(), 1, s_); }

std::vector<Index> sample_points(const PeriodicGrid& g, int count, std::uint64_t seed) {
  std::vector<Index> pts;
  if (count >= g.size()) {
    pts.resize(g.size());
    std::iota(pts.begin(), pts.end(), Index(0));
    return pts;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, g.size() - 1);
  for (int i = 0; i < count; ++i) pts.push_back(pick(rng));
  return pts;
}

PhiPsi phi_psi(const GeneralSection& s, Index point) {
  const Jet jet(s.chart(), &s.components());
  const Local L = jet.at(point);
  const Algebra alg(s.chart(), L, L.s);
  return {alg.Phi, alg.Phi_inv, alg.Psi, alg.Psi_inv};
}

std::vector<FieldMatrix> curvature_F(const CoisoChart& c) {
  const auto& g = c.grid();
  const int m = 2 * c.k();
  std::vector<std::vector<std::vector<ScalarField::Array>>> v(
      c.nq(), std::vector<std::vector<ScalarField::Array>>(m, std::vector<ScalarField::Array>(m, ScalarField::Array(g.size()))));
  const Jet jet(c);
  for (Index pt = 0; pt < g.size(); ++pt) {
    const Local L = jet.at(pt);
    for (int al = 0; al < c.nq(); ++al)
      for (int i = 0; i < m; ++i) {
        v[al][i][i][pt] = 0;
        for (int j = i + 1; j < m; ++j) {
          const double acc = curvature_entry(c, L, al, i, j);
          v[al][i][j][pt] = acc;
          v[al][j][i][pt] = -acc;
        }
      }
  }
  std::vector<FieldMatrix> out(c.nq(), zero_matrix(g, m, m));
  for (int al = 0; al < c.nq(); ++al)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) out[al][i][j] = ScalarField(g, std::move(v[al][i][j]));
  return out;
}

std::vector<FieldMatrix> curvature_F_bracket(const CoisoChart& c) {
  const auto& g = c.grid();
  const int m = 2 * c.k(), dim = g.dim();
  // components of the g-fields along every axis
  FieldMatrix V(m);
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < c.ny(); ++t) V[i].push_back(c.b(i, t));
    for (int al = 0; al < c.nq(); ++al) {
      ScalarField acc = ScalarField::zero(g);
      for (int t = 0; t < c.ny(); ++t) acc += pointwise_mul(c.b(i, t), c.R(al, t));
      V[i].push_back(acc);
    }
  }
  std::vector<FieldMatrix> dV(m);
  for (int i = 0; i < m; ++i)
    for (int comp = 0; comp < dim; ++comp) {
      dV[i].emplace_back();
      for (int ax = 0; ax < dim; ++ax) dV[i].back().push_back(spectral_partial(V[i][comp], ax));
    }
  std::vector<FieldMatrix> out(c.nq(), zero_matrix(g, m, m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      std::vector<ScalarField> br;
      for (int comp = 0; comp < dim; ++comp) {
        ScalarField acc = ScalarField::zero(g);
        for (int ax = 0; ax < dim; ++ax)
          acc += pointwise_mul(V[i][ax], dV[j][comp][ax]) - pointwise_mul(V[j][ax], dV[i][comp][ax]);
        br.push_back(acc);
      }
      for (int al = 0; al < c.nq(); ++al) {
        ScalarField v = br[c.q_axis(al)];
        for (int t = 0; t < c.ny(); ++t) v -= pointwise_mul(c.R(al, t), br[c.y_axis(t)]);
        out[al][i][j] = v;
      }
    }
  return out;
}

namespace {

// Runs fn(pt, Algebra) over every grid point of a section.
template <class Fn>
void for_each_point(const GeneralSection& s, Fn&& fn) {
  const Jet jet(s.chart(), &s.components());
  for (Index pt = 0; pt < s.chart().grid().size(); ++pt) {
    const Local L = jet.at(pt);
    const Algebra alg(s.chart(), L, L.s);
    fn(pt, alg);
  }
}

struct MatrixFieldBuilder {
  std::vector<std::vector<ScalarField::Array>> v;
  MatrixFieldBuilder(Index size, int rows, int cols)
      : v(rows, std::vector<ScalarField::Array>(cols, ScalarField::Array(size))) {}
  void set(Index pt, const MatrixXd& M) {
    for (Index i = 0; i < M.rows(); ++i)
      for (Index j = 0; j < M.cols(); ++j) v[i][j][pt] = M(i, j);
  }
  FieldMatrix build(const PeriodicGrid& g) {
    FieldMatrix out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      for (auto& a : v[i]) out[i].emplace_back(g, std::move(a));
    return out;
  }
};

}  // namespace

ABTensors AB_tensors(const GeneralSection& s) {
  const auto& c = s.chart();
  const auto& g = c.grid();
  MatrixFieldBuilder A(g.size(), c.nq(), c.nq()), B(g.size(), 2 * c.k(), c.nq());
  for_each_point(s, [&](Index pt, const Algebra& alg) {
    A.set(pt, alg.A());
    B.set(pt, alg.B());
  });
  return {A.build(g), B.build(g)};
}

FieldMatrix antisymmetric_A_closed_form(const GeneralSection& s) {
  const auto& c = s.chart();
  const auto& g = c.grid();
  const int nq = c.nq(), ny = c.ny();
  MatrixFieldBuilder out(g.size(), nq, nq);
  for_each_point(s, [&](Index pt, const Algebra& alg) {
    const auto& L = alg.L;
    // total q-derivative of Phi_1i along the section
    auto D = [&](int i, int be) {
      double v = alg.dPhi1(i, c.q_axis(be));
      for (int ga = 0; ga < nq; ++ga) v += L.R(ga, i) * L.ds(ga, c.q_axis(be));
      return v;
    };
    MatrixXd M(nq, nq);
    for (int al = 0; al < nq; ++al)
      for (int be = 0; be < nq; ++be) {
        double v = L.ds(be, c.q_axis(al)) - L.ds(al, c.q_axis(be));
        for (int i = 0; i < ny; ++i)
          v += alg.phi(i) * L.s(al) * (D(i, be) + L.ds(be, c.y_axis(i))) -
               alg.phi(i) * L.s(be) * (D(i, al) + L.ds(al, c.y_axis(i)));
        M(al, be) = v;
      }
    out.set(pt, M);
  });
  return out.build(g);
}

OmegaResidual omega_and_residual(const GeneralSection& s) {
  const auto& c = s.chart();
  const auto& g = c.grid();
  const int m = 2 * c.k(), nq = c.nq();
  MatrixFieldBuilder W(g.size(), m, m), Res(g.size(), nq, nq);
  for_each_point(s, [&](Index pt, const Algebra& alg) {
    const MatrixXd om = alg.omega();
    if (condition(om) > kMaxCondition) throw DomainError("rank degeneracy");
    const MatrixXd A = alg.A(), B = alg.B();
    W.set(pt, om);
    Res.set(pt, (A.transpose() - A) - B.transpose() * om.inverse() * B);
  });
  OmegaResidual out{W.build(g), Res.build(g), 0.0};
  for (const auto& row : out.residual)
    for (const auto& f : row) out.residual_max = std::max(out.residual_max, f.max_abs());
  return out;
}

double PairingReport::max_deviation() const {
  return std::max({ee, ff, eg, fg, ef_deviation, gg_deviation, ef_sign == 0 ? INFINITY : 0.0});
}

PairingReport lifted_basis_check(const GeneralSection& s, const std::vector<Index>& points) {
  const auto& c = s.chart();
  const int ny = c.ny(), nq = c.nq(), m = 2 * c.k(), D = ny + 2 * nq;
  const Jet jet(c, &s.components());
  PairingReport r;
  double dev_plus = 0, dev_minus = 0;
  for (Index pt : points) {
    const Local L = jet.at(pt);
    const Algebra alg(c, L, L.s);
    const VectorXd& p = alg.p;
    const MatrixXd M = alg.dalpha();
    const int Y = 0, Q = ny, P = ny + nq;
    std::vector<VectorXd> e(nq, VectorXd::Zero(D)), f(nq, VectorXd::Zero(D)), gv(m, VectorXd::Zero(D));
    for (int al = 0; al < nq; ++al)
      for (int ga = 0; ga < nq; ++ga) e[al](P + ga) = alg.Psi_inv(ga, al);
    for (int be = 0; be < nq; ++be) {
      f[be](Q + be) = 1;
      f[be].segment(Y, ny) = p(be) * alg.phi;
      for (int eta = 0; eta < nq; ++eta) {
        double v = 0;
        for (int sg = 0; sg < nq; ++sg)
          for (int j = 0; j < ny; ++j) v += alg.Psi_inv(eta, sg) * alg.dPhi1(j, c.q_axis(be)) * p(sg) * alg.phi(j);
        f[be](P + eta) = v;
      }
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < ny; ++j) {
        const double bij = L.b(i, j);
        gv[i](Y + j) += bij;
        for (int ga = 0; ga < nq; ++ga) gv[i](Q + ga) += bij * L.R(ga, j);
        for (int eta = 0; eta < nq; ++eta) {
          double v = 0;
          for (int sg = 0; sg < nq; ++sg) {
            double t = -alg.dPhi1(j, c.q_axis(sg));
            for (int s2 = 0; s2 < ny; ++s2) {
              t += p(sg) * alg.phi(s2) * (alg.dPhi1(s2, c.y_axis(j)) - alg.dPhi1(j, c.y_axis(s2)));
              for (int ga = 0; ga < nq; ++ga) t += p(sg) * alg.phi(s2) * L.R(ga, j) * alg.dPhi1(s2, c.q_axis(ga));
            }
            v += alg.Psi_inv(eta, sg) * t;
          }
          gv[i](P + eta) += bij * v;
        }
      }
    auto da = [&](const VectorXd& u, const VectorXd& v) { return u.dot(M * v); };
    const MatrixXd om = alg.omega();
    for (int a1 = 0; a1 < nq; ++a1) {
      for (int a2 = 0; a2 < nq; ++a2) {
        r.ee = std::max(r.ee, std::abs(da(e[a1], e[a2])));
        r.ff = std::max(r.ff, std::abs(da(f[a1], f[a2])));
        const double v = da(e[a1], f[a2]), d = a1 == a2 ? 1.0 : 0.0;
        dev_plus = std::max(dev_plus, std::abs(v - d));
        dev_minus = std::max(dev_minus, std::abs(v + d));
      }
      for (int i = 0; i < m; ++i) {
        r.eg = std::max(r.eg, std::abs(da(e[a1], gv[i])));
        r.fg = std::max(r.fg, std::abs(da(f[a1], gv[i])));
      }
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) r.gg_deviation = std::max(r.gg_deviation, std::abs(da(gv[i], gv[j]) - om(i, j)));
  }
  r.ef_sign = dev_plus <= dev_minus ? 1 : -1;
  r.ef_deviation = std::min(dev_plus, dev_minus);
  return r;
}

OmegaIdentityReport omega_identity_check(const GeneralSection& s, const std::vector<Index>& points) {
  const auto& c = s.chart();
  const FoliationChart fc = c;
  const FullForm dsbar = exterior_d(lift_L(s.as_form(), fc));
  const int dim = c.grid().dim(), m = 2 * c.k();
  const auto& idx = dsbar.indices();
  const Jet jet(c, &s.components());
  OmegaIdentityReport r;
  double dev_plus = 0, dev_minus = 0;
  for (Index pt : points) {
    const Local L = jet.at(pt);
    const Algebra alg(c, L, L.s);
    MatrixXd S = MatrixXd::Zero(dim, dim);
    for (int t = 0; t < dsbar.size(); ++t) {
      S(idx[t][0], idx[t][1]) = dsbar[t][pt];
      S(idx[t][1], idx[t][0]) = -dsbar[t][pt];
    }
    const MatrixXd Dl = alg.dlambda();
    const MatrixXd om = alg.omega();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const VectorXd gi = alg.g_field(i), gj = alg.g_field(j);
        const double ds_gg = gi.dot(S * gj);
        double Fs = 0;
        for (int al = 0; al < c.nq(); ++al) Fs += alg.F(al, i, j) * L.s(al);
        r.identity_max = std::max(r.identity_max, std::abs(ds_gg + Fs));
        const double Om = gi.dot(Dl * gj) - ds_gg;
        dev_plus = std::max(dev_plus, std::abs(Om - om(i, j)));
        dev_minus = std::max(dev_minus, std::abs(Om + om(i, j)));
      }
  }
  r.omega_sign = dev_plus <= dev_minus ? 1 : -1;
  r.sign_deviation = std::min(dev_plus, dev_minus);
  return r;
}

TangentialForm general_mu(const CoisoChart& c) {
  const auto& g = c.grid();
  ScalarField a2 = ScalarField::zero(g);
  for (int i = 0; i < c.ny(); ++i) a2 += pointwise_mul(c.a(i), c.a(i));
  TangentialForm mu(g, c.nq(), 1);
  for (int al = 0; al < c.nq(); ++al) {
    ScalarField acc = ScalarField::zero(g);
    for (int i = 0; i < c.ny(); ++i) acc += pointwise_mul(c.a(i), spectral_partial(c.a(i), c.q_axis(al)));
    mu[al] = div(acc, a2);
  }
  return mu;
}

TangentialForm general_twisted_d(const TangentialForm& w, const CoisoChart& chart) {
  return twisted_d(w, FoliationChart(chart), general_mu(chart));
}

RankReport rank_oracle(const GeneralSection& s, const std::vector<Index>& points) {
  const auto& c = s.chart();
  const int ny = c.ny(), nq = c.nq(), m = 2 * c.k(), D = ny + 2 * nq;
  const Jet jet(c, &s.components());
  RankReport r;
  r.expected_rank = m;
  r.all_coisotropic = true;
  MatrixXd V(D, nq + m);
  for (Index pt : points) {
    const Local L = jet.at(pt);
    const Algebra alg(c, L, L.s);
    V.setZero();
    // spanning set of T Y_s cap xi
    for (int al = 0; al < nq; ++al) {
      V.block(0, al, ny, 1) = L.s(al) * alg.phi;
      V(ny + al, al) = 1;
      for (int be = 0; be < nq; ++be) {
        double v = L.ds(be, c.q_axis(al));
        for (int i = 0; i < ny; ++i) v += L.s(al) * alg.phi(i) * L.ds(be, c.y_axis(i));
        V(ny + nq + be, al) = v;
      }
    }
    for (int i = 0; i < m; ++i) {
      const int col = nq + i;
      for (int j = 0; j < ny; ++j) {
        const double bij = L.b(i, j);
        V(j, col) += bij;
        for (int ga = 0; ga < nq; ++ga) V(ny + ga, col) += bij * L.R(ga, j);
        for (int be = 0; be < nq; ++be) {
          double v = L.ds(be, c.y_axis(j));
          for (int ga = 0; ga < nq; ++ga) v += L.R(ga, j) * L.ds(be, c.q_axis(ga));
          V(ny + nq + be, col) += bij * v;
        }
      }
    }
    const int rank = numerical_rank(V.transpose() * alg.dalpha() * V);
    r.ranks.push_back(rank);
    if (rank != m) r.all_coisotropic = false;
  }
  return r;
}

PrecontactReport precontact_rank(const FullForm& alpha, const std::vector<Index>& points) {
  if (alpha.degree() != 1) throw DomainError("precontact_rank needs a 1-form");
  const int dim = alpha.space_dim();
  const FullForm d = exterior_d(alpha);
  const auto& idx = d.indices();
  PrecontactReport r;
  VectorXd a(dim);
  MatrixXd M(dim, dim);
  for (Index pt : points) {
    for (int i = 0; i < dim; ++i) a(i) = alpha[i][pt];
    if (a.norm() <= 1e-12) throw DomainError("defining form vanishes");
    M.setZero();
    for (int t = 0; t < d.size(); ++t) {
      M(idx[t][0], idx[t][1]) = d[t][pt];
      M(idx[t][1], idx[t][0]) = -d[t][pt];
    }
    Eigen::HouseholderQR<MatrixXd> qr(a);
    const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(dim, dim);
    const MatrixXd K = Q.rightCols(dim - 1);
    r.ranks.push_back(numerical_rank(K.transpose() * M * K));
  }
  r.constant_rank = !r.ranks.empty() && std::all_of(r.ranks.begin(), r.ranks.end(), [&](int v) { return v == r.ranks[0]; });
  if (r.constant_rank) {
    r.rank = r.ranks[0];
    r.characteristic_dim = dim - r.rank - 1;
  }
  return r;
}

CoisoChart example_coiso_chart(int n, int res, ExampleR Rkind, double scale_amplitude, int q_res) {
  if (n < 2 || n > 4) throw DomainError("example chart needs 2 <= n <= 4");
  const int nq = n - 1;
  std::vector<std::string> axes{"y1", "y2", "y3"};
  for (int al = 1; al <= nq; ++al) axes.push_back("q" + std::to_string(al));
  std::vector<int> resolutions(3, res);
  resolutions.resize(axes.size(), q_res > 0 ? q_res : res);
  PeriodicGrid g(axes, resolutions);
  auto F = [&](auto fn) { return ScalarField::from_function(g, fn); };
  const int q1 = 3;
  auto r = [=](const Eigen::VectorXd& x) { return 1 + scale_amplitude * std::cos(x[q1]); };
  std::vector<ScalarField> a{F([=](const Eigen::VectorXd& x) { return r(x) * std::cos(x[2]); }),
                             F([=](const Eigen::VectorXd& x) { return r(x) * std::sin(x[2]); }),
                             ScalarField::zero(g)};
  std::vector<std::vector<ScalarField>> b{
      {F([](const Eigen::VectorXd& x) { return -std::sin(x[2]); }),
       F([](const Eigen::VectorXd& x) { return std::cos(x[2]); }), ScalarField::zero(g)},
      {ScalarField::zero(g), ScalarField::zero(g), ScalarField::constant(g, 1.0)}};
  std::vector<std::vector<ScalarField>> R(nq, std::vector<ScalarField>(3, ScalarField::zero(g)));
  if (Rkind == ExampleR::SinQ1) {
    R[0][2] = F([](const Eigen::VectorXd& x) { return std::sin(x[3]); });
  } else if (Rkind == ExampleR::Rich) {
    const int qlast = 3 + nq - 1;
    for (int al = 0; al < nq; ++al) {
      const double sh = al;
      R[al][0] = F([=](const Eigen::VectorXd& x) { return 0.3 * std::sin(x[2] + sh); });
      R[al][1] = F([=](const Eigen::VectorXd& x) { return 0.2 * std::cos(x[3] - sh) * std::cos(x[0]); });
      R[al][2] = F([=](const Eigen::VectorXd& x) { return 0.2 * std::sin(x[qlast] + sh * x[1]); });
    }
  }
  return CoisoChart(n, 1, a, R, b);
}

}  // namespace folcoil
