#include "folcoil/legendrian_master.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace folcoil {

Section::Section(std::shared_ptr<const LegendrianChart> chart, std::vector<ScalarField> s)
    : chart_(std::move(chart)), s_(std::move(s)) {
  if (!chart_) throw DomainError("section without chart");
  if (static_cast<int>(s_.size()) != chart_->n()) throw DomainError("section has wrong component count");
  for (const auto& c : s_)
    if (!(c.grid() == chart_->grid())) throw DomainError("grid mismatch");
  if (sup_norm() > chart_->neighborhood_bound()) throw DomainError("outside contact neighborhood");
}

Section Section::zero(std::shared_ptr<const LegendrianChart> chart) {
  std::vector<ScalarField> s(chart->n(), ScalarField::zero(chart->grid()));
  return Section(std::move(chart), std::move(s));
}

Section Section::from_form(std::shared_ptr<const LegendrianChart> chart, const TangentialForm& w) {
  if (w.degree() != 1 || w.space_dim() != chart->n()) throw DomainError("section needs a leafwise 1-form");
  return Section(std::move(chart), w.components());
}

TangentialForm Section::as_form() const { return TangentialForm(chart_->grid(), n(), 1, s_); }

double Section::sup_norm() const {
  ScalarField::Array sq = ScalarField::Array::Zero(chart_->grid().size());
  for (const auto& c : s_) sq += c.values().square();
  return sq.size() ? std::sqrt(sq.maxCoeff()) : 0.0;
}

double max_difference(const MasterResidual& a, const MasterResidual& b) {
  double m = 0;
  for (const auto& [k, v] : a.res1) m = std::max(m, (v - b.res1.at(k)).max_abs());
  for (const auto& [k, v] : a.res2) m = std::max(m, (v - b.res2.at(k)).max_abs());
  return m;
}

namespace {

void finish(MasterResidual& r) {
  for (const auto& [k, v] : r.res1) r.res1_max = std::max(r.res1_max, v.max_abs());
  for (const auto& [k, v] : r.res2) r.res2_max = std::max(r.res2_max, v.max_abs());
}

// ds[i][l]: derivative of s_i along grid axis l.
std::vector<std::vector<ScalarField>> section_jacobian(const Section& s) {
  const int n = s.n();
  std::vector<std::vector<ScalarField>> ds(n);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l <= n; ++l) ds[i].push_back(spectral_partial(s[i], l));
  return ds;
}

}  // namespace

MasterResidual master_residual_coord(const Section& s, const detail::MasterMutation& mutation) {
  const auto& ch = s.chart();
  const int n = s.n();
  const auto& f = ch.f();
  const auto ds = section_jacobian(s);

  ScalarField S = ScalarField::zero(ch.grid());
  for (int k = 0; k < n; ++k) S += mul(s[k], ch.R(k));
  std::vector<ScalarField> dS, df;
  for (int a = 0; a < n; ++a) {
    dS.push_back(spectral_partial(S, ch.leaf_axis(a)));
    df.push_back(spectral_partial(f, ch.leaf_axis(a)));
  }

  MasterResidual r;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const int qa = ch.leaf_axis(a), qb = ch.leaf_axis(b);
      const double fsign = mutation.flip_f_derivative_term ? 1.0 : -1.0;
      ScalarField lhs = mul(f, ds[a][qb] - ds[b][qa]) + fsign * mul(s[a], df[b]) + mul(s[b], df[a]);
      ScalarField rhs = mul(s[a], dS[b]) - mul(S, ds[a][qb]) + mul(s[a], ds[b][0]) -
                        (mul(s[b], dS[a]) - mul(S, ds[b][qa]) + mul(s[b], ds[a][0]));
      r.res1.emplace(std::make_pair(a, b), lhs - rhs);
    }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c) {
        const int qa = ch.leaf_axis(a), qb = ch.leaf_axis(b), qc = ch.leaf_axis(c);
        ScalarField v = mul(s[a], ds[c][qb] - ds[b][qc]) + mul(s[b], ds[a][qc] - ds[c][qa]) +
                        mul(s[c], ds[b][qa] - ds[a][qb]);
        r.res2.emplace(std::array<int, 3>{a, b, c}, std::move(v));
      }
  finish(r);
  return r;
}

MasterResidual coisotropy_oracle_fields(const Section& s) {
  const auto& ch = s.chart();
  const auto& g = ch.grid();
  const int n = s.n();
  const int D = 2 * n + 1;  // (x, q^1..q^n, p_1..p_n)
  const auto ds = section_jacobian(s);
  std::vector<ScalarField> df;
  std::vector<std::vector<ScalarField>> dR(n);
  for (int j = 0; j < n; ++j) {
    df.push_back(spectral_partial(ch.f(), ch.leaf_axis(j)));
    for (int k = 0; k < n; ++k) dR[k].push_back(spectral_partial(ch.R(k), ch.leaf_axis(j)));
  }

  std::vector<std::pair<int, int>> pairs;
  std::vector<std::array<int, 3>> triples;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      pairs.push_back({a, b});
      for (int c = b + 1; c < n; ++c) triples.push_back({a, b, c});
    }
  std::vector<ScalarField::Array> v1(pairs.size(), ScalarField::Array(g.size()));
  std::vector<ScalarField::Array> v2(triples.size(), ScalarField::Array(g.size()));

  Eigen::VectorXd alpha(D);
  Eigen::MatrixXd M(D, D);
  Eigen::MatrixXd frame(D, n + 1);
  auto wedge3 = [&](int i, int j, int k) {
    const auto u = frame.col(i), v = frame.col(j), w = frame.col(k);
    return alpha.dot(u) * v.dot(M * w) - alpha.dot(v) * u.dot(M * w) + alpha.dot(w) * u.dot(M * v);
  };

  for (Eigen::Index pt = 0; pt < g.size(); ++pt) {
    // alpha = (f + R^k p_k) dx - p_i dq^i at p = s.
    double ax = ch.f()[pt];
    for (int k = 0; k < n; ++k) ax += ch.R(k)[pt] * s[k][pt];
    alpha.setZero();
    alpha[0] = ax;
    for (int i = 0; i < n; ++i) alpha[1 + i] = -s[i][pt];
    // M_uv = d_u alpha_v - d_v alpha_u.
    M.setZero();
    for (int j = 0; j < n; ++j) {
      double dqx = df[j][pt];
      for (int k = 0; k < n; ++k) dqx += s[k][pt] * dR[k][j][pt];
      M(1 + j, 0) = dqx;
      M(0, 1 + j) = -dqx;
      M(1 + n + j, 0) = ch.R(j)[pt];
      M(0, 1 + n + j) = -ch.R(j)[pt];
      M(1 + n + j, 1 + j) = -1;
      M(1 + j, 1 + n + j) = 1;
    }
    // Graph frame: column 0 is v_0, column 1+k is v_k.
    frame.setZero();
    for (int c = 0; c <= n; ++c) {
      frame(c, c) = 1;
      for (int i = 0; i < n; ++i) frame(1 + n + i, c) = ds[i][c][pt];
    }
    for (std::size_t m = 0; m < pairs.size(); ++m) v1[m][pt] = wedge3(0, 1 + pairs[m].first, 1 + pairs[m].second);
    for (std::size_t m = 0; m < triples.size(); ++m)
      v2[m][pt] = wedge3(1 + triples[m][0], 1 + triples[m][1], 1 + triples[m][2]);
  }

  MasterResidual r;
  for (std::size_t m = 0; m < pairs.size(); ++m) r.res1.emplace(pairs[m], ScalarField(g, std::move(v1[m])));
  for (std::size_t m = 0; m < triples.size(); ++m) r.res2.emplace(triples[m], ScalarField(g, std::move(v2[m])));
  finish(r);
  return r;
}

double coisotropy_oracle(const Section& s) { return coisotropy_oracle_fields(s).max(); }

FullForm lambda_form(const LegendrianChart& chart) {
  FullForm l(chart.grid(), chart.grid().dim(), 1);
  l[0] = chart.f();
  return l;
}

InvariantResidual master_residual_invariant(const Section& s) {
  const FoliationChart fc = s.chart();
  const TangentialForm w = s.as_form();
  const FullForm sb = lift_L(w, fc);
  const FullForm dsb = exterior_d(sb);
  const FullForm lam = lambda_form(s.chart());
  const FullForm dlam = exterior_d(lam);
  InvariantResidual out;
  out.ambient = wedge(sb, dsb) - wedge(sb, dlam) - wedge(dsb, lam);
  out.leafwise = wedge(w, tangential_d(w, fc));
  return out;
}

TangentialForm infinitesimal_residual(const TangentialForm& zeta, const LegendrianChart& chart) {
  return twisted_d(zeta, FoliationChart(chart));
}

DeformedForm deformed_form(const Section& s) {
  DeformedForm out;
  out.lambda_prime = lift_L(s.as_form(), FoliationChart(s.chart())) - lambda_form(s.chart());
  out.frobenius = wedge(out.lambda_prime, exterior_d(out.lambda_prime));
  out.frobenius_residual = out.frobenius.max_abs();
  return out;
}

Section foliation_to_section(const FullForm& m, std::shared_ptr<const LegendrianChart> chart) {
  const auto& ch = *chart;
  if (m.degree() != 1 || m.space_dim() != ch.grid().dim()) throw DomainError("foliation_to_section needs an ambient 1-form");
  ScalarField mL = m[0];
  for (int i = 0; i < ch.n(); ++i) mL += pointwise_mul(ch.R(i), m[ch.leaf_axis(i)]);
  const double scale = std::max(mL.max_abs(), ch.f().max_abs());
  if (mL.values().abs().minCoeff() <= 1e-12 * scale) throw DomainError("foliation not transverse to L");
  const ScalarField rescale = div(-1.0 * ch.f(), mL);
  // lambda has no leaf components, so pi(lambda + m) is the leaf part of m.
  std::vector<ScalarField> s;
  for (int i = 0; i < ch.n(); ++i) s.push_back(pointwise_mul(rescale, m[ch.leaf_axis(i)]));
  return Section(std::move(chart), std::move(s));
}

ObstructionResult second_order_obstruction(const TangentialForm& zeta, const LegendrianChart& chart, double tol) {
  if (chart.n() != 2 || zeta.degree() != 1 || zeta.space_dim() != 2)
    throw DomainError("second-order test needs a 1-form on a chart with two leaf coordinates");
  if (infinitesimal_residual(zeta, chart).max_abs() > tol) throw DomainError("not an infinitesimal deformation");
  std::vector<ScalarField> dz;
  for (int i = 0; i < 2; ++i) dz.push_back(spectral_partial(zeta[i], 0));
  const TangentialForm dzeta(chart.grid(), 2, 1, std::move(dz));
  ObstructionResult out{wedge(zeta, dzeta), ScalarField()};
  out.certificate = leafwise_mean(out.omega[0], std::vector<int>{chart.leaf_axis(0), chart.leaf_axis(1)});
  return out;
}

}  // namespace folcoil
