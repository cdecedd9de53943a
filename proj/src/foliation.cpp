#include "folcoil/foliation.hpp"

namespace folcoil {
namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

void require_chart_grid(const TangentialForm& w, const FoliationChart& chart) {
  if (!(w.grid() == chart_grid(chart)) || w.space_dim() != leaf_dimension(chart))
    throw DomainError("form does not live on this chart");
}

}  // namespace

TangentialForm tangential_zero(const FoliationChart& chart, int degree) {
  return TangentialForm(chart_grid(chart), leaf_dimension(chart), degree);
}

TangentialForm tangential_scalar(const FoliationChart& chart, const ScalarField& g) {
  return TangentialForm(chart_grid(chart), leaf_dimension(chart), 0, {g});
}

FullForm lift_L(const TangentialForm& w, const FoliationChart& chart) {
  require_chart_grid(w, chart);
  if (w.degree() != 1) throw DomainError("lift_L: unsupported degree (only 1-forms are lifted)");
  const auto& g = chart_grid(chart);
  FullForm out(g, g.dim(), 1);
  std::visit(overloaded{
                 [&](const LegendrianChart& c) {
                   ScalarField rs = ScalarField::zero(g);
                   for (int i = 0; i < c.n(); ++i) {
                     rs += mul(c.R(i), w[i]);
                     out[c.leaf_axis(i)] = w[i];
                   }
                   out[0] = -rs;
                 },
                 [&](const TorusFoliationChart&) { out[0] = w[0]; },
                 [&](const CoisoChart& c) {
                   for (int a = 0; a < c.nq(); ++a) out[c.q_axis(a)] = w[a];
                   for (int i = 0; i < c.ny(); ++i) {
                     ScalarField acc = ScalarField::zero(g);
                     for (int b = 0; b < c.nq(); ++b) acc += mul(c.R(b, i), w[b]);
                     out[c.y_axis(i)] = -acc;
                   }
                 },
             },
             chart);
  return out;
}

TangentialForm project_pi(const FullForm& s, const FoliationChart& chart) {
  const auto& g = chart_grid(chart);
  if (!(s.grid() == g)) throw DomainError("form does not live on this chart");
  const int m = leaf_dimension(chart);
  TangentialForm out(g, m, s.degree());
  if (const auto* t = std::get_if<TorusFoliationChart>(&chart)) {
    if (s.degree() == 0) out[0] = s[0];
    if (s.degree() == 1) out[0] = s[0] - mul(t->u(), s[1]);
    return out;
  }
  const auto axes = leaf_axes(chart);
  const auto& idx = out.indices();
  for (int i = 0; i < out.size(); ++i) {
    MultiIndex J;
    for (int l : idx[i]) J.push_back(axes[l]);
    out[i] = s.at(J);
  }
  return out;
}

TangentialForm tangential_d(const TangentialForm& w, const FoliationChart& chart) {
  require_chart_grid(w, chart);
  if (const auto* t = std::get_if<TorusFoliationChart>(&chart)) {
    TangentialForm out(w.grid(), 1, w.degree() + 1);
    if (w.degree() == 0) out[0] = spectral_partial(w[0], 0) - mul(t->u(), spectral_partial(w[0], 1));
    return out;
  }
  return coordinate_d(w, leaf_axes(chart));
}

TangentialForm compute_mu(const FoliationChart& chart) {
  return std::visit(
      overloaded{
          [&](const LegendrianChart& c) {
            return tangential_d(tangential_scalar(chart, log(c.f())), chart);
          },
          [&](const TorusFoliationChart& c) {
            TangentialForm mu(c.grid(), 1, 1);
            mu[0] = -spectral_partial(c.u(), 1);
            return mu;
          },
          [&](const CoisoChart& c) {
            ScalarField a2 = ScalarField::zero(c.grid());
            for (int i = 0; i < c.ny(); ++i) a2 += pointwise_mul(c.a(i), c.a(i));
            return tangential_d(tangential_scalar(chart, 0.5 * log(a2)), chart);
          },
      },
      chart);
}

TangentialForm twisted_d(const TangentialForm& w, const FoliationChart& chart, const TangentialForm& mu) {
  return tangential_d(w, chart) - wedge(mu, w);
}

TangentialForm twisted_d(const TangentialForm& w, const FoliationChart& chart) {
  return twisted_d(w, chart, compute_mu(chart));
}

double gauge_chain_residual(const TangentialForm& w, const ScalarField& h, const FoliationChart& chart) {
  const TangentialForm mu = compute_mu(chart);
  const TangentialForm mu2 = mu + tangential_d(tangential_scalar(chart, h), chart);
  const ScalarField eh = exp(h);
  const TangentialForm lhs = twisted_d(scale(eh, w), chart, mu2);
  const TangentialForm rhs = scale(eh, twisted_d(w, chart, mu));
  return (lhs - rhs).max_abs();
}

ScalarField contract_L(const FullForm& s, const FoliationChart& chart) {
  if (s.degree() != 1) throw DomainError("contract_L: degree-1 forms only");
  return std::visit(overloaded{
                        [&](const LegendrianChart& c) {
                          ScalarField v = s[0];
                          for (int i = 0; i < c.n(); ++i) v += mul(c.R(i), s[c.leaf_axis(i)]);
                          return v;
                        },
                        [&](const TorusFoliationChart&) { return s[1]; },
                        [&](const CoisoChart&) -> ScalarField {
                          throw DomainError("contract_L: the coisotropic chart has a transverse plane, not a line");
                        },
                    },
                    chart);
}

}  // namespace folcoil
