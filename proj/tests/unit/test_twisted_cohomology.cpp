/// Degree-0 operators on the sin-y two-torus, periods, closed-leaf and
/// open-leaf ODE solvers, coboundary certificates.

#include <doctest.h>

#include "folcoil/random_fields.hpp"
#include "folcoil/twisted_cohomology.hpp"

#include <cmath>

using namespace folcoil;

namespace {

TorusFoliationChart chart_u(int N, double (*u)(double)) {
  PeriodicGrid g({"x", "y"}, N);
  return TorusFoliationChart(ScalarField::from_function(g, [u](const Eigen::VectorXd& p) { return u(p[1]); }));
}

double sin_y(double y) { return std::sin(y); }
double zero_y(double) { return 0.0; }
double cos_y(double y) { return std::cos(y); }

ScalarField field(const PeriodicGrid& g, double (*fn)(double, double)) {
  return ScalarField::from_function(g, [fn](const Eigen::VectorXd& p) { return fn(p[0], p[1]); });
}

LineSample line_of(double T, int nodes, double (*fn)(double)) {
  LineSample s{T, Eigen::VectorXd(nodes)};
  for (int j = 0; j < nodes; ++j) s.values[j] = fn(s.t(j));
  return s;
}

double sech(double t) { return 1.0 / std::cosh(t); }

}  // namespace

TEST_CASE("untwisted operator: constants span the kernel at every resolution") {
  for (int N : {32, 64, 128}) {
    const auto M = assemble_operator(chart_u(N, sin_y), false, N);
    CHECK(M.split);
    const auto one = ScalarField::constant(PeriodicGrid({"x", "y"}, N), 1.0);
    CHECK(M.apply(one).max_abs() <= 1e-12);
    CHECK(kernel_dimension(M, 1e-8) == 1);
    MESSAGE("N=" << N << " untwisted gap " << singular_value_gap(M, 1e-8));
  }
}

TEST_CASE("assembled matrix reproduces the spectral operator") {
  Rng rng(11);
  const int N = 32;
  const auto chart = chart_u(N, sin_y);
  const auto g = random_smooth_field(chart.grid(), rng, 4);
  for (bool tw : {false, true}) {
    const auto M = assemble_operator(chart, tw, N);
    CHECK((M.apply(g) - torus_d(g, chart, tw)).max_abs() <= 1e-11);
  }
  // out-of-band input is rejected
  const auto hi = ScalarField::from_function(chart.grid(), [](const Eigen::VectorXd& p) { return std::cos(15 * p[1]); });
  CHECK_THROWS_AS(assemble_operator(chart, true, N).apply(hi), DomainError);
}

TEST_CASE("product foliation: twisted kernel is the x-independent fields") {
  const int N = 32;
  const auto M = assemble_operator(chart_u(N, zero_y), true, N);
  // Nyquist in y is outside the Galerkin basis, so N - 1 rather than N
  CHECK(kernel_dimension(M, 1e-8) == N - 1);
}

TEST_CASE("twisted operator on sin y: sin y is an exact null vector") {
  for (int N : {32, 64, 128}) {
    const auto chart = chart_u(N, sin_y);
    const auto M = assemble_operator(chart, true, N);
    const auto s = ScalarField::from_function(chart.grid(), [](const Eigen::VectorXd& p) { return std::sin(p[1]); });
    CHECK(M.apply(s).max_abs() <= 1e-12);
    CHECK(kernel_dimension(M, 1e-8) == 1);
    MESSAGE("N=" << N << " twisted gap " << singular_value_gap(M, 1e-8));
  }
}

TEST_CASE("twisted operator on sin y: empty kernel at N = 64 (stated expectation)") {
  const auto M = assemble_operator(chart_u(64, sin_y), true, 64);
  const double smin = M.singular_values[M.singular_values.size() - 1];
  CHECK(smin >= 1e-3 * M.sigma_max());
  CHECK(kernel_dimension(M, 1e-8) == 0);
}

TEST_CASE("kernel dimension of a zero matrix is the full dimension") {
  OperatorMatrix M;
  OperatorMatrix::Block b;
  b.matrix = Eigen::MatrixXcd::Zero(6, 4);
  M.blocks.push_back(b);
  M.singular_values = Eigen::VectorXd::Zero(4);
  CHECK(kernel_dimension(M, 1e-8) == 4);
}

TEST_CASE("gauge shift of mu conjugates the twisted kernel") {
  const int N = 32;
  const auto chart = chart_u(N, sin_y);
  const auto& g = chart.grid();
  const auto h = field(g, [](double x, double) { return 0.3 * std::sin(x); });
  const auto mu = -field(g, [](double, double y) { return std::cos(y); });
  const auto shifted = mu + torus_d(h, chart, false);
  const auto M0 = assemble_operator_with_m(chart, mu, N);
  const auto M1 = assemble_operator_with_m(chart, shifted, N);
  CHECK(!M1.split);
  CHECK(kernel_dimension(M0, 1e-8) == kernel_dimension(M1, 1e-8));
  const auto conj = field(g, [](double x, double y) { return std::exp(0.3 * std::sin(x)) * std::sin(y); });
  CHECK(M1.apply(conj).max_abs() <= 1e-10);
}

TEST_CASE("periods") {
  const int N = 64;
  const auto chart = chart_u(N, sin_y);
  const auto& g = chart.grid();
  const auto p1 = periods(ScalarField::constant(g, 1.0), chart);
  CHECK(p1.a0 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p1.api == doctest::Approx(1.0).epsilon(1e-14));
  const auto pc = periods(field(g, [](double x, double) { return std::cos(x); }), chart);
  CHECK(std::abs(pc.a0) <= 1e-14);
  CHECK(std::abs(pc.api) <= 1e-14);
  Rng rng(12);
  const auto f = random_smooth_field(g, rng, 4);
  const auto pf = periods(f, chart);
  for (int t = 0; t < 5; ++t) {
    const auto df = torus_d(random_smooth_field(g, rng, 4), chart, false);
    const auto pd = periods(df, chart);
    CHECK(std::abs(pd.a0) <= 1e-10);
    CHECK(std::abs(pd.api) <= 1e-10);
    const auto ps = periods(f + df, chart);
    CHECK(std::abs(ps.a0 - pf.a0) <= 1e-10);
    CHECK(std::abs(ps.api - pf.api) <= 1e-10);
  }
  CHECK_THROWS_WITH_AS(periods(f, chart_u(N, cos_y)), "no closed leaf", DomainError);
}

TEST_CASE("periodic ODE solve") {
  const int n = 64;
  CircleSample h;
  h.values = Eigen::VectorXd::Constant(n, 2.5);
  CHECK((periodic_ode_solve(h).values.array() - 2.5).abs().maxCoeff() <= 1e-14);
  for (int j = 0; j < n; ++j) h.values[j] = std::cos(h.x(j));
  const auto f = periodic_ode_solve(h);
  double err = 0;
  for (int j = 0; j < n; ++j) err = std::max(err, std::abs(f.values[j] - 0.5 * (std::cos(h.x(j)) + std::sin(h.x(j)))));
  CHECK(err <= 1e-14);
  const auto fm = periodic_ode_solve(h, -1);
  err = 0;
  for (int j = 0; j < n; ++j) err = std::max(err, std::abs(fm.values[j] - 0.5 * (std::sin(h.x(j)) - std::cos(h.x(j)))));
  CHECK(err <= 1e-14);

  // trig polynomial input: residual and the literal e^{-x}-weighted formula
  auto hfun = [](double x) { return 0.3 + std::sin(x) - 0.4 * std::cos(3 * x) + 0.2 * std::sin(5 * x + 1); };
  for (int j = 0; j < n; ++j) h.values[j] = hfun(j * 2 * M_PI / n);
  const auto sol = periodic_ode_solve(h);
  CHECK(periodic_ode_residual(sol, h) <= 1e-9);
  CHECK(periodic_ode_residual(periodic_ode_solve(h, -1), h, -1) <= 1e-9);
  // Simpson on a fine mesh for int_0^x h e^t dt
  auto integral = [&](double x) {
    const int m = 4000;
    const double dt = x / m;
    double acc = hfun(0) + hfun(x) * std::exp(x);
    for (int i = 1; i < m; ++i) acc += (i % 2 ? 4 : 2) * hfun(i * dt) * std::exp(i * dt);
    return acc * dt / 3;
  };
  const double full = integral(2 * M_PI);
  double lit = 0;
  for (int j = 0; j < n; j += 7) {
    const double x = j * 2 * M_PI / n;
    const double v = std::exp(-x) * (integral(x) + full / (std::exp(2 * M_PI) - 1));
    lit = std::max(lit, std::abs(v - sol.values[j]));
  }
  CHECK(lit <= 1e-9);
}

TEST_CASE("leaf ODE solve") {
  const auto h = line_of(25, 4097, sech);
  const auto f = leaf_ode_solve(h);
  double err = 0;
  for (int j = 0; j < f.size(); ++j) err = std::max(err, std::abs(f.values[j] - f.t(j) * sech(f.t(j))));
  CHECK(err <= 1e-9);
  CHECK(leaf_ode_residual(f, h) <= 1e-9);

  const auto z = leaf_ode_solve(line_of(20, 4097, [](double) { return 0.0; }));
  CHECK(z.values.cwiseAbs().maxCoeff() == 0);

  Rng rng(13);
  std::uniform_real_distribution<double> c(-0.5, 0.5), w(0.3, 0.8), a(-1, 1);
  for (int t = 0; t < 5; ++t) {
    const double c1 = c(rng), w1 = w(rng), a1 = a(rng), c2 = c(rng), w2 = w(rng), a2 = a(rng);
    LineSample g{20, Eigen::VectorXd(4097)};
    for (int j = 0; j < g.size(); ++j) {
      const double s = g.t(j);
      g.values[j] = a1 * std::exp(-std::pow((s - c1) / w1, 2)) + a2 * std::exp(-std::pow((s - c2) / w2, 2));
    }
    const auto sol = leaf_ode_solve(g);
    CHECK(leaf_ode_residual(sol, g) <= 1e-9);
    CHECK(std::abs(sol.values[0]) <= 1e-8);
    CHECK(std::abs(sol.values[sol.size() - 1]) <= 1e-8);
  }
  CHECK_THROWS_WITH_AS(leaf_ode_solve(line_of(20, 4097, sech)), "not Schwartz at this truncation", DomainError);
}

TEST_CASE("leaf parametrization follows X and the closed-leaf limits") {
  const auto lo = leaf_point(false, 0.4, 0.0);
  CHECK(lo[1] == doctest::Approx(M_PI / 2));
  CHECK(leaf_point(false, 0, 30)[1] <= 1e-12);
  CHECK(leaf_point(false, 0, -30)[1] == doctest::Approx(M_PI));
  CHECK(leaf_point(true, 0, 30)[1] == doctest::Approx(2 * M_PI));
  // dy/dt = -sin y along every leaf (X = d_x - sin y d_y)
  for (bool up : {false, true})
    for (double t : {-3.0, -0.5, 0.7, 2.0}) {
      const double e = 1e-5;
      const double dy = (leaf_point(up, 0, t + e)[1] - leaf_point(up, 0, t - e)[1]) / (2 * e);
      CHECK(std::abs(dy + std::sin(leaf_point(up, 0, t)[1])) <= 1e-9);
    }
}

TEST_CASE("untwisted coboundary certificate") {
  const int N = 64;
  const auto chart = chart_u(N, sin_y);
  const auto& g = chart.grid();
  Rng rng(14);
  const auto f = torus_d(random_smooth_field(g, rng, 4), chart, false);
  const auto rep = coboundary_certificate(f, chart, false);
  CHECK(rep.untwisted_max <= 1e-8);
  CHECK(rep.coboundary);
  CHECK(rep.phi_lower.size() == 32);

  const auto one = coboundary_certificate(ScalarField::constant(g, 1.0), chart, false);
  CHECK(one.periods.a0 == doctest::Approx(1.0));
  CHECK(one.periods.api == doctest::Approx(1.0));
  CHECK(!one.coboundary);

  // sin y: zero periods, leaf integrals +pi and -pi
  const auto s = coboundary_certificate(field(g, [](double, double y) { return std::sin(y); }), chart, false);
  CHECK(std::abs(s.periods.a0) <= 1e-12);
  CHECK(s.phi_lower[0] == doctest::Approx(M_PI).epsilon(1e-8));
  CHECK(s.phi_upper[0] == doctest::Approx(-M_PI).epsilon(1e-8));
  CHECK(!s.coboundary);
}

TEST_CASE("twisted coboundary certificate round trip") {
  const int N = 64;
  const auto chart = chart_u(N, sin_y);
  Rng rng(15);
  for (int t = 0; t < 2; ++t) {
    const auto gref = random_smooth_field(chart.grid(), rng, 3);
    const auto f = torus_d(gref, chart, true);
    const auto rep = coboundary_certificate(f, chart, true, {}, gref);
    REQUIRE(rep.roundtrip_residual.has_value());
    CHECK(*rep.roundtrip_residual <= 1e-6);
    CHECK(rep.closed_leaf_residual <= 1e-9);
    CHECK(rep.coboundary);
  }
  CHECK_THROWS_AS(coboundary_certificate(ScalarField::constant(chart_u(32, cos_y).grid(), 1.0), chart_u(32, cos_y), true),
                  DomainError);
}
