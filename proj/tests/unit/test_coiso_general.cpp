/// General-k coisotropic charts: Phi/Psi, curvature, A/B/omega, rank oracle.

#include <doctest.h>

#include "folcoil/coiso_general.hpp"
#include "folcoil/random_fields.hpp"

#include <cmath>

using namespace folcoil;

namespace {

std::shared_ptr<const CoisoChart> chart(int n, int res, ExampleR R = ExampleR::Zero, double amp = 0.0, int q_res = 0) {
  return std::make_shared<const CoisoChart>(example_coiso_chart(n, res, R, amp, q_res));
}

GeneralSection random_general(std::shared_ptr<const CoisoChart> c, Rng& rng, double amp = 0.05) {
  std::vector<ScalarField> s;
  for (int a = 0; a < c->nq(); ++a) s.push_back(random_smooth_field(c->grid(), rng, 1, amp));
  return GeneralSection(std::move(c), std::move(s));
}

// s = d_q g with g = g(q): coisotropic on q-independent charts with R = 0.
GeneralSection closed_q_section(std::shared_ptr<const CoisoChart> c, double amp, double phase) {
  const auto& g = c->grid();
  std::vector<ScalarField> s;
  s.push_back(ScalarField::from_function(g, [=](const Eigen::VectorXd& x) {
    return amp * std::cos(x[3] + 2 * x[4] + phase);
  }));
  s.push_back(ScalarField::from_function(g, [=](const Eigen::VectorXd& x) {
    return 2 * amp * std::cos(x[3] + 2 * x[4] + phase) + 0.5 * amp;
  }));
  return GeneralSection(std::move(c), std::move(s));
}

double max_entry(const FieldMatrix& M) {
  double m = 0;
  for (const auto& row : M)
    for (const auto& f : row) m = std::max(m, f.max_abs());
  return m;
}

}  // namespace

TEST_CASE("Phi and Psi") {
  auto c = chart(2, 8, ExampleR::SinQ1);
  auto z = GeneralSection::zero(c);
  auto pp = phi_psi(z, 0);  // y3 = 0: a = e1, b = e2, e3
  CHECK((pp.Psi - Eigen::MatrixXd::Identity(1, 1)).norm() == 0);
  CHECK((pp.Phi - Eigen::MatrixXd::Identity(3, 3)).norm() == 0);
  CHECK((pp.Phi_inv - Eigen::MatrixXd::Identity(3, 3)).norm() == 0);

  Rng rng(31);
  auto s = random_general(c, rng, 0.1);
  double worst = 0;
  for (auto pt : sample_points(c->grid(), 100)) {
    auto q = phi_psi(s, pt);
    worst = std::max(worst, (q.Phi * q.Phi_inv - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (q.Psi * q.Psi_inv - Eigen::MatrixXd::Identity(1, 1)).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("degenerate Phi is rejected") {
  PeriodicGrid g({"y1", "y2", "y3", "q1"}, 8);
  auto F = [&](auto fn) { return ScalarField::from_function(g, fn); };
  auto z = ScalarField::zero(g);
  auto one = ScalarField::constant(g, 1.0);
  auto c = std::make_shared<const CoisoChart>(
      2, 1,
      std::vector<ScalarField>{F([](const Eigen::VectorXd& x) { return std::cos(x[2]); }),
                               F([](const Eigen::VectorXd& x) { return std::sin(x[2]); }), z},
      std::vector<std::vector<ScalarField>>{{one, z, z}},
      std::vector<std::vector<ScalarField>>{
          {F([](const Eigen::VectorXd& x) { return -std::sin(x[2]); }),
           F([](const Eigen::VectorXd& x) { return std::cos(x[2]); }), z},
          {z, z, one}});
  // at y3 = 0 the first row becomes a + p R = 0
  CHECK_THROWS_WITH_AS(GeneralSection(c, {ScalarField::constant(g, -1.0)}), "chart degenerate at point", DomainError);
}

TEST_CASE("chart validation") {
  PeriodicGrid g({"y1", "y2", "y3", "q1"}, 8);
  auto z = ScalarField::zero(g);
  auto one = ScalarField::constant(g, 1.0);
  CHECK_THROWS_WITH_AS(CoisoChart(2, 1, {one, z, z}, {{z, z, z}}, {{one, z, z}, {z, z, one}}),
                       "b rows not orthogonal to a", DomainError);
  CHECK_THROWS_WITH_AS(CoisoChart(2, 1, {z, z, z}, {{z, z, z}}, {{z, one, z}, {z, z, one}}),
                       "defining form not positive", DomainError);
}

TEST_CASE("transverse curvature") {
  auto flat = chart(2, 8);
  for (const auto& Fa : curvature_F(*flat)) CHECK(max_entry(Fa) == 0);

  for (auto c : {chart(2, 8, ExampleR::SinQ1), chart(3, 8, ExampleR::Rich)}) {
    auto F = curvature_F(*c);
    auto Fb = curvature_F_bracket(*c);
    double anti = 0, diff = 0;
    for (std::size_t a = 0; a < F.size(); ++a)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          anti = std::max(anti, (F[a][i][j] + F[a][j][i]).max_abs());
          diff = std::max(diff, (F[a][i][j] - Fb[a][i][j]).max_abs());
        }
    CHECK(anti == 0);
    CHECK(diff <= 1e-9);
  }
  CHECK(max_entry(curvature_F(*chart(3, 8, ExampleR::Rich))[0]) > 0.1);
}

TEST_CASE("A and B tensors") {
  auto c = chart(3, 8, ExampleR::Rich);
  auto z = AB_tensors(GeneralSection::zero(c));
  CHECK(max_entry(z.A) == 0);
  // b . d_q a vanishes on this chart
  CHECK(max_entry(z.B) <= 1e-14);

  Rng rng(32);
  for (double amp : {0.0, 0.1}) {
    auto cs = chart(3, 8, ExampleR::Rich, amp);
    auto s = random_general(cs, rng);
    auto ab = AB_tensors(s);
    auto lhs = antisymmetric_A_closed_form(s);
    double worst = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) worst = std::max(worst, (ab.A[a][b] - ab.A[b][a] - lhs[a][b]).max_abs());
    CHECK(worst <= 1e-9);
    CHECK(lhs[0][1].max_abs() > 1e-3);
  }
}

TEST_CASE("omega and the general residual") {
  auto c = chart(3, 8, ExampleR::Rich);
  auto z = omega_and_residual(GeneralSection::zero(c));
  CHECK(z.residual_max <= 1e-10);
  auto t4 = omega_and_residual(GeneralSection::zero(chart(2, 8, ExampleR::SinQ1)));
  CHECK(t4.residual_max <= 1e-10);

  Rng rng(33);
  auto r = omega_and_residual(random_general(c, rng));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK((r.omega[i][j] + r.omega[j][i]).max_abs() == 0);
  CHECK(r.residual_max > 1e-3);
}

TEST_CASE("residual and rank oracle classify sections alike") {
  Rng rng(34);
  auto rich = chart(3, 8, ExampleR::Rich);
  auto flat = chart(3, 8);
  int agree = 0, coiso_seen = 0, generic_seen = 0;
  for (int t = 0; t < 20; ++t) {
    GeneralSection s = t % 3 == 0   ? closed_q_section(flat, 0.02 + 0.003 * t, 0.4 * t)
                       : t % 3 == 1 ? random_general(rich, rng)
                                    : random_general(flat, rng);
    const bool by_residual = omega_and_residual(s).residual_max <= 1e-8;
    const auto rk = rank_oracle(s, sample_points(s.chart().grid(), 100));
    agree += by_residual == rk.all_coisotropic;
    coiso_seen += by_residual;
    generic_seen += !by_residual;
    if (!rk.all_coisotropic) CHECK(*std::max_element(rk.ranks.begin(), rk.ranks.end()) == 4);
  }
  CHECK(agree == 20);
  CHECK(coiso_seen >= 5);
  CHECK(generic_seen >= 5);
  CHECK(rank_oracle(GeneralSection::zero(rich), sample_points(rich->grid(), 100)).all_coisotropic);
}

TEST_CASE("lifted basis pairings") {
  Rng rng(35);
  auto c = chart(3, 8, ExampleR::Rich, 0.1);
  auto pts = sample_points(c->grid(), 100);
  auto p0 = lifted_basis_check(GeneralSection::zero(c), pts);
  CHECK(p0.max_deviation() <= 1e-10);
  auto pr = lifted_basis_check(random_general(c, rng, 0.1), pts);
  CHECK(pr.ee <= 1e-12);
  CHECK(pr.max_deviation() <= 1e-10);
  CHECK(pr.ef_sign == -1);
}

TEST_CASE("Omega identity and sign") {
  Rng rng(36);
  auto pts = sample_points(PeriodicGrid({"a", "b", "c", "d", "e"}, 8), 100);
  auto c = chart(3, 8, ExampleR::Rich);
  auto z = omega_identity_check(GeneralSection::zero(c), pts);
  CHECK(z.identity_max == 0);
  auto flat = omega_identity_check(random_general(chart(3, 8), rng), pts);
  CHECK(flat.identity_max <= 1e-9);
  auto rich = omega_identity_check(random_general(c, rng), pts);
  CHECK(rich.identity_max <= 1e-9);
  CHECK(rich.omega_sign == 1);
  CHECK(rich.sign_deviation <= 1e-9);
}

TEST_CASE("general twisted differential") {
  auto unit = chart(3, 8, ExampleR::Rich);
  CHECK(general_mu(*unit).max_abs() <= 1e-14);
  Rng rng(37);
  TangentialForm w(unit->grid(), 2, 1,
                   {random_smooth_field(unit->grid(), rng, 2), random_smooth_field(unit->grid(), rng, 2)});
  FoliationChart fc = *unit;
  CHECK((general_twisted_d(w, *unit) - tangential_d(w, fc)).max_abs() <= 1e-13);

  auto scaled = chart(3, 8, ExampleR::Rich, 0.05, 16);
  FoliationChart sc = *scaled;
  auto mu = general_mu(*scaled);
  CHECK((mu - compute_mu(sc)).max_abs() <= 1e-12);
  auto h = random_smooth_field(scaled->grid(), rng, 2);
  auto dd0 = general_twisted_d(general_twisted_d(tangential_scalar(sc, h), *scaled), *scaled);
  CHECK(dd0.max_abs() <= 1e-10);
}

TEST_CASE("linearized general residual is quadratic in eps") {
  auto c = chart(3, 8, ExampleR::Rich, 0.1);
  FoliationChart fc = *c;
  const auto& g = c->grid();
  auto h = ScalarField::from_function(g, [](const Eigen::VectorXd& x) {
    return 0.3 * std::cos(x[3] + x[2]) + 0.2 * std::sin(x[4] - x[0]);
  });
  ScalarField r = ScalarField::from_function(g, [](const Eigen::VectorXd& x) { return 1 + 0.1 * std::cos(x[3]); });
  TangentialForm zeta = scale(r, tangential_d(tangential_scalar(fc, h), fc));
  REQUIRE(general_twisted_d(zeta, *c).max_abs() <= 1e-12);
  std::vector<double> le, lr;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    auto s = GeneralSection(c, (eps * zeta).components());
    le.push_back(std::log(eps));
    lr.push_back(std::log(omega_and_residual(s).residual_max));
  }
  const double slope = (lr[2] - lr[0]) / (le[2] - le[0]);
  CHECK(slope >= 1.9);
  CHECK(slope <= 2.1);
}

TEST_CASE("pre-contact rank") {
  PeriodicGrid t3({"y1", "y2", "y3"}, 8);
  auto pts = sample_points(t3, 100);
  FullForm dz(t3, 3, 1);
  dz[2] = ScalarField::constant(t3, 1.0);
  auto r0 = precontact_rank(dz, pts);
  CHECK(r0.constant_rank);
  CHECK(r0.rank == 0);
  FullForm std_form(t3, 3, 1);
  std_form[0] = ScalarField::from_function(t3, [](const Eigen::VectorXd& x) { return std::cos(x[2]); });
  std_form[1] = ScalarField::from_function(t3, [](const Eigen::VectorXd& x) { return std::sin(x[2]); });
  auto r2 = precontact_rank(std_form, pts);
  CHECK(r2.constant_rank);
  CHECK(r2.rank == 2);

  auto c = chart(2, 8);
  FullForm lam(c->grid(), 4, 1);
  for (int i = 0; i < 3; ++i) lam[i] = c->a(i);
  auto r4 = precontact_rank(lam, sample_points(c->grid(), 100));
  CHECK(r4.constant_rank);
  CHECK(r4.rank == 2);
  CHECK(r4.characteristic_dim == 1);
  CHECK_THROWS_WITH_AS(precontact_rank(FullForm(t3, 3, 1), pts), "defining form vanishes", DomainError);
}
