/// Periodic fields: spectral derivatives, dealiased products, means, IO.

#include <doctest.h>

#include "folcoil/field_io.hpp"
#include "folcoil/random_fields.hpp"
#include "folcoil/spectral.hpp"

#include <filesystem>
#include <sstream>

using namespace folcoil;

namespace {

ScalarField sample(const PeriodicGrid& g, double (*fn)(const Eigen::VectorXd&)) {
  return ScalarField::from_function(g, fn);
}

}  // namespace

TEST_CASE("derivative of sin x is cos x at resolution 16") {
  PeriodicGrid g({"x"}, 16);
  auto f = sample(g, [](const Eigen::VectorXd& p) { return std::sin(p[0]); });
  auto want = sample(g, [](const Eigen::VectorXd& p) { return std::cos(p[0]); });
  CHECK((spectral_partial(f, "x") - want).max_abs() <= 1e-10);
}

TEST_CASE("derivative of a constant vanishes") {
  PeriodicGrid g({"x", "y"}, 16);
  CHECK(spectral_partial(ScalarField::constant(g, 3.5), "y").max_abs() <= 1e-14);
}

TEST_CASE("unknown axis is rejected") {
  PeriodicGrid g({"x"}, 8);
  CHECK_THROWS_WITH_AS(spectral_partial(ScalarField::zero(g), "q"), "unknown axis 'q'", DomainError);
}

TEST_CASE("mixed partials commute on exp(sin x) cos y") {
  PeriodicGrid g({"x", "y"}, 32);
  auto f = sample(g, [](const Eigen::VectorXd& p) { return std::exp(std::sin(p[0])) * std::cos(p[1]); });
  auto xy = spectral_partial(spectral_partial(f, "x"), "y");
  auto yx = spectral_partial(spectral_partial(f, "y"), "x");
  CHECK((xy - yx).max_abs() <= 1e-10);
}

TEST_CASE("derivatives along the last and middle axes of a 3-grid") {
  PeriodicGrid g({"x", "q1", "q2"}, {8, 16, 32});
  auto f = sample(g, [](const Eigen::VectorXd& p) { return std::sin(2 * p[1]) * std::cos(3 * p[2]) + std::cos(p[0]); });
  auto d1 = sample(g, [](const Eigen::VectorXd& p) { return 2 * std::cos(2 * p[1]) * std::cos(3 * p[2]); });
  auto d2 = sample(g, [](const Eigen::VectorXd& p) { return -3 * std::sin(2 * p[1]) * std::sin(3 * p[2]); });
  CHECK((spectral_partial(f, 1) - d1).max_abs() <= 1e-12);
  CHECK((spectral_partial(f, 2) - d2).max_abs() <= 1e-12);
}

TEST_CASE("linearity and zero mean of the derivative") {
  PeriodicGrid g({"x", "y"}, 32);
  Rng rng(11);
  auto f = random_smooth_field(g, rng, 5);
  auto h = random_smooth_field(g, rng, 5);
  auto lhs = spectral_partial(2.0 * f - 0.5 * h, 0);
  auto rhs = 2.0 * spectral_partial(f, 0) - 0.5 * spectral_partial(h, 0);
  CHECK((lhs - rhs).max_abs() <= 1e-12 * std::max(1.0, rhs.max_abs()));
  CHECK(std::abs(spectral_partial(f, 1).mean()) <= 1e-12);
}

TEST_CASE("the Nyquist mode has zero odd derivative") {
  PeriodicGrid g({"x"}, 8);
  auto f = sample(g, [](const Eigen::VectorXd& p) { return std::cos(4 * p[0]); });
  CHECK(spectral_partial(f, 0).max_abs() <= 1e-14);
}

TEST_CASE("pointwise products and quotients") {
  PeriodicGrid g({"x"}, 32);
  auto s = sample(g, [](const Eigen::VectorXd& p) { return std::sin(p[0]); });
  auto c = sample(g, [](const Eigen::VectorXd& p) { return std::cos(p[0]); });
  CHECK(std::abs(mul(s, s).mean() - 0.5) <= 1e-12);
  auto half = sample(g, [](const Eigen::VectorXd& p) { return 0.5 * std::sin(2 * p[0]); });
  CHECK((mul(s, c) - half).max_abs() <= 1e-10);
  auto f = 2.0 + s;
  CHECK((div(f, f) - 1.0).max_abs() <= 1e-15);
  CHECK_THROWS_AS(div(f, s), DomainError);
}

TEST_CASE("dealiased product drops only the unresolved band") {
  PeriodicGrid g({"x"}, 16);
  // modes 6 and 5 reach the half band: the product has modes 1 and 11,
  // and only mode 1 survives truncation.
  auto a = sample(g, [](const Eigen::VectorXd& p) { return std::cos(6 * p[0]); });
  auto b = sample(g, [](const Eigen::VectorXd& p) { return std::cos(5 * p[0]); });
  auto want = sample(g, [](const Eigen::VectorXd& p) { return 0.5 * std::cos(p[0]); });
  CHECK((mul(a, b) - want).max_abs() <= 1e-13);
  // the collocated product aliases mode 11 onto mode 5
  CHECK((pointwise_mul(a, b) - want).max_abs() >= 0.4);
}

TEST_CASE("float instantiation of the templated field") {
  PeriodicGrid g({"x"}, 16);
  auto f = BasicField<float>::from_function(g, [](const Eigen::VectorXd& p) { return std::sin(p[0]); });
  auto d = spectral_partial(f, 0);
  float err = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) err = std::max(err, std::abs(d[i] - std::cos(float(g.coordinate(0, int(i))))));
  CHECK(err <= 1e-5f);
}

TEST_CASE("leafwise means") {
  PeriodicGrid g({"x", "y", "z"}, 16);
  CHECK((leafwise_mean(ScalarField::constant(g, 1.0), std::vector<int>{0, 1}) - 1.0).max_abs() <= 1e-15);
  auto sx = sample(g, [](const Eigen::VectorXd& p) { return std::sin(p[0]); });
  CHECK(leafwise_mean(sx, std::vector<int>{0}).max_abs() <= 1e-15);
  auto f = sample(g, [](const Eigen::VectorXd& p) { return std::pow(std::sin(p[0]), 2) + std::cos(p[2]); });
  auto want = sample(g, [](const Eigen::VectorXd& p) { return 0.5 + std::cos(p[2]); });
  CHECK((leafwise_mean(f, std::set<std::string>{"x", "y"}) - want).max_abs() <= 1e-12);
  CHECK((leafwise_mean(f, std::vector<int>{}) - f).max_abs() == 0);
}

TEST_CASE("resampling a resolved field is exact") {
  PeriodicGrid g({"x", "y"}, 16);
  Rng rng(3);
  auto f = random_smooth_field(g, rng, 4);
  auto up = resample(f, g.with_resolution(64));
  auto back = resample(up, g);
  CHECK((back - f).max_abs() <= 1e-13);
}

TEST_CASE("interpolant reproduces values and gradients off the grid") {
  PeriodicGrid g({"x", "q"}, 16);
  auto f = sample(g, [](const Eigen::VectorXd& p) { return std::sin(p[0] + 2 * p[1]) + std::cos(3 * p[1]); });
  SpectralInterpolant<double> it(f);
  Eigen::VectorXd x(2), grad;
  x << 0.37, 5.1;
  const double v = it.value_and_gradient(x, grad);
  CHECK(std::abs(v - (std::sin(x[0] + 2 * x[1]) + std::cos(3 * x[1]))) <= 1e-13);
  CHECK(std::abs(grad[0] - std::cos(x[0] + 2 * x[1])) <= 1e-12);
  CHECK(std::abs(grad[1] - (2 * std::cos(x[0] + 2 * x[1]) - 3 * std::sin(3 * x[1]))) <= 1e-12);
}

TEST_CASE("binary and csv serialization") {
  PeriodicGrid g({"x", "q1"}, {8, 16});
  Rng rng(5);
  auto f = random_smooth_field(g, rng);
  std::stringstream ss;
  write_field_binary(ss, f);
  auto back = read_field_binary(ss);
  CHECK(back.grid() == g);
  CHECK((back - f).max_abs() == 0);
  std::stringstream csv;
  write_field_csv(csv, f);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "x,q1,value");
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(PeriodicGrid({"x"}, 12), DomainError);
  CHECK_THROWS_AS(PeriodicGrid({"x"}, 4), DomainError);
  CHECK_THROWS_AS(PeriodicGrid({"x", "x"}, 8), DomainError);
  CHECK_THROWS_AS(ScalarField(PeriodicGrid({"x"}, 8), ScalarField::Array::Zero(7)), DomainError);
}

TEST_CASE("form manifests round-trip through field blocks") {
  const auto dir = std::filesystem::temp_directory_path() / "folcoil_form_io";
  std::filesystem::create_directories(dir);
  Rng rng(41);
  PeriodicGrid g({"x", "q1", "q2"}, 8);
  FullForm w(g, 3, 2);
  for (int i = 0; i < w.size(); ++i) w[i] = random_smooth_field(g, rng, 2);
  save_form((dir / "w.json").string(), w);
  CHECK(std::filesystem::exists(dir / "w.dq1_dq2.fcf"));
  const auto back = load_full_form((dir / "w.json").string());
  CHECK((back - w).max_abs() == 0);
  TangentialForm t(g, 2, 1, {w[0], w[2]});
  save_form((dir / "t.json").string(), t);
  const auto tb = load_tangential_form((dir / "t.json").string());
  CHECK((tb - t).max_abs() == 0);
  CHECK(component_label(g, true, {0, 1}) == "e1^e2");
  CHECK_THROWS_AS(load_full_form((dir / "t.json").string()), DomainError);
  std::filesystem::remove_all(dir);
}
