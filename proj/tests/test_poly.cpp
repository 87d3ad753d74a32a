#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fastslow/poly.hpp"
#include "fastslow/roots.hpp"

using namespace fastslow;

namespace {

const Poly X = Poly::variable(Var::x);
const Poly Y1 = Poly::variable(Var::y1);
const Poly Y2 = Poly::variable(Var::y2);
const Poly L = Poly::variable(Var::lambda);

Poly random_poly(std::mt19937& rng, int max_deg, int n_terms) {
  std::uniform_int_distribution<int> deg(0, max_deg);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  Poly p;
  for (int i = 0; i < n_terms; ++i) p.add_term(coef(rng), {deg(rng), deg(rng), deg(rng) / 2, deg(rng) / 3});
  return p;
}

}  // namespace

TEST_CASE("terms are unique and free of zeros") {
  Poly p = X + Y1 - X;
  CHECK(p.size() == 1);
  CHECK(p.coefficient({0, 1, 0, 0}) == 1.0);
  CHECK((X - X).is_zero());
  CHECK_THROWS_AS(p.add_term(1.0, {-1, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("evaluation") {
  Eigen::VectorXd pt(2);
  pt << 2.0, 1.0;
  CHECK(eval(X * X + Y1, pt) == doctest::Approx(5.0));
  CHECK(eval(Poly(), pt) == 0.0);
  Eigen::VectorXd short_pt(1);
  short_pt << 2.0;
  CHECK_THROWS_AS(eval(X * X + Y1, short_pt), std::invalid_argument);
}

TEST_CASE("differentiation") {
  const Poly d = differentiate(pow(X, 3) - 2.0 * X + Y1, Var::x);
  CHECK(max_coef_diff(d, 3.0 * X * X - 2.0) == 0.0);
  const Poly cusp_tangency = pow(X, 3) + X * Y2 * Y2 + L * X + Y1;
  CHECK(max_coef_diff(differentiate(cusp_tangency, Var::y2), 2.0 * X * Y2) == 0.0);
  CHECK(max_coef_diff(differentiate(pow(X, 4), Var::x, 4), Poly(24.0)) == 0.0);
  CHECK(differentiate(Poly(3.0), Var::x).is_zero());
  CHECK_THROWS_AS(differentiate(X, Var::x, 0), std::invalid_argument);
}

TEST_CASE("central differences match exact partials") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Var vars[] = {Var::x, Var::y1, Var::y2, Var::lambda};
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Poly p = random_poly(rng, 5, 8);
    for (Var v : vars) {
      const Poly dp = differentiate(p, v);
      Eigen::Vector4d z(u(rng), u(rng), u(rng), u(rng));
      const double h = 1e-5 * 2.0;
      Eigen::Vector4d zp = z, zm = z;
      zp(static_cast<int>(v)) += h;
      zm(static_cast<int>(v)) -= h;
      const double fd = (p(zp) - p(zm)) / (2 * h);
      const double exact = dp(z);
      CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
      ++checked;
    }
  }
  CHECK(checked == 800);
}

TEST_CASE("affine composition") {
  const Poly p = X * X + Y1 * Y1;
  CHECK(compose_affine(p, AffineMap<double>::identity()).poly == p);

  AffineMap<double> scale;
  scale.A(0, 0) = 3.0;
  scale.A(1, 1) = 3.0;
  CHECK(max_coef_diff(compose_affine(p, scale).poly, 9.0 * p) < 1e-14);

  AffineMap<double> flat;
  flat.A(1, 1) = 0.0;
  CHECK(compose_affine(p, flat).singular_linear_part);
  CHECK_FALSE(compose_affine(p, scale).singular_linear_part);
}

TEST_CASE("composition with the inverse map restores the polynomial") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    const Poly p = random_poly(rng, 4, 6);
    AffineMap<double> m;
    m.A = Eigen::Matrix4d::Identity() + 0.4 * Eigen::Matrix4d::NullaryExpr([&]() { return u(rng); });
    m.b = Eigen::Vector4d::NullaryExpr([&]() { return u(rng); });
    const Poly q = compose_affine(compose_affine(p, m).poly, m.inverse()).poly;
    double scale = 1.0;
    for (const auto& t : p.terms()) scale = std::max(scale, std::abs(t.coef));
    CHECK(max_coef_diff(p, q) <= 1e-10 * scale);
  }
}

TEST_CASE("composition preserves total degree") {
  const Poly p = pow(X, 3) * Y1 + Y1 * Y1;
  AffineMap<double> m;
  m.A << 1, 2, 0, 0, -1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  CHECK(compose_affine(p, m).poly.total_degree() == 4);
}

TEST_CASE("univariate real roots") {
  // x^3 - 2x on [-3, 3]
  auto r = real_roots({0.0, -2.0, 0.0, 1.0}, -3, 3);
  REQUIRE(r.size() == 3);
  CHECK(r[0].x == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r[1].x == doctest::Approx(0.0));
  CHECK(r[2].x == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  // (x - 1)^2 (x + 2): the double root is reported once as multiple.
  r = real_roots({2.0, -3.0, 0.0, 1.0}, -3, 3);
  REQUIRE(r.size() == 2);
  CHECK(r[0].x == doctest::Approx(-2.0));
  CHECK_FALSE(r[0].multiple);
  CHECK(r[1].x == doctest::Approx(1.0));
  CHECK(r[1].multiple);

  CHECK(real_roots({1.0, 0.0, 1.0}, -5, 5).empty());
  CHECK(real_roots({3.0}, -5, 5).empty());
}

TEST_CASE("root counts match sign changes on a fine grid") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> c(6);
    for (auto& v : c) v = u(rng);
    const auto roots = real_roots(c, -2.0, 2.0);
    int changes = 0;
    double prev = horner(c, -2.0);
    for (int i = 1; i <= 40000; ++i) {
      const double v = horner(c, -2.0 + 4.0 * i / 40000);
      if ((prev < 0 && v > 0) || (prev > 0 && v < 0)) ++changes;
      if (v != 0.0) prev = v;
    }
    int simple = 0;
    for (const auto& r : roots) simple += r.multiple ? 0 : 1;
    CHECK(simple == changes);
  }
}
