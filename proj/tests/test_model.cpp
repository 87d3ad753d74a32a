#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fastslow/model.hpp"
#include "fastslow/roots.hpp"

using namespace fastslow;

namespace {

// Direct formulas, evaluated without polynomial expansion.
double bean(double u, double v) {
  const double r2 = u * u + v * v;
  return r2 * r2 * r2 - (u * u + r2 * r2 * v * v);
}

double direct_g(const std::string& name, double x, double y, double lam) {
  if (name == "vdp_cubic") return -(x * x * x - 2 * x + y);
  if (name == "fold_tangency") {
    const double g1 = x * x * x - 2 * x + y;
    const double g2 = (x - 0.81) * (x - 0.81) + (y + 0.25) * (y + 0.25) - 0.55 * 0.55;
    return -(g1 * g2 + lam * x + 0.01);
  }
  if (name == "hysteresis") {
    // primitive of -a (x-1)^3 (x+1/25), zero constant term
    const double a = 3.75, c = 1.0 / 25;
    auto prim = [&](double t) {
      // (t-1)^3 (t+c) = t^4 + (c-3) t^3 + (3-3c) t^2 + (3c-1) t - c
      return -a * (std::pow(t, 5) / 5 + (c - 3) * std::pow(t, 4) / 4 + (3 - 3 * c) * std::pow(t, 3) / 3 +
                   (3 * c - 1) * t * t / 2 - c * t);
    };
    return prim(x) + lam * x - 0.6 - y;
  }
  if (name == "aligned_double_limit") {
    // Gauss-Legendre quadrature of the factored derivative from 0 to x
    const double a = 640.0 / 49;
    auto gx = [&](double t) { return -a * (t - 1) * (t - 13.0 / 40) * (t + 0.5) * (t + 1.25); };
    const double nodes[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    const double w[3] = {5.0 / 9, 8.0 / 9, 5.0 / 9};
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += w[i] * gx(0.5 * x * (nodes[i] + 1));
    return 0.5 * x * s + lam * x - y;
  }
  if (name == "opposed_double_limit") {
    const double M = 1.5, th = 13.0 / 40 * std::numbers::pi;
    const double u = M * x * std::cos(th) + M * y * std::sin(th) - 0.97;
    const double v = -M * x * std::sin(th) + M * y * std::cos(th) + 0.55;
    const double g1 = 0.5 * x * x * x - x + y;
    return -(g1 * bean(u, v) + lam * x + 0.01);
  }
  throw std::logic_error("no direct formula");
}

double direct_h(const std::string& name, double x, double y) {
  if (name == "vdp_cubic") return x;
  if (name == "fold_tangency") return x - (-0.5 * (y + 0.25) * (y + 0.25) + 0.81 + 0.55 - 0.1);
  if (name == "hysteresis") return x - 0.7;
  if (name == "aligned_double_limit") return x - 1.5;
  const double k = (0.7868 - 1.221) / (-0.11 + 0.74);
  return x - (k * y + (0.7868 - k * (-0.11)));
}

}  // namespace

TEST_CASE("builtins match direct evaluation") {
  std::mt19937 rng(5);
  for (const auto& name : builtin_names()) {
    const SystemFamily fam = builtin_family(name);
    std::uniform_real_distribution<double> ux(fam.domain.x.lo, fam.domain.x.hi);
    std::uniform_real_distribution<double> uy(fam.domain.y[0].lo, fam.domain.y[0].hi);
    std::uniform_real_distribution<double> ul(std::min(fam.sweep.lo, -0.01), std::max(fam.sweep.hi, 0.01));
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
      const double x = ux(rng), y = uy(rng), lam = ul(rng);
      const double g = fam.g.eval(x, y, 0.0, lam), gd = direct_g(name, x, y, lam);
      const double h = fam.h.eval(x, y, 0.0, lam), hd = direct_h(name, x, y);
      if (std::abs(g - gd) > 1e-9 * std::max(1.0, std::abs(gd))) ++bad;
      if (std::abs(h - hd) > 1e-9 * std::max(1.0, std::abs(hd))) ++bad;
    }
    CHECK_MESSAGE(bad == 0, name);
  }
}

TEST_CASE("fold tangency value at the origin") {
  CHECK(builtin("fold_tangency", 0.0).g_at({0, 0, 0}) == doctest::Approx(-0.01).epsilon(1e-14));
}

TEST_CASE("aligned double limit derivative roots") {
  const auto sys = builtin("aligned_double_limit", 0.0);
  const auto roots = real_roots(x_coefficients(sys.gd(1), 0.0, 0.0), -2, 2);
  REQUIRE(roots.size() == 4);
  const double expect[4] = {-1.25, -0.5, 13.0 / 40, 1.0};
  for (int i = 0; i < 4; ++i) CHECK(roots[static_cast<std::size_t>(i)].x == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("hysteresis leading coefficient") {
  const auto sys = builtin("hysteresis", 0.0);
  CHECK(sys.g().degree(Var::x) == 5);
  CHECK(sys.g().coefficient({5, 0, 0, 0}) == doctest::Approx(-0.75));
}

TEST_CASE("opposed double limit nullcline slope") {
  const auto sys = builtin("opposed_double_limit", 0.0);
  // h = x - k y - c, so the y coefficient is -k
  CHECK(-sys.h().coefficient({0, 1, 0, 0}) == doctest::Approx(-0.689206349).epsilon(1e-8));
}

TEST_CASE("bean composition vanishes at the centre preimage") {
  const double M = 1.5, th = 13.0 / 40 * std::numbers::pi;
  const Poly u = Poly::variable(Var::x), v = Poly::variable(Var::y1);
  const Poly r2 = u * u + v * v;
  const Poly b = pow(r2, 3) - (u * u + r2 * r2 * v * v);
  AffineMap<double> m;
  m.A(0, 0) = M * std::cos(th);
  m.A(0, 1) = M * std::sin(th);
  m.A(1, 0) = -M * std::sin(th);
  m.A(1, 1) = M * std::cos(th);
  m.b << -0.97, 0.55, 0, 0;
  const Poly q = compose_affine(b, m).poly;
  const Eigen::Vector2d pre = m.A.topLeftCorner<2, 2>().inverse() * Eigen::Vector2d(0.97, -0.55);
  CHECK(std::abs(q.eval(pre(0), pre(1))) < 1e-13);
  CHECK(q.total_degree() == 6);
}

TEST_CASE("system validation") {
  const Poly X = Poly::variable(Var::x), Y2 = Poly::variable(Var::y2), L = Poly::variable(Var::lambda);
  const DomainBox box({-1, 1}, {{-1, 1}});
  CHECK_THROWS_AS(FastSlowSystem(X + L, X, box), ConfigError);
  CHECK_THROWS_AS(FastSlowSystem(X + Y2, X, box), ConfigError);
  CHECK_THROWS_AS(DomainBox({1, -1}, {{-1, 1}}), ConfigError);
  CHECK_THROWS_AS(builtin("nope", 0.0), ConfigError);
}

TEST_CASE("coefficient parsing") {
  CHECK(parse_coefficient("640/49") == 640.0 / 49.0);
  CHECK(parse_coefficient("-3/4") == -0.75);
  CHECK(parse_coefficient("0.125") == 0.125);
  CHECK_THROWS_AS(parse_coefficient("abc"), ConfigError);
  CHECK_THROWS_AS(parse_coefficient("1/0"), ConfigError);
  CHECK_THROWS_AS(parse_coefficient("1/2x"), ConfigError);
}

TEST_CASE("config loading") {
  const auto fam = load_config(R"({"n_slow": 1, "domain": {"x": [-2, 2], "y": [[-2, 2]]},
    "g_terms": [[1, [2, 0, 0]], [1, [0, 1, 0]]], "h_terms": [[1, [1, 0, 0, 0]]], "sweep": [-1, 1]})");
  const Poly X = Poly::variable(Var::x), Y1 = Poly::variable(Var::y1);
  CHECK(fam.g == X * X + Y1);
  CHECK(fam.h == X);

  CHECK_THROWS_AS(load_config(R"({"n_slow": 3, "domain": {"x": [-1, 1], "y": [[-1, 1]]}, "g_terms": [], "h_terms": []})"),
                  ConfigError);
  CHECK_THROWS_AS(load_config("{not json"), ConfigError);
  CHECK_THROWS_AS(load_config(R"({"name": "hysteresis", "sweep": [0.2, -0.2]})"), ConfigError);
  CHECK_THROWS_AS(load_config(R"({"n_slow": 1, "domain": {"x": [-1, 1], "y": [[-1, 1]]},
    "g_terms": [["one", [1, 0, 0]]], "h_terms": []})"),
                  ConfigError);
}

TEST_CASE("builtin named in a config") {
  const auto fam = load_config(R"({"name": "hysteresis", "sweep": [-0.2, 0.2]})");
  const auto ref = builtin_family("hysteresis");
  CHECK(fam.sweep.lo == -0.2);
  CHECK(fam.sweep.hi == 0.2);
  for (double lam : {-0.2, -0.05, 0.0, 0.13, 0.2}) {
    CHECK(fam.at(lam).g() == ref.at(lam).g());
    CHECK(fam.at(lam).h() == ref.at(lam).h());
  }
}

TEST_CASE("config round trip is term-identical") {
  for (const auto& name : builtin_names()) {
    const auto fam = builtin_family(name);
    const auto back = load_config(to_config_json(fam));
    CHECK(back.g == fam.g);
    CHECK(back.h == fam.h);
    CHECK(back.domain.x.lo == fam.domain.x.lo);
    CHECK(back.sim.epsilon == fam.sim.epsilon);
  }
}

TEST_CASE("derivative tables") {
  const auto sys = builtin("vdp_cubic", 0.0);
  const Eigen::Vector3d p(0.5, 0.3, 0.0);
  CHECK(sys.gd_at(p, 1) == doctest::Approx(-(3 * 0.25 - 2)));
  CHECK(sys.gd_at(p, 3) == doctest::Approx(-6));
  CHECK(sys.gd_at(p, 4) == 0.0);
  CHECK(sys.gd_at(p, 0, 1) == doctest::Approx(-1));
  CHECK(sys.hd_at(p, 1) == doctest::Approx(1));
  CHECK_THROWS(sys.hd(3));
}
