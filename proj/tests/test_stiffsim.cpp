#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fastslow/singdyn.hpp"
#include "fastslow/stiffsim.hpp"

using namespace fastslow;

namespace {

const Poly X = Poly::variable(Var::x);
const Poly Y = Poly::variable(Var::y1);

// x' = -(x - cos t)/eps - sin t has the smooth solution cos t
OdeProblem prothero_robinson(double eps) {
  OdeProblem p;
  p.f = [eps](double t, const Eigen::VectorXd& z) {
    Eigen::VectorXd o(1);
    o(0) = -(z(0) - std::cos(t)) / eps - std::sin(t);
    return o;
  };
  p.jac = [eps](double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, -1.0 / eps); };
  p.dfdt = [eps](double t, const Eigen::VectorXd&) {
    Eigen::VectorXd o(1);
    o(0) = -std::sin(t) / eps - std::cos(t);
    return o;
  };
  return p;
}

double distance_to(const std::vector<Eigen::Vector2d>& pts, const Eigen::Vector2d& q) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) d = std::min(d, (p - q).norm());
  return d;
}

}  // namespace

TEST_CASE("linear decay matches the exponential") {
  const FastSlowSystem sys(-1.0 * X, Poly(), DomainBox({-2, 2}, {{-2, 2}}));
  SimOptions opt;
  opt.rtol = 1e-8;
  const auto tr = integrate(sys, 0.1, {1.0, 0.0}, 0.1, opt);
  CHECK(tr.status == SimStatus::completed);
  CHECK(tr.t.back() == 0.1);
  CHECK(std::abs(tr.z.back()(0) - std::exp(-1.0)) < 1e-6);
  for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr.t[i] > tr.t[i - 1]);
}

TEST_CASE("slow variable is frozen when h vanishes") {
  const auto base = builtin("vdp_cubic", 0.0);
  const FastSlowSystem sys(base.g(), Poly(), base.domain());
  const auto tr = integrate(sys, 0.01, {2.0, -0.7}, 5.0);
  REQUIRE(tr.status == SimStatus::completed);
  for (const auto& z : tr.z) CHECK(z(1) == -0.7);
}

TEST_CASE("halving the step divides the local error by about eight") {
  const auto sys = builtin("vdp_cubic", 0.0);
  const double eps = 0.05;
  OdeProblem p;
  p.f = [&](double, const Eigen::VectorXd& z) {
    Eigen::VectorXd o(2);
    o << sys.g_at({z(0), z(1), 0}) / eps, sys.h_at({z(0), z(1), 0});
    return o;
  };
  p.jac = [&](double, const Eigen::VectorXd& z) {
    const Eigen::Vector3d q(z(0), z(1), 0);
    Eigen::MatrixXd J(2, 2);
    J << sys.gd_at(q, 1) / eps, sys.gd_at(q, 0, 1) / eps, sys.hd_at(q, 1), sys.hd_at(q, 0, 1);
    return J;
  };
  Eigen::VectorXd z0(2);
  z0 << 1.5, 0.2;
  auto local_error = [&](double h) {
    const auto step = rosenbrock_step(p, 0.0, z0, p.f(0.0, z0), h);
    SimOptions tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-14;
    const auto ref = integrate_ode(p, z0, 0.0, h, tight);
    return (step.z - ref.z.back()).norm();
  };
  const double ratio = local_error(2e-3) / local_error(1e-3);
  CHECK(ratio > 6.5);
  CHECK(ratio < 9.5);
}

TEST_CASE("stiff accuracy does not degrade with epsilon") {
  auto error_at = [](double eps) {
    Eigen::VectorXd z0(1);
    z0(0) = 1.0;
    const auto tr = integrate_ode(prothero_robinson(eps), z0, 0.0, 2.0);
    REQUIRE(tr.status == SimStatus::completed);
    return std::abs(tr.z.back()(0) - std::cos(2.0));
  };
  const double e2 = error_at(1e-2), e4 = error_at(1e-4);
  CHECK(e4 < 10 * e2);
  CHECK(e2 < 1e-4);
}

TEST_CASE("dense output interpolates the samples") {
  const auto tr = integrate(builtin("vdp_cubic", 0.0), 0.05, {2.0, -1.0}, 3.0);
  REQUIRE(tr.size() > 10);
  for (std::size_t i = 0; i < tr.size(); i += 7) CHECK((tr.at(tr.t[i]) - tr.z[i]).norm() < 1e-14);
}

TEST_CASE("van der Pol period is close to the singular period") {
  const auto sys = builtin("vdp_cubic", 0.0);
  const auto tr = integrate(sys, 0.01, {2.0, -1.0}, 50.0);
  REQUIRE(tr.status == SimStatus::completed);
  const Section s = default_section(sys);
  CHECK(std::abs(s.value) < 1e-8);
  const auto cs = cycle_stats(tr, s);
  REQUIRE(cs.has_value());
  const double singular = 2 * (3 - 2 * std::log(2.0));
  CHECK(std::abs(cs->period - singular) < 0.1 * singular);
  CHECK(cs->x_amplitude > 3.0);
  const auto js = stats_json(tr, cs);
  CHECK(js.find("\"period\"") != std::string::npos);
}

TEST_CASE("damped system has no cycle") {
  const FastSlowSystem sys(Y - X, -1.0 * Y, DomainBox({-2, 2}, {{-2, 2}}));
  const auto tr = integrate(sys, 0.01, {1.0, 1.0}, 30.0);
  CHECK_FALSE(cycle_stats(tr, Section{0.0, 1}).has_value());
}

TEST_CASE("leaving the inflated box stops the run") {
  // x' = x^2 / eps blows up
  const FastSlowSystem sys(X * X, Poly(), DomainBox({-1, 1}, {{-1, 1}}));
  const auto tr = integrate(sys, 0.1, {0.5, 0.0}, 10.0);
  CHECK(tr.status == SimStatus::escaped);
  CHECK(tr.z.back()(0) > 2.0);
  CHECK(tr.t.back() < 10.0);
}

TEST_CASE("bad arguments are rejected") {
  const auto sys = builtin("vdp_cubic", 0.0);
  CHECK_THROWS_AS(integrate(sys, 0.0, {0.0, 0.0}, 1.0), ConfigError);
  CHECK_THROWS_AS(integrate(sys, 0.1, {5.0, 0.0}, 1.0), ConfigError);
}

TEST_CASE("small epsilon tracks the singular slow segments") {
  const auto sys = builtin("vdp_cubic", 0.0);
  const auto ro = detect_relaxation_oscillation(sys);
  REQUIRE(ro.has_value());
  std::vector<Eigen::Vector2d> singular;
  for (const auto& seg : ro->segments) singular.insert(singular.end(), seg.pts.begin(), seg.pts.end());

  const auto tr = integrate(sys, 1e-3, {2.0, -1.0}, 12.0);
  REQUIRE(tr.status == SimStatus::completed);
  const double diag = sys.domain().diag();
  // slow part of the simulation: samples where the layer field is small
  std::vector<Eigen::Vector2d> slow;
  for (std::size_t i = tr.size() / 5; i < tr.size(); ++i) {
    const Eigen::Vector2d q(tr.z[i](0), tr.z[i](1));
    if (std::abs(sys.g_at({q(0), q(1), 0})) < 1e-2) slow.push_back(q);
  }
  REQUIRE(slow.size() > 50);
  double worst = 0;
  for (const auto& q : slow) worst = std::max(worst, distance_to(singular, q));
  for (const auto& q : singular) worst = std::max(worst, distance_to(slow, q));
  CHECK(worst / diag < 0.05);
}

TEST_CASE("landings of a simulated van der Pol cycle") {
  const auto sys = builtin("vdp_cubic", 0.0);
  const auto tr = integrate(sys, 0.01, {2.0, -1.0}, 30.0);
  const auto land = fast_landings(sys, tr);
  REQUIRE(land.size() >= 4);
  const double r = std::sqrt(2.0 / 3.0);
  for (const auto& p : land) CHECK(std::abs(std::abs(p(0)) - 2 * r) < 0.3);
}

TEST_CASE("trajectory CSV header") {
  const auto tr = integrate(builtin("vdp_cubic", 0.0), 0.1, {2.0, -1.0}, 0.5);
  const auto csv = sim_csv(tr);
  CHECK(csv.rfind("t,x,y1\n", 0) == 0);
  CHECK(stats_json(tr, std::nullopt).find("\"cycle\": null") != std::string::npos);
}
