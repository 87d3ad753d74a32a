#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fastslow/singdyn.hpp"

using namespace fastslow;

namespace {

const Poly X = Poly::variable(Var::x);
const Poly Y = Poly::variable(Var::y1);
const Poly L = Poly::variable(Var::lambda);
const double r = std::sqrt(2.0 / 3.0);

// y - x: the line x = y is attracting
FastSlowSystem line(Poly h) { return FastSlowSystem(Y - X, std::move(h), DomainBox({-3, 3}, {{-2, 2}})); }

FastSlowSystem vdp_with(Poly h) {
  return FastSlowSystem(-(pow(X, 3) - 2.0 * X + Y), std::move(h), DomainBox({-3, 3}, {{-2, 2}}));
}

}  // namespace

TEST_CASE("constant slow speed reaches the boundary in y_max time") {
  const auto seg = trace_slow(line(Poly(1.0)), {0.0, 0.0});
  CHECK(seg.end_kind == SegmentEnd::boundary);
  CHECK(seg.direction == 1);
  CHECK(seg.y_end == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(seg.duration == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("linear slow speed integrates to a logarithm") {
  const auto seg = trace_slow(line(Y), {1.0, 1.0}, 2.0);
  CHECK(seg.y_end == doctest::Approx(2.0));
  CHECK(std::abs(seg.duration - std::log(2.0)) < 1e-9 * std::log(2.0));
}

TEST_CASE("start on the repelling sheet is rejected") {
  const FastSlowSystem rep(X - Y, Poly(1.0), DomainBox({-3, 3}, {{-2, 2}}));
  CHECK_THROWS_AS(trace_slow(rep, {0.0, 0.0}), NumericalError);
}

TEST_CASE("van der Pol right branch runs from the landing to the upper fold") {
  const auto sys = builtin("vdp_cubic", 0.0);
  const auto seg = trace_slow(sys, {2 * r, -4.0 / 3.0 * r});
  CHECK(seg.end_kind == SegmentEnd::fold);
  CHECK(seg.y_end == doctest::Approx(4.0 / 3.0 * r).epsilon(1e-10));
  CHECK(seg.pts.back()(0) == doctest::Approx(r).epsilon(1e-8));
  CHECK(std::abs(seg.duration - (3.0 - 2.0 * std::log(2.0))) < 1e-9);
  for (std::size_t i = 1; i < seg.t.size(); ++i) CHECK(seg.t[i] >= seg.t[i - 1]);
  CHECK(seg.t.back() == doctest::Approx(seg.duration));
}

TEST_CASE("branch slope matches differences of the traced branch") {
  const auto sys = builtin("vdp_cubic", 0.0);
  const SlowFlow flow(sys);
  const int b = flow.branch_of({2 * r, -4.0 / 3.0 * r});
  REQUIRE(b >= 0);
  for (double y : {-1.0, -0.3, 0.4, 0.9}) {
    const double d = 1e-5;
    const double fd = (flow.branch_x(b, y + d) - flow.branch_x(b, y - d)) / (2 * d);
    const Eigen::Vector2d p(flow.branch_x(b, y), y);
    CHECK(std::abs(fd - flow.slope(p)) < 1e-6 * (1 + std::abs(fd)));
  }
}

TEST_CASE("slow time is additive under splitting") {
  const auto sys = builtin("vdp_cubic", 0.0);
  const SlowFlow flow(sys);
  const auto whole = flow.trace_slow({2 * r, -4.0 / 3.0 * r});
  const auto first = flow.trace_slow({2 * r, -4.0 / 3.0 * r}, 0.2);
  REQUIRE(first.y_end == doctest::Approx(0.2));
  const auto second = flow.trace_slow(first.pts.back());
  CHECK(std::abs(first.duration + second.duration - whole.duration) < 1e-10);
}

TEST_CASE("van der Pol has one equilibrium, on the middle sheet") {
  const auto an = slow_equilibria(builtin("vdp_cubic", 0.0));
  REQUIRE(an.equilibria.size() == 1);
  const auto& e = an.equilibria[0];
  CHECK(e.p.norm() < 1e-12);
  CHECK(e.sheet == Stability::repelling);
  CHECK(std::abs(e.tangency) == doctest::Approx(1.0));
  CHECK_FALSE(e.saddle_node);
  CHECK(an.co_equilibria.empty());
  CHECK(an.fold_projections.empty());
}

TEST_CASE("quadratic slow speed touching zero is a saddle-node candidate") {
  const auto an = slow_equilibria(line(Y * Y));
  REQUIRE(an.equilibria.size() == 1);
  CHECK(an.equilibria[0].p.norm() < 1e-6);
  CHECK(an.equilibria[0].saddle_node);
  CHECK(an.equilibria[0].b != 0.0);
}

TEST_CASE("equilibrium on the fold is a sink-fold intersection") {
  const auto an = slow_equilibria(vdp_with(X - r));
  bool sink_fold = false;
  for (const auto& m : an.fold_projections) sink_fold = sink_fold || m.subcase == 1;
  CHECK(sink_fold);
  const auto& e = an.equilibria[size_t(an.fold_projections[0].equilibrium)];
  CHECK(e.at_fold);
  CHECK(e.H_prime < 0);
}

TEST_CASE("van der Pol trajectory from (2, -1) closes after two jumps") {
  const auto tr = trace_singular_trajectory(builtin("vdp_cubic", 0.0), {2.0, -1.0});
  REQUIRE(tr.initial_relaxation.has_value());
  CHECK(tr.initial_relaxation->to(0) > r);
  CHECK(tr.end == TrajectoryEnd::cycle);
  REQUIRE(tr.jumps.size() >= 2);
  for (const auto& j : tr.jumps) {
    CHECK(std::abs(std::abs(j.from(0)) - r) < 1e-8);
    CHECK(std::abs(j.to(0) + 2 * j.from(0)) < 1e-8);
    CHECK(std::abs(std::abs(j.from(1)) - 4.0 / 3.0 * r) < 1e-8);
  }
  CHECK(static_cast<int>(tr.segments.size()) - tr.cycle_start == 2);
  const auto csv = trajectory_csv(tr);
  CHECK(csv.rfind("segment_id,kind,x,y1,t_slow\n", 0) == 0);
  CHECK(csv.find(",fast,") != std::string::npos);
}

TEST_CASE("decaying slow flow ends at the equilibrium") {
  const auto tr = trace_singular_trajectory(line(-1.0 * Y), {0.5, 0.5});
  CHECK(tr.end == TrajectoryEnd::equilibrium);
  CHECK(tr.jumps.empty());
  REQUIRE(tr.segments.size() == 1);
  CHECK(std::isinf(tr.segments[0].duration));
  CHECK(std::abs(tr.segments[0].y_end) < 1e-12);
}

TEST_CASE("fold tangency builtin trajectory is recorded") {
  const auto tr = trace_singular_trajectory(builtin("fold_tangency", 0.0), {2.0, -1.0});
  CHECK(tr.segments.size() >= 1);
  CHECK(tr.jumps.size() + 1 >= tr.segments.size());
}

TEST_CASE("van der Pol relaxation oscillation period") {
  const auto ro = detect_relaxation_oscillation(builtin("vdp_cubic", 0.0));
  REQUIRE(ro.has_value());
  CHECK(ro->simple);
  CHECK(ro->segments.size() == 2);
  CHECK(std::abs(ro->period - 2 * (3 - 2 * std::log(2.0))) < 1e-9);
}

TEST_CASE("equilibrium at the fold breaks the simple check") {
  const auto ro = detect_relaxation_oscillation(vdp_with(X - r));
  REQUIRE(ro.has_value());
  CHECK_FALSE(ro->simple);
  bool eq = false;
  for (const auto& v : ro->violations) eq = eq || v.find("equilibrium") != std::string::npos;
  CHECK(eq);
}

TEST_CASE("no relaxation oscillation without folds") {
  CHECK_FALSE(detect_relaxation_oscillation(line(-1.0 * Y)).has_value());
}

TEST_CASE("persistence reports") {
  CHECK(persistence_report(builtin("vdp_cubic", 0.0)).persistent);

  const auto m = persistence_report(vdp_with(X - r));
  CHECK_FALSE(m.persistent);
  CHECK_FALSE(m.fold_projections.empty());

  const auto hy = persistence_report(builtin("hysteresis", 0.0));
  CHECK_FALSE(hy.persistent);
  bool at_one = false;
  for (const auto& p : hy.degenerate_folds) at_one = at_one || std::abs(p(0) - 1.0) < 1e-3;
  CHECK(at_one);
}

TEST_CASE("persistent van der Pol stays persistent under small perturbations") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1e-4, 1e-4);
  const auto base = builtin("vdp_cubic", 0.0);
  for (int k = 0; k < 100; ++k) {
    Poly g = base.g(), h = base.h();
    for (int i = 0; i <= 3; ++i)
      for (int j = 0; i + j <= 3; ++j) g.add_term(u(rng), {i, j, 0, 0});
    for (int i = 0; i <= 1; ++i)
      for (int j = 0; i + j <= 1; ++j) h.add_term(u(rng), {i, j, 0, 0});
    CHECK(persistence_report(FastSlowSystem(g, h, base.domain())).persistent);
  }
}

TEST_CASE("equilibrium crossing the fold is a singular Hopf event") {
  SystemFamily fam = builtin_family("vdp_cubic");
  fam.h = X - L;
  fam.sweep = {0.5, 1.0};
  SweepOptions opt;
  opt.jobs = 4;
  const auto events = sweep(fam, opt);
  int hopf = 0;
  for (const auto& e : events) {
    if (e.type != EventType::singular_Hopf) continue;
    ++hopf;
    CHECK(std::abs(e.lambda0 - r) < 1e-6);
    CHECK(e.bracket_hi - e.bracket_lo <= 1e-6);
    CHECK(e.bracket_lo <= e.lambda0);
    CHECK(e.lambda0 <= e.bracket_hi);
    CHECK(e.affects_RO);
  }
  CHECK(hopf == 1);
  const auto js = events_json(events);
  CHECK(js.find("\"singular_Hopf\"") != std::string::npos);
  CHECK(js.find("\"bracket\"") != std::string::npos);
}

TEST_CASE("co-equilibria never affect the oscillation") {
  SystemFamily fam = builtin_family("vdp_cubic");
  fam.h = (X - 1.5) * (X + L);
  fam.sweep = {0.1, 0.3};
  const auto events = sweep(fam);
  int co = 0;
  for (const auto& e : events) {
    if (e.type != EventType::double_slow_equilibrium) continue;
    ++co;
    CHECK_FALSE(e.affects_RO);
    // y(x) = 2x - x^3 at x = -lambda meets y(1.5) = -0.375
    CHECK(std::abs(-2 * e.lambda0 + std::pow(e.lambda0, 3) + 0.375) < 1e-6);
  }
  CHECK(co == 1);
}
