#pragma once

// Independent reference computations shared by unit tests and the acceptance binary.

#include <cmath>
#include <functional>
#include <optional>
#include <random>

#include "fastslow/critset.hpp"
#include "fastslow/roots.hpp"

namespace oracle {

using fastslow::FastSlowSystem;
using fastslow::Poly;

/// Integrate the layer equation x' = g(x, y) with RK4 from x0 until it settles
/// on an attracting equilibrium. Returns nullopt if x leaves [lo, hi].
inline std::optional<double> layer_limit(const std::function<double(double)>& g,
                                         const std::function<double(double)>& gx, double x0, double lo,
                                         double hi) {
  double x = x0;
  const double w = hi - lo;
  for (int it = 0; it < 2000000; ++it) {
    const double v = g(x), d = std::abs(gx(x));
    if (d > 0 && std::abs(v) / d < 1e-12 && gx(x) < 0) return x;
    double dt = 1e6;
    if (std::abs(v) > 0) dt = std::min(dt, 1e-3 * w / std::abs(v));
    if (d > 0) dt = std::min(dt, 0.2 / d);
    const double k1 = g(x);
    const double k2 = g(x + 0.5 * dt * k1);
    const double k3 = g(x + 0.5 * dt * k2);
    const double k4 = g(x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (x < lo || x > hi) return std::nullopt;
  }
  return std::nullopt;
}

/// Random g(x, y) = P(x) + y with P a cubic or quintic, plus a quadratic fold
/// at an interior critical point of P.
struct FoldCase {
  Poly g;
  Eigen::Vector2d fold;
  double gxx;
};

inline std::optional<FoldCase> random_fold_case(std::mt19937& rng, double box = 3.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 1);
  const int deg = pick(rng) ? 3 : 5;
  std::vector<double> c(static_cast<std::size_t>(deg + 1));
  for (auto& v : c) v = u(rng);
  c.back() = (std::abs(c.back()) + 0.3) * (u(rng) < 0 ? -1 : 1);
  std::vector<double> d1(static_cast<std::size_t>(deg)), d2(static_cast<std::size_t>(deg - 1));
  for (int k = 1; k <= deg; ++k) d1[static_cast<std::size_t>(k - 1)] = k * c[static_cast<std::size_t>(k)];
  for (int k = 1; k < deg; ++k) d2[static_cast<std::size_t>(k - 1)] = k * d1[static_cast<std::size_t>(k)];
  std::vector<double> crit;
  for (const auto& r : fastslow::real_roots(d1, -0.8 * box, 0.8 * box))
    if (std::abs(fastslow::horner(d2, r.x)) > 0.1) crit.push_back(r.x);
  if (crit.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> which(0, crit.size() - 1);
  const double xf = crit[which(rng)];
  FoldCase fc;
  const Poly X = Poly::variable(fastslow::Var::x);
  for (int k = 0; k <= deg; ++k) fc.g.add_term(c[static_cast<std::size_t>(k)], {k, 0, 0, 0});
  fc.g = fc.g + Poly::variable(fastslow::Var::y1);
  fc.fold = {xf, -fastslow::horner(c, xf)};
  fc.gxx = fastslow::horner(d2, xf);
  return fc;
}

}  // namespace oracle
