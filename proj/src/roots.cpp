#include "fastslow/roots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fastslow {

double horner(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
  return s;
}

namespace {

double abs_horner(const std::vector<double>& c, double x) {
  double s = 0.0;
  const double ax = std::abs(x);
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * ax + std::abs(*it);
  return s;
}

std::vector<double> derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(static_cast<double>(i) * c[i]);
  return d;
}

// Safeguarded Newton on a bracket with f(a) and f(b) of opposite sign.
double bracketed_root(const std::vector<double>& c, const std::vector<double>& dc, double a, double b, double fa) {
  double x = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    const double fx = horner(c, x);
    if (fx == 0.0) return x;
    if ((fx < 0) == (fa < 0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
    }
    if (std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) break;
    const double d = horner(dc, x);
    double xn = (d != 0.0) ? x - fx / d : 0.5 * (a + b);
    if (!(xn > std::min(a, b) && xn < std::max(a, b))) xn = 0.5 * (a + b);
    if (xn == x) break;
    x = xn;
  }
  return x;
}

}  // namespace

std::vector<RealRoot> real_roots(std::vector<double> c, double lo, double hi, double rel_zero) {
  while (!c.empty() && c.back() == 0.0) c.pop_back();
  std::vector<RealRoot> out;
  if (c.size() <= 1 || !(lo <= hi)) return out;
  // Drop a numerically vanishing leading coefficient relative to the rest on the interval.
  const double span = std::max({1.0, std::abs(lo), std::abs(hi)});
  while (c.size() > 1) {
    double rest = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i)
      rest = std::max(rest, std::abs(c[i]) * std::pow(span, static_cast<double>(i)));
    if (std::abs(c.back()) * std::pow(span, static_cast<double>(c.size() - 1)) > 1e-15 * rest) break;
    c.pop_back();
  }
  if (c.size() <= 1) return out;
  if (c.size() == 2) {
    const double r = -c[0] / c[1];
    if (r >= lo && r <= hi) out.push_back({r, false});
    return out;
  }

  const std::vector<double> dc = derivative(c);
  std::vector<double> pts{lo};
  std::vector<bool> crit{false};
  for (const auto& r : real_roots(dc, lo, hi, rel_zero)) {
    if (r.x > pts.back() && r.x < hi) {
      pts.push_back(r.x);
      crit.push_back(true);
    }
  }
  pts.push_back(hi);
  crit.push_back(false);

  std::vector<double> vals(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    vals[i] = horner(c, pts[i]);
    if (std::abs(vals[i]) <= rel_zero * abs_horner(c, pts[i])) {
      vals[i] = 0.0;
      out.push_back({pts[i], crit[i]});
    }
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (vals[i] == 0.0 || vals[i + 1] == 0.0) continue;
    if ((vals[i] < 0) != (vals[i + 1] < 0)) out.push_back({bracketed_root(c, dc, pts[i], pts[i + 1], vals[i]), false});
  }
  std::sort(out.begin(), out.end(), [](const RealRoot& a, const RealRoot& b) { return a.x < b.x; });
  return out;
}

}  // namespace fastslow
