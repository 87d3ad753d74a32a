#pragma once

#include <vector>

namespace fastslow {

struct RealRoot {
  double x;
  bool multiple;  // a critical point of p where p vanishes to working precision
};

/// Horner evaluation of sum c[i] x^i.
double horner(const std::vector<double>& c, double x);

/// Real roots of sum c[i] x^i in [lo, hi], ascending.
///
/// Isolation recurses on the derivative: consecutive critical points bound
/// monotone pieces, each holding at most one simple root. Critical points where
/// |p| <= rel_zero * (sum |c_i| |x|^i) are reported once as multiple roots.
std::vector<RealRoot> real_roots(std::vector<double> c, double lo, double hi, double rel_zero = 1e-13);

}  // namespace fastslow
