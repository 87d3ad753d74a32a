#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastslow/poly.hpp"

namespace fastslow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Closed box M x N with a 1- or 2-dimensional slow part.
struct DomainBox {
  Interval x;
  std::vector<Interval> y;

  DomainBox() = default;
  DomainBox(Interval xi, std::vector<Interval> yi);

  int n_slow() const { return static_cast<int>(y.size()); }
  double diag() const;
  bool contains(const Eigen::Vector3d& p, double slack = 0.0) const;
  /// Box grown by `frac` of each side's width on both ends.
  DomainBox inflated(double frac) const;
};

/// Run settings used by the stiff simulator when a command does not override them.
struct SimDefaults {
  double epsilon = 0.01;
  Eigen::Vector3d ic = Eigen::Vector3d::Zero();
  double t_end = 100.0;
};

/// Pair (g, h) with lambda fixed. Partial derivatives are tabulated once.
class FastSlowSystem {
 public:
  FastSlowSystem(Poly g, Poly h, DomainBox box, std::string name = "");

  const Poly& g() const { return g_; }
  const Poly& h() const { return h_; }
  int n_slow() const { return box_.n_slow(); }
  const DomainBox& domain() const { return box_; }
  const std::string& name() const { return name_; }

  /// d^i/dx^i d^j/dy1^j d^k/dy2^k g for i <= 4, j + k <= 2.
  const Poly& gd(int i, int j = 0, int k = 0) const;
  /// Derivatives of h up to total order 2.
  const Poly& hd(int i, int j = 0, int k = 0) const;

  double g_at(const Eigen::Vector3d& p) const { return g_.eval(p(0), p(1), p(2)); }
  double h_at(const Eigen::Vector3d& p) const { return h_.eval(p(0), p(1), p(2)); }
  double gd_at(const Eigen::Vector3d& p, int i, int j = 0, int k = 0) const {
    return gd(i, j, k).eval(p(0), p(1), p(2));
  }
  double hd_at(const Eigen::Vector3d& p, int i, int j = 0, int k = 0) const {
    return hd(i, j, k).eval(p(0), p(1), p(2));
  }

  /// Gradient of g with respect to the slow variables (second entry zero when n = 1).
  Eigen::Vector2d grad_y_g(const Eigen::Vector3d& p) const;

 private:
  static int slot(int i, int j, int k);

  Poly g_, h_;
  DomainBox box_;
  std::string name_;
  std::vector<Poly> gtab_, htab_;
};

/// lambda-dependent template together with the sweep interval.
struct SystemFamily {
  std::string name;
  Poly g;
  Poly h;
  DomainBox domain;
  Interval sweep;
  SimDefaults sim;

  int n_slow() const { return domain.n_slow(); }
  FastSlowSystem at(double lambda) const;
};

const std::vector<std::string>& builtin_names();
bool is_builtin(const std::string& name);
SystemFamily builtin_family(const std::string& name);
FastSlowSystem builtin(const std::string& name, double lambda);

/// Parse "p/q", a decimal string, or a plain number.
double parse_coefficient(const std::string& text);

SystemFamily load_config(const std::string& document);
std::string to_config_json(const SystemFamily& family);

}  // namespace fastslow
