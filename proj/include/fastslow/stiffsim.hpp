#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastslow/model.hpp"

namespace fastslow {

struct SolverStats {
  long steps = 0;
  long rejects = 0;
  long jacobians = 0;
  long lu = 0;
};

enum class SimStatus { completed, escaped, step_underflow, step_limit };
const char* to_string(SimStatus s);

/// Accepted steps of an adaptive run. dz holds the vector field at each
/// sample, so consecutive pairs define a cubic Hermite interpolant.
struct SimTrajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> z;
  std::vector<Eigen::VectorXd> dz;
  double epsilon = 0;
  SolverStats stats;
  SimStatus status = SimStatus::completed;
  std::string message;

  std::size_t size() const { return t.size(); }
  /// Dense output; t_query must lie in [t.front(), t.back()].
  Eigen::VectorXd at(double t_query) const;
};

struct SimOptions {
  double rtol = 1e-6;
  double atol = 1e-9;
  double h_max = 0;  // 0: a tenth of the time span
  long max_steps = 20'000'000;
};

/// Generic autonomous-or-not first-order system for the Rosenbrock core.
struct OdeProblem {
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> jac;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> dfdt;  // null when autonomous
  std::function<bool(const Eigen::VectorXd&)> inside;                   // null: no domain check
};

struct RosenbrockStep {
  Eigen::VectorXd z;      // second-order solution
  Eigen::VectorXd f_new;  // field at (t + h, z)
  Eigen::VectorXd error;  // embedded third-order estimate, unscaled
};
RosenbrockStep rosenbrock_step(const OdeProblem& p, double t, const Eigen::VectorXd& z, const Eigen::VectorXd& f0,
                               double h);

/// Linearly implicit Rosenbrock 2(3) pair with the second-order solution propagated.
SimTrajectory integrate_ode(const OdeProblem& p, const Eigen::VectorXd& z0, double t0, double t_end,
                            const SimOptions& opt = {});

/// eps x' = g, y' = h with the exact polynomial Jacobian. Stops with status
/// `escaped` once the state leaves the domain grown by half a width per side.
SimTrajectory integrate(const FastSlowSystem& sys, double epsilon, const Eigen::Vector2d& z0, double t_end,
                        const SimOptions& opt = {});

/// Crossings of x = value with sign(x') == direction.
struct Section {
  double value = 0;
  int direction = 1;
};

struct CycleStats {
  double period = 0;
  double x_amplitude = 0;
  double x_min = 0, x_max = 0;
  int crossings = 0;
  std::vector<double> crossing_times;
};

/// Midpoint of the outermost landing abscissae of the singular oscillation,
/// or of the box when there is none.
Section default_section(const FastSlowSystem& sys);

/// Period from section returns after dropping the first `transient` fraction
/// of samples. None with fewer than five returns or a spacing CV above 0.1.
std::optional<CycleStats> cycle_stats(const SimTrajectory& tr, const Section& section, double transient = 0.2);

/// End points of fast excursions: maximal runs of samples with |g| above
/// `frac` of the largest |g| seen after the transient.
std::vector<Eigen::Vector2d> fast_landings(const FastSlowSystem& sys, const SimTrajectory& tr, double frac = 0.05,
                                           double transient = 0.2);

std::string sim_csv(const SimTrajectory& tr);
std::string stats_json(const SimTrajectory& tr, const std::optional<CycleStats>& cs);

}  // namespace fastslow
