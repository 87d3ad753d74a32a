#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fastslow/classify.hpp"
#include "fastslow/critset.hpp"
#include "fastslow/umbra.hpp"

namespace fastslow {

enum class SegmentEnd { fold, slow_equilibrium, boundary, rejoin };
const char* to_string(SegmentEnd e);

/// Slow motion along one attracting branch (n = 1).
struct SlowSegment {
  int branch = -1;                    // index into the traced critical set
  double y_start = 0, y_end = 0;      // oriented: sign(y_end - y_start) = direction
  int direction = 0;                  // sign of h on the branch
  SegmentEnd start_kind = SegmentEnd::rejoin, end_kind = SegmentEnd::boundary;
  int end_fold = -1;                  // fold index when end_kind == fold
  double duration = 0;                // +inf when the segment limits onto an equilibrium
  bool equilibrium_at_fold = false;   // h vanishes at the terminal fold
  std::vector<Eigen::Vector2d> pts;   // samples (x, y) along the segment
  std::vector<double> t;              // slow time at each sample
};

struct FastJump {
  int fold = -1;
  Eigen::Vector2d from, to;
  Stability landing = Stability::attracting;
};

enum class TrajectoryEnd { equilibrium, boundary, escape, cycle, budget, degenerate_landing };
const char* to_string(TrajectoryEnd e);

struct SingularTrajectory {
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  std::optional<FastJump> initial_relaxation;
  std::vector<SlowSegment> segments;
  std::vector<FastJump> jumps;  // jumps[k] follows segments[k]
  TrajectoryEnd end = TrajectoryEnd::budget;
  int cycle_start = -1;         // first segment of the closed cycle when end == cycle
};

struct RelaxationOscillation {
  std::vector<SlowSegment> segments;
  std::vector<FastJump> jumps;
  double period = 0;  // sum of segment durations
  bool simple = false;
  std::vector<std::string> violations;
};

struct SlowEquilibrium {
  Eigen::Vector2d p;
  Stability sheet = Stability::attracting;
  bool at_fold = false;
  int fold = -1;            // fold index when at_fold
  double H_prime = 0;       // attracting-side limit when at_fold
  double tangency = 0;      // g_x h_y - h_x g_y
  bool saddle_node = false; // E1
  double b = 0;             // saddle-node coefficient, when saddle_node
};

struct EquilibriumAnalysis {
  std::vector<SlowEquilibrium> equilibria;  // sorted by x
  std::vector<std::pair<int, int>> co_equilibria;  // E2: index pairs sharing y
  struct FoldProjection {
    int equilibrium, fold;
    int subcase;  // 1..5, sink/source with fold, sink/source with umbra, non-interacting
  };
  std::vector<FoldProjection> fold_projections;  // M
};

struct SingdynOptions {
  double quad_tol = 1e-10;
  double meet_tol_frac = 0.02;  // of the box diagonal
  double y_tol = 1e-8;          // shared-y and closure threshold, box relative
  int max_jumps = 64;
};

/// Precomputed critical set with helpers for following attracting branches.
class SlowFlow {
 public:
  explicit SlowFlow(const FastSlowSystem& sys, const SingdynOptions& opt = {});

  const FastSlowSystem& system() const { return sys_; }
  const CriticalSetN1& critical_set() const { return cs_; }
  const SingdynOptions& options() const { return opt_; }

  /// Branch holding (x, y) on C[g], or -1.
  int branch_of(const Eigen::Vector2d& p) const;
  /// x on branch b at slow coordinate y.
  double branch_x(int b, double y) const;
  /// dX/dy = -g_y / g_x.
  double slope(const Eigen::Vector2d& p) const;

  /// Follows the branch through start in the direction of h. y_stop cuts the
  /// segment short when it lies ahead of the natural end.
  SlowSegment trace_slow(const Eigen::Vector2d& start, std::optional<double> y_stop = std::nullopt) const;
  SingularTrajectory trace(const Eigen::Vector2d& start, int max_jumps = -1) const;
  std::optional<RelaxationOscillation> relaxation_oscillation() const;
  EquilibriumAnalysis equilibria() const;
  /// Every point of N[h] on C[g], sorted by x, without the E2/M grouping.
  std::vector<SlowEquilibrium> raw_equilibria() const;
  SlowEquilibrium describe_equilibrium(const Eigen::Vector2d& p) const;

 private:
  double slow_time(int b, double y0, double y1, bool fold_end) const;
  std::optional<double> root_on_branch(int b, double y, double x_guess) const;
  double H(int b, double y) const;

  FastSlowSystem sys_;
  SingdynOptions opt_;
  CriticalSetN1 cs_;
};

/// Adaptive Gauss-Kronrod (7, 15) quadrature.
double integrate_gk(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-10,
                    int max_depth = 40);

SlowSegment trace_slow(const FastSlowSystem& sys, const Eigen::Vector2d& start,
                       std::optional<double> y_stop = std::nullopt);
SingularTrajectory trace_singular_trajectory(const FastSlowSystem& sys, const Eigen::Vector2d& start,
                                             int max_jumps = 64);
std::optional<RelaxationOscillation> detect_relaxation_oscillation(const FastSlowSystem& sys);
EquilibriumAnalysis slow_equilibria(const FastSlowSystem& sys);

struct PersistenceReport {
  std::vector<Eigen::Vector2d> degenerate_folds;  // D1, D2
  std::vector<std::string> degenerate_fold_labels;
  std::vector<DoubleLimitRecord> double_limits;   // D3
  std::vector<Eigen::Vector2d> tangencies;        // E1
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> co_equilibria;  // E2
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> fold_projections;  // M: equilibrium, fold
  std::vector<int> fold_projection_subcases;
  bool persistent = true;
};
PersistenceReport persistence_report(const FastSlowSystem& sys);

enum class EventType {
  SNIC,
  singular_Hopf,
  singular_homoclinic,
  hyperbolic_fold_tangency,
  hysteresis,
  aligned_double_limit,
  opposed_double_limit,
  double_slow_equilibrium,
  other_degeneracy
};
const char* to_string(EventType t);

struct BifurcationEvent {
  double lambda0 = 0;
  double bracket_lo = 0, bracket_hi = 0;
  EventType type = EventType::other_degeneracy;
  std::string indicator;
  std::string detail;  // local class or subcase label
  std::vector<Eigen::Vector2d> witness;
  bool affects_RO = false;
  std::optional<double> b;
};

struct SweepOptions {
  int samples = 101;
  double bracket = 1e-6;
  double probe_offset = 1e-4;  // A_lim evaluated at lambda0 - probe_offset
  int jobs = 1;
  SingdynOptions singdyn;
};

std::vector<BifurcationEvent> sweep(const SystemFamily& family, const SweepOptions& opt = {});

std::string trajectory_csv(const SingularTrajectory& t);
std::string events_json(const std::vector<BifurcationEvent>& events);

}  // namespace fastslow
