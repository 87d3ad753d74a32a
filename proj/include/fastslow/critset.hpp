#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastslow/model.hpp"

namespace fastslow {

enum class Stability { attracting, repelling, nonhyperbolic };
const char* to_string(Stability s);

struct CritTolerances {
  double tol_g = 1e-10;   // polished residual for g
  double tol_fx = 1e-10;  // polished residual for g_x, also the hyperbolicity threshold
  double detect = 1e-8;   // relative threshold for "small" derivative values
};

struct FiberRoot {
  double x;
  Stability stability;
  double res_g;
  double g_x;
};

/// Roots of g(., y) inside the x-interval, ascending and Newton-polished.
std::vector<FiberRoot> fiber_roots(const FastSlowSystem& sys, double y1, double y2 = 0.0,
                                   const CritTolerances& tol = {});

/// Classification slot filled by the classify module.
struct FoldPoint {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();  // (x, y1, y2)
  Eigen::Vector2d nu = Eigen::Vector2d::Zero(); // g_xx * grad_y g
  double g_xx = 0.0;
  double residual = 0.0;                        // max(|g|, |g_x|) after polishing
  bool degenerate = false;                      // |g_xx| below the detection threshold
  std::string local_class;
};

/// Newton on (g, g_x) = 0 in (x, y1) for n = 1; falls back to bisection of
/// g_x along the branch when the Jacobian is singular.
std::optional<FoldPoint> polish_fold_n1(const FastSlowSystem& sys, Eigen::Vector2d guess,
                                        const CritTolerances& tol = {});

enum class EndKind { fold, boundary, closed_loop, stall };
const char* to_string(EndKind e);

/// Piece of C[g] (n = 1) between folds or the domain boundary; x is a graph over y.
struct Branch {
  std::vector<Eigen::Vector2d> pts;  // (x, y)
  std::vector<Stability> stab;       // per point; constant away from the endpoints
  Stability stability = Stability::nonhyperbolic;
  EndKind start = EndKind::boundary, end = EndKind::boundary;
  int start_fold = -1, end_fold = -1;  // indices into CriticalSetN1::folds
};

struct ContinuationOptions {
  double h_init = 1e-2;  // box-diagonal fractions
  double h_min = 1e-6;
  double h_max = 5e-2;
  int seed_fibers = 64;
  int max_steps = 200000;
  CritTolerances tol;
};

struct CriticalSetN1 {
  std::vector<Branch> branches;
  std::vector<FoldPoint> folds;  // sorted by (y, x)
  bool complete = true;          // false after a continuation stall
};

CriticalSetN1 trace_branches(const FastSlowSystem& sys, const ContinuationOptions& opt = {});

/// Attracting or repelling root of g(., y) closest to x0, solved by Newton from x0.
std::optional<double> solve_on_fiber(const FastSlowSystem& sys, double x0, double y1, double y2 = 0.0);

struct FoldCurve {
  std::vector<Eigen::Vector3d> pts;
  std::vector<Eigen::Vector3d> tangents;     // unit, oriented along the polyline
  std::vector<Eigen::Vector3d> cusps;        // g = g_x = g_xx = 0
  std::vector<Eigen::Vector3d> swallowtails; // cusps or near-cusps with g_xxx = 0 as well
  bool closed = false;
  EndKind start = EndKind::boundary, end = EndKind::boundary;
};

FoldCurve continue_fold_curve(const FastSlowSystem& sys, const Eigen::Vector3d& seed,
                              const ContinuationOptions& opt = {});

/// Every fold curve in the box, seeded from fixed-y2 slices.
std::vector<FoldCurve> trace_fold_curves(const FastSlowSystem& sys, int slices = 24,
                                         const ContinuationOptions& opt = {});

std::string branches_csv(const CriticalSetN1& cs);
std::string fold_curves_csv(const std::vector<FoldCurve>& curves);

}  // namespace fastslow
