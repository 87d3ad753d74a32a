#pragma once

#include <string>
#include <vector>

#include "fastslow/critset.hpp"

namespace fastslow {

struct UmbraResult {
  Eigen::Vector3d source = Eigen::Vector3d::Zero();
  int direction = 0;                         // +1 or -1; 0 when two-valued or empty
  std::vector<Eigen::Vector3d> landings;     // one per departing side that lands inside M
  std::vector<int> landing_direction;        // side each landing was reached from
  std::vector<Stability> landing_stability;
  bool escape = false;                       // some departing side leaves M
  bool degenerate = false;                   // g_xx too small for the quadratic model
};

/// Umbral map of a fold for one fast variable.
///
/// For a quadratic fold g has the sign of g_xx on both sides of the double
/// root, so the layer flow departs towards sign(g_xx) and stops at the first
/// fiber root in that direction. Degenerate folds are probed on both sides.
UmbraResult umbral_map(const FastSlowSystem& sys, const FoldPoint& fold, const CritTolerances& tol = {});

struct DropSet {
  std::vector<Eigen::Vector3d> sources;
  std::vector<UmbraResult> images;
  std::vector<int> curve;  // source curve index for n = 2, -1 for n = 1
  bool any_escape = false;
};

/// Images of fold points (n = 1).
DropSet umbra_set(const FastSlowSystem& sys, const std::vector<FoldPoint>& folds);
/// Images of fold-curve samples (n = 2); cusp samples probe both sides.
DropSet umbra_set(const FastSlowSystem& sys, const std::vector<FoldCurve>& curves);

/// Fold record at a point already on the fold set.
FoldPoint fold_at(const FastSlowSystem& sys, const Eigen::Vector3d& p, const CritTolerances& tol = {});

std::string drop_set_csv(const FastSlowSystem& sys, const DropSet& ds);

}  // namespace fastslow
