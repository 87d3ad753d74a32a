#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fastslow/critset.hpp"
#include "fastslow/umbra.hpp"

namespace fastslow {

struct ClassTolerances {
  double zero = 1e-8;     // relative to the local derivative scale
  double on_fold = 1e-8;  // |g|, |g_x| accepted as "on the fold set"
  double parallel_rad = 1e-6;
};

enum class LocalTagN1 {
  regular,
  quadratic_fold,
  hyperbolic_fold_tangency,
  elliptic_fold_tangency,
  stable_hysteresis,
  unstable_hysteresis,
  higher_codimension
};
const char* to_string(LocalTagN1 t);

struct LocalClassN1 {
  LocalTagN1 tag = LocalTagN1::regular;
  double g_y = 0, g_xx = 0, g_xxx = 0, det_hessian = 0;
};

/// Decision tree for a point of the fold set with one slow variable.
LocalClassN1 classify_local_n1(const FastSlowSystem& sys, const Eigen::Vector2d& p, const ClassTolerances& tol = {});

enum class Interaction { fold_umbra, umbra_umbra, non_interacting };
const char* to_string(Interaction i);

/// Interaction of two singular points on one fast fiber by the count k of
/// regular sheets between them: k = 0 always pairs a fold with the umbra of
/// the other, k = 1 is umbra-umbra when both jump onto the middle sheet.
struct PairInteraction {
  Interaction code = Interaction::non_interacting;
  bool swapped = false;  // for fold_umbra: true when the second point's umbra meets the first
  int sheets_between = 0;
};
PairInteraction pair_interaction(const FastSlowSystem& sys, const FoldPoint& a, const FoldPoint& b);

struct DoubleLimitRecord {
  int first = -1, second = -1;  // fold indices; for fold_umbra U(first) meets second
  Eigen::Vector3d p1, p2;
  int alignment = 0;            // sign of nu(p1) nu(p2)
  Interaction interaction = Interaction::non_interacting;
  int subcase = 0;              // 1..6
  std::string label;
};

/// All fold pairs with |dy| < tol_y, paired with the Table-3-style subcase.
std::vector<DoubleLimitRecord> detect_double_limits(const FastSlowSystem& sys, const std::vector<FoldPoint>& folds,
                                                    double tol_y = 1e-6);

struct FoldQuantN2 {
  bool tangency = false;   // grad_y g vanishes; only sigma_plus is meaningful
  Eigen::Vector2d nu = Eigen::Vector2d::Zero();
  double K = 0.0;
  Eigen::Vector2d kappa = Eigen::Vector2d::Zero();
  int sigma_plus = -1;     // positive eigenvalues of sign(g_xx) D^2 g at a tangency
};
FoldQuantN2 fold_quantities_n2(const FastSlowSystem& sys, const Eigen::Vector3d& p, const ClassTolerances& tol = {});

struct CuspQuantN2 {
  bool tangency = false;  // mu undefined, W decides lips versus beaks
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  double W = 0.0;
  int stability = 0;      // sign of g_xxx
};
CuspQuantN2 cusp_quantities_n2(const FastSlowSystem& sys, const Eigen::Vector3d& p, const ClassTolerances& tol = {});

/// Local label for a point on the fold set with two slow variables: quadratic_fold,
/// {wormhole,tube,isola}_fold_tangency, {stable,unstable}_cusp,
/// {stable,unstable}_{lips,beaks}, swallowtail or higher_codimension.
std::string classify_local_n2(const FastSlowSystem& sys, const Eigen::Vector3d& p, const ClassTolerances& tol = {});

enum class TripleTag { covering, non_covering, degenerate };
const char* to_string(TripleTag t);

struct TripleFoldRecord {
  Eigen::Vector3d a = Eigen::Vector3d::Zero();  // unit, up to positive scale
  TripleTag tag = TripleTag::degenerate;
};
TripleFoldRecord triple_fold_coefficients(const Eigen::Vector2d& nu1, const Eigen::Vector2d& nu2,
                                          const Eigen::Vector2d& nu3, double tol = 1e-8);

/// Fold-fold projection tangency. For fold_umbra, U(p1) = p2.
struct FoldFoldEvent {
  Eigen::Vector2d nu1, nu2;
  double K1 = 0, K2 = 0;
  Interaction code = Interaction::non_interacting;
};

/// Fold p1 and cusp p2 on one fiber.
struct FoldCuspEvent {
  Eigen::Vector2d nu1, mu2;
  double g_xxx2 = 0;
  int sheets_between = 0;
};

enum class TriplePattern { fu_f_f_fu, fu_f_fu_fu, fu_f_fx_fx, fu_fu_fx_fx, fx_fx_fx_fx };

struct TripleEvent {
  Eigen::Vector2d nu1, nu2, nu3;
  TriplePattern pattern = TriplePattern::fx_fx_fx_fx;
};

std::string classify_projection_event_n2(const FoldFoldEvent& e, double tol = 1e-8);
std::string classify_projection_event_n2(const FoldCuspEvent& e, double tol = 1e-8);
std::string classify_projection_event_n2(const TripleEvent& e, double tol = 1e-8);

inline constexpr const char* kUnresolved = "unresolved-higher-codimension";

/// Build a fold-fold event from two fold points on a shared fiber.
std::optional<FoldFoldEvent> fold_fold_event(const FastSlowSystem& sys, const Eigen::Vector3d& p1,
                                             const Eigen::Vector3d& p2, const ClassTolerances& tol = {});

}  // namespace fastslow
