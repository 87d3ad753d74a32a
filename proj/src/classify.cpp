#include "fastslow/classify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace fastslow {

const char* to_string(LocalTagN1 t) {
  switch (t) {
    case LocalTagN1::regular: return "regular";
    case LocalTagN1::quadratic_fold: return "quadratic_fold";
    case LocalTagN1::hyperbolic_fold_tangency: return "hyperbolic_fold_tangency";
    case LocalTagN1::elliptic_fold_tangency: return "elliptic_fold_tangency";
    case LocalTagN1::stable_hysteresis: return "stable_hysteresis";
    case LocalTagN1::unstable_hysteresis: return "unstable_hysteresis";
    case LocalTagN1::higher_codimension: return "higher_codimension";
  }
  return "?";
}

const char* to_string(Interaction i) {
  switch (i) {
    case Interaction::fold_umbra: return "fold-umbra";
    case Interaction::umbra_umbra: return "umbra-umbra";
    case Interaction::non_interacting: return "non-interacting";
  }
  return "?";
}

const char* to_string(TripleTag t) {
  switch (t) {
    case TripleTag::covering: return "covering";
    case TripleTag::non_covering: return "non-covering";
    case TripleTag::degenerate: return "degenerate";
  }
  return "?";
}

namespace {

int sgn(double v) { return (v > 0) - (v < 0); }

double max_abs(std::initializer_list<double> v) {
  double m = 1.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void require_on_fold(const FastSlowSystem& sys, const Eigen::Vector3d& p, double tol, double scale) {
  if (std::abs(sys.g_at(p)) > tol * scale || std::abs(sys.gd_at(p, 1)) > tol * scale)
    throw NumericalError("point is not on the fold set");
}

Eigen::Vector3d lift(const Eigen::Vector2d& p) { return {p(0), p(1), 0.0}; }

// Slow-plane derivative data at a point (n = 2).
struct Jet2 {
  double gxx, gxxx;
  Eigen::Vector2d gy, gxy, gxxy;
  Eigen::Matrix2d Hy, Hxy;  // D^2_y g and D^2_y g_x
};

Jet2 jet2(const FastSlowSystem& s, const Eigen::Vector3d& p) {
  Jet2 j;
  j.gxx = s.gd_at(p, 2);
  j.gxxx = s.gd_at(p, 3);
  j.gy = {s.gd_at(p, 0, 1, 0), s.gd_at(p, 0, 0, 1)};
  j.gxy = {s.gd_at(p, 1, 1, 0), s.gd_at(p, 1, 0, 1)};
  j.gxxy = {s.gd_at(p, 2, 1, 0), s.gd_at(p, 2, 0, 1)};
  j.Hy << s.gd_at(p, 0, 2, 0), s.gd_at(p, 0, 1, 1), s.gd_at(p, 0, 1, 1), s.gd_at(p, 0, 0, 2);
  j.Hxy << s.gd_at(p, 1, 2, 0), s.gd_at(p, 1, 1, 1), s.gd_at(p, 1, 1, 1), s.gd_at(p, 1, 0, 2);
  return j;
}

Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {-v(1), v(0)}; }

int positive_eigenvalues(const FastSlowSystem& s, const Eigen::Vector3d& p, double sign, double zero, bool& singular) {
  Eigen::Matrix3d H;
  H << s.gd_at(p, 2), s.gd_at(p, 1, 1, 0), s.gd_at(p, 1, 0, 1),  //
      s.gd_at(p, 1, 1, 0), s.gd_at(p, 0, 2, 0), s.gd_at(p, 0, 1, 1),  //
      s.gd_at(p, 1, 0, 1), s.gd_at(p, 0, 1, 1), s.gd_at(p, 0, 0, 2);
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(sign * H).eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  singular = ev.cwiseAbs().minCoeff() < zero * scale;
  return static_cast<int>((ev.array() > 0).count());
}

// Regular roots strictly between two singular abscissae on one fiber.
int sheets_between(const FastSlowSystem& sys, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double y1 = 0.5 * (a(1) + b(1)), y2 = 0.5 * (a(2) + b(2));
  const double w = sys.domain().x.width();
  auto radius = [&](const Eigen::Vector3d& p) {
    const Eigen::Vector3d q(p(0), y1, y2);
    const double gxx = std::abs(sys.gd_at(q, 2));
    const double r = std::abs(sys.g_at(q));
    const double quad = gxx > 1e-12 ? 10.0 * std::sqrt(2.0 * r / gxx) : 0.0;
    const double gxxx = std::abs(sys.gd_at(q, 3));
    const double cub = gxxx > 1e-12 ? 10.0 * std::cbrt(6.0 * r / gxxx) : 0.0;
    return (gxx > 1e-8 ? quad : std::max(quad, cub)) + 1e-9 * w;
  };
  const double lo = std::min(a(0), b(0)), hi = std::max(a(0), b(0));
  const double ra = radius(a), rb = radius(b);
  int k = 0;
  for (const auto& r : fiber_roots(sys, y1, y2)) {
    if (r.x <= lo || r.x >= hi) continue;
    if (std::abs(r.x - a(0)) <= ra || std::abs(r.x - b(0)) <= rb) continue;
    if (r.stability == Stability::nonhyperbolic) continue;
    ++k;
  }
  return k;
}

}  // namespace

LocalClassN1 classify_local_n1(const FastSlowSystem& sys, const Eigen::Vector2d& p2, const ClassTolerances& tol) {
  const Eigen::Vector3d p = lift(p2);
  LocalClassN1 c;
  c.g_y = sys.gd_at(p, 0, 1);
  c.g_xx = sys.gd_at(p, 2);
  c.g_xxx = sys.gd_at(p, 3);
  const double g_yy = sys.gd_at(p, 0, 2), g_xy = sys.gd_at(p, 1, 1);
  c.det_hessian = c.g_xx * g_yy - g_xy * g_xy;
  const double scale = max_abs({c.g_y, c.g_xx, c.g_xxx, g_yy, g_xy});
  require_on_fold(sys, p, tol.on_fold, scale);
  const double z = tol.zero * scale;

  const bool small_gy = std::abs(c.g_y) < z;
  const bool small_gxx = std::abs(c.g_xx) < z;
  if (small_gy) {
    const double zd = tol.zero * std::max(1.0, std::abs(c.g_xx * g_yy) + g_xy * g_xy);
    if (c.det_hessian < -zd) c.tag = LocalTagN1::hyperbolic_fold_tangency;
    else if (c.det_hessian > zd) c.tag = LocalTagN1::elliptic_fold_tangency;
    else c.tag = LocalTagN1::higher_codimension;
  } else if (!small_gxx) {
    c.tag = LocalTagN1::quadratic_fold;
  } else if (c.g_xxx > z) {
    c.tag = LocalTagN1::stable_hysteresis;
  } else if (c.g_xxx < -z) {
    c.tag = LocalTagN1::unstable_hysteresis;
  } else {
    c.tag = LocalTagN1::higher_codimension;
  }
  return c;
}

PairInteraction pair_interaction(const FastSlowSystem& sys, const FoldPoint& a, const FoldPoint& b) {
  PairInteraction out;
  out.sheets_between = sheets_between(sys, a.p, b.p);
  auto direction = [&](const FoldPoint& f) {
    if (!f.degenerate) return sgn(f.g_xx);
    const auto u = umbral_map(sys, f);
    return u.direction;
  };
  const int da = direction(a), db = direction(b);
  const int towards_b = sgn(b.p(0) - a.p(0));  // from a to b
  const bool a_to_b = da != 0 && da == towards_b;
  const bool b_to_a = db != 0 && db == -towards_b;
  if (out.sheets_between == 0) {
    if (a_to_b) {
      out.code = Interaction::fold_umbra;
    } else if (b_to_a) {
      out.code = Interaction::fold_umbra;
      out.swapped = true;
    }
  } else if (out.sheets_between == 1 && a_to_b && b_to_a) {
    out.code = Interaction::umbra_umbra;
  }
  return out;
}

std::vector<DoubleLimitRecord> detect_double_limits(const FastSlowSystem& sys, const std::vector<FoldPoint>& folds,
                                                    double tol_y) {
  static const char* kLabels[6] = {"aligned umbra-fold double limit",      "opposed umbra-fold double limit",
                                   "aligned umbra-umbra double limit",     "opposed umbra-umbra double limit",
                                   "aligned non-interacting double limit", "opposed non-interacting double limit"};
  std::vector<DoubleLimitRecord> out;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    for (std::size_t j = i + 1; j < folds.size(); ++j) {
      if (std::abs(folds[i].p(1) - folds[j].p(1)) >= tol_y) continue;
      const auto pi = pair_interaction(sys, folds[i], folds[j]);
      DoubleLimitRecord r;
      r.first = static_cast<int>(pi.swapped ? j : i);
      r.second = static_cast<int>(pi.swapped ? i : j);
      r.p1 = folds[static_cast<std::size_t>(r.first)].p;
      r.p2 = folds[static_cast<std::size_t>(r.second)].p;
      r.alignment = sgn(folds[i].nu(0) * folds[j].nu(0));
      r.interaction = pi.code;
      const int base = pi.code == Interaction::fold_umbra ? 1 : pi.code == Interaction::umbra_umbra ? 3 : 5;
      if (r.alignment == 0) {
        r.label = kUnresolved;
      } else {
        r.subcase = base + (r.alignment < 0 ? 1 : 0);
        r.label = kLabels[r.subcase - 1];
      }
      out.push_back(r);
    }
  }
  return out;
}

FoldQuantN2 fold_quantities_n2(const FastSlowSystem& sys, const Eigen::Vector3d& p, const ClassTolerances& tol) {
  const Jet2 j = jet2(sys, p);
  const double scale = max_abs({j.gxx, j.gy.norm(), j.gxy.norm(), j.Hy.norm()});
  const double z = tol.zero * scale;
  FoldQuantN2 q;
  const double n = j.gy.norm();
  if (n < z) {
    if (std::abs(j.gxx) < z) throw NumericalError("fold quantities undefined: grad_y g and g_xx both vanish");
    q.tangency = true;
    bool singular = false;
    q.sigma_plus = positive_eigenvalues(sys, p, sgn(j.gxx), tol.zero, singular);
    if (singular) q.sigma_plus = -1;
    return q;
  }
  if (std::abs(j.gxx) < z) throw NumericalError("fold quantities undefined at a degenerate fold");
  const Eigen::Vector2d u = perp(j.gy) / n;
  const double bend = u.dot(j.Hy * u) / (2.0 * n);
  const double twist = std::pow(j.gxy.dot(u), 2) / (8.0 * n);
  q.nu = j.gxx * j.gy;
  q.K = sgn(j.gxx) * bend - twist / std::abs(j.gxx);
  q.kappa = (bend - twist / j.gxx) * (j.gy / n);
  return q;
}

CuspQuantN2 cusp_quantities_n2(const FastSlowSystem& sys, const Eigen::Vector3d& p, const ClassTolerances& tol) {
  const Jet2 j = jet2(sys, p);
  const double scale = max_abs({j.gxxx, j.gy.norm(), j.gxy.norm(), j.gxxy.norm(), j.Hxy.norm()});
  const double z = tol.zero * scale;
  const double n = j.gy.norm();
  if (n < z) throw NumericalError("cusp quantities undefined: grad_y g vanishes");
  const Eigen::Vector2d gp = perp(j.gy);
  const Eigen::Vector2d u = gp / n;
  CuspQuantN2 c;
  c.stability = sgn(j.gxxx);
  // The linear term uses the clockwise perpendicular -u. On
  // d1 x^3 + d2 x y1^2 + d3 x^2 y1 + y2 this gives W = 6 d1 d2 - 2 d3.
  c.W = 0.5 * j.gxxx * u.dot(j.Hxy * u) + j.gxxy.dot(u);
  const double denom = j.gxy.dot(u);
  if (std::abs(denom) < z) {
    if (std::abs(j.gxxx) < z) throw NumericalError("cusp quantities undefined: g_xxx and the cusp denominator vanish");
    c.tangency = true;
    return c;
  }
  c.mu = j.gxxx / denom * gp;
  return c;
}

std::string classify_local_n2(const FastSlowSystem& sys, const Eigen::Vector3d& p, const ClassTolerances& tol) {
  const Jet2 j = jet2(sys, p);
  const double scale = max_abs({j.gxx, j.gxxx, j.gy.norm(), j.gxy.norm()});
  require_on_fold(sys, p, tol.on_fold, scale);
  const double z = tol.zero * scale;
  const double n = j.gy.norm();
  if (std::abs(j.gxx) >= z) {
    if (n >= z) return "quadratic_fold";
    bool singular = false;
    const int sp = positive_eigenvalues(sys, p, sgn(j.gxx), tol.zero, singular);
    if (singular) return "higher_codimension";
    return sp == 1 ? "wormhole_fold_tangency" : sp == 2 ? "tube_fold_tangency" : "isola_fold_tangency";
  }
  if (n < z) return "higher_codimension";
  if (std::abs(j.gxxx) < z) return "swallowtail";
  const std::string stab = j.gxxx < 0 ? "stable" : "unstable";
  const CuspQuantN2 c = cusp_quantities_n2(sys, p, tol);
  if (!c.tangency) return stab + "_cusp";
  if (std::abs(c.W) < tol.zero * std::max(1.0, j.gxxx * j.Hxy.norm() + j.gxxy.norm())) return "higher_codimension";
  return stab + (c.W > 0 ? "_lips" : "_beaks");
}

TripleFoldRecord triple_fold_coefficients(const Eigen::Vector2d& nu1, const Eigen::Vector2d& nu2,
                                          const Eigen::Vector2d& nu3, double tol) {
  const Eigen::Vector2d nu[3] = {nu1, nu2, nu3};
  for (const auto& v : nu)
    if (v.norm() == 0.0) throw std::invalid_argument("triple fold coefficients need nonzero direction vectors");
  auto cross = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a(0) * b(1) - a(1) * b(0); };
  // Pivot on the coefficient whose complementary pair is best conditioned.
  int pivot = 2;
  double best = -1.0;
  for (int k = 0; k < 3; ++k) {
    const auto& a = nu[(k + 1) % 3];
    const auto& b = nu[(k + 2) % 3];
    const double d = std::abs(cross(a, b)) / (a.norm() * b.norm());
    if (d > best) best = d, pivot = k;
  }
  TripleFoldRecord r;
  if (best < tol) return r;
  const int i1 = (pivot + 1) % 3, i2 = (pivot + 2) % 3;
  Eigen::Matrix2d M;
  M.col(0) = nu[i1];
  M.col(1) = nu[i2];
  const Eigen::Vector2d s = M.partialPivLu().solve(-nu[pivot]);
  r.a(pivot) = 1.0;
  r.a(i1) = s(0);
  r.a(i2) = s(1);
  r.a.normalize();
  const int positives = static_cast<int>((r.a.array() > 0).count());
  if (r.a.cwiseAbs().minCoeff() < tol) r.tag = TripleTag::degenerate;
  else r.tag = (positives == 3 || positives == 0) ? TripleTag::covering : TripleTag::non_covering;
  if (positives == 0) r.a = -r.a;
  return r;
}

std::string classify_projection_event_n2(const FoldFoldEvent& e, double tol) {
  const double n1 = e.nu1.norm(), n2 = e.nu2.norm();
  if (n1 == 0.0 || n2 == 0.0) return kUnresolved;
  const double c = e.nu1.dot(e.nu2) / (n1 * n2);
  if (std::abs(c) < tol) return kUnresolved;
  const double ks = std::max(1.0, std::abs(e.K1) + std::abs(e.K2));
  if (c > 0) {
    switch (e.code) {
      case Interaction::fold_umbra:
        if (std::abs(e.K1 - e.K2) < tol * ks) return kUnresolved;
        return e.K1 > e.K2 ? "aligned umbra-dominant fu×f tangency" : "aligned fold-dominant fu×f tangency";
      case Interaction::umbra_umbra: return "aligned fu×fu tangency";
      case Interaction::non_interacting: return "aligned fx×fx tangency";
    }
  }
  if (std::abs(e.K1 + e.K2) < tol * ks) return kUnresolved;
  const std::string cover = e.K1 + e.K2 > 0 ? "opposed covering " : "opposed non-covering ";
  switch (e.code) {
    case Interaction::fold_umbra: return cover + "fu×f tangency";
    case Interaction::umbra_umbra: return cover + "fu×fu tangency";
    case Interaction::non_interacting: break;
  }
  return cover + "fx×fx tangency";
}

std::string classify_projection_event_n2(const FoldCuspEvent& e, double tol) {
  const double n1 = e.nu1.norm(), n2 = e.mu2.norm();
  if (n1 == 0.0 || n2 == 0.0) return kUnresolved;
  const double c = e.nu1.dot(e.mu2) / (n1 * n2);
  if (std::abs(c) < tol || std::abs(e.g_xxx2) < tol) return kUnresolved;
  const std::string side = c > 0 ? "aligned " : "opposed ";
  const bool stable = e.g_xxx2 < 0;
  const int k = e.sheets_between;
  if (stable) return side + (k == 0 ? "fu×sc intersection" : "fx×scx intersection");
  if (k == 0) return side + "f×ucu intersection";
  if (k == 1) return side + "fu×ucu intersection";
  return side + "fx×ucx intersection";
}

std::string classify_projection_event_n2(const TripleEvent& e, double tol) {
  const auto r = triple_fold_coefficients(e.nu1, e.nu2, e.nu3, tol);
  if (r.tag == TripleTag::degenerate) return kUnresolved;
  static const char* kPattern[5] = {"fu×f f×fu", "fu×f fu×fu", "fu×f fx×fx", "fu×fu fx×fx", "fx×fx fx×fx"};
  const std::string cover = r.tag == TripleTag::covering ? "covering " : "non-covering ";
  return cover + kPattern[static_cast<int>(e.pattern)] + " intersection";
}

std::optional<FoldFoldEvent> fold_fold_event(const FastSlowSystem& sys, const Eigen::Vector3d& p1,
                                             const Eigen::Vector3d& p2, const ClassTolerances& tol) {
  const auto q1 = fold_quantities_n2(sys, p1, tol);
  const auto q2 = fold_quantities_n2(sys, p2, tol);
  if (q1.tangency || q2.tangency) return std::nullopt;
  const double s = std::abs(q1.nu(0) * q2.nu(1) - q1.nu(1) * q2.nu(0)) / (q1.nu.norm() * q2.nu.norm());
  if (s > std::sin(tol.parallel_rad)) return std::nullopt;
  const auto pi = pair_interaction(sys, fold_at(sys, p1), fold_at(sys, p2));
  FoldFoldEvent e;
  e.code = pi.code;
  e.nu1 = pi.swapped ? q2.nu : q1.nu;
  e.nu2 = pi.swapped ? q1.nu : q2.nu;
  e.K1 = pi.swapped ? q2.K : q1.K;
  e.K2 = pi.swapped ? q1.K : q2.K;
  return e;
}

}  // namespace fastslow
