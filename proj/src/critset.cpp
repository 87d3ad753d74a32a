#include "fastslow/critset.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "fastslow/format.hpp"
#include "fastslow/roots.hpp"

namespace fastslow {

const char* to_string(Stability s) {
  switch (s) {
    case Stability::attracting: return "attracting";
    case Stability::repelling: return "repelling";
    default: return "nonhyperbolic";
  }
}

const char* to_string(EndKind e) {
  switch (e) {
    case EndKind::fold: return "fold";
    case EndKind::boundary: return "domain-boundary";
    case EndKind::closed_loop: return "closed-loop";
    default: return "stall";
  }
}

namespace {

Stability stability_of(double gx, double tol) {
  if (gx < -tol) return Stability::attracting;
  if (gx > tol) return Stability::repelling;
  return Stability::nonhyperbolic;
}

Eigen::Vector3d lift(const Eigen::Vector2d& u) { return {u(0), u(1), 0.0}; }

// Pseudo-arclength continuation of N equations in N + 1 unknowns.
template <int N>
struct Curve {
  using Vec = Eigen::Matrix<double, N + 1, 1>;
  using Res = Eigen::Matrix<double, N, 1>;
  using Jac = Eigen::Matrix<double, N, N + 1>;
  std::function<Res(const Vec&)> F;
  std::function<Jac(const Vec&)> J;
  Vec lo, hi;
  double diag;

  static Vec tangent(const Jac& j) {
    Vec t;
    if constexpr (N == 1) {
      t << -j(0, 1), j(0, 0);
    } else {
      const Eigen::Vector3d a = j.row(0).transpose(), b = j.row(1).transpose();
      t = a.cross(b);
    }
    const double n = t.norm();
    return n > 0 ? Vec(t / n) : Vec(Vec::Zero());
  }

  bool inside(const Vec& v) const {
    for (int i = 0; i <= N; ++i)
      if (v(i) < lo(i) || v(i) > hi(i)) return false;
    return true;
  }

  bool converged(const Res& r, double step) const {
    const double rn = r.cwiseAbs().maxCoeff();
    return rn <= 1e-10 || (step <= 1e-14 * diag && rn <= 1e-8);
  }

  // Newton with one coordinate frozen.
  Vec solve_fixed(Vec v, int k) const {
    for (int it = 0; it < 30; ++it) {
      const Res r = F(v);
      const Jac jv = J(v);
      Eigen::Matrix<double, N, N> A;
      int c = 0;
      for (int i = 0; i <= N; ++i)
        if (i != k) A.col(c++) = jv.col(i);
      const Eigen::Matrix<double, N, 1> d = A.fullPivLu().solve(r);
      if (!d.allFinite()) break;
      c = 0;
      for (int i = 0; i <= N; ++i)
        if (i != k) v(i) -= d(c++);
      if (converged(F(v), d.norm())) break;
    }
    return v;
  }

  Vec clip(const Vec& u, const Vec& v) const {
    double s = 1.0;
    int k = 0;
    double bound = 0.0;
    for (int i = 0; i <= N; ++i) {
      const double b = v(i) < lo(i) ? lo(i) : (v(i) > hi(i) ? hi(i) : v(i));
      if (b != v(i) && v(i) != u(i)) {
        const double si = (b - u(i)) / (v(i) - u(i));
        if (si < s) {
          s = si;
          k = i;
          bound = b;
        }
      }
    }
    Vec w = u + s * (v - u);
    w(k) = bound;
    w = solve_fixed(w, k);
    w(k) = bound;
    return w.cwiseMax(lo).cwiseMin(hi);
  }

  struct Out {
    std::vector<Vec> pts;
    EndKind start = EndKind::stall, end = EndKind::stall;
  };

  Out trace(const Vec& u0, Vec t, const ContinuationOptions& opt, bool detect_loop) const {
    Out out;
    out.pts.push_back(u0);
    Vec u = u0;
    double h = opt.h_init * diag, arclen = 0.0;
    auto orient = [this](const Vec& p, const Vec& dir) {
      Eigen::Matrix<double, N + 1, N + 1> A;
      A.template topRows<N>() = J(p);
      A.row(N) = dir.transpose();
      return A.determinant();
    };
    const int sense = orient(u0, t) >= 0 ? 1 : -1;
    for (int step = 0; step < opt.max_steps; ++step) {
      if (h < opt.h_min * diag) return out;
      const Vec pred = u + h * t;
      Vec v = pred;
      bool ok = false;
      int its = 0;
      for (; its < 8; ++its) {
        const Res r = F(v);
        const Jac jv = J(v);
        Eigen::Matrix<double, N + 1, N + 1> A;
        A.template topRows<N>() = jv;
        A.row(N) = t.transpose();
        Vec rhs;
        rhs.template head<N>() = r;
        rhs(N) = t.dot(v - pred);
        Vec d = A.fullPivLu().solve(rhs);
        if (!d.allFinite()) break;
        if (d.norm() > h) d *= h / d.norm();
        v -= d;
        if (converged(F(v), d.norm()) && d.norm() <= 1e-9 * diag) {
          ok = true;
          break;
        }
      }
      if (!ok || its > 6 || (v - pred).norm() > 0.1 * h) {
        h *= 0.5;
        continue;
      }
      Vec tn = tangent(J(v));
      if (tn.dot(t) < 0) tn = -tn;
      const double ang = std::acos(std::clamp(tn.dot(t), -1.0, 1.0));
      if (ang > 0.1 || tn.isZero()) {
        h *= 0.5;
        continue;
      }
      // a flip of det[J; t] means the corrector crossed onto a neighbouring branch
      if ((orient(v, tn) >= 0 ? 1 : -1) != sense) {
        h *= 0.5;
        continue;
      }
      if (!inside(v)) {
        out.pts.push_back(clip(u, v));
        out.end = EndKind::boundary;
        return out;
      }
      const double seg = (v - u).norm();
      if (detect_loop && arclen > 3 * seg) {
        const Vec d = v - u;
        const double s = std::clamp((u0 - u).dot(d) / d.squaredNorm(), 0.0, 1.0);
        if ((u + s * d - u0).norm() < 0.5 * seg && (u0 - u).dot(t) > 0) {
          out.pts.push_back(u0);
          out.end = EndKind::closed_loop;
          return out;
        }
      }
      out.pts.push_back(v);
      arclen += seg;
      u = v;
      t = tn;
      if (its <= 3 && ang < 0.03) h = std::min(1.5 * h, opt.h_max * diag);
    }
    return out;
  }

  // Both directions from a seed; the result runs from the backward end to the forward end.
  Out trace_both(const Vec& u0, const ContinuationOptions& opt) const {
    const Vec t0 = tangent(J(u0));
    Out fwd = trace(u0, t0, opt, true);
    if (fwd.end == EndKind::closed_loop) {
      fwd.start = EndKind::closed_loop;
      return fwd;
    }
    Out bwd = trace(u0, -t0, opt, false);
    Out all;
    all.pts.assign(bwd.pts.rbegin(), bwd.pts.rend());
    all.pts.insert(all.pts.end(), fwd.pts.begin() + 1, fwd.pts.end());
    all.start = bwd.end;
    all.end = fwd.end;
    return all;
  }
};

Curve<1> branch_problem(const FastSlowSystem& sys) {
  Curve<1> c;
  c.F = [&sys](const Eigen::Vector2d& u) {
    return Eigen::Matrix<double, 1, 1>(sys.g_at(lift(u)));
  };
  c.J = [&sys](const Eigen::Vector2d& u) {
    const Eigen::Vector3d p = lift(u);
    Eigen::Matrix<double, 1, 2> j;
    j << sys.gd_at(p, 1), sys.gd_at(p, 0, 1);
    return j;
  };
  const auto& b = sys.domain();
  c.lo << b.x.lo, b.y[0].lo;
  c.hi << b.x.hi, b.y[0].hi;
  c.diag = b.diag();
  return c;
}

Curve<2> fold_curve_problem(const FastSlowSystem& sys) {
  Curve<2> c;
  c.F = [&sys](const Eigen::Vector3d& p) {
    return Eigen::Vector2d(sys.g_at(p), sys.gd_at(p, 1));
  };
  c.J = [&sys](const Eigen::Vector3d& p) {
    Eigen::Matrix<double, 2, 3> j;
    j << sys.gd_at(p, 1), sys.gd_at(p, 0, 1), sys.gd_at(p, 0, 0, 1), sys.gd_at(p, 2), sys.gd_at(p, 1, 1),
        sys.gd_at(p, 1, 0, 1);
    return j;
  };
  const auto& b = sys.domain();
  c.lo << b.x.lo, b.y[0].lo, b.y[1].lo;
  c.hi << b.x.hi, b.y[0].hi, b.y[1].hi;
  c.diag = b.diag();
  return c;
}

std::optional<double> solve_y_on_vertical(const FastSlowSystem& sys, double x, double y0) {
  double y = y0;
  for (int it = 0; it < 60; ++it) {
    const Eigen::Vector3d p(x, y, 0.0);
    const double g = sys.g_at(p), gy = sys.gd_at(p, 0, 1);
    if (gy == 0.0) return std::nullopt;
    const double d = g / gy;
    y -= d;
    if (std::abs(d) <= 1e-15 * std::max(1.0, std::abs(y))) return y;
  }
  return std::abs(sys.g_at({x, y, 0.0})) < 1e-9 ? std::optional<double>(y) : std::nullopt;
}

FoldPoint make_fold(const FastSlowSystem& sys, const Eigen::Vector2d& u, const CritTolerances& tol) {
  FoldPoint f;
  f.p = lift(u);
  f.g_xx = sys.gd_at(f.p, 2);
  const double gy = sys.gd_at(f.p, 0, 1);
  f.nu = Eigen::Vector2d(f.g_xx * gy, 0.0);
  f.residual = std::max(std::abs(sys.g_at(f.p)), std::abs(sys.gd_at(f.p, 1)));
  const double scale = std::max({1.0, std::abs(gy), std::abs(sys.gd_at(f.p, 3))});
  f.degenerate = std::abs(f.g_xx) < tol.detect * scale;
  return f;
}

std::optional<Eigen::Vector2d> newton_fold(const FastSlowSystem& sys, Eigen::Vector2d u, const CritTolerances& tol) {
  const double diag = sys.domain().diag();
  for (int it = 0; it < 40; ++it) {
    const Eigen::Vector3d p = lift(u);
    const Eigen::Vector2d r(sys.g_at(p), sys.gd_at(p, 1));
    Eigen::Matrix2d J;
    J << sys.gd_at(p, 1), sys.gd_at(p, 0, 1), sys.gd_at(p, 2), sys.gd_at(p, 1, 1);
    const double jn = J.cwiseAbs().maxCoeff();
    if (!(std::abs(J.determinant()) > 1e-12 * jn * jn)) return std::nullopt;
    Eigen::Vector2d d = J.partialPivLu().solve(r);
    if (d.norm() > 0.1 * diag) d *= 0.1 * diag / d.norm();
    u -= d;
    const Eigen::Vector3d q = lift(u);
    const double rg = std::abs(sys.g_at(q)), rx = std::abs(sys.gd_at(q, 1));
    if ((rg <= tol.tol_g && rx <= tol.tol_fx && d.norm() <= 1e-12 * diag) || (d.norm() <= 1e-15 * diag && rg <= 1e-8 && rx <= 1e-8))
      return u;
  }
  return std::nullopt;
}

// Fold between two branch points whose g_x values have opposite signs.
FoldPoint fold_between(const FastSlowSystem& sys, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                       const CritTolerances& tol) {
  const Eigen::Vector2d mid = 0.5 * (a + b);
  if (auto u = newton_fold(sys, mid, tol); u && (*u - mid).norm() <= (b - a).norm() + 1e-12) return make_fold(sys, *u, tol);

  // Bisection of g_x along the branch, parameterized by x near the fold.
  double xa = a(0), xb = b(0);
  double ya = a(1), yb = b(1);
  auto gx_on_branch = [&](double x, double yguess, double& yout) {
    auto y = solve_y_on_vertical(sys, x, yguess);
    yout = y ? *y : yguess;
    return sys.gd_at({x, yout, 0.0}, 1);
  };
  double fa = sys.gd_at(lift(a), 1);
  double ym = 0.5 * (ya + yb), xm = 0.5 * (xa + xb);
  for (int it = 0; it < 200 && std::abs(xb - xa) > 1e-15 * std::max(1.0, std::abs(xm)); ++it) {
    xm = 0.5 * (xa + xb);
    const double yguess = ya + (yb - ya) * ((xm - xa) / (xb - xa));
    const double fm = gx_on_branch(xm, yguess, ym);
    if (fm == 0.0) break;
    if ((fm < 0) == (fa < 0)) {
      xa = xm;
      ya = ym;
      fa = fm;
    } else {
      xb = xm;
      yb = ym;
    }
  }
  return make_fold(sys, {xm, ym}, tol);
}

struct MarkedPoint {
  Eigen::Vector2d u;
  int fold = -1;
};

int add_fold(std::vector<FoldPoint>& folds, const FoldPoint& f, double diag) {
  for (std::size_t i = 0; i < folds.size(); ++i)
    if ((folds[i].p - f.p).norm() <= 1e-8 * diag) return static_cast<int>(i);
  folds.push_back(f);
  return static_cast<int>(folds.size()) - 1;
}

Stability piece_stability(const FastSlowSystem& sys, const std::vector<Eigen::Vector2d>& pts, double tol) {
  double best = 0.0;
  if (pts.size() > 2) {
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      const double gx = sys.gd_at(lift(pts[i]), 1);
      if (std::abs(gx) > std::abs(best)) best = gx;
    }
  } else {
    const Eigen::Vector2d m = 0.5 * (pts.front() + pts.back());
    const auto x = solve_on_fiber(sys, m(0), m(1));
    best = sys.gd_at({x ? *x : m(0), m(1), 0.0}, 1);
  }
  return stability_of(best, tol);
}

}  // namespace

std::vector<FiberRoot> fiber_roots(const FastSlowSystem& sys, double y1, double y2, const CritTolerances& tol) {
  const auto& box = sys.domain();
  const auto coeffs = x_coefficients(sys.g(), y1, y2);
  std::vector<FiberRoot> out;
  for (const auto& r : real_roots(coeffs, box.x.lo, box.x.hi)) {
    const Eigen::Vector3d p(r.x, y1, y2);
    const double gx = sys.gd_at(p, 1);
    FiberRoot fr{r.x, r.multiple ? Stability::nonhyperbolic : stability_of(gx, tol.tol_fx), std::abs(sys.g_at(p)), gx};
    out.push_back(fr);
  }
  return out;
}

std::optional<double> solve_on_fiber(const FastSlowSystem& sys, double x0, double y1, double y2) {
  const double w = sys.domain().x.width();
  double x = x0;
  for (int it = 0; it < 60; ++it) {
    const Eigen::Vector3d p(x, y1, y2);
    const double g = sys.g_at(p), gx = sys.gd_at(p, 1);
    if (gx == 0.0) return std::nullopt;
    double d = g / gx;
    if (std::abs(d) > 0.1 * w) d = std::copysign(0.1 * w, d);
    x -= d;
    if (std::abs(d) <= 1e-15 * std::max(1.0, std::abs(x))) return x;
  }
  const double g = sys.g_at({x, y1, y2});
  return std::abs(g) < 1e-10 ? std::optional<double>(x) : std::nullopt;
}

std::optional<FoldPoint> polish_fold_n1(const FastSlowSystem& sys, Eigen::Vector2d guess, const CritTolerances& tol) {
  if (auto u = newton_fold(sys, guess, tol)) return make_fold(sys, *u, tol);
  return std::nullopt;
}

CriticalSetN1 trace_branches(const FastSlowSystem& sys, const ContinuationOptions& opt) {
  if (sys.n_slow() != 1) throw ConfigError("trace_branches needs one slow variable");
  const auto& box = sys.domain();
  const double diag = box.diag();
  const Curve<1> curve = branch_problem(sys);

  struct Seed {
    Eigen::Vector2d u;
    bool covered = false;
  };
  std::vector<Seed> seeds;
  for (int k = 0; k < opt.seed_fibers; ++k) {
    const double y = box.y[0].lo + (k + 0.5) / opt.seed_fibers * box.y[0].width();
    for (const auto& r : fiber_roots(sys, y, 0.0, opt.tol))
      if (r.stability != Stability::nonhyperbolic) seeds.push_back({{r.x, y}});
  }

  CriticalSetN1 cs;
  std::vector<std::vector<MarkedPoint>> polylines;
  std::vector<std::pair<EndKind, EndKind>> ends;
  std::vector<bool> closed;

  for (auto& seed : seeds) {
    if (seed.covered) continue;
    auto out = curve.trace_both(seed.u, opt);
    const EndKind start_kind = out.start;
    if (out.end == EndKind::stall || start_kind == EndKind::stall) cs.complete = false;

    for (auto& other : seeds) {
      if (other.covered) continue;
      const double ys = other.u(1);
      for (std::size_t i = 0; i + 1 < out.pts.size(); ++i) {
        const auto& a = out.pts[i];
        const auto& b = out.pts[i + 1];
        if ((a(1) - ys) * (b(1) - ys) > 0) continue;
        const double s = a(1) == b(1) ? 0.5 : (ys - a(1)) / (b(1) - a(1));
        const auto x = solve_on_fiber(sys, a(0) + s * (b(0) - a(0)), ys);
        if (x && std::abs(*x - other.u(0)) <= 1e-7 * diag) {
          other.covered = true;
          break;
        }
      }
    }
    seed.covered = true;

    std::vector<MarkedPoint> line;
    for (std::size_t i = 0; i < out.pts.size(); ++i) {
      if (i > 0) {
        const double ga = sys.gd_at(lift(out.pts[i - 1]), 1), gb = sys.gd_at(lift(out.pts[i]), 1);
        if ((ga < 0 && gb > 0) || (ga > 0 && gb < 0)) {
          const FoldPoint f = fold_between(sys, out.pts[i - 1], out.pts[i], opt.tol);
          line.push_back({f.p.head<2>(), add_fold(cs.folds, f, diag)});
        }
      }
      line.push_back({out.pts[i], -1});
    }
    polylines.push_back(std::move(line));
    ends.emplace_back(start_kind, out.end);
    closed.push_back(out.end == EndKind::closed_loop);
  }

  for (std::size_t c = 0; c < polylines.size(); ++c) {
    auto line = polylines[c];
    std::vector<std::size_t> marks;
    for (std::size_t i = 0; i < line.size(); ++i)
      if (line[i].fold >= 0) marks.push_back(i);

    if (closed[c] && !marks.empty()) {
      // Rotate so the loop starts and ends at its first fold.
      std::vector<MarkedPoint> rot(line.begin() + static_cast<long>(marks[0]), line.end() - 1);
      rot.insert(rot.end(), line.begin(), line.begin() + static_cast<long>(marks[0]) + 1);
      line = std::move(rot);
      marks.clear();
      for (std::size_t i = 0; i < line.size(); ++i)
        if (line[i].fold >= 0) marks.push_back(i);
    }

    std::vector<std::size_t> cuts;
    cuts.push_back(0);
    for (auto m : marks)
      if (m != 0 && m != line.size() - 1) cuts.push_back(m);
    cuts.push_back(line.size() - 1);

    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      Branch br;
      for (std::size_t i = cuts[k]; i <= cuts[k + 1]; ++i) br.pts.push_back(line[i].u);
      const auto& first = line[cuts[k]];
      const auto& last = line[cuts[k + 1]];
      br.start_fold = first.fold;
      br.end_fold = last.fold;
      br.start = first.fold >= 0 ? EndKind::fold : (k == 0 ? ends[c].first : EndKind::boundary);
      br.end = last.fold >= 0 ? EndKind::fold : (k + 2 == cuts.size() ? ends[c].second : EndKind::boundary);
      if (closed[c] && marks.empty()) br.start = br.end = EndKind::closed_loop;
      br.stability = piece_stability(sys, br.pts, opt.tol.tol_fx);
      for (const auto& u : br.pts) br.stab.push_back(stability_of(sys.gd_at(lift(u), 1), opt.tol.tol_fx));
      if (br.start == EndKind::fold) br.stab.front() = Stability::nonhyperbolic;
      if (br.end == EndKind::fold) br.stab.back() = Stability::nonhyperbolic;
      if (br.start != EndKind::closed_loop && br.pts.front()(1) > br.pts.back()(1)) {
        std::reverse(br.pts.begin(), br.pts.end());
        std::reverse(br.stab.begin(), br.stab.end());
        std::swap(br.start, br.end);
        std::swap(br.start_fold, br.end_fold);
      }
      cs.branches.push_back(std::move(br));
    }
  }

  // Canonical order: folds by (y, x), branches by first point (y, x).
  std::vector<int> order(cs.folds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  auto lex = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return a(1) != b(1) ? a(1) < b(1) : a(0) < b(0);
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return lex(cs.folds[a].p, cs.folds[b].p); });
  std::vector<int> remap(order.size());
  std::vector<FoldPoint> sorted;
  for (std::size_t i = 0; i < order.size(); ++i) {
    remap[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    sorted.push_back(cs.folds[static_cast<std::size_t>(order[i])]);
  }
  cs.folds = std::move(sorted);
  for (auto& br : cs.branches) {
    if (br.start_fold >= 0) br.start_fold = remap[static_cast<std::size_t>(br.start_fold)];
    if (br.end_fold >= 0) br.end_fold = remap[static_cast<std::size_t>(br.end_fold)];
  }
  std::sort(cs.branches.begin(), cs.branches.end(), [&](const Branch& a, const Branch& b) {
    return lex(lift(a.pts.front()), lift(b.pts.front()));
  });
  return cs;
}

namespace {

// Newton / Gauss-Newton on k of the equations (g, g_x, g_xx, g_xxx) in (x, y1, y2).
std::optional<Eigen::Vector3d> polish_stack(const FastSlowSystem& sys, Eigen::Vector3d p, int k, double diag) {
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd r(k);
    Eigen::MatrixXd J(k, 3);
    for (int i = 0; i < k; ++i) {
      r(i) = sys.gd_at(p, i);
      J.row(i) << sys.gd_at(p, i + 1), sys.gd_at(p, i, 1), sys.gd_at(p, i, 0, 1);
    }
    Eigen::Vector3d d = J.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(r);
    if (!d.allFinite()) return std::nullopt;
    if (d.norm() > 0.05 * diag) d *= 0.05 * diag / d.norm();
    p -= d;
    if (d.norm() <= 1e-14 * diag) break;
  }
  double res = 0.0;
  for (int i = 0; i < k; ++i) res = std::max(res, std::abs(sys.gd_at(p, i)));
  if (res > 1e-9) return std::nullopt;
  return p;
}

}  // namespace

FoldCurve continue_fold_curve(const FastSlowSystem& sys, const Eigen::Vector3d& seed, const ContinuationOptions& opt) {
  if (sys.n_slow() != 2) throw ConfigError("fold curves need two slow variables");
  const double diag = sys.domain().diag();
  const Curve<2> curve = fold_curve_problem(sys);
  const auto start = polish_stack(sys, seed, 2, diag);
  if (!start || !sys.domain().contains(*start, 1e-12 * diag)) throw NumericalError("fold-curve seed failed to converge");

  auto out = curve.trace_both(*start, opt);
  FoldCurve fc;
  fc.pts = out.pts;
  fc.closed = out.end == EndKind::closed_loop;
  fc.end = out.end;
  fc.start = out.start;
  for (std::size_t i = 0; i < fc.pts.size(); ++i) {
    Eigen::Vector3d t = Curve<2>::tangent(curve.J(fc.pts[i]));
    const Eigen::Vector3d chord = i + 1 < fc.pts.size() ? Eigen::Vector3d(fc.pts[i + 1] - fc.pts[i])
                                                        : Eigen::Vector3d(fc.pts[i] - fc.pts[i - 1]);
    if (t.dot(chord) < 0) t = -t;
    fc.tangents.push_back(t);
  }

  auto push_unique = [diag](std::vector<Eigen::Vector3d>& v, const Eigen::Vector3d& p) {
    for (const auto& q : v)
      if ((q - p).norm() <= 1e-7 * diag) return;
    v.push_back(p);
  };
  for (std::size_t i = 0; i + 1 < fc.pts.size(); ++i) {
    const auto& a = fc.pts[i];
    const auto& b = fc.pts[i + 1];
    const double ca = sys.gd_at(a, 2), cb = sys.gd_at(b, 2);
    if ((ca < 0 && cb > 0) || (ca > 0 && cb < 0)) {
      const Eigen::Vector3d guess = a + (ca / (ca - cb)) * (b - a);
      const auto c = polish_stack(sys, guess, 3, diag);
      const Eigen::Vector3d cp = c ? *c : guess;
      push_unique(fc.cusps, cp);
      const double scale = std::max({1.0, std::abs(sys.gd_at(cp, 4)), sys.grad_y_g(cp).norm()});
      if (std::abs(sys.gd_at(cp, 3)) < opt.tol.detect * scale) push_unique(fc.swallowtails, cp);
    }
    const double ta = sys.gd_at(a, 3), tb = sys.gd_at(b, 3);
    if ((ta < 0 && tb > 0) || (ta > 0 && tb < 0)) {
      const Eigen::Vector3d guess = a + (ta / (ta - tb)) * (b - a);
      if (const auto s = polish_stack(sys, guess, 4, diag)) push_unique(fc.swallowtails, *s);
    }
  }
  return fc;
}

std::vector<FoldCurve> trace_fold_curves(const FastSlowSystem& sys, int slices, const ContinuationOptions& opt) {
  if (sys.n_slow() != 2) throw ConfigError("fold curves need two slow variables");
  const auto& box = sys.domain();
  const double diag = box.diag();
  std::vector<Eigen::Vector3d> seeds;
  ContinuationOptions slice_opt = opt;
  slice_opt.seed_fibers = std::max(16, opt.seed_fibers / 2);
  for (int k = 0; k < slices; ++k) {
    const double c = box.y[1].lo + (k + 0.5) / slices * box.y[1].width();
    const FastSlowSystem slice(substitute(sys.g(), Var::y2, c), Poly(), DomainBox(box.x, {box.y[0]}));
    for (const auto& f : trace_branches(slice, slice_opt).folds) seeds.push_back({f.p(0), f.p(1), c});
  }

  std::vector<FoldCurve> curves;
  std::vector<bool> covered(seeds.size(), false);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (covered[s]) continue;
    FoldCurve fc;
    try {
      fc = continue_fold_curve(sys, seeds[s], opt);
    } catch (const NumericalError&) {
      continue;
    }
    covered[s] = true;
    for (std::size_t o = 0; o < seeds.size(); ++o) {
      if (covered[o]) continue;
      const double c = seeds[o](2);
      for (std::size_t i = 0; i + 1 < fc.pts.size(); ++i) {
        const auto& a = fc.pts[i];
        const auto& b = fc.pts[i + 1];
        if ((a(2) - c) * (b(2) - c) > 0) continue;
        const double t = a(2) == b(2) ? 0.5 : (c - a(2)) / (b(2) - a(2));
        Eigen::Vector3d p = a + t * (b - a);
        p(2) = c;
        for (int it = 0; it < 30; ++it) {
          Eigen::Vector2d r(sys.g_at(p), sys.gd_at(p, 1));
          Eigen::Matrix2d J;
          J << sys.gd_at(p, 1), sys.gd_at(p, 0, 1), sys.gd_at(p, 2), sys.gd_at(p, 1, 1);
          const Eigen::Vector2d d = J.fullPivLu().solve(r);
          if (!d.allFinite()) break;
          p.head<2>() -= d;
          if (d.norm() < 1e-14 * diag) break;
        }
        if ((p - seeds[o]).norm() <= 1e-6 * diag) {
          covered[o] = true;
          break;
        }
      }
    }
    curves.push_back(std::move(fc));
  }
  std::sort(curves.begin(), curves.end(), [](const FoldCurve& a, const FoldCurve& b) {
    const auto& p = a.pts.front();
    const auto& q = b.pts.front();
    return std::lexicographical_compare(p.data(), p.data() + 3, q.data(), q.data() + 3);
  });
  return curves;
}

std::string branches_csv(const CriticalSetN1& cs) {
  std::ostringstream os;
  os << "branch,x,y1,stability,annotation\n";
  for (std::size_t b = 0; b < cs.branches.size(); ++b) {
    const auto& br = cs.branches[b];
    for (std::size_t i = 0; i < br.pts.size(); ++i) {
      const char* ann = "interior";
      if (i == 0) ann = to_string(br.start);
      if (i + 1 == br.pts.size()) ann = to_string(br.end);
      os << b << ',' << num(br.pts[i](0)) << ',' << num(br.pts[i](1)) << ',' << to_string(br.stab[i]) << ',' << ann
         << '\n';
    }
  }
  return os.str();
}

std::string fold_curves_csv(const std::vector<FoldCurve>& curves) {
  std::ostringstream os;
  os << "curve,x,y1,y2,stability,annotation\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& fc = curves[c];
    for (std::size_t i = 0; i < fc.pts.size(); ++i) {
      const char* ann = "interior";
      if (i == 0) ann = to_string(fc.start);
      if (i + 1 == fc.pts.size()) ann = to_string(fc.end);
      os << c << ',' << num(fc.pts[i](0)) << ',' << num(fc.pts[i](1)) << ',' << num(fc.pts[i](2)) << ",nonhyperbolic,"
         << ann << '\n';
    }
    for (const auto& p : fc.cusps)
      os << c << ',' << num(p(0)) << ',' << num(p(1)) << ',' << num(p(2)) << ",nonhyperbolic,cusp\n";
    for (const auto& p : fc.swallowtails)
      os << c << ',' << num(p(0)) << ',' << num(p(1)) << ',' << num(p(2)) << ",nonhyperbolic,swallowtail\n";
  }
  return os.str();
}

}  // namespace fastslow
