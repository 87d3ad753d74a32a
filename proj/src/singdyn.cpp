#include "fastslow/singdyn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <queue>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fastslow/format.hpp"
#include "fastslow/roots.hpp"

namespace fastslow {

const char* to_string(SegmentEnd e) {
  switch (e) {
    case SegmentEnd::fold: return "fold";
    case SegmentEnd::slow_equilibrium: return "slow_equilibrium";
    case SegmentEnd::boundary: return "boundary";
    case SegmentEnd::rejoin: return "rejoin";
  }
  return "?";
}

const char* to_string(TrajectoryEnd e) {
  switch (e) {
    case TrajectoryEnd::equilibrium: return "equilibrium";
    case TrajectoryEnd::boundary: return "boundary";
    case TrajectoryEnd::escape: return "escape";
    case TrajectoryEnd::cycle: return "cycle";
    case TrajectoryEnd::budget: return "budget";
    case TrajectoryEnd::degenerate_landing: return "degenerate_landing";
  }
  return "?";
}

const char* to_string(EventType t) {
  switch (t) {
    case EventType::SNIC: return "SNIC";
    case EventType::singular_Hopf: return "singular_Hopf";
    case EventType::singular_homoclinic: return "singular_homoclinic";
    case EventType::hyperbolic_fold_tangency: return "hyperbolic_fold_tangency";
    case EventType::hysteresis: return "hysteresis";
    case EventType::aligned_double_limit: return "aligned_double_limit";
    case EventType::opposed_double_limit: return "opposed_double_limit";
    case EventType::double_slow_equilibrium: return "double_slow_equilibrium";
    case EventType::other_degeneracy: return "other_degeneracy";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int sgn(double v) { return (v > 0) - (v < 0); }

Eigen::Vector3d lift(const Eigen::Vector2d& p) { return {p(0), p(1), 0.0}; }

// Kronrod 15-point abscissae and weights on [-1, 1]; the odd entries carry the 7-point Gauss rule.
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double a, b, value, err;
  int depth;
  bool operator<(const Piece& o) const { return err < o.err; }
};

Piece gk15(const std::function<double(double)>& f, double a, double b, int depth) {
  const double c = 0.5 * (a + b), hl = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kWgk[7], g = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = hl * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    k += kWgk[j] * s;
    if (j % 2 == 1) g += kWg[j / 2] * s;
  }
  return {a, b, k * hl, std::abs((k - g) * hl), depth};
}

double dist_to_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  const double l2 = d.squaredNorm();
  if (l2 == 0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(d) / l2, 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

}  // namespace

double integrate_gk(const std::function<double(double)>& f, double a, double b, double abs_tol, int max_depth) {
  if (a == b) return 0.0;
  std::priority_queue<Piece> heap;
  Piece first = gk15(f, a, b, 0);
  double total = first.value, err = first.err;
  heap.push(first);
  int evaluations = 0;
  while (err > abs_tol && !heap.empty() && evaluations < 4000) {
    Piece worst = heap.top();
    if (worst.depth >= max_depth) break;
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    Piece l = gk15(f, worst.a, m, worst.depth + 1), r = gk15(f, m, worst.b, worst.depth + 1);
    total += l.value + r.value - worst.value;
    err += l.err + r.err - worst.err;
    heap.push(l);
    heap.push(r);
    ++evaluations;
    if (!std::isfinite(total)) break;
  }
  // re-sum to shed the running-sum cancellation error
  double s = 0;
  while (!heap.empty()) {
    s += heap.top().value;
    heap.pop();
  }
  return s;
}

// ---------------------------------------------------------------------------
// SlowFlow

SlowFlow::SlowFlow(const FastSlowSystem& sys, const SingdynOptions& opt)
    : sys_(sys), opt_(opt), cs_(trace_branches(sys)) {
  if (sys.n_slow() != 1) throw NumericalError("slow flow needs one slow variable");
}

namespace {

double interp_x(const Branch& b, double y) {
  const auto& p = b.pts;
  if (p.size() == 1) return p[0](0);
  const bool inc = p.back()(1) >= p.front()(1);
  auto key = [&](std::size_t i) { return inc ? p[i](1) : -p[i](1); };
  const double ky = inc ? y : -y;
  std::size_t lo = 0, hi = p.size() - 1;
  if (ky <= key(lo)) return p[lo](0);
  if (ky >= key(hi)) return p[hi](0);
  while (hi - lo > 1) {
    const std::size_t m = (lo + hi) / 2;
    (key(m) <= ky ? lo : hi) = m;
  }
  const double span = key(hi) - key(lo);
  const double t = span > 0 ? (ky - key(lo)) / span : 0.0;
  return p[lo](0) + t * (p[hi](0) - p[lo](0));
}

std::pair<double, double> y_range(const Branch& b) {
  double lo = kInf, hi = -kInf;
  for (const auto& p : b.pts) {
    lo = std::min(lo, p(1));
    hi = std::max(hi, p(1));
  }
  return {lo, hi};
}

}  // namespace

std::optional<double> SlowFlow::root_on_branch(int b, double y, double x_guess) const {
  const Stability want = cs_.branches[static_cast<std::size_t>(b)].stability;
  const auto roots = fiber_roots(sys_, y);
  const FiberRoot* nearest = nullptr;
  const FiberRoot* match = nullptr;
  for (const auto& r : roots) {
    const double d = std::abs(r.x - x_guess);
    if (!nearest || d < std::abs(nearest->x - x_guess)) nearest = &r;
    if (r.stability != Stability::repelling && r.stability != Stability::attracting) continue;
    if (r.stability == want && (!match || d < std::abs(match->x - x_guess))) match = &r;
  }
  if (!nearest) return std::nullopt;
  if (nearest->stability == want || nearest->stability == Stability::nonhyperbolic) return nearest->x;
  // the nearest root is the twin across a fold; accept the matching one only if it is comparably close
  const double d0 = std::abs(nearest->x - x_guess);
  if (match && std::abs(match->x - x_guess) <= std::max(3.0 * d0, 1e-3 * sys_.domain().diag())) return match->x;
  return std::nullopt;
}

double SlowFlow::branch_x(int b, double y) const {
  const double x0 = interp_x(cs_.branches[static_cast<std::size_t>(b)], y);
  return root_on_branch(b, y, x0).value_or(x0);
}

double SlowFlow::H(int b, double y) const { return sys_.h_at({branch_x(b, y), y, 0.0}); }

double SlowFlow::slope(const Eigen::Vector2d& p) const {
  return -sys_.gd_at(lift(p), 0, 1) / sys_.gd_at(lift(p), 1);
}

int SlowFlow::branch_of(const Eigen::Vector2d& p) const {
  const double gx = sys_.gd_at(lift(p), 1);
  const Stability s = gx < 0 ? Stability::attracting : Stability::repelling;
  const double slack = 1e-9 * sys_.domain().diag();
  int best = -1;
  double best_d = kInf;
  for (int pass = 0; pass < 2 && best < 0; ++pass)
    for (std::size_t i = 0; i < cs_.branches.size(); ++i) {
      const auto& br = cs_.branches[i];
      if (pass == 0 && br.stability != s) continue;
      const auto [lo, hi] = y_range(br);
      if (p(1) < lo - slack || p(1) > hi + slack) continue;
      const double d = std::abs(interp_x(br, p(1)) - p(0));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
  if (best >= 0 && best_d > 0.05 * sys_.domain().diag()) return -1;
  return best;
}

double SlowFlow::slow_time(int b, double y0, double y1, bool fold_end) const {
  if (y0 == y1) return 0.0;
  if (!fold_end) return integrate_gk([&](double y) { return 1.0 / H(b, y); }, y0, y1, opt_.quad_tol);
  // y = y1 - d s^2 removes the square-root behaviour of X(y) at the fold
  const double d = sgn(y1 - y0), S = std::sqrt(std::abs(y1 - y0));
  return integrate_gk([&](double s) { return 2.0 * d * s / H(b, y1 - d * s * s); }, 0.0, S, opt_.quad_tol);
}

SlowSegment SlowFlow::trace_slow(const Eigen::Vector2d& start, std::optional<double> y_stop) const {
  const double diag = sys_.domain().diag();
  if (!(sys_.gd_at(lift(start), 1) < 0)) throw NumericalError("trace_slow: start is not on the attracting sheet");
  const int b = branch_of(start);
  if (b < 0) throw NumericalError("trace_slow: start is not on a traced branch of the critical set");
  const Branch& br = cs_.branches[static_cast<std::size_t>(b)];
  if (br.stability != Stability::attracting) throw NumericalError("trace_slow: start is not on the attracting sheet");

  SlowSegment seg;
  seg.branch = b;
  seg.y_start = seg.y_end = start(1);
  const Eigen::Vector2d p0(root_on_branch(b, start(1), start(0)).value_or(start(0)), start(1));
  seg.pts.push_back(p0);
  seg.t.push_back(0.0);

  auto zero_h = [&](const Eigen::Vector2d& p) {
    return 1e-11 * (1.0 + (std::abs(sys_.hd_at(lift(p), 1)) + std::abs(sys_.hd_at(lift(p), 0, 1))) * diag);
  };
  const double h0 = sys_.h_at(lift(p0));
  if (std::abs(h0) <= zero_h(p0)) {
    seg.end_kind = SegmentEnd::slow_equilibrium;
    seg.duration = kInf;
    return seg;
  }
  const int dir = sgn(h0);
  seg.direction = dir;

  // terminal end of the branch in the flow direction
  const bool forward = (br.pts.back()(1) - br.pts.front()(1)) * dir > 0;
  const Eigen::Vector2d term = forward ? br.pts.back() : br.pts.front();
  const EndKind term_kind = forward ? br.end : br.start;
  const int term_fold = forward ? br.end_fold : br.start_fold;
  double y_term = term(1);
  SegmentEnd kind = term_kind == EndKind::fold ? SegmentEnd::fold : SegmentEnd::boundary;
  Eigen::Vector2d p_term = term;
  if (kind == SegmentEnd::fold && term_fold >= 0) {
    p_term = cs_.folds[static_cast<std::size_t>(term_fold)].p.head<2>();
    y_term = p_term(1);
  }
  if ((y_term - start(1)) * dir <= 0) {
    // already at the end of the branch
    seg.end_kind = kind;
    seg.end_fold = kind == SegmentEnd::fold ? term_fold : -1;
    return seg;
  }

  bool forced = false;
  if (y_stop && (*y_stop - start(1)) * dir > 0 && (*y_stop - y_term) * dir < 0) {
    y_term = *y_stop;
    kind = SegmentEnd::boundary;
    forced = true;
  }

  // sample the branch between start and the terminal point
  std::vector<double> ys;
  for (const auto& q : br.pts)
    if ((q(1) - start(1)) * dir > 0 && (y_term - q(1)) * dir > 0) ys.push_back(q(1));
  std::sort(ys.begin(), ys.end(), [&](double a, double c) { return a * dir < c * dir; });
  const std::size_t max_samples = 96;
  if (ys.size() > max_samples) {
    std::vector<double> thin;
    for (std::size_t i = 0; i < max_samples; ++i) thin.push_back(ys[i * ys.size() / max_samples]);
    ys = std::move(thin);
  }

  bool eq_at_term = false;
  if (kind == SegmentEnd::fold) eq_at_term = std::abs(sys_.h_at(lift(p_term))) <= zero_h(p_term);

  // slow equilibrium: first sign change of H ahead of start
  double y_prev = start(1), h_prev = h0;
  std::optional<double> y_eq;
  std::vector<double> probe = ys;
  if (!eq_at_term) probe.push_back(y_term);
  for (double y : probe) {
    const double hv = H(b, y);
    if (sgn(hv) != dir) {
      double lo = y_prev, hi = y;
      for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        const double m = 0.5 * (lo + hi);
        (sgn(H(b, m)) == dir ? lo : hi) = m;
      }
      y_eq = 0.5 * (lo + hi);
      break;
    }
    y_prev = y;
    h_prev = hv;
  }
  (void)h_prev;
  if (y_eq) {
    ys.erase(std::remove_if(ys.begin(), ys.end(), [&](double y) { return (y - *y_eq) * dir >= 0; }), ys.end());
    y_term = *y_eq;
    kind = SegmentEnd::slow_equilibrium;
    forced = false;
  }

  double t = 0.0, y_last = start(1);
  for (double y : ys) {
    t += slow_time(b, y_last, y, false);
    seg.pts.emplace_back(branch_x(b, y), y);
    seg.t.push_back(t);
    y_last = y;
  }
  seg.y_end = y_term;
  seg.end_kind = kind;
  if (kind == SegmentEnd::slow_equilibrium) {
    seg.duration = kInf;
    seg.pts.emplace_back(branch_x(b, y_term), y_term);
    seg.t.push_back(kInf);
    return seg;
  }
  t += slow_time(b, y_last, y_term, kind == SegmentEnd::fold);
  seg.duration = t;
  if (kind == SegmentEnd::fold) {
    seg.end_fold = term_fold;
    seg.equilibrium_at_fold = eq_at_term;
    seg.pts.push_back(p_term);
  } else {
    seg.pts.emplace_back(forced ? branch_x(b, y_term) : p_term(0), y_term);
  }
  seg.t.push_back(t);
  return seg;
}

SingularTrajectory SlowFlow::trace(const Eigen::Vector2d& start, int max_jumps) const {
  if (max_jumps < 0) max_jumps = opt_.max_jumps;
  const double diag = sys_.domain().diag();
  SingularTrajectory tr;
  tr.start = start;

  // initial fast relaxation along the fiber through start
  const auto roots = fiber_roots(sys_, start(1));
  Eigen::Vector2d q = start;
  const FiberRoot* here = nullptr;
  for (const auto& r : roots)
    if (std::abs(r.x - start(0)) <= 1e-10 * diag) here = &r;
  if (here) {
    if (here->stability != Stability::attracting) {
      tr.end = TrajectoryEnd::degenerate_landing;
      return tr;
    }
    q(0) = here->x;
  } else {
    const int dir = sgn(sys_.g_at(lift(start)));
    const FiberRoot* land = nullptr;
    for (const auto& r : roots) {
      if (dir > 0 && r.x > start(0) && (!land || r.x < land->x)) land = &r;
      if (dir < 0 && r.x < start(0) && (!land || r.x > land->x)) land = &r;
    }
    if (!land) {
      tr.end = TrajectoryEnd::escape;
      return tr;
    }
    q(0) = land->x;
    tr.initial_relaxation = FastJump{-1, start, q, land->stability};
    if (land->stability != Stability::attracting) {
      tr.end = TrajectoryEnd::degenerate_landing;
      return tr;
    }
  }

  for (;;) {
    SlowSegment seg = trace_slow(q);
    tr.segments.push_back(seg);
    if (seg.end_kind == SegmentEnd::slow_equilibrium) {
      tr.end = TrajectoryEnd::equilibrium;
      return tr;
    }
    if (seg.end_kind != SegmentEnd::fold || seg.end_fold < 0) {
      tr.end = TrajectoryEnd::boundary;
      return tr;
    }
    const FoldPoint& fold = cs_.folds[static_cast<std::size_t>(seg.end_fold)];
    const std::size_t i = tr.segments.size() - 1;
    int revisit = -1;
    for (std::size_t j = 0; j < i; ++j) {
      const auto& sj = tr.segments[j];
      if (sj.end_kind == SegmentEnd::fold && (sj.pts.back() - seg.pts.back()).norm() <= opt_.y_tol * diag) {
        revisit = static_cast<int>(j);
        break;
      }
    }
    UmbraResult u;
    try {
      u = umbral_map(sys_, fold);
    } catch (const NumericalError&) {
      tr.end = TrajectoryEnd::degenerate_landing;
      return tr;
    }
    if (u.landings.size() != 1) {
      tr.end = u.escape ? TrajectoryEnd::escape : TrajectoryEnd::degenerate_landing;
      return tr;
    }
    const Eigen::Vector2d to = u.landings[0].head<2>();
    tr.jumps.push_back(FastJump{seg.end_fold, fold.p.head<2>(), to, u.landing_stability[0]});
    if (revisit >= 0) {
      tr.end = TrajectoryEnd::cycle;
      tr.cycle_start = revisit + 1;
      return tr;
    }
    if (u.landing_stability[0] != Stability::attracting) {
      tr.end = TrajectoryEnd::degenerate_landing;
      return tr;
    }
    if (static_cast<int>(tr.jumps.size()) >= max_jumps) {
      tr.end = TrajectoryEnd::budget;
      return tr;
    }
    q = to;
  }
}

std::optional<RelaxationOscillation> SlowFlow::relaxation_oscillation() const {
  for (const auto& fold : cs_.folds) {
    UmbraResult u;
    try {
      u = umbral_map(sys_, fold);
    } catch (const NumericalError&) {
      continue;
    }
    if (u.landings.size() != 1 || u.landing_stability[0] != Stability::attracting) continue;
    SingularTrajectory tr;
    try {
      tr = trace(u.landings[0].head<2>());
    } catch (const NumericalError&) {
      continue;
    }
    if (tr.end != TrajectoryEnd::cycle) continue;

    RelaxationOscillation ro;
    for (std::size_t k = static_cast<std::size_t>(tr.cycle_start); k < tr.segments.size(); ++k) {
      ro.segments.push_back(tr.segments[k]);
      ro.jumps.push_back(tr.jumps[k]);
      ro.period += tr.segments[k].duration;
    }
    if (!std::isfinite(ro.period)) ro.violations.push_back("slow period is not finite");
    for (const auto& s : ro.segments) {
      if (cs_.branches[static_cast<std::size_t>(s.branch)].stability != Stability::attracting)
        ro.violations.push_back("slow segment leaves the attracting sheet");
      for (std::size_t k = 1; k + 1 < s.pts.size(); ++k)
        if (!(sys_.gd_at(lift(s.pts[k]), 1) < 0)) {
          ro.violations.push_back("slow segment leaves the attracting sheet");
          break;
        }
      const Eigen::Vector2d fp = s.pts.back();
      const auto cls = classify_local_n1(sys_, fp);
      if (cls.tag != LocalTagN1::quadratic_fold)
        ro.violations.push_back("segment ends at a " + std::string(to_string(cls.tag)) + " point (" + num(fp(0)) +
                                ", " + num(fp(1)) + ")");
      if (s.equilibrium_at_fold)
        ro.violations.push_back("slow equilibrium at the fold (" + num(fp(0)) + ", " + num(fp(1)) + ")");
    }
    ro.simple = ro.violations.empty();
    return ro;
  }
  return std::nullopt;
}

namespace {

std::optional<Eigen::Vector2d> newton_gh(const FastSlowSystem& sys, Eigen::Vector2d p) {
  const double diag = sys.domain().diag();
  for (int it = 0; it < 200; ++it) {
    const Eigen::Vector3d z = lift(p);
    const Eigen::Vector2d F(sys.g_at(z), sys.h_at(z));
    Eigen::Matrix2d J;
    J << sys.gd_at(z, 1), sys.gd_at(z, 0, 1), sys.hd_at(z, 1), sys.hd_at(z, 0, 1);
    // no residual exit: at a tangency Newton converges only linearly and the
    // position error would be the square root of the residual
    if (F.cwiseAbs().maxCoeff() == 0) return p;
    Eigen::Vector2d step = J.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(-F);
    if (!step.allFinite()) return std::nullopt;
    if (step.norm() > 0.1 * diag) step *= 0.1 * diag / step.norm();
    p += step;
    if (!sys.domain().contains(lift(p), 1e-6 * diag)) return std::nullopt;
    if (step.norm() < 1e-15 * diag) break;
  }
  const Eigen::Vector3d z = lift(p);
  const double scale = 1.0 + (std::abs(sys.gd_at(z, 1)) + std::abs(sys.gd_at(z, 0, 1)) +
                              std::abs(sys.hd_at(z, 1)) + std::abs(sys.hd_at(z, 0, 1))) * diag;
  if (std::max(std::abs(sys.g_at(z)), std::abs(sys.h_at(z))) < 1e-10 * scale) return p;
  return std::nullopt;
}

}  // namespace

SlowEquilibrium SlowFlow::describe_equilibrium(const Eigen::Vector2d& p) const {
  const double diag = sys_.domain().diag();
  const Eigen::Vector3d z = lift(p);
  SlowEquilibrium e;
  e.p = p;
  const double gx = sys_.gd_at(z, 1), gy = sys_.gd_at(z, 0, 1);
  const double hx = sys_.hd_at(z, 1), hy = sys_.hd_at(z, 0, 1);
  const double gscale = std::abs(gy) + std::abs(sys_.gd_at(z, 2)) + 1e-300;
  for (std::size_t f = 0; f < cs_.folds.size(); ++f)
    if ((cs_.folds[f].p.head<2>() - p).norm() <= 1e-7 * diag) {
      e.at_fold = true;
      e.fold = static_cast<int>(f);
    }
  if (std::abs(gx) <= 1e-10 * gscale) e.at_fold = true;
  e.sheet = e.at_fold ? Stability::nonhyperbolic : (gx < 0 ? Stability::attracting : Stability::repelling);
  e.H_prime = e.at_fold ? std::copysign(kInf, hx * gy) : hy - hx * gy / gx;
  e.tangency = gx * hy - hx * gy;
  const double hscale = std::abs(hx) + std::abs(hy) + std::abs(sys_.hd_at(z, 2)) + std::abs(sys_.hd_at(z, 1, 1)) +
                        std::abs(sys_.hd_at(z, 0, 2));
  const double tscale = (std::abs(gx) + std::abs(gy)) * hscale;
  e.saddle_node = !e.at_fold && std::abs(e.tangency) <= 1e-8 * tscale;
  if (e.saddle_node) {
    Eigen::Matrix2d J;
    J << gx, gy, hx, hy;
    const int row = J.row(0).norm() >= J.row(1).norm() ? 0 : 1;
    const int col = J.col(0).norm() >= J.col(1).norm() ? 0 : 1;
    Eigen::Vector2d q(-J(row, 1), J(row, 0));
    Eigen::Vector2d r(-J(1, col), J(0, col));
    q.normalize();
    if (r.dot(q) != 0) r /= r.dot(q);
    Eigen::Matrix2d Hg, Hh;
    Hg << sys_.gd_at(z, 2), sys_.gd_at(z, 1, 1), sys_.gd_at(z, 1, 1), sys_.gd_at(z, 0, 2);
    Hh << sys_.hd_at(z, 2), sys_.hd_at(z, 1, 1), sys_.hd_at(z, 1, 1), sys_.hd_at(z, 0, 2);
    const Eigen::Vector2d B(q.dot(Hg * q), q.dot(Hh * q));
    e.b = 0.5 * r.dot(B);
  }
  return e;
}

std::vector<SlowEquilibrium> SlowFlow::raw_equilibria() const {
  const double diag = sys_.domain().diag();
  std::vector<Eigen::Vector2d> found;
  auto add = [&](const Eigen::Vector2d& p) {
    for (const auto& q : found)
      if ((q - p).norm() <= 1e-7 * diag) return;
    found.push_back(p);
  };
  for (const auto& f : cs_.folds) {
    const Eigen::Vector3d z = f.p;
    const double hs = 1e-11 * (1.0 + (std::abs(sys_.hd_at(z, 1)) + std::abs(sys_.hd_at(z, 0, 1))) * diag);
    if (std::abs(sys_.h_at(z)) <= hs) add(f.p.head<2>());
  }
  for (const auto& br : cs_.branches) {
    const auto& pts = br.pts;
    std::vector<double> hv(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) hv[i] = sys_.h_at(lift(pts[i]));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const bool change = hv[i] == 0 || sgn(hv[i]) != sgn(hv[i + 1]);
      const bool dip = i > 0 && std::abs(hv[i]) < std::abs(hv[i - 1]) && std::abs(hv[i]) <= std::abs(hv[i + 1]);
      if (!change && !dip) continue;
      Eigen::Vector2d guess = pts[i];
      if (change && hv[i] != hv[i + 1]) {
        const double t = hv[i] / (hv[i] - hv[i + 1]);
        guess = pts[i] + t * (pts[i + 1] - pts[i]);
      }
      const auto p = newton_gh(sys_, guess);
      if (!p) continue;
      // a dip only counts when Newton stays local
      const double reach = 2.0 * (pts[i + 1] - pts[i]).norm() + 1e-6 * diag;
      if (!change && (*p - guess).norm() > reach) continue;
      if (sys_.domain().contains(lift(*p))) add(*p);
    }
  }
  std::vector<SlowEquilibrium> out;
  for (const auto& p : found) out.push_back(describe_equilibrium(p));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.p(0) < b.p(0); });
  return out;
}

EquilibriumAnalysis SlowFlow::equilibria() const {
  const double diag = sys_.domain().diag();
  EquilibriumAnalysis an;
  an.equilibria = raw_equilibria();
  const auto& eq = an.equilibria;
  const double ytol = opt_.y_tol * diag;
  for (std::size_t i = 0; i < eq.size(); ++i)
    for (std::size_t j = i + 1; j < eq.size(); ++j)
      if (std::abs(eq[i].p(1) - eq[j].p(1)) <= ytol) an.co_equilibria.emplace_back(int(i), int(j));

  std::vector<std::optional<Eigen::Vector2d>> landing(cs_.folds.size());
  for (std::size_t f = 0; f < cs_.folds.size(); ++f) {
    try {
      const auto u = umbral_map(sys_, cs_.folds[f]);
      if (u.landings.size() == 1) landing[f] = u.landings[0].head<2>();
    } catch (const NumericalError&) {
    }
  }
  for (std::size_t e = 0; e < eq.size(); ++e) {
    const bool sink = eq[e].H_prime < 0;
    if (eq[e].at_fold) {
      an.fold_projections.push_back({int(e), eq[e].fold, sink ? 1 : 2});
      continue;
    }
    for (std::size_t f = 0; f < cs_.folds.size(); ++f) {
      if (std::abs(eq[e].p(1) - cs_.folds[f].p(1)) > ytol) continue;
      const bool on_umbra = landing[f] && (*landing[f] - eq[e].p).norm() <= 1e-6 * diag;
      an.fold_projections.push_back({int(e), int(f), on_umbra ? (sink ? 3 : 4) : 5});
    }
  }
  return an;
}

SlowSegment trace_slow(const FastSlowSystem& sys, const Eigen::Vector2d& start, std::optional<double> y_stop) {
  return SlowFlow(sys).trace_slow(start, y_stop);
}

SingularTrajectory trace_singular_trajectory(const FastSlowSystem& sys, const Eigen::Vector2d& start, int max_jumps) {
  return SlowFlow(sys).trace(start, max_jumps);
}

std::optional<RelaxationOscillation> detect_relaxation_oscillation(const FastSlowSystem& sys) {
  return SlowFlow(sys).relaxation_oscillation();
}

EquilibriumAnalysis slow_equilibria(const FastSlowSystem& sys) { return SlowFlow(sys).equilibria(); }

PersistenceReport persistence_report(const FastSlowSystem& sys) {
  const SlowFlow flow(sys);
  const auto& cs = flow.critical_set();
  PersistenceReport rep;
  for (const auto& f : cs.folds) {
    const auto cls = classify_local_n1(sys, f.p.head<2>());
    if (cls.tag == LocalTagN1::quadratic_fold) continue;
    rep.degenerate_folds.push_back(f.p.head<2>());
    rep.degenerate_fold_labels.push_back(to_string(cls.tag));
  }
  rep.double_limits = detect_double_limits(sys, cs.folds);
  const auto an = flow.equilibria();
  for (const auto& e : an.equilibria)
    if (e.saddle_node) rep.tangencies.push_back(e.p);
  for (const auto& [i, j] : an.co_equilibria)
    rep.co_equilibria.emplace_back(an.equilibria[size_t(i)].p, an.equilibria[size_t(j)].p);
  for (const auto& m : an.fold_projections) {
    rep.fold_projections.emplace_back(an.equilibria[size_t(m.equilibrium)].p,
                                      cs.folds[size_t(m.fold < 0 ? 0 : m.fold)].p.head<2>());
    rep.fold_projection_subcases.push_back(m.subcase);
  }
  rep.persistent = rep.degenerate_folds.empty() && rep.double_limits.empty() && rep.tangencies.empty() &&
                   rep.co_equilibria.empty() && rep.fold_projections.empty();
  return rep;
}

// ---------------------------------------------------------------------------
// sweep

namespace {

struct Snapshot {
  double lambda = 0;
  bool ok = false;
  std::vector<FoldPoint> folds;    // sorted by x
  std::vector<double> inflection;  // x_fold minus nearest root of g_xx on its fiber, NaN if none
  std::vector<SlowEquilibrium> eq; // sorted by x
};

Snapshot take_snapshot(const SystemFamily& fam, double lam, const SingdynOptions& opt) {
  Snapshot s;
  s.lambda = lam;
  try {
    const FastSlowSystem sys = fam.at(lam);
    const SlowFlow flow(sys, opt);
    s.folds = flow.critical_set().folds;
    std::sort(s.folds.begin(), s.folds.end(), [](const auto& a, const auto& b) { return a.p(0) < b.p(0); });
    const double w = sys.domain().x.width();
    for (const auto& f : s.folds) {
      const auto c = x_coefficients(sys.gd(2), f.p(1), 0.0);
      double best = std::numeric_limits<double>::quiet_NaN();
      for (const auto& r : real_roots(c, sys.domain().x.lo - w, sys.domain().x.hi + w))
        if (std::isnan(best) || std::abs(f.p(0) - r.x) < std::abs(best)) best = f.p(0) - r.x;
      s.inflection.push_back(best);
    }
    s.eq = flow.raw_equilibria();
    s.ok = true;
  } catch (const NumericalError&) {
    s.ok = false;
  }
  return s;
}

using Indicator = std::function<std::optional<double>(const Snapshot&)>;

struct Bracket {
  double lo, hi, v_lo, v_hi;
  bool resolved = true;
  bool jump = false;  // the indicator is discontinuous here, not zero
};

class Sweeper {
 public:
  Sweeper(const SystemFamily& fam, const SweepOptions& opt) : fam_(fam), opt_(opt) {}

  Snapshot at(double lam) const { return take_snapshot(fam_, lam, opt_.singdyn); }

  // bisection on a continuous signed indicator with a continuity check
  Bracket bisect(double lo, double hi, double v_lo, double v_hi, const Indicator& ind) const {
    Bracket b{lo, hi, v_lo, v_hi};
    const double v0 = std::max(std::abs(v_lo), std::abs(v_hi));
    while (b.hi - b.lo > opt_.bracket) {
      const double m = 0.5 * (b.lo + b.hi);
      const auto v = ind(at(m));
      if (!v || !std::isfinite(*v)) {
        b.resolved = false;
        return b;
      }
      if (sgn(*v) == sgn(b.v_lo)) {
        b.lo = m;
        b.v_lo = *v;
      } else {
        b.hi = m;
        b.v_hi = *v;
      }
    }
    if (std::max(std::abs(b.v_lo), std::abs(b.v_hi)) > 0.5 * v0) b.jump = true;
    return b;
  }

  Bracket bisect_count(double lo, double hi, const std::function<std::optional<int>(const Snapshot&)>& count) const {
    Bracket b{lo, hi, 0, 0};
    const auto c_lo = count(at(lo));
    if (!c_lo) {
      b.resolved = false;
      return b;
    }
    while (b.hi - b.lo > opt_.bracket) {
      const double m = 0.5 * (b.lo + b.hi);
      const auto c = count(at(m));
      if (!c) {
        b.resolved = false;
        return b;
      }
      (*c == *c_lo ? b.lo : b.hi) = m;
    }
    return b;
  }

  static double secant(const Bracket& b) {
    if (b.v_hi == b.v_lo) return 0.5 * (b.lo + b.hi);
    return std::clamp(b.lo - b.v_lo * (b.hi - b.lo) / (b.v_hi - b.v_lo), b.lo, b.hi);
  }

  // Newton in (x, y, lambda) with a difference Jacobian
  std::optional<Eigen::Vector3d> polish(Eigen::Vector3d z,
                                        const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& F) const {
    const double diag = fam_.domain.diag();
    for (int it = 0; it < 300; ++it) {
      const Eigen::Vector3d f = F(z);
      if (!f.allFinite()) return std::nullopt;
      Eigen::Matrix3d J;
      for (int k = 0; k < 3; ++k) {
        const double hk = 1e-6 * (1.0 + std::abs(z(k)));
        Eigen::Vector3d zp = z, zm = z;
        zp(k) += hk;
        zm(k) -= hk;
        J.col(k) = (F(zp) - F(zm)) / (2 * hk);
      }
      // minimum-norm step keeps Newton usable where the system is itself degenerate
      Eigen::Vector3d step = J.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(-f);
      if (!step.allFinite()) return std::nullopt;
      if (step.head<2>().norm() > 0.05 * diag) step *= 0.05 * diag / step.head<2>().norm();
      z += step;
      if (step.norm() < 1e-14 * (1.0 + z.norm())) break;
    }
    const double res = F(z).cwiseAbs().maxCoeff();
    if (!(res < 1e-9)) return std::nullopt;
    return z;
  }

  std::function<Eigen::Vector3d(const Eigen::Vector3d&)> system_of(const std::vector<const Poly*>& polys) const {
    return [polys](const Eigen::Vector3d& z) {
      Eigen::Vector3d out;
      for (int k = 0; k < 3; ++k) out(k) = polys[size_t(k)]->eval(z(0), z(1), 0.0, z(2));
      return out;
    };
  }

  const RelaxationOscillation* probe_ro(double lambda0) {
    const double lam = lambda0 - opt_.probe_offset;
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& [l, ro] : ro_cache_)
      if (l == lam) return ro ? &*ro : nullptr;
    std::optional<RelaxationOscillation> ro;
    try {
      ro = detect_relaxation_oscillation(fam_.at(lam));
    } catch (const NumericalError&) {
    }
    ro_cache_.emplace_back(lam, ro);
    return ro_cache_.back().second ? &*ro_cache_.back().second : nullptr;
  }

  const SystemFamily& fam_;
  const SweepOptions& opt_;
  std::mutex mu_;
  std::vector<std::pair<double, std::optional<RelaxationOscillation>>> ro_cache_;
};

std::optional<int> fold_count(const Snapshot& s) {
  if (!s.ok) return std::nullopt;
  return static_cast<int>(s.folds.size());
}

std::optional<int> eq_count(const Snapshot& s) {
  if (!s.ok) return std::nullopt;
  return static_cast<int>(s.eq.size());
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> closest_pair(const std::vector<Eigen::Vector2d>& pts) {
  std::pair<Eigen::Vector2d, Eigen::Vector2d> best{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  double d = kInf;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if ((pts[i] - pts[j]).norm() < d) {
        d = (pts[i] - pts[j]).norm();
        best = {pts[i], pts[j]};
      }
  return best;
}

double ro_distance(const RelaxationOscillation& ro, const Eigen::Vector2d& p) {
  double d = kInf;
  for (const auto& s : ro.segments) {
    for (std::size_t k = 0; k + 1 < s.pts.size(); ++k) d = std::min(d, dist_to_segment(p, s.pts[k], s.pts[k + 1]));
    if (s.pts.size() == 1) d = std::min(d, (p - s.pts[0]).norm());
  }
  for (const auto& j : ro.jumps) d = std::min(d, dist_to_segment(p, j.from, j.to));
  return d;
}

bool in_affecting_list(const BifurcationEvent& e, int double_limit_subcase) {
  switch (e.type) {
    case EventType::SNIC:
    case EventType::singular_Hopf:
    case EventType::singular_homoclinic:
    case EventType::hyperbolic_fold_tangency: return true;
    case EventType::hysteresis: return e.detail == to_string(LocalTagN1::stable_hysteresis);
    case EventType::aligned_double_limit:
    case EventType::opposed_double_limit: return double_limit_subcase >= 1 && double_limit_subcase <= 4;
    default: return false;
  }
}

}  // namespace

std::vector<BifurcationEvent> sweep(const SystemFamily& family, const SweepOptions& opt) {
  if (family.n_slow() != 1) throw NumericalError("sweep needs one slow variable");
  if (!(family.sweep.width() > 0)) throw NumericalError("sweep interval is empty");
  const int n = std::max(3, opt.samples);
  Sweeper sw(family, opt);
  const double diag = family.domain.diag();

  std::vector<Snapshot> grid(static_cast<std::size_t>(n));
  {
    const int jobs = std::max(1, opt.jobs);
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&, t] {
        for (int i = t; i < n; i += jobs)
          grid[size_t(i)] = sw.at(family.sweep.lo + family.sweep.width() * i / (n - 1));
      });
    for (auto& th : pool) th.join();
  }

  const Poly g = family.g, h = family.h;
  const Poly gx = differentiate(g, Var::x), gy = differentiate(g, Var::y1);
  const Poly gxx = differentiate(gx, Var::x);
  const Poly hx = differentiate(h, Var::x), hy = differentiate(h, Var::y1);
  const Poly tangency = gx * hy - hx * gy;

  struct Candidate {
    BifurcationEvent ev;
    int subcase = 0;
  };
  std::vector<Candidate> found;

  for (int i = 0; i + 1 < n; ++i) {
    const Snapshot& s0 = grid[size_t(i)];
    const Snapshot& s1 = grid[size_t(i + 1)];
    if (!s0.ok || !s1.ok) continue;
    const double l0 = s0.lambda, l1 = s1.lambda;
    const std::size_t nf = s0.folds.size(), ne = s0.eq.size();
    const bool same_folds = nf == s1.folds.size();
    const bool same_eq = ne == s1.eq.size();

    auto continuous = [&](const Indicator& ind, const char* name) -> std::optional<Bracket> {
      const auto v0 = ind(s0), v1 = ind(s1);
      if (!v0 || !v1 || !std::isfinite(*v0) || !std::isfinite(*v1)) return std::nullopt;
      if (sgn(*v0) == sgn(*v1) || *v0 == 0) return std::nullopt;
      (void)name;
      const Bracket b = sw.bisect(l0, l1, *v0, *v1, ind);
      if (b.jump) return std::nullopt;
      return b;
    };
    auto base_event = [&](const Bracket& b, double lam0, const char* indicator) {
      BifurcationEvent ev;
      ev.lambda0 = lam0;
      ev.bracket_lo = b.lo;
      ev.bracket_hi = b.hi;
      ev.indicator = indicator;
      return ev;
    };

    // fold creation or annihilation: fold tangency or cubic hysteresis
    if (!same_folds) {
      const Bracket b = sw.bisect_count(l0, l1, fold_count);
      const Snapshot lo = sw.at(b.lo), hi = sw.at(b.hi);
      const Snapshot& more = lo.folds.size() > hi.folds.size() ? lo : hi;
      std::vector<Eigen::Vector2d> pts;
      for (const auto& f : more.folds) pts.push_back(f.p.head<2>());
      BifurcationEvent ev = base_event(b, 0.5 * (b.lo + b.hi), "fold count");
      ev.type = EventType::other_degeneracy;
      ev.detail = "unresolved";
      if (pts.size() >= 2) {
        const auto [a, c] = closest_pair(pts);
        const Eigen::Vector3d z0(0.5 * (a(0) + c(0)), 0.5 * (a(1) + c(1)), ev.lambda0);
        auto t1 = sw.polish(z0, sw.system_of({&g, &gx, &gy}));
        auto t2 = sw.polish(z0, sw.system_of({&g, &gx, &gxx}));
        std::optional<Eigen::Vector3d> z;
        for (const auto& t : {t1, t2})
          if (t && (*t).head<2>().allFinite() && std::abs((*t)(2) - ev.lambda0) <= 2 * (b.hi - b.lo + opt.bracket) &&
              (!z || ((*t).head<2>() - z0.head<2>()).norm() < ((*z).head<2>() - z0.head<2>()).norm()))
            z = t;
        if (z) {
          ev.lambda0 = (*z)(2);
          ev.witness = {Eigen::Vector2d((*z)(0), (*z)(1))};
          const auto cls = classify_local_n1(family.at(ev.lambda0), ev.witness[0]);
          ev.detail = to_string(cls.tag);
          switch (cls.tag) {
            case LocalTagN1::hyperbolic_fold_tangency: ev.type = EventType::hyperbolic_fold_tangency; break;
            case LocalTagN1::stable_hysteresis:
            case LocalTagN1::unstable_hysteresis: ev.type = EventType::hysteresis; break;
            default: ev.type = EventType::other_degeneracy;
          }
        } else {
          ev.witness = {0.5 * (a + c)};
        }
      }
      if (!b.resolved) ev.detail += " (unresolved)";
      found.push_back({ev, 0});
    }

    if (same_folds) {
      // fold crossing an inflection of its fiber: g_xx vanishes at the fold
      for (std::size_t f = 0; f < nf; ++f) {
        Indicator ind = [f, nf](const Snapshot& s) -> std::optional<double> {
          if (!s.ok || s.folds.size() != nf) return std::nullopt;
          return s.inflection[f];
        };
        const auto b = continuous(ind, "inflection");
        if (!b) continue;
        const double lam0 = Sweeper::secant(*b);
        BifurcationEvent ev = base_event(*b, lam0, "fold-inflection offset");
        ev.type = EventType::hysteresis;
        const Snapshot s = sw.at(lam0);
        if (s.ok && s.folds.size() == nf) {
          ev.witness = {s.folds[f].p.head<2>()};
          // the offset can vanish like a fractional power, so locate g = g_x = g_xx = 0 directly
          const Eigen::Vector3d z0(ev.witness[0](0) - s.inflection[f], ev.witness[0](1), lam0);
          const auto z = sw.polish(z0, sw.system_of({&g, &gx, &gxx}));
          if (z && (*z)(2) >= b->lo - opt.bracket && (*z)(2) <= b->hi + opt.bracket) {
            ev.lambda0 = (*z)(2);
            ev.witness = {Eigen::Vector2d((*z)(0), (*z)(1))};
          }
          ev.detail = to_string(classify_local_n1(family.at(ev.lambda0), ev.witness[0]).tag);
        }
        if (!b->resolved) {
          ev.type = EventType::other_degeneracy;
          ev.detail += " (unresolved)";
        }
        found.push_back({ev, 0});
      }
      // two folds sharing a fiber
      for (std::size_t a = 0; a < nf; ++a)
        for (std::size_t c = a + 1; c < nf; ++c) {
          Indicator ind = [a, c, nf](const Snapshot& s) -> std::optional<double> {
            if (!s.ok || s.folds.size() != nf) return std::nullopt;
            return s.folds[a].p(1) - s.folds[c].p(1);
          };
          const auto b = continuous(ind, "fold dy");
          if (!b) continue;
          const double lam0 = Sweeper::secant(*b);
          BifurcationEvent ev = base_event(*b, lam0, "fold pair dy");
          ev.type = EventType::other_degeneracy;
          int subcase = 0;
          const Snapshot s = sw.at(lam0);
          if (s.ok && s.folds.size() == nf) {
            ev.witness = {s.folds[a].p.head<2>(), s.folds[c].p.head<2>()};
            const double dy = std::abs(s.folds[a].p(1) - s.folds[c].p(1));
            std::vector<FoldPoint> pair = {s.folds[a], s.folds[c]};
            const auto recs = detect_double_limits(family.at(lam0), pair, std::max(1e-6, 2 * dy));
            if (!recs.empty()) {
              subcase = recs[0].subcase;
              ev.type = recs[0].alignment > 0 ? EventType::aligned_double_limit : EventType::opposed_double_limit;
              ev.detail = recs[0].label + " (subcase " + std::to_string(subcase) + ")";
            }
          }
          if (!b->resolved) {
            ev.type = EventType::other_degeneracy;
            ev.detail += " (unresolved)";
          }
          found.push_back({ev, subcase});
        }
    }

    if (same_eq) {
      for (std::size_t e = 0; e < ne; ++e) {
        // equilibrium passing through a fold
        Indicator cross = [e, ne, &gx](const Snapshot& s) -> std::optional<double> {
          if (!s.ok || s.eq.size() != ne) return std::nullopt;
          return gx.eval(s.eq[e].p(0), s.eq[e].p(1), 0.0, s.lambda);
        };
        if (const auto b = continuous(cross, "eq g_x")) {
          const double lam0 = Sweeper::secant(*b);
          BifurcationEvent ev = base_event(*b, lam0, "equilibrium g_x");
          ev.type = EventType::other_degeneracy;
          const FastSlowSystem sys = family.at(lam0);
          const SlowFlow flow(sys, opt.singdyn);
          const auto an = flow.equilibria();
          const SlowEquilibrium* best = nullptr;
          int subcase = 0;
          for (const auto& m : an.fold_projections) {
            const auto& q = an.equilibria[size_t(m.equilibrium)];
            if (q.at_fold && (m.subcase == 1 || m.subcase == 2) && (!best || std::abs(q.p(0) - s0.eq[e].p(0)) <
                                                                                  std::abs(best->p(0) - s0.eq[e].p(0)))) {
              best = &q;
              subcase = m.subcase;
            }
          }
          if (best) {
            ev.witness = {best->p};
            ev.detail = subcase == 1 ? "sink-fold intersection" : "source-fold intersection";
            if (subcase == 1) ev.type = EventType::singular_Hopf;
          } else {
            ev.detail = "equilibrium crosses fold";
          }
          if (!b->resolved) {
            ev.type = EventType::other_degeneracy;
            ev.detail += " (unresolved)";
          }
          found.push_back({ev, 0});
        }
        // equilibrium sharing y with a fold or its umbra
        if (same_folds)
          for (std::size_t f = 0; f < nf; ++f) {
            Indicator dy = [e, f, ne, nf](const Snapshot& s) -> std::optional<double> {
              if (!s.ok || s.eq.size() != ne || s.folds.size() != nf) return std::nullopt;
              return s.eq[e].p(1) - s.folds[f].p(1);
            };
            const auto b = continuous(dy, "eq fold dy");
            if (!b) continue;
            const double lam0 = Sweeper::secant(*b);
            BifurcationEvent ev = base_event(*b, lam0, "equilibrium-fold dy");
            ev.type = EventType::other_degeneracy;
            const FastSlowSystem sys = family.at(lam0);
            const SlowFlow flow(sys, opt.singdyn);
            const auto an = flow.equilibria();
            const Snapshot s = sw.at(lam0);
            int subcase = 0;
            if (s.ok && s.eq.size() == ne && s.folds.size() == nf) {
              ev.witness = {s.eq[e].p, s.folds[f].p.head<2>()};
              for (const auto& m : an.fold_projections) {
                const auto& q = an.equilibria[size_t(m.equilibrium)];
                if ((q.p - s.eq[e].p).norm() < 1e-6 * diag) subcase = m.subcase;
              }
            }
            if (subcase == 4) {
              ev.type = EventType::singular_homoclinic;
              ev.detail = "source-fold umbra intersection";
            } else if (subcase == 3) {
              ev.detail = "sink-fold umbra intersection";
            } else {
              ev.detail = "non-interacting fold projection";
            }
            if (!b->resolved) {
              ev.type = EventType::other_degeneracy;
              ev.detail += " (unresolved)";
            }
            found.push_back({ev, 0});
          }
        // two equilibria sharing y
        for (std::size_t e2 = e + 1; e2 < ne; ++e2) {
          Indicator dy = [e, e2, ne](const Snapshot& s) -> std::optional<double> {
            if (!s.ok || s.eq.size() != ne) return std::nullopt;
            return s.eq[e].p(1) - s.eq[e2].p(1);
          };
          const auto b = continuous(dy, "eq pair dy");
          if (!b) continue;
          const double lam0 = Sweeper::secant(*b);
          BifurcationEvent ev = base_event(*b, lam0, "equilibrium pair dy");
          ev.type = b->resolved ? EventType::double_slow_equilibrium : EventType::other_degeneracy;
          ev.detail = b->resolved ? "co-equilibria" : "co-equilibria (unresolved)";
          const Snapshot s = sw.at(lam0);
          if (s.ok && s.eq.size() == ne) ev.witness = {s.eq[e].p, s.eq[e2].p};
          found.push_back({ev, 0});
        }
      }
    } else {
      // saddle-node of the slow flow
      const Bracket b = sw.bisect_count(l0, l1, eq_count);
      const Snapshot lo = sw.at(b.lo), hi = sw.at(b.hi);
      const Snapshot& more = lo.eq.size() > hi.eq.size() ? lo : hi;
      BifurcationEvent ev = base_event(b, 0.5 * (b.lo + b.hi), "equilibrium count");
      ev.type = EventType::other_degeneracy;
      ev.detail = "equilibrium leaves the domain";
      std::vector<Eigen::Vector2d> pts;
      for (const auto& q : more.eq) pts.push_back(q.p);
      if (pts.size() >= 2) {
        const auto [a, c] = closest_pair(pts);
        const Eigen::Vector3d z0(0.5 * (a(0) + c(0)), 0.5 * (a(1) + c(1)), ev.lambda0);
        const auto z = sw.polish(z0, sw.system_of({&g, &h, &tangency}));
        if (z && std::abs((*z)(2) - ev.lambda0) <= 2 * (b.hi - b.lo + opt.bracket)) {
          ev.lambda0 = (*z)(2);
          const Eigen::Vector2d p((*z)(0), (*z)(1));
          ev.witness = {p};
          const FastSlowSystem sys = family.at(ev.lambda0);
          const SlowFlow flow(sys, opt.singdyn);
          const auto d = flow.describe_equilibrium(p);
          ev.b = d.b;
          if (d.sheet == Stability::attracting) {
            ev.type = EventType::SNIC;
            ev.detail = "saddle-node on the attracting sheet";
          } else {
            ev.detail = d.sheet == Stability::repelling ? "saddle-node on the repelling sheet" : "saddle-node at a fold";
          }
        }
      }
      if (!b.resolved) ev.detail += " (unresolved)";
      found.push_back({ev, 0});
    }
  }

  // merge coincident reports of one degeneracy, keeping the most specific
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.ev.lambda0 < b.ev.lambda0; });
  std::vector<Candidate> merged;
  for (auto& c : found) {
    bool dup = false;
    for (auto& m : merged) {
      if (std::abs(m.ev.lambda0 - c.ev.lambda0) > 1e-5) continue;
      bool near = m.ev.witness.empty() || c.ev.witness.empty();
      for (const auto& p : m.ev.witness)
        for (const auto& q : c.ev.witness) near = near || (p - q).norm() < 0.01 * diag;
      if (!near) continue;
      dup = true;
      if (m.ev.type == EventType::other_degeneracy && c.ev.type != EventType::other_degeneracy) m = c;
      break;
    }
    if (!dup) merged.push_back(c);
  }

  std::vector<BifurcationEvent> out;
  for (auto& c : merged) {
    BifurcationEvent& ev = c.ev;
    if (in_affecting_list(ev, c.subcase)) {
      if (const auto* ro = sw.probe_ro(ev.lambda0)) {
        for (const auto& p : ev.witness)
          if (ro_distance(*ro, p) <= opt.singdyn.meet_tol_frac * diag) ev.affects_RO = true;
      }
    }
    out.push_back(ev);
  }
  return out;
}

// ---------------------------------------------------------------------------
// output

std::string trajectory_csv(const SingularTrajectory& t) {
  std::ostringstream os;
  os << "segment_id,kind,x,y1,t_slow\n";
  int id = 0;
  double clock = 0;
  auto fast = [&](const FastJump& j) {
    os << id << ",fast," << num(j.from(0)) << ',' << num(j.from(1)) << ',' << num(clock) << '\n';
    os << id << ",fast," << num(j.to(0)) << ',' << num(j.to(1)) << ',' << num(clock) << '\n';
    ++id;
  };
  if (t.initial_relaxation) fast(*t.initial_relaxation);
  for (std::size_t k = 0; k < t.segments.size(); ++k) {
    const auto& s = t.segments[k];
    for (std::size_t i = 0; i < s.pts.size(); ++i)
      os << id << ",slow," << num(s.pts[i](0)) << ',' << num(s.pts[i](1)) << ',' << num(clock + s.t[i]) << '\n';
    ++id;
    clock += s.duration;
    if (k < t.jumps.size()) fast(t.jumps[k]);
  }
  return os.str();
}

std::string events_json(const std::vector<BifurcationEvent>& events) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : events) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& p : e.witness) w.push_back({p(0), p(1)});
    nlohmann::json j = {{"lambda0", e.lambda0},
                        {"type", to_string(e.type)},
                        {"indicator", e.indicator},
                        {"detail", e.detail},
                        {"witness", w},
                        {"affects_RO", e.affects_RO},
                        {"bracket", {e.bracket_lo, e.bracket_hi}}};
    if (e.b) j["b"] = *e.b;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

}  // namespace fastslow
