#include "fastslow/umbra.hpp"

#include <cmath>
#include <sstream>

#include "fastslow/format.hpp"

namespace fastslow {

FoldPoint fold_at(const FastSlowSystem& sys, const Eigen::Vector3d& p, const CritTolerances& tol) {
  FoldPoint f;
  f.p = p;
  f.g_xx = sys.gd_at(p, 2);
  f.nu = f.g_xx * sys.grad_y_g(p);
  f.residual = std::max(std::abs(sys.g_at(p)), std::abs(sys.gd_at(p, 1)));
  const double scale = std::max({1.0, sys.grad_y_g(p).norm(), std::abs(sys.gd_at(p, 3))});
  f.degenerate = std::abs(f.g_xx) < tol.detect * scale;
  return f;
}

namespace {

// First fiber root strictly beyond x0 + side * gap, walking in direction side.
void land(const FastSlowSystem& sys, const Eigen::Vector3d& p, int side, double gap, const CritTolerances& tol,
          UmbraResult& out) {
  const auto roots = fiber_roots(sys, p(1), p(2), tol);
  const FiberRoot* best = nullptr;
  for (const auto& r : roots) {
    if (side * (r.x - p(0)) <= gap) continue;
    if (!best || side * (r.x - best->x) < 0) best = &r;
  }
  if (!best) {
    out.escape = true;
    return;
  }
  out.landings.emplace_back(best->x, p(1), p(2));
  out.landing_direction.push_back(side);
  out.landing_stability.push_back(best->stability);
}

}  // namespace

UmbraResult umbral_map(const FastSlowSystem& sys, const FoldPoint& fold, const CritTolerances& tol) {
  const Eigen::Vector3d& p = fold.p;
  const double w = sys.domain().x.width();
  if (std::abs(sys.gd_at(p, 1)) > 1e3 * tol.detect * std::max(1.0, std::abs(sys.gd_at(p, 2))))
    throw NumericalError("umbral map requested away from the fold set");

  UmbraResult out;
  out.source = p;
  const double r = std::abs(sys.g_at(p));
  const double gxx = sys.gd_at(p, 2);
  out.degenerate = fold.degenerate || std::abs(gxx) < tol.detect;

  if (!out.degenerate) {
    // Probe distance well outside the twin roots created by the polishing residual.
    const int side = gxx > 0 ? 1 : -1;
    const double gap = std::max(1e-6 * w, 10.0 * std::sqrt(2.0 * r / std::abs(gxx)));
    out.direction = side;
    land(sys, p, side, gap, tol, out);
    return out;
  }

  for (int side : {-1, 1}) {
    double delta = 1e-6 * w, gv = 0.0;
    while (true) {
      gv = sys.g_at({p(0) + side * delta, p(1), p(2)});
      if (std::abs(gv) >= 1e-14 || delta > 1e-2 * w) break;
      delta *= 10;
    }
    if (std::abs(gv) < 1e-14) continue;
    if ((gv > 0 ? 1 : -1) == side) land(sys, p, side, delta, tol, out);
  }
  if (out.landing_direction.size() == 1) out.direction = out.landing_direction[0];
  return out;
}

DropSet umbra_set(const FastSlowSystem& sys, const std::vector<FoldPoint>& folds) {
  DropSet ds;
  for (const auto& f : folds) {
    ds.sources.push_back(f.p);
    ds.images.push_back(umbral_map(sys, f));
    ds.curve.push_back(-1);
    ds.any_escape = ds.any_escape || ds.images.back().escape;
  }
  return ds;
}

DropSet umbra_set(const FastSlowSystem& sys, const std::vector<FoldCurve>& curves) {
  DropSet ds;
  for (std::size_t c = 0; c < curves.size(); ++c) {
    for (const auto& p : curves[c].pts) {
      ds.sources.push_back(p);
      ds.images.push_back(umbral_map(sys, fold_at(sys, p)));
      ds.curve.push_back(static_cast<int>(c));
      ds.any_escape = ds.any_escape || ds.images.back().escape;
    }
    for (const auto& p : curves[c].cusps) {
      FoldPoint f = fold_at(sys, p);
      f.degenerate = true;
      ds.sources.push_back(p);
      ds.images.push_back(umbral_map(sys, f));
      ds.curve.push_back(static_cast<int>(c));
      ds.any_escape = ds.any_escape || ds.images.back().escape;
    }
  }
  return ds;
}

std::string drop_set_csv(const FastSlowSystem& sys, const DropSet& ds) {
  std::ostringstream os;
  const bool two = sys.n_slow() == 2;
  os << "curve,source_x,source_y1" << (two ? ",source_y2" : "") << ",target_x,target_y1" << (two ? ",target_y2" : "")
     << ",direction,status\n";
  for (std::size_t i = 0; i < ds.sources.size(); ++i) {
    const auto& s = ds.sources[i];
    const auto& im = ds.images[i];
    auto row = [&](const Eigen::Vector3d* t, int dir, const char* status) {
      os << ds.curve[i] << ',' << num(s(0)) << ',' << num(s(1));
      if (two) os << ',' << num(s(2));
      if (t) {
        os << ',' << num((*t)(0)) << ',' << num((*t)(1));
        if (two) os << ',' << num((*t)(2));
      } else {
        os << ",," << (two ? "," : "");
      }
      os << ',' << dir << ',' << status << '\n';
    };
    for (std::size_t k = 0; k < im.landings.size(); ++k) row(&im.landings[k], im.landing_direction[k], "landed");
    if (im.escape) row(nullptr, im.direction, "escape");
    if (im.landings.empty() && !im.escape) row(nullptr, 0, "empty");
  }
  return os.str();
}

}  // namespace fastslow
