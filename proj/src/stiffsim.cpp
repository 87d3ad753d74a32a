#include "fastslow/stiffsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fastslow/format.hpp"
#include "fastslow/singdyn.hpp"

namespace fastslow {

const char* to_string(SimStatus s) {
  switch (s) {
    case SimStatus::completed: return "completed";
    case SimStatus::escaped: return "escaped";
    case SimStatus::step_underflow: return "step_underflow";
    case SimStatus::step_limit: return "step_limit";
  }
  return "?";
}

Eigen::VectorXd SimTrajectory::at(double tq) const {
  if (t.empty()) throw std::out_of_range("empty trajectory");
  if (tq <= t.front()) return z.front();
  if (tq >= t.back()) return z.back();
  const auto k = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), tq) - t.begin()) - 1;
  const double h = t[k + 1] - t[k];
  const double s = (tq - t[k]) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * z[k] + (s3 - 2 * s2 + s) * h * dz[k] + (-2 * s3 + 3 * s2) * z[k + 1] +
         (s3 - s2) * h * dz[k + 1];
}

namespace {

const double kD = 1.0 / (2.0 + std::sqrt(2.0));
const double kE32 = 6.0 + std::sqrt(2.0);

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

RosenbrockStep rosenbrock_step(const OdeProblem& p, double t, const Eigen::VectorXd& z, const Eigen::VectorXd& f0,
                               double h) {
  const Eigen::Index n = z.size();
  const Eigen::MatrixXd J = p.jac(t, z);
  const Eigen::VectorXd T = p.dfdt ? p.dfdt(t, z) : Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(n, n) - h * kD * J;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(W);

  const Eigen::VectorXd k1 = lu.solve(f0 + h * kD * T);
  const Eigen::VectorXd f1 = p.f(t + 0.5 * h, z + 0.5 * h * k1);
  const Eigen::VectorXd k2 = lu.solve(f1 - k1) + k1;
  RosenbrockStep out;
  out.z = z + h * k2;
  out.f_new = p.f(t + h, out.z);
  const Eigen::VectorXd k3 = lu.solve(out.f_new - kE32 * (k2 - f1) - 2.0 * (k1 - f0) + h * kD * T);
  out.error = (h / 6.0) * (k1 - 2.0 * k2 + k3);
  return out;
}

SimTrajectory integrate_ode(const OdeProblem& p, const Eigen::VectorXd& z0, double t0, double t_end,
                            const SimOptions& opt) {
  if (!(t_end > t0)) throw std::invalid_argument("t_end must exceed the start time");
  if (!(opt.rtol > 0) || !(opt.atol > 0)) throw std::invalid_argument("tolerances must be positive");
  SimTrajectory tr;
  const double span = t_end - t0;
  const double h_max = opt.h_max > 0 ? opt.h_max : 0.1 * span;
  const double threshold = opt.atol / opt.rtol;

  double t = t0;
  Eigen::VectorXd z = z0;
  Eigen::VectorXd f = p.f(t, z);
  tr.t.push_back(t);
  tr.z.push_back(z);
  tr.dz.push_back(f);

  auto weights = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.cwiseAbs().cwiseMax(b.cwiseAbs()).cwiseMax(threshold);
  };

  // initial step from the size of the field relative to the solution scale
  double h;
  {
    const double rh = (f.cwiseAbs().cwiseQuotient(weights(z, z))).maxCoeff() / (0.8 * std::cbrt(opt.rtol));
    h = rh > 0 ? std::min(h_max, 1.0 / rh) : h_max;
    h = std::min(h, span);
  }

  bool failed = false;
  while (t < t_end) {
    const double h_min = 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (tr.stats.steps >= opt.max_steps) {
      tr.status = SimStatus::step_limit;
      tr.message = "step limit reached at t = " + num(t);
      break;
    }
    if (h < h_min) {
      tr.status = SimStatus::step_underflow;
      tr.message = "step size underflow at t = " + num(t);
      break;
    }
    bool last = false;
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      last = true;
    }
    const auto st = rosenbrock_step(p, t, z, f, h);
    ++tr.stats.jacobians;
    ++tr.stats.lu;
    double err = std::numeric_limits<double>::infinity();
    if (finite(st.z) && finite(st.f_new)) err = (st.error.cwiseQuotient(weights(z, st.z))).cwiseAbs().maxCoeff() / opt.rtol;

    if (!(err <= 1.0)) {
      ++tr.stats.rejects;
      const double shrink = std::isfinite(err) ? std::max(0.5, 0.8 * std::cbrt(1.0 / err)) : 0.5;
      h *= shrink;
      failed = true;
      continue;
    }

    ++tr.stats.steps;
    t = last ? t_end : t + h;
    z = st.z;
    f = st.f_new;
    tr.t.push_back(t);
    tr.z.push_back(z);
    tr.dz.push_back(f);
    if (p.inside && !p.inside(z)) {
      tr.status = SimStatus::escaped;
      tr.message = "state left the domain at t = " + num(t);
      break;
    }
    double grow = 1.25 * std::cbrt(err);
    grow = failed ? 1.0 : 1.0 / std::max(grow, 0.2);
    h = std::min(h_max, h * grow);
    failed = false;
  }
  return tr;
}

SimTrajectory integrate(const FastSlowSystem& sys, double epsilon, const Eigen::Vector2d& z0, double t_end,
                        const SimOptions& opt) {
  if (sys.n_slow() != 1) throw ConfigError("simulation needs one slow variable");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (!sys.domain().contains({z0(0), z0(1), 0.0})) throw ConfigError("initial state outside the domain");
  const DomainBox escape = sys.domain().inflated(0.5);
  const double inv = 1.0 / epsilon;

  OdeProblem p;
  p.f = [&sys, inv](double, const Eigen::VectorXd& z) {
    const Eigen::Vector3d q(z(0), z(1), 0.0);
    Eigen::VectorXd out(2);
    out << inv * sys.g_at(q), sys.h_at(q);
    return out;
  };
  p.jac = [&sys, inv](double, const Eigen::VectorXd& z) {
    const Eigen::Vector3d q(z(0), z(1), 0.0);
    Eigen::MatrixXd J(2, 2);
    J << inv * sys.gd_at(q, 1), inv * sys.gd_at(q, 0, 1), sys.hd_at(q, 1), sys.hd_at(q, 0, 1);
    return J;
  };
  p.inside = [&escape](const Eigen::VectorXd& z) { return escape.contains({z(0), z(1), 0.0}); };

  auto tr = integrate_ode(p, Eigen::VectorXd(z0), 0.0, t_end, opt);
  tr.epsilon = epsilon;
  return tr;
}

Section default_section(const FastSlowSystem& sys) {
  Section s;
  s.value = sys.domain().x.mid();
  if (sys.n_slow() != 1) return s;
  const auto ro = detect_relaxation_oscillation(sys);
  if (!ro || ro->jumps.empty()) return s;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& j : ro->jumps) {
    lo = std::min(lo, j.to(0));
    hi = std::max(hi, j.to(0));
  }
  s.value = 0.5 * (lo + hi);
  return s;
}

std::optional<CycleStats> cycle_stats(const SimTrajectory& tr, const Section& section, double transient) {
  const std::size_t n = tr.size();
  if (n < 2) return std::nullopt;
  const auto first = std::min(n - 1, static_cast<std::size_t>(transient * static_cast<double>(n)));
  CycleStats cs;
  cs.x_min = std::numeric_limits<double>::infinity();
  cs.x_max = -cs.x_min;
  for (std::size_t i = first; i < n; ++i) {
    cs.x_min = std::min(cs.x_min, tr.z[i](0));
    cs.x_max = std::max(cs.x_max, tr.z[i](0));
  }
  cs.x_amplitude = cs.x_max - cs.x_min;

  const double dir = section.direction >= 0 ? 1.0 : -1.0;
  for (std::size_t i = first; i + 1 < n; ++i) {
    const double a = dir * (tr.z[i](0) - section.value);
    const double b = dir * (tr.z[i + 1](0) - section.value);
    if (!(a < 0 && b >= 0)) continue;
    // refine on the Hermite interpolant
    double lo = tr.t[i], hi = tr.t[i + 1];
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (dir * (tr.at(mid)(0) - section.value) < 0)
        lo = mid;
      else
        hi = mid;
    }
    cs.crossing_times.push_back(0.5 * (lo + hi));
  }
  cs.crossings = static_cast<int>(cs.crossing_times.size());
  if (cs.crossings < 5) return std::nullopt;

  std::vector<double> gaps;
  for (std::size_t i = 1; i < cs.crossing_times.size(); ++i) gaps.push_back(cs.crossing_times[i] - cs.crossing_times[i - 1]);
  double mean = 0;
  for (double g : gaps) mean += g;
  mean /= static_cast<double>(gaps.size());
  double var = 0;
  for (double g : gaps) var += (g - mean) * (g - mean);
  var /= static_cast<double>(gaps.size());
  if (!(mean > 0) || std::sqrt(var) > 0.1 * mean) return std::nullopt;
  cs.period = mean;
  return cs;
}

std::vector<Eigen::Vector2d> fast_landings(const FastSlowSystem& sys, const SimTrajectory& tr, double frac,
                                           double transient) {
  const std::size_t n = tr.size();
  std::vector<Eigen::Vector2d> out;
  if (n < 2) return out;
  const auto first = std::min(n - 1, static_cast<std::size_t>(transient * static_cast<double>(n)));
  std::vector<double> g(n, 0.0);
  double g_max = 0;
  for (std::size_t i = first; i < n; ++i) {
    g[i] = std::abs(sys.g_at({tr.z[i](0), tr.z[i](1), 0.0}));
    g_max = std::max(g_max, g[i]);
  }
  if (!(g_max > 0)) return out;
  const double cut = frac * g_max;
  bool fast = false;
  for (std::size_t i = first; i < n; ++i) {
    const bool now = g[i] > cut;
    if (fast && !now) out.emplace_back(tr.z[i](0), tr.z[i](1));
    fast = now;
  }
  return out;
}

std::string sim_csv(const SimTrajectory& tr) {
  std::ostringstream os;
  const auto dim = tr.z.empty() ? 2 : tr.z.front().size();
  os << "t,x,y1" << (dim > 2 ? ",y2" : "") << "\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << num(tr.t[i]);
    for (Eigen::Index k = 0; k < tr.z[i].size(); ++k) os << ',' << num(tr.z[i](k));
    os << '\n';
  }
  return os.str();
}

std::string stats_json(const SimTrajectory& tr, const std::optional<CycleStats>& cs) {
  nlohmann::ordered_json j;
  j["epsilon"] = tr.epsilon;
  j["status"] = to_string(tr.status);
  if (!tr.message.empty()) j["message"] = tr.message;
  j["t_final"] = tr.t.empty() ? 0.0 : tr.t.back();
  j["samples"] = tr.size();
  j["solver"] = {{"steps", tr.stats.steps},
                 {"rejects", tr.stats.rejects},
                 {"jacobians", tr.stats.jacobians},
                 {"lu", tr.stats.lu}};
  if (cs) {
    j["cycle"] = {{"period", cs->period},
                  {"x_amplitude", cs->x_amplitude},
                  {"x_min", cs->x_min},
                  {"x_max", cs->x_max},
                  {"crossings", cs->crossings}};
  } else {
    j["cycle"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace fastslow
