// Command-line front end: analyze, trace, sweep, simulate.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fastslow/classify.hpp"
#include "fastslow/critset.hpp"
#include "fastslow/format.hpp"
#include "fastslow/singdyn.hpp"
#include "fastslow/stiffsim.hpp"
#include "fastslow/umbra.hpp"

#ifndef FASTSLOW_VERSION
#define FASTSLOW_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace fastslow;

namespace {

struct Common {
  std::string builtin_name;
  std::string config_path;
  std::optional<double> lambda;
  std::string out = ".";
  int jobs = 1;
};

struct Run {
  std::string command;
  Common common;
  json options = json::object();
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void write(const std::string& name, const std::string& text) {
    const fs::path p = fs::path(common.out) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + p.string());
    f << text;
    outputs.push_back(p.string());
  }

  void manifest() {
    json j;
    j["command"] = command;
    j["builtin"] = common.builtin_name.empty() ? json(nullptr) : json(common.builtin_name);
    j["config"] = common.config_path.empty() ? json(nullptr) : json(common.config_path);
    j["options"] = options;
    j["outputs"] = outputs;
    j["version"] = FASTSLOW_VERSION;
    j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const fs::path p = fs::path(common.out) / "manifest.json";
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + p.string());
    f << j.dump(2) << "\n";
  }
};

SystemFamily load_family(const Common& c) {
  if (c.builtin_name.empty() == c.config_path.empty()) throw ConfigError("give exactly one of --builtin or --config");
  if (!c.builtin_name.empty()) return builtin_family(c.builtin_name);
  std::ifstream f(c.config_path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config " + c.config_path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_config(ss.str());
}

void prepare_out(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + c.out);
}

json point(const Eigen::Vector2d& p) { return json::array({p(0), p(1)}); }
json point(const Eigen::Vector3d& p, int n_slow) {
  json a = json::array({p(0), p(1)});
  if (n_slow == 2) a.push_back(p(2));
  return a;
}

// ---- analyze ---------------------------------------------------------------

void analyze_n1(Run& run, const FastSlowSystem& sys) {
  const auto cs = trace_branches(sys);
  if (!cs.complete) throw NumericalError("branch continuation stalled");
  run.write("branches.csv", branches_csv(cs));
  const auto ds = umbra_set(sys, cs.folds);
  run.write("umbra.csv", drop_set_csv(sys, ds));

  json folds = json::array();
  for (std::size_t i = 0; i < cs.folds.size(); ++i) {
    const auto& f = cs.folds[i];
    const auto cls = classify_local_n1(sys, f.p.head<2>());
    json landings = json::array();
    for (const auto& l : ds.images[i].landings) landings.push_back(point(Eigen::Vector2d(l.head<2>())));
    folds.push_back({{"point", point(Eigen::Vector2d(f.p.head<2>()))},
                     {"class", to_string(cls.tag)},
                     {"g_y", cls.g_y},
                     {"g_xx", cls.g_xx},
                     {"g_xxx", cls.g_xxx},
                     {"direction", ds.images[i].direction},
                     {"landings", landings},
                     {"escape", ds.images[i].escape}});
  }
  json dl = json::array();
  for (const auto& d : detect_double_limits(sys, cs.folds))
    dl.push_back({{"folds", {d.first, d.second}},
                  {"label", d.label},
                  {"subcase", d.subcase},
                  {"interaction", to_string(d.interaction)},
                  {"alignment", d.alignment}});
  json cls;
  cls["n_slow"] = 1;
  cls["folds"] = folds;
  cls["double_limits"] = dl;
  run.write("classification.json", cls.dump(2) + "\n");

  const auto rep = persistence_report(sys);
  json pr;
  pr["persistent"] = rep.persistent;
  json df = json::array();
  for (std::size_t i = 0; i < rep.degenerate_folds.size(); ++i) {
    const std::string& label = rep.degenerate_fold_labels[i];
    const char* group = label.find("tangency") != std::string::npos ? "D1" : "D2";
    df.push_back({{"point", point(rep.degenerate_folds[i])}, {"class", label}, {"group", group}});
  }
  pr["degenerate_folds"] = df;
  json d3 = json::array();
  for (const auto& d : rep.double_limits)
    d3.push_back({{"points", {point(Eigen::Vector2d(d.p1.head<2>())), point(Eigen::Vector2d(d.p2.head<2>()))}},
                  {"label", d.label}});
  pr["double_limits"] = d3;
  json e1 = json::array();
  for (const auto& p : rep.tangencies) e1.push_back(point(p));
  pr["tangencies"] = e1;
  json e2 = json::array();
  for (const auto& [a, b] : rep.co_equilibria) e2.push_back({point(a), point(b)});
  pr["co_equilibria"] = e2;
  json m = json::array();
  for (std::size_t i = 0; i < rep.fold_projections.size(); ++i)
    m.push_back({{"equilibrium", point(rep.fold_projections[i].first)},
                 {"fold", point(rep.fold_projections[i].second)},
                 {"subcase", rep.fold_projection_subcases[i]}});
  pr["fold_projections"] = m;
  const auto ro = detect_relaxation_oscillation(sys);
  if (ro)
    pr["relaxation_oscillation"] = {{"period", ro->period}, {"simple", ro->simple}, {"violations", ro->violations}};
  else
    pr["relaxation_oscillation"] = nullptr;
  run.write("persistence.json", pr.dump(2) + "\n");
}

void analyze_n2(Run& run, const FastSlowSystem& sys) {
  const auto curves = trace_fold_curves(sys);
  run.write("fold_curves.csv", fold_curves_csv(curves));
  run.write("umbra.csv", drop_set_csv(sys, umbra_set(sys, curves)));
  json arr = json::array();
  for (const auto& c : curves) {
    json cusps = json::array();
    for (const auto& p : c.cusps) {
      const auto q = cusp_quantities_n2(sys, p);
      cusps.push_back({{"point", point(p, 2)},
                       {"class", classify_local_n2(sys, p)},
                       {"mu", point(q.mu)},
                       {"W", q.W},
                       {"tangency", q.tangency}});
    }
    json tails = json::array();
    for (const auto& p : c.swallowtails) tails.push_back(point(p, 2));
    json tang = json::array();
    for (const auto& p : c.pts) {
      const auto label = classify_local_n2(sys, p);
      if (label.find("tangency") != std::string::npos) tang.push_back({{"point", point(p, 2)}, {"class", label}});
    }
    arr.push_back({{"samples", c.pts.size()},
                   {"closed", c.closed},
                   {"cusps", cusps},
                   {"swallowtails", tails},
                   {"fold_tangencies", tang}});
  }
  json cls;
  cls["n_slow"] = 2;
  cls["fold_curves"] = arr;
  run.write("classification.json", cls.dump(2) + "\n");
}

// ---- trace -----------------------------------------------------------------

std::string svg(const FastSlowSystem& sys, const CriticalSetN1& cs, const SingularTrajectory& tr) {
  const auto& box = sys.domain();
  const double W = 640, H = 640, pad = 20;
  auto sx = [&](double x) { return pad + (x - box.x.lo) / box.x.width() * (W - 2 * pad); };
  auto sy = [&](double y) { return H - pad - (y - box.y[0].lo) / box.y[0].width() * (H - 2 * pad); };
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  auto polyline = [&](const std::vector<Eigen::Vector2d>& pts, const char* style) {
    if (pts.size() < 2) return;
    os << "<polyline fill=\"none\" " << style << " points=\"";
    for (const auto& p : pts) os << sx(p(0)) << ',' << sy(p(1)) << ' ';
    os << "\"/>\n";
  };
  // critical set: horizontal axis is x, vertical is y
  for (const auto& b : cs.branches) {
    const char* style = b.stability == Stability::attracting ? "stroke=\"black\" stroke-width=\"2\""
                                                             : "stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"";
    polyline(b.pts, style);
  }
  // nullcline h = 0 by marching squares
  const int N = 160;
  auto hv = [&](int i, int j) {
    return sys.h_at({box.x.lo + box.x.width() * i / N, box.y[0].lo + box.y[0].width() * j / N, 0.0});
  };
  std::vector<double> grid((N + 1) * (N + 1));
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) grid[i * (N + 1) + j] = hv(i, j);
  os << "<g stroke=\"blue\" stroke-width=\"1.5\" stroke-dasharray=\"4,3\">\n";
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double v[4] = {grid[i * (N + 1) + j], grid[(i + 1) * (N + 1) + j], grid[(i + 1) * (N + 1) + j + 1],
                           grid[i * (N + 1) + j + 1]};
      const int ci[4][2] = {{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}};
      std::vector<Eigen::Vector2d> hits;
      for (int e = 0; e < 4; ++e) {
        const double a = v[e], b = v[(e + 1) % 4];
        if ((a < 0) == (b < 0)) continue;
        const double s = a / (a - b);
        const double gi = ci[e][0] + s * (ci[(e + 1) % 4][0] - ci[e][0]);
        const double gj = ci[e][1] + s * (ci[(e + 1) % 4][1] - ci[e][1]);
        hits.emplace_back(box.x.lo + box.x.width() * gi / N, box.y[0].lo + box.y[0].width() * gj / N);
      }
      for (std::size_t k = 0; k + 1 < hits.size(); k += 2)
        os << "<line x1=\"" << sx(hits[k](0)) << "\" y1=\"" << sy(hits[k](1)) << "\" x2=\"" << sx(hits[k + 1](0))
           << "\" y2=\"" << sy(hits[k + 1](1)) << "\"/>\n";
    }
  os << "</g>\n";
  // umbrae: landing points of every fold
  const auto ds = umbra_set(sys, cs.folds);
  for (std::size_t i = 0; i < ds.sources.size(); ++i)
    for (const auto& l : ds.images[i].landings)
      os << "<circle cx=\"" << sx(l(0)) << "\" cy=\"" << sy(l(1)) << "\" r=\"3\" fill=\"gray\"/>\n";
  // trajectory
  const char* traj = "stroke=\"red\" stroke-width=\"2\"";
  if (tr.initial_relaxation) polyline({tr.initial_relaxation->from, tr.initial_relaxation->to}, traj);
  for (std::size_t k = 0; k < tr.segments.size(); ++k) {
    polyline(tr.segments[k].pts, traj);
    if (k < tr.jumps.size()) polyline({tr.jumps[k].from, tr.jumps[k].to}, traj);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast-slow singular bifurcation analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FASTSLOW_VERSION);

  Common common;
  std::vector<double> ic, interval;
  std::optional<double> epsilon, t_end;
  double rtol = 1e-6, atol = 1e-9;
  std::string svg_path;

  auto add_common = [&](CLI::App* sub) {
    auto* b = sub->add_option("--builtin", common.builtin_name, "builtin system name");
    auto* c = sub->add_option("--config", common.config_path, "config JSON path");
    b->excludes(c);
    sub->add_option("--lambda", common.lambda, "parameter value");
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* analyze = app.add_subcommand("analyze", "critical set, classification and persistence");
  add_common(analyze);
  auto* trace = app.add_subcommand("trace", "singular trajectory from a start point");
  add_common(trace);
  trace->add_option("--ic", ic, "start point X Y")->expected(2);
  trace->add_option("--svg", svg_path, "write an SVG picture");
  auto* sweep_cmd = app.add_subcommand("sweep", "bifurcation events over a parameter interval");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--interval", interval, "LO HI")->expected(2);
  auto* simulate = app.add_subcommand("simulate", "stiff simulation at positive epsilon");
  add_common(simulate);
  simulate->add_option("--epsilon", epsilon, "scale separation");
  simulate->add_option("--ic", ic, "initial state X Y")->expected(2);
  simulate->add_option("--t-end", t_end, "final time");
  simulate->add_option("--rtol", rtol, "relative tolerance");
  simulate->add_option("--atol", atol, "absolute tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Run run;
  run.common = common;
  try {
    const SystemFamily fam = load_family(common);
    const double lambda = common.lambda.value_or(0.0);
    prepare_out(common);
    run.options["lambda"] = lambda;
    run.options["jobs"] = common.jobs;
    int status = 0;

    if (analyze->parsed()) {
      run.command = "analyze";
      const auto sys = fam.at(lambda);
      if (sys.n_slow() == 1)
        analyze_n1(run, sys);
      else
        analyze_n2(run, sys);
    } else if (trace->parsed()) {
      run.command = "trace";
      const auto sys = fam.at(lambda);
      if (sys.n_slow() != 1) throw ConfigError("trace needs one slow variable");
      const Eigen::Vector2d start = ic.size() == 2 ? Eigen::Vector2d(ic[0], ic[1]) : Eigen::Vector2d(fam.sim.ic.head<2>());
      if (!sys.domain().contains({start(0), start(1), 0.0})) throw ConfigError("start point outside the domain");
      run.options["ic"] = {start(0), start(1)};
      const SlowFlow flow(sys);
      const auto tr = flow.trace(start);
      run.write("trajectory.csv", trajectory_csv(tr));
      if (!svg_path.empty()) {
        std::ofstream f(svg_path, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + svg_path);
        f << svg(sys, flow.critical_set(), tr);
        run.outputs.push_back(svg_path);
      }
      run.options["end"] = to_string(tr.end);
    } else if (sweep_cmd->parsed()) {
      run.command = "sweep";
      SystemFamily f = fam;
      if (interval.size() == 2) f.sweep = {interval[0], interval[1]};
      if (!(f.sweep.hi > f.sweep.lo)) throw ConfigError("empty sweep interval");
      if (f.n_slow() != 1) throw ConfigError("sweep needs one slow variable");
      run.options["interval"] = {f.sweep.lo, f.sweep.hi};
      SweepOptions opt;
      opt.jobs = common.jobs;
      run.write("events.json", events_json(sweep(f, opt)));
    } else if (simulate->parsed()) {
      run.command = "simulate";
      const auto sys = fam.at(lambda);
      const double eps = epsilon.value_or(fam.sim.epsilon);
      const double T = t_end.value_or(fam.sim.t_end);
      const Eigen::Vector2d z0 = ic.size() == 2 ? Eigen::Vector2d(ic[0], ic[1]) : Eigen::Vector2d(fam.sim.ic.head<2>());
      run.options["epsilon"] = eps;
      run.options["ic"] = {z0(0), z0(1)};
      run.options["t_end"] = T;
      run.options["rtol"] = rtol;
      run.options["atol"] = atol;
      SimOptions so;
      so.rtol = rtol;
      so.atol = atol;
      const auto tr = integrate(sys, eps, z0, T, so);
      std::optional<CycleStats> cs;
      if (tr.status == SimStatus::completed) cs = cycle_stats(tr, default_section(sys));
      run.write("simulation.csv", sim_csv(tr));
      run.write("stats.json", stats_json(tr, cs));
      if (tr.status != SimStatus::completed) {
        std::cerr << "simulation stopped: " << tr.message << "\n";
        status = 3;
      }
    }
    run.manifest();
    return status;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
