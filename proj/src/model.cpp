#include "fastslow/model.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

#include <json.hpp>

namespace fastslow {

using json = nlohmann::json;

DomainBox::DomainBox(Interval xi, std::vector<Interval> yi) : x(xi), y(std::move(yi)) {
  if (y.empty() || y.size() > 2) throw ConfigError("slow dimension must be 1 or 2");
  auto check = [](const Interval& iv) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi))
      throw ConfigError("domain intervals must be finite with lo < hi");
  };
  check(x);
  for (const auto& iv : y) check(iv);
}

double DomainBox::diag() const {
  double s = x.width() * x.width();
  for (const auto& iv : y) s += iv.width() * iv.width();
  return std::sqrt(s);
}

bool DomainBox::contains(const Eigen::Vector3d& p, double slack) const {
  if (p(0) < x.lo - slack || p(0) > x.hi + slack) return false;
  for (int i = 0; i < n_slow(); ++i)
    if (p(1 + i) < y[i].lo - slack || p(1 + i) > y[i].hi + slack) return false;
  return true;
}

DomainBox DomainBox::inflated(double frac) const {
  DomainBox b = *this;
  auto grow = [frac](Interval& iv) {
    const double w = iv.width();
    iv.lo -= frac * w;
    iv.hi += frac * w;
  };
  grow(b.x);
  for (auto& iv : b.y) grow(iv);
  return b;
}

int FastSlowSystem::slot(int i, int j, int k) {
  // (j, k) pairs with j + k <= 2 in a fixed order.
  static const int jk[3][3] = {{0, 2, 5}, {1, 4, -1}, {3, -1, -1}};
  if (i < 0 || i > 4 || j < 0 || k < 0 || j + k > 2) throw std::out_of_range("derivative order not tabulated");
  return i * 6 + jk[j][k];
}

FastSlowSystem::FastSlowSystem(Poly g, Poly h, DomainBox box, std::string name)
    : g_(std::move(g)), h_(std::move(h)), box_(std::move(box)), name_(std::move(name)) {
  for (const Poly* p : {&g_, &h_}) {
    if (p->uses(Var::lambda)) throw ConfigError("system polynomials must not contain lambda");
    if (box_.n_slow() == 1 && p->uses(Var::y2)) throw ConfigError("y2 used with one slow variable");
  }
  gtab_.resize(30);
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 2; ++j)
      for (int k = 0; j + k <= 2; ++k) {
        Poly d = g_;
        if (i) d = differentiate(d, Var::x, i);
        if (j) d = differentiate(d, Var::y1, j);
        if (k) d = differentiate(d, Var::y2, k);
        gtab_[static_cast<std::size_t>(slot(i, j, k))] = std::move(d);
      }
  htab_.resize(30);
  for (int i = 0; i <= 2; ++i)
    for (int j = 0; i + j <= 2; ++j)
      for (int k = 0; i + j + k <= 2; ++k) {
        Poly d = h_;
        if (i) d = differentiate(d, Var::x, i);
        if (j) d = differentiate(d, Var::y1, j);
        if (k) d = differentiate(d, Var::y2, k);
        htab_[static_cast<std::size_t>(slot(i, j, k))] = std::move(d);
      }
}

const Poly& FastSlowSystem::gd(int i, int j, int k) const { return gtab_[static_cast<std::size_t>(slot(i, j, k))]; }

const Poly& FastSlowSystem::hd(int i, int j, int k) const {
  if (i + j + k > 2) throw std::out_of_range("h derivatives are tabulated to order 2");
  return htab_[static_cast<std::size_t>(slot(i, j, k))];
}

Eigen::Vector2d FastSlowSystem::grad_y_g(const Eigen::Vector3d& p) const {
  return {gd_at(p, 0, 1, 0), n_slow() == 2 ? gd_at(p, 0, 0, 1) : 0.0};
}

FastSlowSystem SystemFamily::at(double lambda) const {
  return FastSlowSystem(substitute(g, Var::lambda, lambda), substitute(h, Var::lambda, lambda), domain, name);
}

namespace {

const Poly X = Poly::variable(Var::x);
const Poly Y = Poly::variable(Var::y1);
const Poly L = Poly::variable(Var::lambda);

Poly product_of_shifts(const std::vector<double>& shifts) {
  Poly p(1.0);
  for (double s : shifts) p = p * (X + s);
  return p;
}

SystemFamily vdp_cubic() {
  SystemFamily f;
  f.name = "vdp_cubic";
  f.g = -(pow(X, 3) - 2.0 * X + Y);
  f.h = X;
  f.domain = DomainBox({-3, 3}, {{-2, 2}});
  f.sweep = {0, 0};
  f.sim = {0.01, {2.0, -1.0, 0.0}, 50.0};
  return f;
}

SystemFamily fold_tangency() {
  const double xc = 81.0 / 100, yc = -1.0 / 4, R = 11.0 / 20, q = 1.0 / 100;
  const Poly g1 = pow(X, 3) - 2.0 * X + Y;
  const Poly g2 = pow(X - xc, 2) + pow(Y - yc, 2) - R * R;
  SystemFamily f;
  f.name = "fold_tangency";
  f.g = -(g1 * g2 + L * X + q);
  const double b = 0.5, xmax = xc + R - 0.1;
  f.h = X - (-b * pow(Y - yc, 2) + xmax);
  f.domain = DomainBox({-2.5, 2.5}, {{-2, 2}});
  f.sweep = {-0.02, 0.02};
  f.sim = {0.02, {2.0, -1.0, 0.0}, 2000.0};
  return f;
}

SystemFamily hysteresis() {
  const double a = 15.0 / 4, b = 6.0 / 10;
  const double x1 = -1, x2 = 1.0 / 25, x3 = -1;
  SystemFamily f;
  f.name = "hysteresis";
  f.g = integrate(-a * product_of_shifts({x1, x2, x3, x3}), Var::x) + L * X - b - Y;
  f.h = X - 0.7;
  f.domain = DomainBox({-2, 2}, {{-2, 2}});
  f.sweep = {-0.2, 0.2};
  f.sim = {0.05, {0.0, 0.0, 0.0}, 1000.0};
  return f;
}

SystemFamily aligned_double_limit() {
  const double a = 640.0 / 49;
  SystemFamily f;
  f.name = "aligned_double_limit";
  f.g = integrate(-a * product_of_shifts({-1.0, -13.0 / 40, 1.0 / 2, 5.0 / 4}), Var::x) + L * X - Y;
  f.h = X - 1.5;
  f.domain = DomainBox({-2, 2}, {{-2, 2}});
  f.sweep = {-0.1, 0.1};
  f.sim = {0.01, {0.0, 0.0, 0.0}, 1000.0};
  return f;
}

SystemFamily opposed_double_limit() {
  const double M = 1.5, theta = 13.0 / 40 * std::numbers::pi, xc = 0.97, yc = -0.55, q = 0.01;
  const Poly u = Poly::variable(Var::x), v = Poly::variable(Var::y1);
  const Poly r2 = u * u + v * v;
  const Poly bean = pow(r2, 3) - (u * u + r2 * r2 * v * v);
  AffineMap<double> map;
  map.A(0, 0) = M * std::cos(theta);
  map.A(0, 1) = M * std::sin(theta);
  map.A(1, 0) = -M * std::sin(theta);
  map.A(1, 1) = M * std::cos(theta);
  map.b(0) = -xc;
  map.b(1) = -yc;
  const Poly bean_xy = compose_affine(bean, map).poly;
  const Poly g1 = 0.5 * pow(X, 3) - X + Y;
  SystemFamily f;
  f.name = "opposed_double_limit";
  f.g = -(g1 * bean_xy + L * X + q);
  const double x1 = 0.7868, x2 = 1.221, y1 = -0.11, y2 = -0.74;
  const double k = (x1 - x2) / (y1 - y2);
  const double c = x1 - k * y1;
  f.h = X - (k * Y + c);
  f.domain = DomainBox({-1, 3}, {{-2, 1}});
  f.sweep = {-0.003, 0.006};
  f.sim = {0.001, {2.3, -1.0, 0.0}, 500.0};
  return f;
}

double json_number(const json& j, const char* what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_coefficient(j.get<std::string>());
  throw ConfigError(std::string("non-numeric ") + what);
}

Interval json_interval(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(what) + " must be [lo, hi]");
  return {json_number(j[0], what), json_number(j[1], what)};
}

Poly json_terms(const json& j, int n_slow, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  Poly p;
  for (const auto& t : j) {
    if (!t.is_array() || t.size() != 2 || !t[1].is_array())
      throw ConfigError(std::string(what) + ": each term is [coefficient, [exponents]]");
    const double c = json_number(t[0], "coefficient");
    const auto& e = t[1];
    if (e.size() < 1 || e.size() > 4) throw ConfigError("exponent tuple must have 1 to 4 entries");
    Exponents ex{0, 0, 0, 0};
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!e[i].is_number_integer() || e[i].get<int>() < 0)
        throw ConfigError("exponents must be non-negative integers");
      ex[i] = e[i].get<int>();
    }
    if (n_slow == 1 && ex[2] != 0) throw ConfigError("y2 exponent with n_slow = 1");
    p.add_term(c, ex);
  }
  return p;
}

json terms_json(const Poly& p) {
  json arr = json::array();
  for (const auto& t : p.terms())
    arr.push_back(json::array({t.coef, json::array({t.exps[0], t.exps[1], t.exps[2], t.exps[3]})}));
  return arr;
}

}  // namespace

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"fold_tangency", "hysteresis", "aligned_double_limit",
                                                 "opposed_double_limit", "vdp_cubic"};
  return names;
}

bool is_builtin(const std::string& name) {
  for (const auto& n : builtin_names())
    if (n == name) return true;
  return false;
}

SystemFamily builtin_family(const std::string& name) {
  if (name == "vdp_cubic") return vdp_cubic();
  if (name == "fold_tangency") return fold_tangency();
  if (name == "hysteresis") return hysteresis();
  if (name == "aligned_double_limit") return aligned_double_limit();
  if (name == "opposed_double_limit") return opposed_double_limit();
  throw ConfigError("unknown builtin system: " + name);
}

FastSlowSystem builtin(const std::string& name, double lambda) { return builtin_family(name).at(lambda); }

double parse_coefficient(const std::string& text) {
  const auto slash = text.find('/');
  auto whole_int = [&](const std::string& s) -> long long {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      throw ConfigError("non-numeric coefficient: " + text);
    }
    if (used != s.size()) throw ConfigError("non-numeric coefficient: " + text);
    return v;
  };
  if (slash != std::string::npos) {
    const long long p = whole_int(text.substr(0, slash));
    const long long q = whole_int(text.substr(slash + 1));
    if (q == 0) throw ConfigError("zero denominator: " + text);
    return static_cast<double>(p) / static_cast<double>(q);
  }
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v))
    throw ConfigError("non-numeric coefficient: " + text);
  return v;
}

SystemFamily load_config(const std::string& document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  SystemFamily f;
  const bool named_builtin = j.contains("name") && j["name"].is_string() && is_builtin(j["name"].get<std::string>());
  if (named_builtin) f = builtin_family(j["name"].get<std::string>());
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ConfigError("name must be a string");
    f.name = j["name"].get<std::string>();
  }

  int n_slow = named_builtin ? f.n_slow() : 0;
  if (j.contains("n_slow")) {
    if (!j["n_slow"].is_number_integer()) throw ConfigError("n_slow must be an integer");
    n_slow = j["n_slow"].get<int>();
  }
  if (n_slow != 1 && n_slow != 2) throw ConfigError("n_slow must be 1 or 2");

  if (j.contains("domain")) {
    const auto& d = j["domain"];
    if (!d.is_object() || !d.contains("x") || !d.contains("y")) throw ConfigError("domain needs x and y");
    std::vector<Interval> ys;
    const auto& y = d["y"];
    if (!y.is_array()) throw ConfigError("domain.y must be an array of intervals");
    if (y.size() == 2 && y[0].is_number()) {
      ys.push_back(json_interval(y, "domain.y"));
    } else {
      for (const auto& iv : y) ys.push_back(json_interval(iv, "domain.y"));
    }
    f.domain = DomainBox(json_interval(d["x"], "domain.x"), ys);
  } else if (!named_builtin) {
    throw ConfigError("domain is required");
  }
  if (f.domain.n_slow() != n_slow) throw ConfigError("domain.y dimension does not match n_slow");

  if (j.contains("g_terms")) {
    f.g = json_terms(j["g_terms"], n_slow, "g_terms");
  } else if (!named_builtin) {
    throw ConfigError("g_terms is required");
  }
  if (j.contains("h_terms")) {
    f.h = json_terms(j["h_terms"], n_slow, "h_terms");
  } else if (!named_builtin) {
    throw ConfigError("h_terms is required");
  }

  if (j.contains("sweep")) {
    f.sweep = json_interval(j["sweep"], "sweep");
    if (!(f.sweep.lo < f.sweep.hi)) throw ConfigError("empty sweep interval");
  } else if (!named_builtin) {
    f.sweep = {0, 0};
  }

  if (j.contains("sim")) {
    const auto& s = j["sim"];
    if (s.contains("epsilon")) f.sim.epsilon = json_number(s["epsilon"], "epsilon");
    if (s.contains("t_end")) f.sim.t_end = json_number(s["t_end"], "t_end");
    if (s.contains("ic")) {
      const auto& ic = s["ic"];
      if (!ic.is_array() || ic.size() < 2 || ic.size() > 3) throw ConfigError("sim.ic must have 2 or 3 entries");
      for (std::size_t i = 0; i < ic.size(); ++i) f.sim.ic(static_cast<int>(i)) = json_number(ic[i], "ic");
    }
  }
  return f;
}

std::string to_config_json(const SystemFamily& f) {
  json j;
  j["name"] = f.name;
  j["n_slow"] = f.n_slow();
  json ys = json::array();
  for (const auto& iv : f.domain.y) ys.push_back(json::array({iv.lo, iv.hi}));
  j["domain"] = {{"x", json::array({f.domain.x.lo, f.domain.x.hi})}, {"y", ys}};
  j["g_terms"] = terms_json(f.g);
  j["h_terms"] = terms_json(f.h);
  if (f.sweep.lo < f.sweep.hi) j["sweep"] = json::array({f.sweep.lo, f.sweep.hi});
  json ic = json::array();
  for (int i = 0; i <= f.n_slow(); ++i) ic.push_back(f.sim.ic(i));
  j["sim"] = {{"epsilon", f.sim.epsilon}, {"t_end", f.sim.t_end}, {"ic", ic}};
  return j.dump(2);
}

}  // namespace fastslow
