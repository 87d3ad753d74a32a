#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fastslow {

/// Polynomial variables in fixed order (x, y1, y2, lambda).
enum class Var : int { x = 0, y1 = 1, y2 = 2, lambda = 3 };

inline constexpr int kNumVars = 4;
using Exponents = std::array<int, kNumVars>;

inline const char* var_name(Var v) {
  static const char* names[] = {"x", "y1", "y2", "lambda"};
  return names[static_cast<int>(v)];
}

template <typename Scalar>
struct Term {
  Scalar coef;
  Exponents exps;
};

/// Sparse multivariate polynomial over (x, y1, y2, lambda).
///
/// Terms are kept sorted by exponent tuple with unique exponents and no zero
/// coefficients, so two polynomials with the same terms compare equal.
template <typename Scalar>
class MultiPoly {
 public:
  using Vec4 = Eigen::Matrix<Scalar, 4, 1>;

  MultiPoly() = default;
  explicit MultiPoly(Scalar c) { add_term(c, {0, 0, 0, 0}); }

  static MultiPoly variable(Var v) {
    Exponents e{0, 0, 0, 0};
    e[static_cast<int>(v)] = 1;
    return monomial(Scalar(1), e);
  }
  static MultiPoly monomial(Scalar c, const Exponents& e) {
    MultiPoly p;
    p.add_term(c, e);
    return p;
  }

  void add_term(Scalar c, const Exponents& e) {
    for (int k : e)
      if (k < 0) throw std::invalid_argument("negative exponent");
    if (c == Scalar(0)) return;
    auto it = std::lower_bound(terms_.begin(), terms_.end(), e,
                               [](const Term<Scalar>& t, const Exponents& x) { return t.exps < x; });
    if (it != terms_.end() && it->exps == e) {
      it->coef += c;
      if (it->coef == Scalar(0)) {
        terms_.erase(it);
        refresh_degrees();
      }
    } else {
      terms_.insert(it, Term<Scalar>{c, e});
      for (int v = 0; v < kNumVars; ++v) max_deg_[v] = std::max(max_deg_[v], e[v]);
    }
  }

  const std::vector<Term<Scalar>>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  int degree(Var v) const { return max_deg_[static_cast<int>(v)]; }
  int total_degree() const {
    int d = 0;
    for (const auto& t : terms_) d = std::max(d, t.exps[0] + t.exps[1] + t.exps[2] + t.exps[3]);
    return d;
  }
  bool uses(Var v) const { return degree(v) > 0; }

  /// Coefficient of an exact exponent tuple (zero if absent).
  Scalar coefficient(const Exponents& e) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), e,
                               [](const Term<Scalar>& t, const Exponents& x) { return t.exps < x; });
    return (it != terms_.end() && it->exps == e) ? it->coef : Scalar(0);
  }

  Scalar eval(Scalar x, Scalar y1 = Scalar(0), Scalar y2 = Scalar(0), Scalar lam = Scalar(0)) const {
    const Scalar z[kNumVars] = {x, y1, y2, lam};
    constexpr int kStack = 24;
    Scalar pw[kNumVars][kStack];
    bool small = true;
    for (int v = 0; v < kNumVars; ++v) {
      if (max_deg_[v] >= kStack) {
        small = false;
        break;
      }
      pw[v][0] = Scalar(1);
      for (int k = 1; k <= max_deg_[v]; ++k) pw[v][k] = pw[v][k - 1] * z[v];
    }
    Scalar s(0);
    if (small) {
      for (const auto& t : terms_)
        s += t.coef * pw[0][t.exps[0]] * pw[1][t.exps[1]] * pw[2][t.exps[2]] * pw[3][t.exps[3]];
    } else {
      using std::pow;
      for (const auto& t : terms_) {
        Scalar m = t.coef;
        for (int v = 0; v < kNumVars; ++v)
          if (t.exps[v]) m *= pow(z[v], t.exps[v]);
        s += m;
      }
    }
    return s;
  }

  Scalar operator()(const Vec4& z) const { return eval(z(0), z(1), z(2), z(3)); }

  MultiPoly& operator+=(const MultiPoly& o) { return merge(o, Scalar(1)); }
  MultiPoly& operator-=(const MultiPoly& o) { return merge(o, Scalar(-1)); }
  MultiPoly& operator*=(Scalar c) {
    if (c == Scalar(0)) {
      terms_.clear();
      refresh_degrees();
      return *this;
    }
    for (auto& t : terms_) t.coef *= c;
    return *this;
  }

  friend MultiPoly operator+(MultiPoly a, const MultiPoly& b) { return a += b; }
  friend MultiPoly operator-(MultiPoly a, const MultiPoly& b) { return a -= b; }
  friend MultiPoly operator-(MultiPoly a) { return a *= Scalar(-1); }
  friend MultiPoly operator*(MultiPoly a, Scalar c) { return a *= c; }
  friend MultiPoly operator*(Scalar c, MultiPoly a) { return a *= c; }
  friend MultiPoly operator+(MultiPoly a, Scalar c) {
    a.add_term(c, {0, 0, 0, 0});
    return a;
  }
  friend MultiPoly operator+(Scalar c, MultiPoly a) { return std::move(a) + c; }
  friend MultiPoly operator-(MultiPoly a, Scalar c) { return std::move(a) + (-c); }
  friend MultiPoly operator-(Scalar c, const MultiPoly& a) { return (-a) + c; }

  friend MultiPoly operator*(const MultiPoly& a, const MultiPoly& b) {
    MultiPoly r;
    std::vector<Term<Scalar>> raw;
    raw.reserve(a.size() * b.size());
    for (const auto& s : a.terms_)
      for (const auto& t : b.terms_) {
        Exponents e;
        for (int v = 0; v < kNumVars; ++v) e[v] = s.exps[v] + t.exps[v];
        raw.push_back({s.coef * t.coef, e});
      }
    r.assign_collect(std::move(raw));
    return r;
  }

  friend bool operator==(const MultiPoly& a, const MultiPoly& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a.terms_[i].exps != b.terms_[i].exps || a.terms_[i].coef != b.terms_[i].coef) return false;
    return true;
  }

  /// Replace the term list wholesale; duplicates are summed and zeros dropped.
  void assign_collect(std::vector<Term<Scalar>> raw) {
    std::sort(raw.begin(), raw.end(),
              [](const Term<Scalar>& l, const Term<Scalar>& r) { return l.exps < r.exps; });
    terms_.clear();
    for (const auto& t : raw) {
      if (!terms_.empty() && terms_.back().exps == t.exps)
        terms_.back().coef += t.coef;
      else
        terms_.push_back(t);
    }
    terms_.erase(std::remove_if(terms_.begin(), terms_.end(),
                                [](const Term<Scalar>& t) { return t.coef == Scalar(0); }),
                 terms_.end());
    refresh_degrees();
  }

 private:
  MultiPoly& merge(const MultiPoly& o, Scalar sign) {
    if (o.terms_.empty()) return *this;
    std::vector<Term<Scalar>> raw = terms_;
    raw.reserve(terms_.size() + o.terms_.size());
    for (const auto& t : o.terms_) raw.push_back({sign * t.coef, t.exps});
    assign_collect(std::move(raw));
    return *this;
  }

  void refresh_degrees() {
    max_deg_.fill(0);
    for (const auto& t : terms_)
      for (int v = 0; v < kNumVars; ++v) max_deg_[v] = std::max(max_deg_[v], t.exps[v]);
  }

  std::vector<Term<Scalar>> terms_;
  Exponents max_deg_{0, 0, 0, 0};
};

using Poly = MultiPoly<double>;

template <typename Scalar>
MultiPoly<Scalar> pow(const MultiPoly<Scalar>& p, int n) {
  if (n < 0) throw std::invalid_argument("negative power");
  MultiPoly<Scalar> r(Scalar(1)), base = p;
  while (n) {
    if (n & 1) r = r * base;
    n >>= 1;
    if (n) base = base * base;
  }
  return r;
}

/// Value at a coordinate tuple whose length covers every variable in use.
template <typename Scalar>
Scalar eval(const MultiPoly<Scalar>& p, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& point) {
  if (point.size() < 1 || point.size() > kNumVars)
    throw std::invalid_argument("point dimension must be between 1 and 4");
  for (int v = static_cast<int>(point.size()); v < kNumVars; ++v)
    if (p.degree(static_cast<Var>(v)) > 0)
      throw std::invalid_argument(std::string("point does not supply variable ") +
                                  var_name(static_cast<Var>(v)));
  Scalar z[kNumVars] = {Scalar(0), Scalar(0), Scalar(0), Scalar(0)};
  for (int v = 0; v < point.size(); ++v) z[v] = point(v);
  return p.eval(z[0], z[1], z[2], z[3]);
}

template <typename Scalar>
MultiPoly<Scalar> differentiate(const MultiPoly<Scalar>& p, Var v, int order = 1) {
  if (order < 1) throw std::invalid_argument("derivative order must be >= 1");
  const int iv = static_cast<int>(v);
  std::vector<Term<Scalar>> raw;
  for (const auto& t : p.terms()) {
    if (t.exps[iv] < order) continue;
    Scalar c = t.coef;
    for (int k = 0; k < order; ++k) c *= Scalar(t.exps[iv] - k);
    Exponents e = t.exps;
    e[iv] -= order;
    raw.push_back({c, e});
  }
  MultiPoly<Scalar> r;
  r.assign_collect(std::move(raw));
  return r;
}

/// Antiderivative in one variable with zero integration constant.
template <typename Scalar>
MultiPoly<Scalar> integrate(const MultiPoly<Scalar>& p, Var v) {
  const int iv = static_cast<int>(v);
  std::vector<Term<Scalar>> raw;
  for (const auto& t : p.terms()) {
    Exponents e = t.exps;
    e[iv] += 1;
    raw.push_back({t.coef / Scalar(e[iv]), e});
  }
  MultiPoly<Scalar> r;
  r.assign_collect(std::move(raw));
  return r;
}

/// Fix one variable to a value.
template <typename Scalar>
MultiPoly<Scalar> substitute(const MultiPoly<Scalar>& p, Var v, Scalar value) {
  const int iv = static_cast<int>(v);
  std::vector<Term<Scalar>> raw;
  for (const auto& t : p.terms()) {
    Exponents e = t.exps;
    Scalar c = t.coef;
    for (int k = 0; k < e[iv]; ++k) c *= value;
    e[iv] = 0;
    raw.push_back({c, e});
  }
  MultiPoly<Scalar> r;
  r.assign_collect(std::move(raw));
  return r;
}

/// Dense coefficients in x (index = power) with the other variables fixed.
template <typename Scalar>
std::vector<Scalar> x_coefficients(const MultiPoly<Scalar>& p, Scalar y1, Scalar y2, Scalar lam = Scalar(0)) {
  std::vector<Scalar> c(static_cast<std::size_t>(p.degree(Var::x)) + 1, Scalar(0));
  for (const auto& t : p.terms()) {
    Scalar m = t.coef;
    for (int k = 0; k < t.exps[1]; ++k) m *= y1;
    for (int k = 0; k < t.exps[2]; ++k) m *= y2;
    for (int k = 0; k < t.exps[3]; ++k) m *= lam;
    c[static_cast<std::size_t>(t.exps[0])] += m;
  }
  return c;
}

/// Affine change of coordinates: old = A * new + b, over (x, y1, y2, lambda).
template <typename Scalar>
struct AffineMap {
  Eigen::Matrix<Scalar, 4, 4> A = Eigen::Matrix<Scalar, 4, 4>::Identity();
  Eigen::Matrix<Scalar, 4, 1> b = Eigen::Matrix<Scalar, 4, 1>::Zero();

  static AffineMap identity() { return AffineMap{}; }

  /// Acts on the slow plane only: (y1, y2)_old = R * (y1, y2)_new + shift.
  static AffineMap slow_plane(const Eigen::Matrix<Scalar, 2, 2>& R,
                              const Eigen::Matrix<Scalar, 2, 1>& shift = Eigen::Matrix<Scalar, 2, 1>::Zero()) {
    AffineMap m;
    m.A.template block<2, 2>(1, 1) = R;
    m.b.template segment<2>(1) = shift;
    return m;
  }

  AffineMap inverse() const {
    AffineMap m;
    m.A = A.inverse();
    m.b = -m.A * b;
    return m;
  }
};

template <typename Scalar>
struct ComposeResult {
  MultiPoly<Scalar> poly;
  bool singular_linear_part = false;
};

/// q(z) = p(A z + b). Degree is preserved for invertible A.
template <typename Scalar>
ComposeResult<Scalar> compose_affine(const MultiPoly<Scalar>& p, const AffineMap<Scalar>& map) {
  using std::abs;
  ComposeResult<Scalar> out;
  const Scalar nrm = map.A.cwiseAbs().maxCoeff();
  const Scalar det = map.A.determinant();
  out.singular_linear_part = !(abs(det) > Scalar(1e-12) * nrm * nrm * nrm * nrm);

  MultiPoly<Scalar> lin[kNumVars];
  for (int i = 0; i < kNumVars; ++i) {
    lin[i] = MultiPoly<Scalar>(map.b(i));
    for (int j = 0; j < kNumVars; ++j)
      if (map.A(i, j) != Scalar(0)) lin[i] += map.A(i, j) * MultiPoly<Scalar>::variable(static_cast<Var>(j));
  }
  std::vector<MultiPoly<Scalar>> powers[kNumVars];
  for (int i = 0; i < kNumVars; ++i) {
    powers[i].push_back(MultiPoly<Scalar>(Scalar(1)));
    for (int k = 1; k <= p.degree(static_cast<Var>(i)); ++k) powers[i].push_back(powers[i].back() * lin[i]);
  }
  std::vector<Term<Scalar>> raw;
  for (const auto& t : p.terms()) {
    MultiPoly<Scalar> m(t.coef);
    for (int i = 0; i < kNumVars; ++i)
      if (t.exps[i]) m = m * powers[i][static_cast<std::size_t>(t.exps[i])];
    raw.insert(raw.end(), m.terms().begin(), m.terms().end());
  }
  out.poly.assign_collect(std::move(raw));
  return out;
}

/// Largest absolute coefficient difference over the union of term sets.
template <typename Scalar>
Scalar max_coef_diff(const MultiPoly<Scalar>& a, const MultiPoly<Scalar>& b) {
  using std::abs;
  Scalar d(0);
  for (const auto& t : a.terms()) d = std::max(d, abs(t.coef - b.coefficient(t.exps)));
  for (const auto& t : b.terms()) d = std::max(d, abs(t.coef - a.coefficient(t.exps)));
  return d;
}

}  // namespace fastslow
