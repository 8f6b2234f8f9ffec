#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "core.hpp"
#include "phifun.hpp"

namespace expflow {

using Rational = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Exact polynomial layer

/// Polynomial in τ with exact coefficients, lowest degree first.
using RationalPoly = std::vector<Rational>;

inline RationalPoly poly_mul(const RationalPoly& a, const RationalPoly& b) {
  if (a.empty() || b.empty()) return {};
  RationalPoly r(a.size() + b.size() - 1, Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

/// (1/j!)·∏_{k<j}(τ + k), i.e. (−1)^j·binom(−τ, j).
inline RationalPoly rising_binomial_poly(int j) {
  RationalPoly p{Rational(1)};
  for (int k = 0; k < j; ++k) p = poly_mul(p, RationalPoly{Rational(k), Rational(1)});
  Rational fact = 1;
  for (int i = 2; i <= j; ++i) fact *= i;
  for (auto& c : p) c /= fact;
  return p;
}

/// ∫₀¹ p(τ) dτ, exactly.
inline Rational poly_integral01(const RationalPoly& p) {
  Rational s = 0;
  for (std::size_t m = 0; m < p.size(); ++m) s += p[m] / Rational(static_cast<long>(m + 1));
  return s;
}

/// Exact φ-expansion: pairs (k, α) with ∫₀¹ e^{(1−τ)z} p(τ) dτ = Σ α φ_k(z).
using ExactPhiExpansion = std::vector<std::pair<int, Rational>>;

/// Maps τ^m ↦ m!·φ_{m+1}.
inline ExactPhiExpansion poly_to_phi(const RationalPoly& p) {
  ExactPhiExpansion out;
  Rational fact = 1;
  for (std::size_t m = 0; m < p.size(); ++m) {
    if (m > 0) fact *= static_cast<long>(m);
    if (p[m] != 0) out.emplace_back(static_cast<int>(m) + 1, p[m] * fact);
  }
  return out;
}

inline PhiCombo to_combo(const ExactPhiExpansion& e) {
  std::vector<PhiTerm> terms;
  for (const auto& [k, a] : e) terms.push_back({k, a.convert_to<double>(), 1.0});
  return PhiCombo(std::move(terms));
}

/// Exact value Σ α/k! of an expansion at z = 0.
inline Rational value_at_zero(const ExactPhiExpansion& e) {
  Rational s = 0;
  for (const auto& [k, a] : e) {
    Rational f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    s += a / f;
  }
  return s;
}

inline constexpr int kMaxAdamsSteps = 6;

/// γ_j(z) = (−1)^j ∫₀¹ e^{(1−τ)z} binom(−τ, j) dτ, 0 ≤ j ≤ 6.
inline ExactPhiExpansion gamma_exact(int j) {
  if (j < 0 || j > kMaxAdamsSteps) throw ArgumentError("gamma_coeffs: j must lie in [0, 6]");
  return poly_to_phi(rising_binomial_poly(j));
}

/// γ̂_{j+1}(z) = (−1)^{j+1} ∫₀¹ e^{(1−τ)z} τ·binom(−τ, j) dτ, 2 ≤ j+1 ≤ 6.
inline ExactPhiExpansion gamma_hat_exact(int jp1) {
  if (jp1 < 2 || jp1 > kMaxAdamsSteps) throw ArgumentError("gamma_hat_coeffs: index must lie in [2, 6]");
  RationalPoly p = poly_mul(RationalPoly{Rational(0), Rational(-1)}, rising_binomial_poly(jp1 - 1));
  return poly_to_phi(p);
}

inline PhiCombo gamma_coeffs(int j) { return to_combo(gamma_exact(j)); }
inline PhiCombo gamma_hat_coeffs(int jp1) { return to_combo(gamma_hat_exact(jp1)); }

// ---------------------------------------------------------------------------
// Tableau file format

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline Rational parse_rational(const std::string& text) {
  const std::string t = trim(text);
  auto valid_int = [](const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    return std::all_of(s.begin() + static_cast<long>(i), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  const auto slash = t.find('/');
  std::string num = t.substr(0, slash);
  std::string den = slash == std::string::npos ? "1" : t.substr(slash + 1);
  if (!num.empty() && num[0] == '+') num.erase(0, 1);
  if (!valid_int(num) || !valid_int(den)) throw ArgumentError("malformed rational '" + t + "'");
  boost::multiprecision::cpp_int n(num), d(den);
  if (d == 0) throw ArgumentError("zero denominator in '" + t + "'");
  return Rational(n, d);
}

inline std::string format_rational(const Rational& r) {
  std::ostringstream os;
  os << boost::multiprecision::numerator(r);
  if (boost::multiprecision::denominator(r) != 1) os << '/' << boost::multiprecision::denominator(r);
  return os.str();
}

}  // namespace detail

struct ExactTerm {
  int k = 0;
  Rational alpha = 0;
  Rational scale = 1;
  friend bool operator==(const ExactTerm&, const ExactTerm&) = default;
};
using ExactCombo = std::vector<ExactTerm>;

enum class Family { exprk, exprb };

inline std::string_view to_string(Family f) { return f == Family::exprk ? "exprk" : "exprb"; }

/// Parsed tableau file with exact coefficients. Indices are 1-based as in the
/// file. Absent a/b entries are zero.
struct TableauFile {
  struct Embedded {
    int order = 0;
    std::string label;
    std::map<int, ExactCombo> b;
    friend bool operator==(const Embedded&, const Embedded&) = default;
  };

  std::vector<std::string> comments;
  std::string name;
  Family family = Family::exprk;
  int stages = 0;
  int order = 0;
  std::string citation;
  std::vector<Rational> c;
  std::map<std::pair<int, int>, ExactCombo> a;
  std::map<int, ExactCombo> b;
  std::map<int, Embedded> embedded;

  friend bool operator==(const TableauFile&, const TableauFile&) = default;
};

namespace detail {

// "[(k, alpha), (k, alpha, scale)] scale r"
inline ExactCombo parse_combo(const std::string& text, const std::string& where) {
  const auto open = text.find('['), close = text.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw ArgumentError(where + ": expected a bracketed term list");
  }
  Rational row_scale = 1;
  const std::string tail = trim(text.substr(close + 1));
  if (!tail.empty()) {
    if (tail.rfind("scale", 0) != 0) throw ArgumentError(where + ": unexpected text '" + tail + "'");
    row_scale = parse_rational(tail.substr(5));
  }
  ExactCombo out;
  std::string body = text.substr(open + 1, close - open - 1);
  std::size_t pos = 0;
  while (true) {
    const auto lp = body.find('(', pos);
    if (lp == std::string::npos) {
      if (!trim(body.substr(pos)).empty() && trim(body.substr(pos)) != ",")
        throw ArgumentError(where + ": malformed term list");
      break;
    }
    const auto rp = body.find(')', lp);
    if (rp == std::string::npos) throw ArgumentError(where + ": unbalanced parenthesis");
    std::vector<std::string> parts;
    std::stringstream ss(body.substr(lp + 1, rp - lp - 1));
    for (std::string item; std::getline(ss, item, ',');) parts.push_back(trim(item));
    if (parts.size() != 2 && parts.size() != 3) throw ArgumentError(where + ": a term needs 2 or 3 entries");
    ExactTerm t;
    try {
      std::size_t used = 0;
      t.k = std::stoi(parts[0], &used);
      if (used != parts[0].size()) throw std::invalid_argument("k");
    } catch (const std::exception&) {
      throw ArgumentError(where + ": malformed phi index '" + parts[0] + "'");
    }
    if (t.k < 0 || t.k > kMaxPhiIndex) throw ArgumentError(where + ": phi index out of range");
    t.alpha = parse_rational(parts[1]);
    t.scale = parts.size() == 3 ? parse_rational(parts[2]) : row_scale;
    out.push_back(std::move(t));
    pos = rp + 1;
  }
  return out;
}

inline std::string format_combo(const ExactCombo& combo) {
  std::string s = "[";
  const Rational row_scale = combo.empty() ? Rational(1) : combo.front().scale;
  for (std::size_t i = 0; i < combo.size(); ++i) {
    const auto& t = combo[i];
    if (i) s += ", ";
    s += "(" + std::to_string(t.k) + ", " + format_rational(t.alpha);
    if (t.scale != row_scale) s += ", " + format_rational(t.scale);
    s += ")";
  }
  s += "]";
  if (row_scale != 1) s += " scale " + format_rational(row_scale);
  return s;
}

inline int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    int v = std::stoi(trim(s), &used);
    if (used != trim(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError(where + ": expected an integer, got '" + trim(s) + "'");
  }
}

}  // namespace detail

/// Parses one tableau in the text format. Lines starting with '#' are kept as
/// comments; blank lines are ignored.
inline TableauFile parse_tableau(std::string_view text) {
  TableauFile tf;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  bool have_name = false, have_family = false, have_stages = false, have_order = false, have_c = false;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    const std::string where = "tableau line " + std::to_string(lineno);
    if (line[0] == '#') {
      tf.comments.push_back(line);
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ArgumentError(where + ": missing ':'");
    const std::string key = detail::trim(line.substr(0, colon));
    const std::string value = detail::trim(line.substr(colon + 1));
    std::istringstream ks(key);
    std::vector<std::string> kw;
    for (std::string w; ks >> w;) kw.push_back(w);

    if (key == "name") {
      tf.name = value;
      have_name = true;
    } else if (key == "family") {
      if (value == "exprk") tf.family = Family::exprk;
      else if (value == "exprb") tf.family = Family::exprb;
      else throw ArgumentError(where + ": family must be exprk or exprb");
      have_family = true;
    } else if (key == "stages") {
      tf.stages = detail::parse_int(value, where);
      have_stages = true;
    } else if (key == "order") {
      tf.order = detail::parse_int(value, where);
      have_order = true;
    } else if (key == "citation") {
      tf.citation = value;
    } else if (key == "c") {
      std::stringstream ss(value);
      for (std::string item; std::getline(ss, item, ',');) tf.c.push_back(detail::parse_rational(item));
      have_c = true;
    } else if (kw.size() == 3 && kw[0] == "a") {
      const int i = detail::parse_int(kw[1], where), j = detail::parse_int(kw[2], where);
      if (j >= i || j < 1) throw ArgumentError(where + ": a i j requires 1 <= j < i (explicit scheme)");
      tf.a[{i, j}] = detail::parse_combo(value, where);
    } else if (kw.size() == 2 && kw[0] == "b") {
      tf.b[detail::parse_int(kw[1], where)] = detail::parse_combo(value, where);
    } else if (kw.size() == 2 && kw[0] == "embedded") {
      const int v = detail::parse_int(kw[1], where);
      std::istringstream vs(value);
      std::string word;
      auto& e = tf.embedded[v];
      if (!(vs >> word) || word != "order" || !(vs >> e.order)) {
        throw ArgumentError(where + ": expected 'embedded v: order p label text'");
      }
      std::string rest;
      std::getline(vs, rest);
      rest = detail::trim(rest);
      if (rest.rfind("label", 0) == 0) rest = detail::trim(rest.substr(5));
      e.label = rest;
    } else if (kw.size() == 3 && kw[0] == "bhat") {
      const int v = detail::parse_int(kw[1], where), i = detail::parse_int(kw[2], where);
      auto it = tf.embedded.find(v);
      if (it == tf.embedded.end()) throw ArgumentError(where + ": bhat before its embedded header");
      it->second.b[i] = detail::parse_combo(value, where);
    } else {
      throw ArgumentError(where + ": unknown key '" + key + "'");
    }
  }
  if (!have_name || !have_family || !have_stages || !have_order || !have_c) {
    throw ArgumentError("tableau: name, family, stages, order and c are required");
  }
  if (tf.stages < 1) throw ArgumentError("tableau " + tf.name + ": stages must be positive");
  if (static_cast<int>(tf.c.size()) != tf.stages) throw ArgumentError("tableau " + tf.name + ": c needs one entry per stage");
  if (tf.c[0] != 0) throw ArgumentError("tableau " + tf.name + ": c_1 must be 0");
  auto check_index = [&](int i) {
    if (i < 1 || i > tf.stages) throw ArgumentError("tableau " + tf.name + ": stage index out of range");
  };
  for (const auto& [ij, _] : tf.a) check_index(ij.first);
  for (const auto& [i, _] : tf.b) check_index(i);
  for (const auto& [v, e] : tf.embedded)
    for (const auto& [i, _] : e.b) check_index(i);
  return tf;
}

/// Canonical text form; parse_tableau(format_tableau(t)) == t and canonical
/// files reproduce byte for byte.
inline std::string format_tableau(const TableauFile& tf) {
  std::ostringstream os;
  for (const auto& c : tf.comments) os << c << '\n';
  os << "name: " << tf.name << '\n';
  os << "family: " << to_string(tf.family) << '\n';
  os << "stages: " << tf.stages << '\n';
  os << "order: " << tf.order << '\n';
  if (!tf.citation.empty()) os << "citation: " << tf.citation << '\n';
  os << "c: ";
  for (std::size_t i = 0; i < tf.c.size(); ++i) os << (i ? ", " : "") << detail::format_rational(tf.c[i]);
  os << '\n';
  for (const auto& [ij, combo] : tf.a) os << "a " << ij.first << ' ' << ij.second << ": " << detail::format_combo(combo) << '\n';
  for (const auto& [i, combo] : tf.b) os << "b " << i << ": " << detail::format_combo(combo) << '\n';
  for (const auto& [v, e] : tf.embedded) {
    os << "embedded " << v << ": order " << e.order;
    if (!e.label.empty()) os << " label " << e.label;
    os << '\n';
    for (const auto& [i, combo] : e.b) os << "bhat " << v << ' ' << i << ": " << detail::format_combo(combo) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Floating tableau

struct EmbeddedWeights {
  int index = 0;
  int order = 0;
  std::string label;
  std::vector<PhiCombo> b;
};

struct Tableau {
  std::string name;
  Family family = Family::exprk;
  int s = 0;
  int order = 0;
  std::string citation;
  std::vector<double> c;
  std::vector<std::vector<PhiCombo>> a;  // s×s, zero-based, strictly lower
  std::vector<PhiCombo> b;
  std::vector<EmbeddedWeights> embedded;
  bool enabled = true;
  std::string disabled_reason;

  [[nodiscard]] bool has_embedded() const { return !embedded.empty(); }
  [[nodiscard]] int max_phi_index() const {
    int m = 1;
    for (const auto& row : a)
      for (const auto& x : row) m = std::max(m, x.max_index());
    for (const auto& x : b) m = std::max(m, x.max_index());
    for (const auto& e : embedded)
      for (const auto& x : e.b) m = std::max(m, x.max_index());
    return m;
  }
};

inline PhiCombo to_combo(const ExactCombo& c) {
  std::vector<PhiTerm> terms;
  for (const auto& t : c) terms.push_back({t.k, t.alpha.convert_to<double>(), t.scale.convert_to<double>()});
  return PhiCombo(std::move(terms));
}

inline Tableau build_tableau(const TableauFile& tf) {
  Tableau t;
  t.name = tf.name;
  t.family = tf.family;
  t.s = tf.stages;
  t.order = tf.order;
  t.citation = tf.citation;
  for (const auto& c : tf.c) t.c.push_back(c.convert_to<double>());
  t.a.assign(t.s, std::vector<PhiCombo>(t.s));
  for (const auto& [ij, combo] : tf.a) t.a[ij.first - 1][ij.second - 1] = to_combo(combo);
  t.b.assign(t.s, PhiCombo());
  for (const auto& [i, combo] : tf.b) t.b[i - 1] = to_combo(combo);
  for (const auto& [v, e] : tf.embedded) {
    EmbeddedWeights w{v, e.order, e.label, std::vector<PhiCombo>(t.s)};
    for (const auto& [i, combo] : e.b) w.b[i - 1] = to_combo(combo);
    t.embedded.push_back(std::move(w));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Validation gates

/// Largest residual of Σ_i b_i(z) = φ1(z) (main and embedded weights) and
/// Σ_j a_ij(z) = c_i φ1(c_i z) over 20 equispaced z in [−20, 1].
inline double simplifying_residual(const Tableau& t) {
  double worst = 0.0;
  for (int n = 0; n < 20; ++n) {
    const double z = -20.0 + 21.0 * n / 19.0;
    const double p1 = phi_scalar(1, z);
    auto sum_b = [&](const std::vector<PhiCombo>& b) {
      double s = 0.0;
      for (const auto& x : b) s += x(z);
      return std::abs(s - p1);
    };
    worst = std::max(worst, sum_b(t.b));
    for (const auto& e : t.embedded) worst = std::max(worst, sum_b(e.b));
    for (int i = 0; i < t.s; ++i) {
      double s = 0.0;
      for (int j = 0; j < i; ++j) s += t.a[i][j](z);
      worst = std::max(worst, std::abs(s - t.c[i] * phi_scalar(1, t.c[i] * z)));
    }
  }
  return worst;
}

namespace detail {

// Scalar test problems for the empirical order gate: non-autonomous for
// exprk, autonomous for exprb (whose stages here omit the d_n term).
inline double gate_rhs(bool autonomous, double t, double u) {
  return -2.0 * u + std::sin(u) + 0.5 * u * u + (autonomous ? 1.0 : std::cos(t));
}
inline double gate_drhs(double u) { return -2.0 + std::cos(u) + u; }

inline double gate_reference(bool autonomous, double T) {
  const int n = 4096;
  const double h = T / n;
  double u = 1.0, t = 0.0;
  auto f = [&](double tt, double v) { return gate_rhs(autonomous, tt, v); };
  for (int i = 0; i < n; ++i) {
    const double k1 = f(t, u), k2 = f(t + h / 2, u + h / 2 * k1);
    const double k3 = f(t + h / 2, u + h / 2 * k2), k4 = f(t + h, u + h * k3);
    u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
  }
  return u;
}

// One step in the original (unreformulated) form with the stiff part λ = −2
// (exprk) or the local derivative (exprb).
inline double gate_step(const Tableau& tab, const std::vector<PhiCombo>& b, double t, double u, double h) {
  const int s = tab.s;
  const bool autonomous = tab.family == Family::exprb;
  std::vector<double> Y(s), G(s);
  const double lam = autonomous ? gate_drhs(u) : -2.0;
  auto g = [&](double tt, double v) { return gate_rhs(autonomous, tt, v) - lam * v; };
  const double z = h * lam;
  for (int i = 0; i < s; ++i) {
    double y = std::exp(tab.c[i] * z) * u;
    for (int j = 0; j < i; ++j) y += h * tab.a[i][j](z) * G[j];
    Y[i] = y;
    G[i] = g(t + tab.c[i] * h, Y[i]);
  }
  double un = std::exp(z) * u;
  for (int i = 0; i < s; ++i) un += h * b[i](z) * G[i];
  return un;
}

}  // namespace detail

/// Least-squares slope of log(error) over log(h) for constant-step scalar
/// integration with n = 8, 16, 32, 64 steps on [0, 1] (points with error below
/// 1e-13 are dropped). Uses the main weights, or embedded set `embedded_index`.
inline double empirical_order(const Tableau& tab, int embedded_index = -1) {
  const double T = 1.0;
  const double ref = detail::gate_reference(tab.family == Family::exprb, T);
  const std::vector<PhiCombo>* b = &tab.b;
  if (embedded_index >= 0) b = &tab.embedded.at(static_cast<std::size_t>(embedded_index)).b;
  std::vector<double> lh, le;
  for (int n : {8, 16, 32, 64}) {
    const double h = T / n;
    double u = 1.0;
    for (int i = 0; i < n; ++i) u = detail::gate_step(tab, *b, i * h, u, h);
    const double err = std::abs(u - ref);
    if (err > 1e-13) {
      lh.push_back(std::log(h));
      le.push_back(std::log(err));
    }
  }
  if (lh.size() < 2) return INFINITY;
  const double n = static_cast<double>(lh.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lh.size(); ++i) mx += lh[i] / n, my += le[i] / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lh.size(); ++i) sxy += (lh[i] - mx) * (le[i] - my), sxx += (lh[i] - mx) * (lh[i] - mx);
  return sxy / sxx;
}

/// Runs both gates; a failing tableau is disabled with a reason.
inline void validate(Tableau& t) {
  const double res = simplifying_residual(t);
  if (!(res <= 1e-12)) {
    t.enabled = false;
    t.disabled_reason = "simplifying assumptions violated (residual " + std::to_string(res) + ")";
    return;
  }
  const double p = empirical_order(t);
  if (!(p >= t.order - 0.3)) {
    t.enabled = false;
    t.disabled_reason = "empirical order " + std::to_string(p) + " below " + std::to_string(t.order);
    return;
  }
  for (std::size_t e = 0; e < t.embedded.size(); ++e) {
    const double pe = empirical_order(t, static_cast<int>(e));
    if (!(pe >= t.embedded[e].order - 0.3)) {
      t.enabled = false;
      t.disabled_reason = "embedded set " + std::to_string(t.embedded[e].index) + " order " + std::to_string(pe);
      return;
    }
  }
  t.enabled = true;
  t.disabled_reason.clear();
}

}  // namespace expflow

#include "tableaux.hpp"

namespace expflow {

// ---------------------------------------------------------------------------
// Registry

class Registry {
 public:
  /// The built-in schemes, parsed and validated once.
  static const Registry& builtin() {
    static const Registry r = [] {
      Registry reg;
      for (std::string_view text : builtin_tableau_texts()) reg.add(parse_tableau(text));
      return reg;
    }();
    return r;
  }

  /// Adds (or replaces) a scheme; it is validated on insertion.
  const Tableau& add(const TableauFile& tf) {
    Tableau t = build_tableau(tf);
    validate(t);
    files_[t.name] = tf;
    return tableaux_[t.name] = std::move(t);
  }

  /// Looks up a scheme by name (disabled schemes are returned with their flag).
  [[nodiscard]] const Tableau& get(const std::string& name) const {
    auto it = tableaux_.find(name);
    if (it == tableaux_.end()) {
      std::string known;
      for (const auto& [n, _] : tableaux_) known += (known.empty() ? "" : ", ") + n;
      throw LookupError("unknown scheme '" + name + "'; registered: " + known);
    }
    return it->second;
  }

  [[nodiscard]] const TableauFile& file(const std::string& name) const {
    (void)get(name);
    return files_.at(name);
  }

  [[nodiscard]] bool contains(const std::string& name) const { return tableaux_.count(name) > 0; }

  /// All schemes in alphabetical order.
  [[nodiscard]] std::vector<const Tableau*> all() const {
    std::vector<const Tableau*> out;
    for (const auto& [_, t] : tableaux_) out.push_back(&t);
    return out;
  }

  /// `name family s=S p=P embedded=yes|no [DISABLED]`, one line per scheme.
  [[nodiscard]] std::string listing() const {
    std::ostringstream os;
    for (const auto* t : all()) {
      os << t->name << ' ' << to_string(t->family) << " s=" << t->s << " p=" << t->order
         << " embedded=" << (t->has_embedded() ? "yes" : "no");
      if (!t->enabled) os << " DISABLED";
      os << '\n';
    }
    return os.str();
  }

 private:
  std::map<std::string, Tableau> tableaux_;
  std::map<std::string, TableauFile> files_;
};

inline const Tableau& registry_get(const std::string& name) { return Registry::builtin().get(name); }

}  // namespace expflow
