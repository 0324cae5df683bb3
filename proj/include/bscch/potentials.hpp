#pragma once

// Convex-analysis engine for the double-well potentials F = F1 + F2.
//
// F1 is proper, convex, lower semicontinuous with F1(0) = 0; its subdifferential f1 is
// a maximal monotone graph that may be singular (logarithmic) or multivalued (obstacle).
// Everything downstream works with the Yosida approximation f1_eps and the Moreau
// envelope F1_eps, both of which are computed from the resolvent (I + eps f1)^{-1}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "bscch/common.hpp"
#include "bscch/error.hpp"

namespace bscch {

enum class WellKind { quartic, logarithmic, obstacle };

inline const char* to_string(WellKind k) {
  switch (k) {
    case WellKind::quartic: return "reg";
    case WellKind::logarithmic: return "log";
    case WellKind::obstacle: return "obst";
  }
  return "?";
}

/// Real interval with independent open/closed ends; infinite ends are always open.
struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool lo_closed = false;
  bool hi_closed = false;

  static Interval real_line() { return {}; }
  static Interval closed(double a, double b) { return {a, b, true, true}; }
  static Interval open(double a, double b) { return {a, b, false, false}; }
  static Interval point(double a) { return {a, a, true, true}; }

  bool contains(double x) const {
    const bool above = lo_closed ? x >= lo : x > lo;
    const bool below = hi_closed ? x <= hi : x < hi;
    return above && below;
  }
  bool contains_interior(double x) const { return x > lo && x < hi; }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }

  /// The image {a*x : x in this}.
  Interval scaled(double a) const {
    if (a == 0.0) return point(0.0);
    if (a > 0.0) return {a * lo, a * hi, lo_closed, hi_closed};
    return {a * hi, a * lo, hi_closed, lo_closed};
  }

  bool subset_of(const Interval& other) const {
    const bool lo_ok = lo > other.lo || (lo == other.lo && (other.lo_closed || !lo_closed));
    const bool hi_ok = hi < other.hi || (hi == other.hi && (other.hi_closed || !hi_closed));
    return lo_ok && hi_ok;
  }
};

/// Yosida parameter eps. Scalar routines accept (0, 1]; a time-stepping run requires (0, 1).
class YosidaParam {
 public:
  explicit YosidaParam(double eps) : eps_(eps) {
    if (!(eps > 0.0 && eps <= 1.0)) {
      throw InvalidArgument("Yosida parameter must lie in (0, 1], got " + std::to_string(eps));
    }
  }
  double value() const noexcept { return eps_; }
  operator double() const noexcept { return eps_; }

 private:
  double eps_;
};

namespace detail {

inline void require_finite(double r) {
  if (!std::isfinite(r)) throw InvalidArgument("non-finite argument passed to a potential routine");
}

// 1/cosh(u)^2 without overflow.
inline double sech2(double u) {
  const double e = std::exp(-2.0 * std::abs(u));
  return 4.0 * e / ((1.0 + e) * (1.0 + e));
}

// Theta/2 [(1+s)ln(1+s) + (1-s)ln(1-s)] at s = tanh(u).
inline double log_well_at_tanh(double theta, double u) {
  const double a = std::abs(u);
  if (a < 0.25) {
    const double s = std::tanh(a);
    const double s2 = s * s;
    double term = s2, sum = 0.0;
    for (int k = 1; k <= 16; ++k) {
      sum += term / (2.0 * k * (2.0 * k - 1.0));
      term *= s2;
    }
    return theta * sum;
  }
  const double e = std::exp(-2.0 * a);
  const double one_minus_s = 2.0 * e / (1.0 + e);
  return theta * (std::numbers::ln2 - std::log1p(e) - a * one_minus_s);
}

// Root u of tanh(u) + a*u = r (a > 0); strictly increasing so the root is unique.
inline double solve_tanh_linear(double a, double r) {
  if (r == 0.0) return 0.0;
  const double x = std::abs(r);
  double lo = std::max(x / (1.0 + a), (x - 1.0) / a);
  double hi = x / a;
  double u = lo;
  const double tol = 1e-16 * std::max(1.0, x);
  for (int it = 0; it < 200; ++it) {
    const double g = std::tanh(u) + a * u - x;
    if (std::abs(g) <= tol) break;
    if (g < 0.0) lo = u; else hi = u;
    double next = u - g / (sech2(u) + a);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == u || hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) break;
    u = next;
  }
  return std::copysign(u, r);
}

// Root s of s + b*s^3 = r (b > 0).
inline double solve_cubic_monotone(double b, double r) {
  if (r == 0.0) return 0.0;
  const double x = std::abs(r);
  // Both candidates are upper bounds of the root; Newton on the convex branch decreases monotonically.
  double s = std::min(x, std::cbrt(x / b));
  const double tol = 1e-15 * std::max(1.0, x);
  for (int it = 0; it < 200; ++it) {
    const double h = s + b * s * s * s - x;
    if (h <= tol) break;
    const double next = s - h / (1.0 + 3.0 * b * s * s);
    if (!(next < s)) break;
    s = next;
  }
  return std::copysign(s, r);
}

}  // namespace detail

/// Convex part F1 of a classical double well.
class ConvexPart {
 public:
  static ConvexPart quartic(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("quartic coefficient c must be positive");
    return ConvexPart(WellKind::quartic, c);
  }
  static ConvexPart logarithmic(double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidArgument("temperature theta must be positive");
    return ConvexPart(WellKind::logarithmic, theta);
  }
  static ConvexPart obstacle() { return ConvexPart(WellKind::obstacle, 0.0); }

  WellKind kind() const noexcept { return kind_; }
  /// c for quartic, Theta for logarithmic, unused for obstacle.
  double coefficient() const noexcept { return coef_; }

  /// Effective domain D(F1).
  Interval domain() const {
    return kind_ == WellKind::quartic ? Interval::real_line() : Interval::closed(-1.0, 1.0);
  }
  /// Effective domain D(f1) of the subdifferential.
  Interval prime_domain() const {
    switch (kind_) {
      case WellKind::quartic: return Interval::real_line();
      case WellKind::logarithmic: return Interval::open(-1.0, 1.0);
      case WellKind::obstacle: return Interval::closed(-1.0, 1.0);
    }
    return {};
  }

  /// F1(s); +inf outside D(F1).
  double value(double s) const {
    switch (kind_) {
      case WellKind::quartic: return coef_ * s * s * s * s;
      case WellKind::logarithmic: {
        const double a = std::abs(s);
        if (a > 1.0) return kInf;
        if (a == 1.0) return coef_ * std::numbers::ln2;
        return detail::log_well_at_tanh(coef_, std::atanh(a));
      }
      case WellKind::obstacle: return std::abs(s) <= 1.0 ? 0.0 : kInf;
    }
    return kInf;
  }

  /// Minimal section f1°(s), defined on D(f1).
  double min_section(double s) const {
    if (!prime_domain().contains(s)) {
      std::ostringstream os;
      os << "minimal section evaluated outside D(f1) at s = " << s;
      throw InvalidArgument(os.str());
    }
    switch (kind_) {
      case WellKind::quartic: return 4.0 * coef_ * s * s * s;
      case WellKind::logarithmic: return coef_ * std::atanh(s);
      case WellKind::obstacle: return 0.0;
    }
    return 0.0;
  }

  /// F1''(s) on the interior of D(f1).
  double second_derivative(double s) const {
    switch (kind_) {
      case WellKind::quartic: return 12.0 * coef_ * s * s;
      case WellKind::logarithmic: return coef_ / (1.0 - s * s);
      case WellKind::obstacle: return 0.0;
    }
    return 0.0;
  }

 private:
  ConvexPart(WellKind k, double c) : kind_(k), coef_(c) {}
  WellKind kind_;
  double coef_;
};

/// Concave smooth part F2 with Lipschitz derivative.
class SmoothPart {
 public:
  static SmoothPart quartic(double c) { return SmoothPart(WellKind::quartic, c); }
  static SmoothPart logarithmic(double theta_c) { return SmoothPart(WellKind::logarithmic, theta_c); }
  static SmoothPart obstacle() { return SmoothPart(WellKind::obstacle, 0.0); }

  WellKind kind() const noexcept { return kind_; }
  double coefficient() const noexcept { return coef_; }

  double value(double s) const {
    switch (kind_) {
      case WellKind::quartic: return -2.0 * coef_ * s * s;
      case WellKind::logarithmic: return -0.5 * coef_ * s * s;
      case WellKind::obstacle: return 1.0 - s * s;
    }
    return 0.0;
  }
  double derivative(double s) const { return -lipschitz_bound() * s; }
  /// Lipschitz constant of f2 (all three smooth parts are concave quadratics).
  double lipschitz_bound() const {
    switch (kind_) {
      case WellKind::quartic: return 4.0 * coef_;
      case WellKind::logarithmic: return coef_;
      case WellKind::obstacle: return 2.0;
    }
    return 0.0;
  }
  /// Writes F2(s) = -q s^2 + c0; returns q.
  double quadratic_coefficient() const { return 0.5 * lipschitz_bound(); }
  double constant_term() const { return kind_ == WellKind::obstacle ? 1.0 : 0.0; }

 private:
  SmoothPart(WellKind k, double c) : kind_(k), coef_(c) {}
  WellKind kind_;
  double coef_;
};

class Potential {
 public:
  static Potential regular(double c = 1.0) {
    return Potential(ConvexPart::quartic(c), SmoothPart::quartic(c), "W_reg");
  }
  static Potential logarithmic(double theta = 0.8, double theta_c = 1.6) {
    if (!(theta > 0.0 && theta < theta_c)) {
      throw InvalidArgument("logarithmic potential requires 0 < theta < theta_c");
    }
    return Potential(ConvexPart::logarithmic(theta), SmoothPart::logarithmic(theta_c), "W_log");
  }
  static Potential obstacle() { return Potential(ConvexPart::obstacle(), SmoothPart::obstacle(), "W_obst"); }

  /// Builds a potential from its short name: reg | log | obst.
  static Potential from_name(const std::string& name, double c, double theta, double theta_c) {
    if (name == "reg") return regular(c);
    if (name == "log") return logarithmic(theta, theta_c);
    if (name == "obst") return obstacle();
    throw InvalidArgument("unknown potential '" + name + "' (expected reg, log or obst)");
  }

  const ConvexPart& convex() const noexcept { return convex_; }
  const SmoothPart& smooth() const noexcept { return smooth_; }
  const std::string& name() const noexcept { return name_; }
  WellKind kind() const noexcept { return convex_.kind(); }

  double value(double s) const { return convex_.value(s) + smooth_.value(s); }

 private:
  Potential(ConvexPart c, SmoothPart s, std::string name)
      : convex_(c), smooth_(s), name_(std::move(name)) {}
  ConvexPart convex_;
  SmoothPart smooth_;
  std::string name_;
};

/// Everything the resolvent at one point determines.
struct YosidaEvaluation {
  double resolvent = 0.0;   ///< J_eps(r) = (I + eps f1)^{-1} r
  double value = 0.0;       ///< f1_eps(r) = (r - J_eps(r)) / eps
  double derivative = 0.0;  ///< f1_eps'(r)
  double envelope = 0.0;    ///< F1_eps(r)
};

inline YosidaEvaluation evaluate_yosida(const ConvexPart& cp, YosidaParam eps_param, double r) {
  detail::require_finite(r);
  const double eps = eps_param.value();
  YosidaEvaluation out;
  switch (cp.kind()) {
    case WellKind::quartic: {
      const double c = cp.coefficient();
      const double s = detail::solve_cubic_monotone(4.0 * c * eps, r);
      out.resolvent = s;
      out.value = (r - s) / eps;
      out.derivative = 12.0 * c * s * s / (1.0 + 12.0 * c * eps * s * s);
      out.envelope = (r - s) * (r - s) / (2.0 * eps) + c * s * s * s * s;
      break;
    }
    case WellKind::logarithmic: {
      const double theta = cp.coefficient();
      const double u = detail::solve_tanh_linear(eps * theta, r);
      const double s = std::tanh(u);
      out.resolvent = s;
      out.value = (r - s) / eps;
      out.derivative = theta / (detail::sech2(u) + eps * theta);
      out.envelope = (r - s) * (r - s) / (2.0 * eps) + detail::log_well_at_tanh(theta, u);
      break;
    }
    case WellKind::obstacle: {
      const double s = std::clamp(r, -1.0, 1.0);
      out.resolvent = s;
      out.value = (r - s) / eps;
      // |r| = 1 takes the interior branch.
      out.derivative = std::abs(r) > 1.0 ? 1.0 / eps : 0.0;
      out.envelope = (r - s) * (r - s) / (2.0 * eps);
      break;
    }
  }
  return out;
}

inline double resolvent(const ConvexPart& cp, YosidaParam eps, double r) {
  return evaluate_yosida(cp, eps, r).resolvent;
}

struct YosidaValue {
  double value;
  double derivative;
};

inline YosidaValue yosida(const ConvexPart& cp, YosidaParam eps, double r) {
  const auto e = evaluate_yosida(cp, eps, r);
  return {e.value, e.derivative};
}

inline double moreau_envelope(const ConvexPart& cp, YosidaParam eps, double r) {
  return evaluate_yosida(cp, eps, r).envelope;
}

struct RegularizedValue {
  double F_eps;  ///< F1_eps(r) + F2(r)
  double f1_eps;
  double f2;
};

inline RegularizedValue eval_regularized(const Potential& p, YosidaParam eps, double r) {
  const auto e = evaluate_yosida(p.convex(), eps, r);
  return {e.envelope + p.smooth().value(r), e.value, p.smooth().derivative(r)};
}

/// Certificate for the quadratic lower bound F_eps(r) >= r^2 - C, valid for every eps <= eps_star.
struct LowerBoundCertificate {
  double eps_star = 0.0;
  double C = 0.0;
};

/// Closed-form constant C(eps) in F_eps(r) >= r^2 - C, or +inf when eps is too large.
inline double lower_bound_constant(const Potential& p, double eps) {
  const double b = 1.0 + p.smooth().quadratic_coefficient();
  const double c0 = p.smooth().constant_term();
  if (!(2.0 * eps * b < 1.0)) return kInf;
  if (p.kind() == WellKind::quartic) {
    // c s^4 >= lambda s^2 - lambda^2/(4c) with lambda = 2b / (1 - 2 eps b).
    const double c = p.convex().coefficient();
    const double d = 1.0 - 2.0 * eps * b;
    return b * b / (c * d * d) - c0;
  }
  // F1_eps(r) >= dist(r, [-1,1])^2 / (2 eps); minimise a(t-1)^2 - b t^2 over t > 1.
  const double a = 1.0 / (2.0 * eps);
  return a * b / (a - b) - c0;
}

/// Largest dyadic eps for which the quadratic lower bound holds, confirmed on a wide grid.
inline LowerBoundCertificate lower_bound_certificate(const Potential& p) {
  for (int k = 1; k < 60; ++k) {
    const double eps = std::ldexp(1.0, -k);
    if (eps >= 1.0) continue;
    const double C = lower_bound_constant(p, eps);
    if (!std::isfinite(C)) continue;
    bool holds = true;
    for (int i = 0; i <= 4000 && holds; ++i) {
      const double r = -100.0 + 0.05 * i;
      const double fe = eval_regularized(p, YosidaParam(eps), r).F_eps;
      holds = fe >= r * r - C - 1e-9 * (1.0 + r * r);
    }
    if (holds) return {eps, C};
  }
  throw SolverFailure("no dyadic eps certifies the quadratic lower bound");
}

struct PropertyFailure {
  std::string property;
  double eps;
  double r;
  std::string detail;
};

struct PropertyReport {
  std::vector<PropertyFailure> failures;
  std::size_t checks = 0;
  bool passed() const { return failures.empty(); }
};

/// Pointwise verification of the Yosida/Moreau-Yosida structural properties on a grid.
inline PropertyReport verify_scalar_properties(const ConvexPart& cp, std::vector<double> eps_list,
                                               std::vector<double> grid) {
  PropertyReport rep;
  for (double r : grid) detail::require_finite(r);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::sort(eps_list.begin(), eps_list.end(), std::greater<>());

  constexpr double ulp_slack = 8.0 * std::numeric_limits<double>::epsilon();
  auto le = [&](double a, double b) { return a <= b + ulp_slack * std::max(std::abs(b), 1e-300); };
  auto fail = [&](const char* prop, double eps, double r, double lhs, double rhs) {
    std::ostringstream os;
    os.precision(17);
    os << lhs << " vs " << rhs;
    rep.failures.push_back({prop, eps, r, os.str()});
  };

  const Interval dom = cp.prime_domain();
  std::vector<std::vector<YosidaEvaluation>> table;
  for (double eps : eps_list) {
    const YosidaParam ep(eps);
    std::vector<YosidaEvaluation> row;
    row.reserve(grid.size());
    for (double r : grid) row.push_back(evaluate_yosida(cp, ep, r));

    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double r = grid[i];
      const double v = std::abs(row[i].value);
      ++rep.checks;
      if (!le(v, std::abs(r) / eps)) fail("|f1_eps(r)| <= |r|/eps", eps, r, v, std::abs(r) / eps);
      if (dom.contains(r)) {
        ++rep.checks;
        const double fo = std::abs(cp.min_section(r));
        if (!le(v, fo)) fail("|f1_eps(r)| <= |f1°(r)|", eps, r, v, fo);
      }
      const double env = row[i].envelope;
      ++rep.checks;
      if (env < 0.0) fail("F1_eps(r) >= 0", eps, r, env, 0.0);
      ++rep.checks;
      if (!le(env, r * r / (2.0 * eps))) fail("F1_eps(r) <= r^2/(2 eps)", eps, r, env, r * r / (2.0 * eps));
      const double f1 = cp.value(r);
      if (std::isfinite(f1)) {
        ++rep.checks;
        if (!le(env, f1)) fail("F1_eps(r) <= F1(r)", eps, r, env, f1);
      }
      if (i > 0) {
        const double dv = row[i].value - row[i - 1].value;
        const double dr = grid[i] - grid[i - 1];
        ++rep.checks;
        if (dv < -ulp_slack * std::max(std::abs(row[i].value), std::abs(row[i - 1].value))) {
          fail("f1_eps nondecreasing", eps, r, row[i].value, row[i - 1].value);
        }
        ++rep.checks;
        const double lip = std::abs(dv) / dr;
        if (lip > (1.0 / eps) * (1.0 + 1e-10)) fail("Lipschitz constant 1/eps", eps, r, lip, 1.0 / eps);
      }
    }
    table.push_back(std::move(row));
  }

  // Envelope ordering and pointwise convergence along decreasing eps.
  for (std::size_t k = 1; k < table.size(); ++k) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double r = grid[i];
      ++rep.checks;
      if (!le(table[k - 1][i].envelope, table[k][i].envelope)) {
        fail("F1_eps nondecreasing as eps decreases", eps_list[k], r, table[k - 1][i].envelope,
             table[k][i].envelope);
      }
      if (dom.contains_interior(r)) {
        const double fo = cp.min_section(r);
        const double prev = std::abs(table[k - 1][i].value - fo);
        const double cur = std::abs(table[k][i].value - fo);
        ++rep.checks;
        if (!le(cur, prev)) fail("|f1_eps - f1°| decreasing as eps decreases", eps_list[k], r, cur, prev);
      }
    }
  }
  return rep;
}

struct DominationReport {
  bool admissible = false;
  std::string reason;  ///< "admissible" or the violated condition
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  /// Grid-level checks of |f1°(alpha r)| <= k1 |g1°(r)| + k2 and its Yosida-regularized transfer.
  std::vector<PropertyFailure> failures;
  bool verified() const { return admissible && failures.empty(); }
};

/// Decides whether (F1, G1, alpha) satisfy the inclusion alpha D(g1) ⊆ D(f1) and domination.
inline DominationReport check_domination(const ConvexPart& f, const ConvexPart& g, double alpha,
                                         const std::vector<double>& grid,
                                         const std::vector<double>& eps_list = {}) {
  DominationReport rep;
  if (grid.empty()) throw InvalidArgument("check_domination requires a nonempty grid");
  const Interval image = g.prime_domain().scaled(alpha);
  const Interval target = f.prime_domain();
  if (!image.subset_of(target)) {
    // Name the violated inclusion in terms of alpha.
    if (!g.prime_domain().bounded()) {
      rep.reason = "inadmissible: alpha != 0";
    } else if (!target.hi_closed && g.prime_domain().hi_closed) {
      rep.reason = "inadmissible: |alpha| >= 1";
    } else {
      rep.reason = "inadmissible: |alpha| > 1";
    }
    return rep;
  }
  rep.admissible = true;
  rep.reason = "admissible";

  const Interval hull = {image.lo, image.hi, true, true};
  if (image.bounded() && hull.subset_of(target)) {
    // f1° is bounded on the compact image; its endpoints give the bound.
    rep.kappa1 = 1.0;
    rep.kappa2 = std::max(std::abs(f.min_section(hull.lo)), std::abs(f.min_section(hull.hi)));
  } else if (f.kind() == g.kind() && f.kind() == WellKind::logarithmic) {
    rep.kappa1 = f.coefficient() / g.coefficient();
    rep.kappa2 = 0.0;
  } else if (f.kind() == g.kind() && f.kind() == WellKind::quartic) {
    // |alpha|^3 is exact for the graphs; the linear growth of the Yosida tails needs |alpha| too.
    const double a = std::abs(alpha);
    rep.kappa1 = f.coefficient() / g.coefficient() * std::max(a, a * a * a);
    rep.kappa2 = 0.0;
  } else {
    rep.admissible = false;
    rep.reason = "inadmissible: no domination constants for this pair";
    return rep;
  }

  constexpr double slack = 1e-12;
  for (double r : grid) {
    detail::require_finite(r);
    if (!g.prime_domain().contains(r)) continue;
    const double lhs = std::abs(f.min_section(alpha * r));
    const double rhs = rep.kappa1 * std::abs(g.min_section(r)) + rep.kappa2;
    if (lhs > rhs * (1.0 + slack) + slack) {
      std::ostringstream os;
      os.precision(17);
      os << lhs << " > " << rhs;
      rep.failures.push_back({"graph domination", 0.0, r, os.str()});
    }
  }
  for (double eps : eps_list) {
    const YosidaParam ep(eps);
    for (double r : grid) {
      if (!g.prime_domain().contains(r)) continue;
      const double lhs = std::abs(evaluate_yosida(f, ep, alpha * r).value);
      const double rhs = rep.kappa1 * std::abs(evaluate_yosida(g, ep, r).value) + rep.kappa2;
      if (lhs > rhs * (1.0 + slack) + slack) {
        std::ostringstream os;
        os.precision(17);
        os << lhs << " > " << rhs;
        rep.failures.push_back({"regularized domination", eps, r, os.str()});
      }
    }
  }
  return rep;
}

/// |F1''(s)| <= C1 exp(C2 |F1'(s)|^lambda) at every grid point (logarithmic wells only).
inline bool check_growth_condition(const ConvexPart& cp, double lambda, double C1, double C2,
                                   const std::vector<double>& grid) {
  if (cp.kind() != WellKind::logarithmic) {
    throw InvalidArgument(std::string("growth condition is only defined for logarithmic wells, got ") +
                          to_string(cp.kind()));
  }
  if (!(lambda >= 1.0 && lambda < 2.0)) throw InvalidArgument("lambda must lie in [1, 2)");
  if (!(C1 > 0.0 && C2 > 0.0)) throw InvalidArgument("C1 and C2 must be positive");
  for (double s : grid) {
    if (!(std::abs(s) < 1.0)) throw InvalidArgument("growth-condition grid must lie in (-1, 1)");
    const double second = std::abs(cp.second_derivative(s));
    const double first = std::abs(cp.min_section(s));
    if (second > C1 * std::exp(C2 * std::pow(first, lambda))) return false;
  }
  return true;
}

}  // namespace bscch
