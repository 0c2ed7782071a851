#pragma once

// Nonmonotone reaction function F, its critical structure, the three branch
// inverses S_1 <= S_2 <= S_3 and the change of variables w = u + F(u).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fastreact/error.hpp"
#include "fastreact/roots.hpp"

namespace fastreact {

struct FValue {
  double value;
  double derivative;
};

/// F on [0, u_max]. Either a polynomial (analytic primitive) or a pair of
/// user callables (primitive by adaptive quadrature).
class ReactionFunction {
 public:
  using Scalar = std::function<double(double)>;

  /// u^3 - 4.5 u^2 + 6 u on [0, 4].
  static ReactionFunction reference_cubic() {
    return polynomial({0.0, 6.0, -4.5, 1.0}, 4.0);
  }

  /// Coefficients in ascending powers: c0 + c1 u + c2 u^2 + ...
  static ReactionFunction polynomial(std::vector<double> coeffs, double u_max) {
    if (coeffs.empty()) throw ValidationError("polynomial needs at least one coefficient");
    ReactionFunction rf(u_max);
    rf.coeffs_ = std::move(coeffs);
    rf.deriv_coeffs_.resize(rf.coeffs_.size() > 1 ? rf.coeffs_.size() - 1 : 1, 0.0);
    for (std::size_t k = 1; k < rf.coeffs_.size(); ++k) {
      rf.deriv_coeffs_[k - 1] = static_cast<double>(k) * rf.coeffs_[k];
    }
    return rf;
  }

  static ReactionFunction from_callables(Scalar f, Scalar df, double u_max) {
    if (!f || !df) throw ValidationError("reaction function callables must be set");
    ReactionFunction rf(u_max);
    rf.f_ = std::move(f);
    rf.df_ = std::move(df);
    return rf;
  }

  double u_max() const noexcept { return u_max_; }
  bool is_polynomial() const noexcept { return !coeffs_.empty(); }
  std::span<const double> coefficients() const noexcept { return coeffs_; }

  // Unchecked evaluation; the solver calls these on iterates that may sit a
  // roundoff outside [0, u_max].
  double value(double u) const {
    return is_polynomial() ? horner(coeffs_, u) : f_(u);
  }
  double slope(double u) const {
    return is_polynomial() ? horner(deriv_coeffs_, u) : df_(u);
  }

  /// Checked evaluation of (F(u), F'(u)).
  FValue eval(double u) const {
    if (!(u >= 0.0 && u <= u_max_)) {
      throw DomainError("F evaluated at u = " + std::to_string(u) + " outside [0, " +
                        std::to_string(u_max_) + "]");
    }
    return {value(u), slope(u)};
  }

  /// Psi(u) = int_0^u F.
  double primitive(double u) const {
    if (is_polynomial()) {
      double acc = 0.0;
      for (std::size_t k = coeffs_.size(); k-- > 0;) {
        acc = acc * u + coeffs_[k] / static_cast<double>(k + 1);
      }
      return acc * u;
    }
    if (u == 0.0) return 0.0;
    const double a = std::min(0.0, u);
    const double b = std::max(0.0, u);
    const double fa = value(a);
    const double fb = value(b);
    const double fm = value(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double s = simpson(a, b, fa, fm, fb, whole, 1e-10, 48);
    return u >= 0.0 ? s : -s;
  }

 private:
  explicit ReactionFunction(double u_max) : u_max_(u_max) {
    if (!(u_max > 0.0) || !std::isfinite(u_max)) {
      throw ValidationError("u_max must be positive and finite");
    }
  }

  static double horner(const std::vector<double>& c, double u) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) acc = acc * u + c[k];
    return acc;
  }

  double simpson(double a, double b, double fa, double fm, double fb, double whole,
                 double tol, int depth) const {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = value(lm);
    const double frm = value(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
      return left + right + (left + right - whole) / 15.0;
    }
    return simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  }

  double u_max_;
  std::vector<double> coeffs_;
  std::vector<double> deriv_coeffs_;
  Scalar f_;
  Scalar df_;
};

/// Critical points and levels: F increases on [0, alpha_plus], decreases on
/// [alpha_plus, beta_minus], increases again afterwards.
struct BranchStructure {
  double alpha_minus;
  double alpha_plus;
  double beta_minus;
  double beta_plus;
  double f_minus;
  double f_plus;
};

struct Interval {
  double lo;
  double hi;
  bool contains_open(double x) const noexcept { return x > lo && x < hi; }
};

inline constexpr int kShapeSamples = 4096;

inline BranchStructure compute_branch_structure(const ReactionFunction& rf) {
  const double umax = rf.u_max();
  if (std::abs(rf.value(0.0)) > 1e-12) throw ShapeError("F(0) must vanish");

  std::vector<double> sign_changes;
  double prev_slope = rf.slope(0.0);
  double prev_u = 0.0;
  for (int k = 1; k <= kShapeSamples; ++k) {
    const double u = umax * static_cast<double>(k) / kShapeSamples;
    if (rf.value(u) < -1e-12) {
      throw ShapeError("F is negative at u = " + std::to_string(u));
    }
    const double s = rf.slope(u);
    if (s == 0.0) continue;
    if (prev_slope != 0.0 && (s > 0.0) != (prev_slope > 0.0)) {
      const auto dfn = [&](double x) { return rf.slope(x); };
      sign_changes.push_back(roots::bisect_sign(dfn, prev_u, u));
    }
    prev_slope = s;
    prev_u = u;
  }
  if (sign_changes.size() != 2) {
    throw ShapeError("F' must change sign exactly twice on (0, u_max); found " +
                     std::to_string(sign_changes.size()));
  }
  if (!(rf.slope(0.5 * sign_changes[0]) > 0.0)) {
    throw ShapeError("F must increase first");
  }

  BranchStructure bs{};
  bs.alpha_plus = sign_changes[0];
  bs.beta_minus = sign_changes[1];
  bs.f_plus = rf.value(bs.alpha_plus);
  bs.f_minus = rf.value(bs.beta_minus);
  if (!(bs.f_minus > rf.value(0.0))) throw ShapeError("f_minus must exceed F(0)");
  if (rf.value(umax) < bs.f_plus) {
    throw ShapeError("F(u_max) must reach f_plus; enlarge u_max");
  }

  const auto f = [&](double u) { return rf.value(u) - bs.f_minus; };
  const auto g = [&](double u) { return rf.value(u) - bs.f_plus; };
  const auto df = [&](double u) { return rf.slope(u); };
  bs.alpha_minus = roots::bracketed(f, df, 0.0, bs.alpha_plus);
  bs.beta_plus = roots::bracketed(g, df, bs.beta_minus, umax);
  return bs;
}

struct BranchValue {
  double u;
  double slope;
  bool clamped = false;  // slope hit the fold cap
};

/// Local inverses S_1, S_2, S_3 of F, extended by constants outside J_i.
class BranchInverses {
 public:
  BranchInverses(ReactionFunction rf, double slope_cap = 1e6)
      : rf_(std::move(rf)), bs_(compute_branch_structure(rf_)), slope_cap_(slope_cap) {}

  const ReactionFunction& reaction() const noexcept { return rf_; }
  const BranchStructure& structure() const noexcept { return bs_; }
  double f_minus() const noexcept { return bs_.f_minus; }
  double f_plus() const noexcept { return bs_.f_plus; }
  double slope_cap() const noexcept { return slope_cap_; }

  /// J_i on the rate axis (open). J_1 starts at 0 and J_3 ends at F(u_max).
  Interval J(int i) const {
    switch (i) {
      case 1: return {-std::numeric_limits<double>::infinity(), bs_.f_plus};
      case 2: return {bs_.f_minus, bs_.f_plus};
      case 3: return {bs_.f_minus, std::numeric_limits<double>::infinity()};
      default: throw DomainError("branch index must be 1, 2 or 3");
    }
  }
  /// I_i on the concentration axis.
  Interval I(int i) const {
    switch (i) {
      case 1: return {0.0, bs_.alpha_plus};
      case 2: return {bs_.alpha_plus, bs_.beta_minus};
      case 3: return {bs_.beta_minus, rf_.u_max()};
      default: throw DomainError("branch index must be 1, 2 or 3");
    }
  }
  bool in_J(int i, double xi) const { return J(i).contains_open(xi); }

  /// S_i(xi) and S_i'(xi). Total on xi >= 0.
  BranchValue branch(int i, double xi) const {
    if (i < 1 || i > 3) throw DomainError("branch index must be 1, 2 or 3");
    const double top = rf_.value(rf_.u_max());
    switch (i) {
      case 1:
        if (xi >= bs_.f_plus) return {bs_.alpha_plus, 0.0};
        if (xi <= 0.0) return {0.0, 0.0};
        return solve(xi, 0.0, bs_.alpha_plus, 1.0);
      case 2:
        if (xi >= bs_.f_plus) return {bs_.alpha_plus, 0.0};
        if (xi <= bs_.f_minus) return {bs_.beta_minus, 0.0};
        return solve(xi, bs_.alpha_plus, bs_.beta_minus, -1.0);
      default:
        if (xi <= bs_.f_minus) return {bs_.beta_minus, 0.0};
        if (xi >= top) return {rf_.u_max(), 0.0};
        return solve(xi, bs_.beta_minus, rf_.u_max(), 1.0);
    }
  }
  double S(int i, double xi) const { return branch(i, xi).u; }
  double dS(int i, double xi) const { return branch(i, xi).slope; }

 private:
  BranchValue solve(double xi, double lo, double hi, double sign) const {
    const auto f = [&](double u) { return rf_.value(u) - xi; };
    const auto df = [&](double u) { return rf_.slope(u); };
    const double u = roots::bracketed(f, df, lo, hi);
    const double d = rf_.slope(u);
    if (std::abs(d) * slope_cap_ <= 1.0) {
      return {u, sign * slope_cap_, true};
    }
    return {u, 1.0 / d};
  }

  ReactionFunction rf_;
  BranchStructure bs_;
  double slope_cap_;
};

// Wronskian of {1 + S_1', 1 + S_2', 1 + S_3'}; derivatives of S_i' by
// centered differences with step h_xi. Returns min |W| over n_samples points
// uniformly spaced on [lo, hi].
inline double nondegeneracy_check(const BranchInverses& bi, double lo, double hi,
                                  int n_samples, double h_xi = 1e-4) {
  if (n_samples < 3) throw ValidationError("nondegeneracy check needs at least 3 samples");
  if (!(h_xi > 0.0)) throw ValidationError("finite-difference step must be positive");
  if (!(lo < hi) || !(lo - h_xi > bi.f_minus()) || !(hi + h_xi < bi.f_plus())) {
    throw DomainError("nondegeneracy subinterval must lie strictly inside (f-, f+)");
  }
  double min_abs = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) {
    const double xi = lo + (hi - lo) * static_cast<double>(k) / (n_samples - 1);
    std::array<std::array<double, 3>, 3> m{};
    for (int i = 1; i <= 3; ++i) {
      const double gm = 1.0 + bi.dS(i, xi - h_xi);
      const double g0 = 1.0 + bi.dS(i, xi);
      const double gp = 1.0 + bi.dS(i, xi + h_xi);
      m[0][i - 1] = g0;
      m[1][i - 1] = (gp - gm) / (2.0 * h_xi);
      m[2][i - 1] = (gp - 2.0 * g0 + gm) / (h_xi * h_xi);
    }
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    min_abs = std::min(min_abs, std::abs(det));
  }
  return min_abs;
}

/// I(u) = u + F(u), its inverse, and A = F o I^{-1}.
class PlotnikovMaps {
 public:
  explicit PlotnikovMaps(ReactionFunction rf) : rf_(std::move(rf)) {
    const double umax = rf_.u_max();
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kShapeSamples; ++k) {
      const double s = rf_.slope(umax * k / kShapeSamples);
      if (s < best_val) {
        best_val = s;
        best = k;
      }
    }
    const double lo = umax * std::max(0, best - 1) / kShapeSamples;
    const double hi = umax * std::min(kShapeSamples, best + 1) / kShapeSamples;
    const auto refined = roots::golden_min([&](double u) { return rf_.slope(u); }, lo, hi);
    min_slope_ = std::min(best_val, refined.second);
    valid_ = min_slope_ > -1.0;
  }

  bool valid() const noexcept { return valid_; }
  double min_slope() const noexcept { return min_slope_; }
  const ReactionFunction& reaction() const noexcept { return rf_; }
  double w_max() const { return I(rf_.u_max()); }

  double I(double u) const { return u + rf_.value(u); }

  double I_inv(double w) const {
    require_valid();
    if (!(w >= 0.0 && w <= w_max())) {
      throw DomainError("I^{-1} evaluated at w = " + std::to_string(w) + " outside [0, I(u_max)]");
    }
    const auto f = [&](double u) { return u + rf_.value(u) - w; };
    const auto df = [&](double u) { return 1.0 + rf_.slope(u); };
    return roots::bracketed(f, df, 0.0, rf_.u_max(), 1e-2, 0.0, 300);
  }

  double A(double w) const { return rf_.value(I_inv(w)); }

  double A_prime(double w) const {
    const double s = rf_.slope(I_inv(w));
    return s / (1.0 + s);
  }

 private:
  void require_valid() const {
    if (!valid_) throw ValidityError("Plotnikov maps need min F' > -1");
  }

  ReactionFunction rf_;
  double min_slope_ = 0.0;
  bool valid_ = false;
};

inline PlotnikovMaps plotnikov_maps(const ReactionFunction& rf) { return PlotnikovMaps(rf); }

}  // namespace fastreact
