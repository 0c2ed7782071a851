#pragma once

// Structural identities between the kinetic functions p (of u) and q (of v)
// in the fast-reaction limit, written for any callables p, q : xi -> [0, 1].

#include <algorithm>
#include <array>
#include <cmath>

#include "fastreact/model.hpp"

namespace fastreact {

/// chi_alpha(xi) = 1 for 0 < xi <= alpha, else 0.
inline double chi(double alpha, double xi) noexcept {
  return (xi > 0.0 && xi <= alpha) ? 1.0 : 0.0;
}

inline double alternating_sign(int i) noexcept { return (i % 2 == 1) ? 1.0 : -1.0; }

/// Limit profile of p when u oscillates among the roots of F(.) = v:
/// 1 on (0, S_1(v)], kappa_1 on (S_1(v), S_2(v)], kappa_2 on (S_2(v), S_3(v)].
class ThreeJumpKinetic {
 public:
  ThreeJumpKinetic(const BranchInverses& bi, double v, double kappa1, double kappa2)
      : s1_(bi.S(1, v)), s2_(bi.S(2, v)), s3_(bi.S(3, v)), k1_(kappa1), k2_(kappa2) {}

  double operator()(double tau) const noexcept {
    if (tau <= 0.0) return 0.0;
    if (tau <= s1_) return 1.0;
    if (tau <= s2_) return k1_;
    if (tau <= s3_) return k2_;
    return 0.0;
  }

 private:
  double s1_, s2_, s3_, k1_, k2_;
};

/// q(xi) = sum_i (-1)^{i+1} p(S_i(xi)) 1_{J_i}(xi).
template <class P>
double pushforward(const P& p, const BranchInverses& bi, double xi) {
  double acc = 0.0;
  for (int i = 1; i <= 3; ++i) {
    if (bi.in_J(i, xi)) acc += alternating_sign(i) * p(bi.S(i, xi));
  }
  return acc;
}

template <class P, class Q>
double pushforward_gap(const P& p, const Q& q, const BranchInverses& bi, double xi) {
  return std::abs(q(xi) - pushforward(p, bi, xi));
}

/// S(eta) = sum_i p(S_i(eta)) |S_i'(eta)|.
template <class P>
double s_functional(const P& p, const BranchInverses& bi, double eta) {
  double acc = 0.0;
  for (int i = 1; i <= 3; ++i) {
    const BranchValue b = bi.branch(i, eta);
    acc += p(b.u) * std::abs(b.slope);
  }
  return acc;
}

/// R(eta, xi) = sum_i (-1)^{i+1} p(S_i(xi)) 1_{J_i}(xi)
///              * sum_j chi_{S_i(xi)}(S_j(eta)) |S_j'(eta)|.
template <class P>
double r_functional(const P& p, const BranchInverses& bi, double eta, double xi) {
  std::array<BranchValue, 3> at_eta{bi.branch(1, eta), bi.branch(2, eta), bi.branch(3, eta)};
  double acc = 0.0;
  for (int i = 1; i <= 3; ++i) {
    if (!bi.in_J(i, xi)) continue;
    const double si = bi.S(i, xi);
    double inner = 0.0;
    for (const auto& b : at_eta) inner += chi(si, b.u) * std::abs(b.slope);
    acc += alternating_sign(i) * p(si) * inner;
  }
  return acc;
}

/// Closed form of R(eta, xi_1) for f- < xi_1 < eta < f+.
template <class P>
double r_closed_below(const P& p, const BranchInverses& bi, double eta, double xi1) {
  return (p(bi.S(3, xi1)) - p(bi.S(2, xi1))) * (bi.dS(1, eta) - bi.dS(2, eta));
}

/// Closed form of R(eta, xi_2) for f- < eta < xi_2 < f+, with q the
/// pushforward of p.
template <class P, class Q>
double r_closed_above(const P& p, const Q& q, const BranchInverses& bi, double eta, double xi2) {
  return q(xi2) * bi.dS(1, eta) + p(bi.S(3, xi2)) * (bi.dS(3, eta) - bi.dS(2, eta));
}

/// | [q(xi) - chi_eta(xi)] S(eta) - chi_xi(eta) q(xi) - chi_eta(xi) q(eta)
///   + q(eta) q(xi) - R(eta, xi) |.
template <class P, class Q>
double main_identity_gap(const P& p, const Q& q, const BranchInverses& bi, double eta, double xi) {
  const double qx = q(xi);
  const double qe = q(eta);
  const double c_ex = chi(eta, xi);
  const double lhs = (qx - c_ex) * s_functional(p, bi, eta) - chi(xi, eta) * qx - c_ex * qe +
                     qe * qx - r_functional(p, bi, eta, xi);
  return std::abs(lhs);
}

/// R_i = I o S_i and R_i' = S_i' + 1_{J_i}.
inline double plotnikov_branch(const PlotnikovMaps& maps, const BranchInverses& bi, int i,
                               double xi) {
  return maps.I(bi.S(i, xi));
}
inline double plotnikov_branch_slope(const BranchInverses& bi, int i, double xi) {
  return bi.dS(i, xi) + (bi.in_J(i, xi) ? 1.0 : 0.0);
}

/// | sum_i k(R_i(xi)) |R_i'(xi)| - sum_i (-1)^{i+1} p(S_i(xi)) S_i'(xi) - q(xi) |.
template <class K, class P, class Q>
double plotnikov_pushforward_gap(const K& k, const P& p, const Q& q, const BranchInverses& bi,
                                 const PlotnikovMaps& maps, double xi) {
  double lhs = 0.0;
  double rhs = q(xi);
  for (int i = 1; i <= 3; ++i) {
    const BranchValue b = bi.branch(i, xi);
    const double ri_slope = b.slope + (bi.in_J(i, xi) ? 1.0 : 0.0);
    lhs += k(maps.I(b.u)) * std::abs(ri_slope);
    rhs += alternating_sign(i) * p(b.u) * b.slope;
  }
  return std::abs(lhs - rhs);
}

}  // namespace fastreact
