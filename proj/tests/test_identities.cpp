#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fastreact/harness.hpp"
#include "fastreact/identities.hpp"

using namespace fastreact;

namespace {

const BranchInverses& bi() {
  static const BranchInverses b(ReactionFunction::reference_cubic());
  return b;
}

// u oscillating among the three roots of F(.) = v with a deterministic v:
// the kinetic function of v is then chi_v itself.
struct Oscillation {
  double v;
  ThreeJumpKinetic p;
  Oscillation(double v_, double k1, double k2) : v(v_), p(bi(), v_, k1, k2) {}
  double q(double xi) const { return chi(v, xi); }
};

}  // namespace

TEST(Kinetic, ChiIsLeftContinuous) {
  EXPECT_EQ(chi(2.0, 2.0), 1.0);
  EXPECT_EQ(chi(2.0, 2.0 + 1e-15), 0.0);
  EXPECT_EQ(chi(2.0, 0.0), 0.0);
  EXPECT_EQ(chi(2.0, 1e-300), 1.0);
  EXPECT_EQ(alternating_sign(1), 1.0);
  EXPECT_EQ(alternating_sign(2), -1.0);
  EXPECT_EQ(alternating_sign(3), 1.0);
}

TEST(Kinetic, ThreeJumpProfileLevels) {
  const ThreeJumpKinetic p(bi(), 2.25, 0.6, 0.3);
  EXPECT_EQ(p(0.0), 0.0);
  EXPECT_EQ(p(0.5), 1.0);
  EXPECT_EQ(p(1.0), 0.6);
  EXPECT_EQ(p(1.5), 0.6);
  EXPECT_EQ(p(2.0), 0.3);
  EXPECT_EQ(p(2.5), 0.0);
}

TEST(Kinetic, SFunctionalAtTheOscillationLevel) {
  // slopes 2/3, -4/3, 2/3 at 2.25 and p levels 1, 0.6, 0.3
  const ThreeJumpKinetic p(bi(), 2.25, 0.6, 0.3);
  EXPECT_NEAR(s_functional(p, bi(), 2.25), 2.0 / 3.0 + 0.6 * 4.0 / 3.0 + 0.3 * 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(s_functional(p, bi(), 2.25), 5.0 / 3.0, 1e-9);
}

TEST(Kinetic, PushforwardReproducesChiV) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> vd(2.02, 2.48), kd(0.0, 1.0), xd(0.01, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double k1 = kd(rng);
    const Oscillation o(vd(rng), k1, k1 * kd(rng));
    for (int k = 0; k < 200; ++k) {
      const double xi = xd(rng);
      if (std::abs(xi - o.v) < 1e-9 || std::abs(xi - 2.0) < 1e-9 || std::abs(xi - 2.5) < 1e-9)
        continue;
      ASSERT_LE(pushforward_gap(o.p, [&](double x) { return o.q(x); }, bi(), xi), 1e-12)
          << "v " << o.v << " xi " << xi;
    }
  }
}

TEST(Kinetic, ClosedFormsOfR) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(2.01, 2.49);
  const Oscillation o(2.25, 0.7, 0.2);
  const auto q = [&](double x) { return pushforward(o.p, bi(), x); };
  for (int k = 0; k < 500; ++k) {
    double a = d(rng), b = d(rng);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-6) continue;
    // xi_1 < eta < xi_2
    EXPECT_NEAR(r_functional(o.p, bi(), b, a), r_closed_below(o.p, bi(), b, a), 1e-12);
    EXPECT_NEAR(r_functional(o.p, bi(), a, b), r_closed_above(o.p, q, bi(), a, b), 1e-12);
  }
}

TEST(Kinetic, RVanishesBeyondTheSupport) {
  const Oscillation o(2.25, 0.7, 0.2);
  for (double xi : {2.6, 3.0, 4.0}) {
    for (double eta : {0.5, 2.2, 3.3}) EXPECT_EQ(r_functional(o.p, bi(), eta, xi), 0.0);
  }
}

TEST(Kinetic, MainIdentityHoldsForOscillations) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> vd(2.02, 2.48), kd(0.0, 1.0), xd(0.05, 4.0);
  for (int trial = 0; trial < 40; ++trial) {
    const double k1 = kd(rng);
    const Oscillation o(vd(rng), k1, k1 * kd(rng));
    const auto q = [&](double x) { return o.q(x); };
    for (int k = 0; k < 100; ++k) {
      const double eta = xd(rng), xi = xd(rng);
      bool near_jump = false;
      for (double s : {o.v, 2.0, 2.5}) {
        near_jump = near_jump || std::abs(eta - s) < 1e-9 || std::abs(xi - s) < 1e-9;
      }
      if (near_jump) continue;
      ASSERT_LE(main_identity_gap(o.p, q, bi(), eta, xi), 1e-12)
          << "v " << o.v << " eta " << eta << " xi " << xi;
    }
  }
}

TEST(Kinetic, EverythingVanishesAboveTheBound) {
  const Oscillation o(2.25, 0.5, 0.5);
  const auto q = [&](double x) { return o.q(x); };
  EXPECT_EQ(s_functional(o.p, bi(), 3.0), 0.0);
  EXPECT_EQ(main_identity_gap(o.p, q, bi(), 3.0, 3.5), 0.0);
  EXPECT_EQ(main_identity_gap(o.p, q, bi(), 4.0, 2.7), 0.0);
}

TEST(Kinetic, PlotnikovPushforwardForOscillations) {
  const PlotnikovMaps maps(ReactionFunction::reference_cubic());
  const Oscillation o(2.3, 0.8, 0.35);
  const auto k = [&](double w) { return o.p(maps.I_inv(w)); };
  const auto q = [&](double x) { return o.q(x); };
  for (double xi : {0.7, 1.9, 2.1, 2.29, 2.31, 2.45, 2.8, 3.5}) {
    EXPECT_LE(plotnikov_pushforward_gap(k, o.p, q, bi(), maps, xi), 1e-9) << "xi " << xi;
  }
  EXPECT_DOUBLE_EQ(plotnikov_branch(maps, bi(), 1, 3.0), 3.5);
  EXPECT_DOUBLE_EQ(plotnikov_branch_slope(bi(), 2, 2.25), bi().dS(2, 2.25) + 1.0);
}

TEST(Kinetic, ExactTierIsAtRoundoff) {
  const ExactTier tier = exact_tier(bi(), 1e-3, 20240917);
  EXPECT_GT(tier.evaluations, 0u);
  EXPECT_LE(tier.worst(), 1e-12);
}
