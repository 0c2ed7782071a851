#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fastreact/model.hpp"

using namespace fastreact;

namespace {

const ReactionFunction& cubic() {
  static const ReactionFunction rf = ReactionFunction::reference_cubic();
  return rf;
}

const BranchInverses& cubic_branches() {
  static const BranchInverses bi(cubic());
  return bi;
}

// 3u on [0, 1], 4 - u on [1, 2], 3u - 4 above: the branch inverses are affine.
ReactionFunction piecewise_affine() {
  auto f = [](double u) { return u <= 1.0 ? 3.0 * u : (u <= 2.0 ? 4.0 - u : 3.0 * u - 4.0); };
  auto df = [](double u) { return u < 1.0 ? 3.0 : (u < 2.0 ? -1.0 : 3.0); };
  return ReactionFunction::from_callables(f, df, 3.0);
}

}  // namespace

TEST(EvalF, ReferenceValues) {
  const auto a = cubic().eval(0.0);
  EXPECT_DOUBLE_EQ(a.value, 0.0);
  EXPECT_DOUBLE_EQ(a.derivative, 6.0);
  const auto b = cubic().eval(1.5);
  EXPECT_NEAR(b.value, 2.25, 1e-14);
  EXPECT_NEAR(b.derivative, -0.75, 1e-14);
  const auto c = cubic().eval(3.0);
  EXPECT_NEAR(c.value, 4.5, 1e-14);
  EXPECT_NEAR(c.derivative, 6.0, 1e-14);
}

TEST(EvalF, OutsideDomainThrows) {
  EXPECT_THROW(cubic().eval(-1e-9), DomainError);
  EXPECT_THROW(cubic().eval(4.0 + 1e-9), DomainError);
  EXPECT_NO_THROW(cubic().eval(4.0));
}

TEST(Primitive, AnalyticAndQuadratureAgree) {
  // u^4/4 - 1.5 u^3 + 3 u^2 at u = 1
  EXPECT_NEAR(cubic().primitive(1.0), 1.75, 1e-14);
  const auto generic = ReactionFunction::from_callables(
      [](double u) { return u * u * u - 4.5 * u * u + 6.0 * u; },
      [](double u) { return 3.0 * u * u - 9.0 * u + 6.0; }, 4.0);
  for (double u : {0.3, 1.0, 2.2, 3.7}) {
    const double exact = u * u * u * u / 4.0 - 1.5 * u * u * u + 3.0 * u * u;
    EXPECT_NEAR(generic.primitive(u), exact, 1e-9) << "u = " << u;
  }
}

TEST(BranchStructure, ReferenceCubicFactorization) {
  const auto bs = compute_branch_structure(cubic());
  EXPECT_NEAR(bs.alpha_minus, 0.5, 1e-10);
  EXPECT_NEAR(bs.alpha_plus, 1.0, 1e-10);
  EXPECT_NEAR(bs.beta_minus, 2.0, 1e-10);
  EXPECT_NEAR(bs.beta_plus, 2.5, 1e-10);
  EXPECT_NEAR(bs.f_minus, 2.0, 1e-10);
  EXPECT_NEAR(bs.f_plus, 2.5, 1e-10);
  EXPECT_LT(std::abs(cubic().value(bs.alpha_minus) - bs.f_minus), 1e-10);
  EXPECT_LT(std::abs(cubic().value(bs.beta_plus) - bs.f_plus), 1e-10);
  EXPECT_DOUBLE_EQ(cubic().value(bs.alpha_plus), bs.f_plus);
  EXPECT_LT(bs.alpha_minus, bs.alpha_plus);
  EXPECT_LT(bs.alpha_plus, bs.beta_minus);
  EXPECT_LT(bs.beta_minus, bs.beta_plus);
}

TEST(BranchStructure, RejectsInadmissibleShapes) {
  // monotone
  EXPECT_THROW(compute_branch_structure(ReactionFunction::polynomial({0.0, 1.0}, 4.0)), ShapeError);
  // F(0) != 0
  EXPECT_THROW(compute_branch_structure(ReactionFunction::polynomial({1.0, 6.0, -4.5, 1.0}, 4.0)),
               ShapeError);
  // decreasing first: -u + u^2 goes negative
  EXPECT_THROW(compute_branch_structure(ReactionFunction::polynomial({0.0, -1.0, 1.0}, 4.0)),
               ShapeError);
  // domain too short to reach f+ again
  EXPECT_THROW(compute_branch_structure(ReactionFunction::polynomial({0.0, 6.0, -4.5, 1.0}, 2.2)),
               ShapeError);
}

TEST(BranchStructure, PiecewiseAffine) {
  const auto bs = compute_branch_structure(piecewise_affine());
  EXPECT_NEAR(bs.alpha_plus, 1.0, 1e-9);
  EXPECT_NEAR(bs.beta_minus, 2.0, 1e-9);
  EXPECT_NEAR(bs.f_plus, 3.0, 1e-9);
  EXPECT_NEAR(bs.f_minus, 2.0, 1e-9);
  EXPECT_NEAR(bs.alpha_minus, 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(bs.beta_plus, 7.0 / 3.0, 1e-9);
}

TEST(BranchInverse, ValuesAtTwoPointTwoFive) {
  const auto& bi = cubic_branches();
  const double r3 = std::sqrt(3.0);
  const auto b1 = bi.branch(1, 2.25);
  const auto b2 = bi.branch(2, 2.25);
  const auto b3 = bi.branch(3, 2.25);
  EXPECT_NEAR(b1.u, (3.0 - r3) / 2.0, 1e-10);
  EXPECT_NEAR(b2.u, 1.5, 1e-10);
  EXPECT_NEAR(b3.u, (3.0 + r3) / 2.0, 1e-10);
  EXPECT_NEAR(b1.slope, 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(b2.slope, -4.0 / 3.0, 1e-9);
  EXPECT_NEAR(b3.slope, 2.0 / 3.0, 1e-9);
}

TEST(BranchInverse, ConstantExtensions) {
  const auto& bi = cubic_branches();
  const auto a = bi.branch(1, 3.0);
  EXPECT_DOUBLE_EQ(a.u, 1.0);
  EXPECT_DOUBLE_EQ(a.slope, 0.0);
  const auto b = bi.branch(3, 0.0);
  EXPECT_DOUBLE_EQ(b.u, 2.0);
  EXPECT_DOUBLE_EQ(b.slope, 0.0);
  EXPECT_DOUBLE_EQ(bi.S(2, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(bi.S(2, 2.7), 1.0);
  EXPECT_DOUBLE_EQ(bi.dS(2, 2.7), 0.0);
  EXPECT_THROW(bi.branch(0, 1.0), DomainError);
  EXPECT_THROW(bi.branch(4, 1.0), DomainError);
}

TEST(BranchInverse, RandomRootsAndSlopes) {
  const auto& bi = cubic_branches();
  std::mt19937_64 rng(7);
  const double top = cubic().value(4.0);
  const std::array<std::pair<double, double>, 3> ranges{
      std::pair{0.0, 2.5}, std::pair{2.0, 2.5}, std::pair{2.0, top}};
  for (int i = 1; i <= 3; ++i) {
    std::uniform_real_distribution<double> dist(ranges[i - 1].first, ranges[i - 1].second);
    for (int k = 0; k < 1000; ++k) {
      const double xi = dist(rng);
      if (!(xi > ranges[i - 1].first && xi < ranges[i - 1].second)) continue;
      const auto b = bi.branch(i, xi);
      ASSERT_LT(std::abs(cubic().value(b.u) - xi), 1e-10) << "branch " << i << " xi " << xi;
      const double fold_dist = std::min(std::abs(xi - 2.0), std::abs(xi - 2.5));
      if (fold_dist > 1e-3 && xi > 1e-3) {
        ASSERT_NEAR(b.slope * cubic().slope(b.u), 1.0, 1e-8) << "branch " << i << " xi " << xi;
      }
    }
  }
}

TEST(BranchInverse, SignPatternAndOrdering) {
  const auto& bi = cubic_branches();
  for (int k = 0; k <= 2000; ++k) {
    const double xi = 6.0 * k / 2000.0;
    EXPECT_GE(bi.dS(1, xi), 0.0);
    EXPECT_LE(bi.dS(2, xi), 0.0);
    EXPECT_GE(bi.dS(3, xi), 0.0);
    if (xi > 2.0 && xi < 2.5) {
      EXPECT_LE(bi.S(1, xi), bi.S(2, xi));
      EXPECT_LE(bi.S(2, xi), bi.S(3, xi));
    }
  }
}

TEST(BranchInverse, FoldSlopeIsCappedAndFlagged) {
  const BranchInverses bi(cubic(), 1e3);
  const auto b = bi.branch(2, 2.5 - 1e-12);
  EXPECT_TRUE(b.clamped);
  EXPECT_DOUBLE_EQ(b.slope, -1e3);
  const auto c = bi.branch(1, 2.5 - 1e-12);
  EXPECT_TRUE(c.clamped);
  EXPECT_DOUBLE_EQ(c.slope, 1e3);
}

TEST(Nondegeneracy, ReferenceCubicPositive) {
  const double w = nondegeneracy_check(cubic_branches(), 2.05, 2.45, 100);
  EXPECT_GT(w, 0.0);
  // independent centered-difference Wronskian evaluation gives about 87.6
  EXPECT_NEAR(w, 87.6, 0.5);
}

TEST(Nondegeneracy, PiecewiseAffineIsDegenerate) {
  const BranchInverses bi(piecewise_affine());
  EXPECT_EQ(nondegeneracy_check(bi, 2.1, 2.9, 50), 0.0);
}

TEST(Nondegeneracy, RejectsBadRequests) {
  EXPECT_THROW(nondegeneracy_check(cubic_branches(), 2.05, 2.45, 1), ValidationError);
  EXPECT_THROW(nondegeneracy_check(cubic_branches(), 1.9, 2.45, 10), DomainError);
  EXPECT_THROW(nondegeneracy_check(cubic_branches(), 2.05, 2.5, 10), DomainError);
}

TEST(Plotnikov, ReferenceValues) {
  const PlotnikovMaps maps(cubic());
  EXPECT_TRUE(maps.valid());
  EXPECT_NEAR(maps.min_slope(), -0.75, 1e-12);
  EXPECT_DOUBLE_EQ(maps.I(1.0), 3.5);
  EXPECT_NEAR(maps.A(3.5), 2.5, 1e-12);
  EXPECT_DOUBLE_EQ(maps.I(0.0), 0.0);
  EXPECT_NEAR(maps.A(0.0), 0.0, 1e-15);
}

TEST(Plotnikov, InverseAndComposition) {
  const PlotnikovMaps maps(cubic());
  for (int k = 0; k <= 400; ++k) {
    const double u = 4.0 * k / 400.0;
    ASSERT_NEAR(maps.A(maps.I(u)), cubic().value(u), 1e-10) << "u = " << u;
    const double w = maps.w_max() * k / 400.0;
    ASSERT_NEAR(maps.I(maps.I_inv(w)), w, 1e-10) << "w = " << w;
  }
  EXPECT_THROW(maps.I_inv(-0.1), DomainError);
  EXPECT_THROW(maps.I_inv(maps.w_max() + 0.1), DomainError);
}

TEST(Plotnikov, AKeepsTheMonotonicityProfile) {
  const PlotnikovMaps maps(cubic());
  int changes = 0;
  double prev = maps.A_prime(1e-6);
  for (int k = 1; k <= 2000; ++k) {
    const double cur = maps.A_prime(maps.w_max() * k / 2000.0);
    if ((cur > 0.0) != (prev > 0.0)) ++changes;
    prev = cur;
  }
  EXPECT_EQ(changes, 2);
}

TEST(Plotnikov, InvalidWhenSlopeBelowMinusOne) {
  // F' = 3u^2 - 12u + 9.5 has minimum -2.5 at u = 2
  const auto rf = ReactionFunction::polynomial({0.0, 9.5, -6.0, 1.0}, 4.0);
  EXPECT_NO_THROW(compute_branch_structure(rf));
  const auto maps = plotnikov_maps(rf);
  EXPECT_FALSE(maps.valid());
  EXPECT_NEAR(maps.min_slope(), -2.5, 1e-10);
  EXPECT_THROW(maps.I_inv(1.0), ValidityError);
  EXPECT_THROW(maps.A(1.0), ValidityError);
}
