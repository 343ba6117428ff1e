#include "geonuts/phase.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace geonuts;

TEST(Dot, SmallExamples) {
  EXPECT_DOUBLE_EQ(dot(Vec{{1.0, 2.0}}, Vec{{3.0, 4.0}}), 11.0);
  EXPECT_DOUBLE_EQ(dot(Vec{{1.0, 0.0}}, Vec{{0.0, 1.0}}), 0.0);
}

TEST(Dot, DimensionMismatchThrows) {
  EXPECT_THROW(dot(Vec{{1.0}}, Vec{{1.0, 2.0}}), DimensionError);
}

TEST(WeightedInner, SmallExamples) {
  const Matrix identity = Matrix::Identity(2, 2);
  EXPECT_DOUBLE_EQ(weighted_inner(Vec{{1.0, 0.0}}, Vec{{0.0, 1.0}}, identity), 0.0);
  const Matrix lambda{{2.0, 1.0}, {1.0, 2.0}};
  EXPECT_DOUBLE_EQ(weighted_inner(Vec{{1.0, 0.0}}, Vec{{0.0, 1.0}}, lambda), 1.0);
}

TEST(WeightedInner, MatchesExplicitDoubleSum) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 1 + trial % 6;
    const Vec a = test_support::random_vec(rng, d, 3.0);
    const Vec b = test_support::random_vec(rng, d, 3.0);
    const Matrix lambda = test_support::random_spd(rng, d);
    double expected = 0.0;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) expected += a(i) * lambda(i, j) * b(j);
    EXPECT_NEAR(weighted_inner(a, b, lambda), expected, 1e-12 * (1.0 + std::abs(expected)));
  }
}

TEST(WeightedInner, SymmetricInArguments) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec a = test_support::random_vec(rng, 4);
    const Vec b = test_support::random_vec(rng, 4);
    const Matrix lambda = test_support::random_spd(rng, 4);
    EXPECT_NEAR(weighted_inner(a, b, lambda), weighted_inner(b, a, lambda), 1e-13);
  }
}

TEST(WeightedInner, DimensionErrors) {
  const Matrix lambda = Matrix::Identity(2, 2);
  EXPECT_THROW(weighted_inner(Vec{{1.0}}, Vec{{1.0, 2.0}}, lambda), DimensionError);
  EXPECT_THROW(weighted_inner(Vec{{1.0, 2.0, 3.0}}, Vec{{1.0, 2.0, 3.0}}, lambda),
               DimensionError);
}

TEST(PhasePoint, RejectsMismatchedOrEmpty) {
  EXPECT_THROW(PhasePoint(Vec{{1.0}}, Vec{{1.0, 2.0}}), DimensionError);
  EXPECT_THROW(PhasePoint(Vec(0), Vec(0)), DimensionError);
  const PhasePoint z(Vec{{1.0, 2.0}}, Vec{{0.0, 0.0}});
  EXPECT_EQ(z.dimension(), 2);
  EXPECT_TRUE(z.finite());
}

TEST(PhasePoint, DetectsNonFinite) {
  const PhasePoint z(Vec{{1.0, std::nan("")}}, Vec{{0.0, 0.0}});
  EXPECT_FALSE(z.finite());
}

TEST(TraceEntry, FiredFlagsAreStrict) {
  TraceEntry e{0.0, PhasePoint(Vec{{0.0}}, Vec{{0.0}}), 0.0, 0.0, -1e-300};
  EXPECT_FALSE(e.fired_classic());
  EXPECT_TRUE(e.fired_generalized());
}

TEST(SymmetricEigen, AscendingOrthonormalWithSignConvention) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = test_support::random_spd(rng, 3, -2.0, 5.0);
    const SymmetricEigen eig = symmetric_eigen(a);
    for (Index i = 1; i < 3; ++i) EXPECT_LE(eig.values(i - 1), eig.values(i));
    EXPECT_TRUE((eig.vectors.transpose() * eig.vectors).isApprox(Matrix::Identity(3, 3), 1e-12));
    EXPECT_TRUE((eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose()).isApprox(a, 1e-12));
    for (Index j = 0; j < 3; ++j) {
      Index largest = 0;
      eig.vectors.col(j).cwiseAbs().maxCoeff(&largest);
      EXPECT_GT(eig.vectors(largest, j), 0.0);
    }
  }
}

TEST(SpdPower, SquareRootSquaresBack) {
  const Matrix a{{2.0, 0.5}, {0.5, 1.0}};
  const Matrix r = spd_power(a, 0.5);
  EXPECT_TRUE((r * r).isApprox(a, 1e-13));
  EXPECT_TRUE((spd_power(a, -1.0) * a).isApprox(Matrix::Identity(2, 2), 1e-13));
  EXPECT_THROW(spd_power(Matrix{{1.0, 0.0}, {0.0, -1.0}}, 0.5), NumericalError);
}
