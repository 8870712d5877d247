#include <gtest/gtest.h>

#include <cmath>

#include "edffd/basis.hpp"
#include "edffd/checks/oracles.hpp"
#include "edffd/error.hpp"

using namespace edffd;

TEST(CubicBspline, KnownValues) {
  EXPECT_EQ(cubic_bspline(0.0), 2.0 / 3.0);
  EXPECT_EQ(cubic_bspline(1.0), 1.0 / 6.0);
  EXPECT_NEAR(cubic_bspline(0.5), 23.0 / 48.0, 1e-15);
  EXPECT_NEAR(cubic_bspline(1.5), 1.0 / 48.0, 1e-15);
  EXPECT_EQ(cubic_bspline(2.0), 0.0);
  EXPECT_EQ(cubic_bspline(-3.0), 0.0);
}

TEST(CubicBspline, MatchesPiecewiseOracleAndIsEven) {
  for (int i = -300; i <= 300; ++i) {
    const double u = i / 100.0;
    EXPECT_NEAR(cubic_bspline(u), oracle::bspline(u), 1e-15);
    EXPECT_EQ(cubic_bspline(u), cubic_bspline(-u));
  }
}

TEST(CubicBspline, PartitionOfUnity) {
  for (int i = 0; i < 1000; ++i) {
    const double u = i / 1000.0;
    double s = 0.0;
    for (int k = -1; k <= 2; ++k) s += cubic_bspline(u - k);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(BasisProduct, KnownValues) {
  EXPECT_NEAR(bspline_basis_product(0, 0), 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(bspline_basis_product(1, 0), 1.0 / 9.0, 1e-15);
  EXPECT_EQ(bspline_basis_product(2.5, 0), 0.0);
}

TEST(ExpDecay, KnownValues) {
  const KernelConfig cfg{0.75, 20.0};
  EXPECT_EQ(exp_decay_weight(0.0, cfg), 1.0);
  EXPECT_NEAR(exp_decay_weight(cfg.scale(), cfg), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(exp_decay_weight(3 * cfg.scale(), cfg), 0.049787068367863944, 1e-15);
}

TEST(ExpDecay, StrictlyDecreasingSingleExpression) {
  const KernelConfig cfg{0.5, 13.0};
  double prev = 2.0;
  for (int i = 0; i < 500; ++i) {
    const double r = i * 0.25;
    const double w = exp_decay_weight(r, cfg);
    EXPECT_LT(w, prev);
    EXPECT_NEAR(w, std::exp(-r / 6.5), 1e-15);
    prev = w;
  }
}

TEST(ExpDecay, NonPositiveScale) {
  for (KernelConfig cfg : {KernelConfig{0.0, 1.0}, KernelConfig{0.75, -1.0}}) {
    try {
      exp_decay_weight(1.0, cfg);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NonPositiveScale);
    }
  }
}
