// Copyright 2026 The localsgd Authors. Licensed under the Apache License, Version 2.0.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "localsgd/bounds.hpp"
#include "localsgd/schedules.hpp"

namespace localsgd {
namespace {

using Taus = std::vector<std::int64_t>;

TEST(GrowingSchedule, PaperQuadraticSetting) {
  const auto s = growing_schedule(1000, 20);
  EXPECT_EQ(growing_scale(1000, 20), 5);
  EXPECT_EQ(s.taus(), (Taus{0, 5, 15, 30, 50, 75, 105, 140, 180, 225, 275, 330, 390, 455, 525, 600, 680, 765,
                            855, 950, 1000}));
  EXPECT_EQ(s.rounds(), 20);
}

TEST(GrowingSchedule, SmallCases) {
  EXPECT_EQ(growing_schedule(2, 2).taus(), (Taus{0, 1, 2}));
  EXPECT_EQ(growing_scale(1000, 1), 2000);
  EXPECT_EQ(growing_schedule(1000, 1).taus(), (Taus{0, 1000}));
  EXPECT_EQ(growing_schedule(1000, 1), one_shot(1000));
}

TEST(GrowingSchedule, RangeChecks) {
  EXPECT_EQ(max_growing_rounds(1000), 44);
  EXPECT_EQ(max_growing_rounds(8), 4);
  EXPECT_NO_THROW(growing_schedule(1000, 44));
  EXPECT_THROW(growing_schedule(1000, 45), std::invalid_argument);
  EXPECT_THROW(growing_schedule(1000, 0), std::invalid_argument);
  EXPECT_THROW(growing_schedule(0, 1), std::invalid_argument);
}

// Uncapped prefix obeys tau_j = a j (j+1) / 2; every schedule ends at T with R_eff <= R.
TEST(GrowingSchedule, ClosedFormPrefixAndInvariants) {
  for (std::int64_t T : {1, 2, 3, 10, 97, 1000, 4321, 8000}) {
    for (std::int64_t R = 1; R <= max_growing_rounds(T); ++R) {
      const auto s = growing_schedule(T, R);
      const auto a = growing_scale(T, R);
      ASSERT_EQ(s.taus().front(), 0);
      ASSERT_EQ(s.horizon(), T);
      ASSERT_LE(s.rounds(), R);
      for (std::size_t j = 1; j < s.taus().size(); ++j) {
        ASSERT_LT(s.taus()[j - 1], s.taus()[j]);
        const auto closed = a * static_cast<std::int64_t>(j) * static_cast<std::int64_t>(j + 1) / 2;
        if (closed < T) {
          ASSERT_EQ(s.taus()[j], closed) << "T=" << T << " R=" << R << " j=" << j;
        } else {
          ASSERT_EQ(s.taus()[j], T);
        }
      }
    }
  }
}

TEST(GrowingSchedule, CappingReducesEffectiveRounds) {
  // a = ceil(20/16) = 2: 2, 6, 12 -> capped 10; 4 requested, 3 realized.
  const auto s = growing_schedule(10, 4);
  EXPECT_EQ(s.taus(), (Taus{0, 2, 6, 10}));
  EXPECT_EQ(s.rounds(), 3);
}

TEST(GrowingSchedule, ExplicitScaleShortOfHorizonAppendsT) {
  const auto s = growing_schedule_with_scale(1000, 10, 18);
  EXPECT_EQ(s.taus(), (Taus{0, 18, 54, 108, 180, 270, 378, 504, 648, 810, 990, 1000}));
  EXPECT_EQ(growing_schedule_with_scale(1000, 10, 20), growing_schedule(1000, 10));
}

TEST(FixedSchedule, Examples) {
  const auto s = fixed_schedule(1000, 100);
  EXPECT_EQ(s.rounds(), 10);
  EXPECT_EQ(s.taus().back(), 1000);
  EXPECT_EQ(fixed_schedule(10, 1).taus(), (Taus{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  EXPECT_EQ(fixed_schedule(10, 3).taus(), (Taus{0, 3, 6, 9, 10}));
  EXPECT_EQ(fixed_schedule(7, 7).taus(), (Taus{0, 7}));
  EXPECT_THROW(fixed_schedule(10, 0), std::invalid_argument);
  EXPECT_THROW(fixed_schedule(10, 11), std::invalid_argument);
}

TEST(OneShot, Examples) {
  EXPECT_EQ(one_shot(5).taus(), (Taus{0, 5}));
  EXPECT_EQ(one_shot(1).taus(), (Taus{0, 1}));
  const auto s = one_shot(50);
  for (std::int64_t t = 0; t < 50; ++t) EXPECT_EQ(s.tau_of(t), 0);
  EXPECT_EQ(s.tau_of(50), 50);
  EXPECT_THROW(one_shot(0), std::invalid_argument);
}

TEST(CommSchedule, TauOfAndValidation) {
  const CommSchedule s({0, 3, 6, 9, 10});
  EXPECT_EQ(s.tau_of(0), 0);
  EXPECT_EQ(s.tau_of(2), 0);
  EXPECT_EQ(s.tau_of(3), 3);
  EXPECT_EQ(s.tau_of(8), 6);
  EXPECT_EQ(s.tau_of(10), 10);
  EXPECT_THROW(s.tau_of(11), std::out_of_range);
  EXPECT_TRUE(s.is_communication(9));
  EXPECT_FALSE(s.is_communication(8));
  EXPECT_EQ(s.interval(3), 1);
  EXPECT_THROW(CommSchedule({0}), std::invalid_argument);
  EXPECT_THROW(CommSchedule({1, 3}), std::invalid_argument);
  EXPECT_THROW(CommSchedule({0, 3, 3}), std::invalid_argument);
}

TEST(BetaMin, Examples) {
  EXPECT_DOUBLE_EQ(beta_min(1.0, 0.0, 10, 1000, 10), 9.0);
  EXPECT_DOUBLE_EQ(beta_min(2.0, 0.0, 3, 77, 5), 18.0);
  EXPECT_NEAR(beta_min(3.0, 1.0, 20, 1000, 10), 128.10, 0.01);
  EXPECT_NEAR(beta_min(1.0, 1.0, 20, 1000, 20), 16.333347464017315, 1e-12);
  EXPECT_THROW(beta_min(0.5, 0.0, 1, 1, 1), std::invalid_argument);
  EXPECT_THROW(beta_min(1.0, -1.0, 1, 1, 1), std::invalid_argument);
}

TEST(BetaCondition, Examples) {
  EXPECT_TRUE(check_beta_condition(growing_schedule(1000, 20), 9.0, 1.0, 0.0, 1));
  EXPECT_TRUE(check_beta_condition(one_shot(1000), 9.0, 1.0, 0.0, 1));
  EXPECT_TRUE(check_beta_condition(growing_schedule(1000, 20), beta_min(1.0, 1.0, 20, 1000, 20), 1.0, 1.0, 20));
  EXPECT_FALSE(check_beta_condition(fixed_schedule(100, 100), 1.0, 10.0, 10.0, 1));
  EXPECT_THROW(check_beta_condition(one_shot(10), 0.0, 1.0, 0.0, 1), std::invalid_argument);
}

// beta_min always satisfies the per-interval condition for the growing schedule.
TEST(BetaCondition, BetaMinSufficesForGrowingSchedule) {
  for (std::int64_t T : {100, 1000, 5000}) {
    for (std::int64_t R : {1, 2, 5, 10, 20}) {
      if (R > max_growing_rounds(T)) continue;
      for (double kappa : {1.0, 3.0, 10.0}) {
        for (double c : {0.0, 0.5, 1.0, 10.0}) {
          for (std::int64_t N : {1, 4, 20}) {
            const double b = beta_min(kappa, c, N, T, R);
            EXPECT_TRUE(check_beta_condition(growing_schedule(T, R), b, kappa, c, N))
                << "T=" << T << " R=" << R << " kappa=" << kappa << " c=" << c << " N=" << N;
          }
        }
      }
    }
  }
}

TEST(StepSize, InverseT) {
  const StepSchedule s = InverseTSteps{1.0, 1.0};
  EXPECT_DOUBLE_EQ(step_size(s, 0), 3.0);
  EXPECT_DOUBLE_EQ(step_size(s, 2), 1.0);
}

TEST(StepSize, Theta) {
  const ThetaSteps th{1.0, 2.0};
  EXPECT_EQ(th.t0(), 4);
  EXPECT_DOUBLE_EQ(step_size(th, 0), 0.5);
  EXPECT_DOUBLE_EQ(step_size(th, 3), 0.5);
  EXPECT_DOUBLE_EQ(step_size(th, 4), 0.32);
  const ThetaSteps unit{1.0, 1.0};
  EXPECT_EQ(unit.t0(), 2);
  EXPECT_DOUBLE_EQ(step_size(unit, 0), 1.0);
  EXPECT_DOUBLE_EQ(step_size(unit, 1), 1.0);
  EXPECT_DOUBLE_EQ(step_size(unit, 2), 4.0 / 9.0);
}

TEST(StepSize, ThetaNeverExceedsOneOverL) {
  for (const auto& th : {ThetaSteps{1.0, 1.0}, ThetaSteps{1.0, 2.0}, ThetaSteps{0.3, 7.0}, ThetaSteps{2.0, 2.5}}) {
    for (std::int64_t t = 0; t <= 1'000'000; ++t) {
      const double v = step_size(th, t);
      ASSERT_GT(v, 0.0);
      ASSERT_LE(v, 1.0 / th.L) << "t=" << t;
    }
  }
}

TEST(StepSize, ConstantAndCapped) {
  EXPECT_EQ(step_size(ConstantSteps{0.25}, 17), 0.25);
  const StepSchedule capped = CappedInverseTSteps{1.0, 2.0};
  EXPECT_DOUBLE_EQ(step_size(capped, 0), 0.5);
  EXPECT_DOUBLE_EQ(step_size(capped, 3), 0.5);
  EXPECT_DOUBLE_EQ(step_size(capped, 4), 0.4);
  EXPECT_DOUBLE_EQ(step_size(capped, 999), 0.002);
}

TEST(StepSize, Validation) {
  EXPECT_THROW(validate(InverseTSteps{0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(validate(ThetaSteps{2.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(validate(ConstantSteps{0.0}), std::invalid_argument);
  EXPECT_NO_THROW(validate(CappedInverseTSteps{1.0, 2.0}));
}

TEST(Schedules, SynchronizedAndSingleRoundIdentities) {
  for (std::int64_t T : {1, 5, 100}) {
    Taus all;
    for (std::int64_t t = 0; t <= T; ++t) all.push_back(t);
    EXPECT_EQ(fixed_schedule(T, 1).taus(), all);
    EXPECT_EQ(growing_schedule(T, 1), one_shot(T));
  }
}

// sum_t (t - tau(t)) / (t + beta) <= 8T/R for the growing schedule when beta >= 9.
TEST(Schedules, GrowingConsensusSumBelowEightTOverR) {
  for (std::int64_t T : {50, 200, 1000, 3000, 8000}) {
    for (std::int64_t R = 1; R <= max_growing_rounds(T); R += 3) {
      for (double beta : {9.0, 20.0, 100.0}) {
        const double s = consensus_sum(growing_schedule(T, R), beta);
        EXPECT_LE(s, 8.0 * static_cast<double>(T) / static_cast<double>(R))
            << "T=" << T << " R=" << R << " beta=" << beta;
      }
    }
  }
}

}  // namespace
}  // namespace localsgd
