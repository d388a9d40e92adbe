#include <random>

#include <gtest/gtest.h>

#include "coachmarl/coach.hpp"
#include "coachmarl/errors.hpp"
#include "oracles.hpp"

using namespace coachmarl;

namespace {

CoachState at(double alpha) {
  CoachState s;
  s.alpha_t = alpha;
  return s;
}

}  // namespace

TEST(CoachRule, FixedIgnoresPerformance) {
  for (double e : {0.0, 0.3, 1.0}) EXPECT_EQ(next_crash_rate(FixedRate{0.05}, at(0.05), e), 0.05);
}

TEST(CoachRule, AdaptiveAboveThreshold) {
  EXPECT_NEAR(next_crash_rate(AdaptiveRate{0.75, 0.01, 0.0}, at(0.05), 0.80), 0.0595, 1e-15);
}

TEST(CoachRule, AdaptiveBelowThreshold) {
  EXPECT_NEAR(next_crash_rate(AdaptiveRate{0.75, 0.01, 0.0}, at(0.05), 0.50), 0.0495, 1e-15);
}

TEST(CoachRule, AdaptiveThresholdIsInclusive) {
  EXPECT_GT(next_crash_rate(AdaptiveRate{0.75, 0.01, 0.0}, at(0.05), 0.75), 0.05);
}

TEST(CoachRule, CurriculumCaps) {
  EXPECT_EQ(next_crash_rate(CurriculumRate{0.001, 0.1}, at(0.0995), 0.2), 0.1);
  EXPECT_NEAR(next_crash_rate(CurriculumRate{0.001, 0.1}, at(0.05), 0.2), 0.051, 1e-15);
}

TEST(CoachRule, InitialRates) {
  EXPECT_EQ(initial_alpha(CurriculumRate{}), 0.0);
  EXPECT_EQ(initial_alpha(FixedRate{0.2}), 0.2);
  EXPECT_EQ(initial_alpha(AdaptiveRate{0.75, 0.01, 0.3}), 0.3);
}

TEST(CoachRule, DomainErrors) {
  EXPECT_THROW(next_crash_rate(FixedRate{0.1}, at(0.1), 1.5), ParameterError);
  EXPECT_THROW(next_crash_rate(FixedRate{0.1}, at(-0.1), 0.5), ParameterError);
  EXPECT_THROW(validate(FixedRate{1.5}), ParameterError);
  EXPECT_THROW(validate(AdaptiveRate{1.2, 0.01, 0.0}), ParameterError);
  EXPECT_THROW(validate(AdaptiveRate{0.75, -0.01, 0.0}), ParameterError);
  EXPECT_THROW(validate(CurriculumRate{-0.001, 0.1}), ParameterError);
  EXPECT_THROW(Coach(FixedRate{2.0}), ParameterError);
}

TEST(CoachRule, MatchesLiteralTranscriptionToOneUlp) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double alpha = u(rng), e = u(rng), beta = u(rng), rho = u(rng), delta = u(rng) * 0.1, cap = u(rng);
    EXPECT_LE(oracle::ulp_distance(next_crash_rate(FixedRate{alpha}, at(alpha), e), oracle::fixed_rule(alpha)), 1u);
    EXPECT_LE(oracle::ulp_distance(next_crash_rate(AdaptiveRate{beta, rho, 0.0}, at(alpha), e),
                                   oracle::adaptive_rule(alpha, e, beta, rho)),
              1u);
    if (alpha <= cap) {
      EXPECT_LE(oracle::ulp_distance(next_crash_rate(CurriculumRate{delta, cap}, at(alpha), e),
                                     oracle::curriculum_rule(alpha, delta, cap)),
                1u);
    }
  }
}

TEST(CoachRule, RangePreserved) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double alpha = u(rng), e = u(rng);
    for (const CoachStrategy& s : {CoachStrategy{FixedRate{alpha}}, CoachStrategy{CurriculumRate{u(rng), u(rng)}},
                                   CoachStrategy{AdaptiveRate{u(rng), u(rng), 0.0}}}) {
      const double next = next_crash_rate(s, at(alpha), e);
      ASSERT_GE(next, 0.0);
      ASSERT_LE(next, 1.0);
    }
  }
}

TEST(ClosedForm, Examples) {
  EXPECT_NEAR(alpha_trajectory_closed_form(AdaptiveRate{0.75, 0.01, 0.0}, 1, true), 0.01, 1e-15);
  EXPECT_NEAR(alpha_trajectory_closed_form(AdaptiveRate{0.75, 0.5, 0.8}, 2, false), 0.2, 1e-15);
  EXPECT_EQ(alpha_trajectory_closed_form(AdaptiveRate{0.75, 0.3, 0.4}, 0, true), 0.4);
}

TEST(ClosedForm, SimulatedTrajectoryAgrees) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const AdaptiveRate s{0.5, 0.001 + 0.5 * u(rng), u(rng)};
    for (bool above : {true, false}) {
      Coach coach(s);
      double previous = coach.crash_rate();
      for (long t = 1; t <= 2000; ++t) {
        const double alpha = coach.observe(above ? 0.9 : 0.1);
        ASSERT_NEAR(alpha, alpha_trajectory_closed_form(s, t, above), 1e-12) << "t=" << t;
        // Monotone approach to the fixed point.
        if (above) ASSERT_GE(alpha, previous);
        else ASSERT_LE(alpha, previous);
        previous = alpha;
      }
    }
  }
}

TEST(ClosedForm, ApproachesOneFromBelow) {
  const AdaptiveRate s{0.75, 0.01, 0.0};
  EXPECT_LT(alpha_trajectory_closed_form(s, 100, true), alpha_trajectory_closed_form(s, 1000, true));
  EXPECT_NEAR(alpha_trajectory_closed_form(s, 5000, true), 1.0, 1e-12);
}

TEST(SpecialCases, AdaptiveWithoutStepIsFixed) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double alpha = u(rng), e = u(rng);
    EXPECT_EQ(next_crash_rate(AdaptiveRate{u(rng), 0.0, 0.0}, at(alpha), e),
              next_crash_rate(FixedRate{alpha}, at(alpha), e));
  }
}

TEST(SpecialCases, CurriculumWithoutIncrementIsFixed) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double alpha = u(rng), e = u(rng);
    EXPECT_EQ(next_crash_rate(CurriculumRate{0.0, 1.0}, at(alpha), e), next_crash_rate(FixedRate{alpha}, at(alpha), e));
  }
}

TEST(SpecialCases, MonotoneResponse) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double alpha = 0.999 * u(rng);
    const AdaptiveRate s{0.2 + 0.6 * u(rng), 0.001 + 0.999 * u(rng), 0.0};
    EXPECT_GT(next_crash_rate(s, at(alpha), s.beta), next_crash_rate(s, at(alpha), s.beta * 0.5));
  }
}

TEST(CoachObject, TracksRoundsAndLastPerformance) {
  Coach coach(CurriculumRate{0.25, 0.6});
  EXPECT_EQ(coach.crash_rate(), 0.0);
  coach.observe(0.4);
  coach.observe(0.9);
  EXPECT_EQ(coach.state().episode_index, 2);
  EXPECT_EQ(coach.state().last_e, 0.9);
  EXPECT_EQ(coach.crash_rate(), 0.5);
  coach.observe(0.9);
  EXPECT_EQ(coach.crash_rate(), 0.6);
}

TEST(CoachObject, DescribeNamesTheStrategy) {
  EXPECT_EQ(describe(FixedRate{0.0}).rfind("fixed", 0), 0u);
  EXPECT_EQ(describe(CurriculumRate{}).rfind("curriculum", 0), 0u);
  EXPECT_EQ(describe(AdaptiveRate{}).rfind("adaptive", 0), 0u);
}
