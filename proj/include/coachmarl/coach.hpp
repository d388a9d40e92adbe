#pragma once

#include <optional>
#include <string>
#include <variant>

namespace coachmarl {

/// Constant crash rate.
struct FixedRate {
  double alpha = 0.0;
  friend bool operator==(const FixedRate&, const FixedRate&) = default;
};

/// Starts crash-free and raises the rate by delta_alpha per coach round, capped at alpha_max.
struct CurriculumRate {
  double delta_alpha = 0.001;
  double alpha_max = 0.1;
  friend bool operator==(const CurriculumRate&, const CurriculumRate&) = default;
};

/// Moves the rate toward 1 when performance clears beta and toward 0 otherwise,
/// with step size rho.
struct AdaptiveRate {
  double beta = 0.75;
  double rho = 0.01;
  double alpha_init = 0.0;
  friend bool operator==(const AdaptiveRate&, const AdaptiveRate&) = default;
};

using CoachStrategy = std::variant<FixedRate, CurriculumRate, AdaptiveRate>;

/// Throws ParameterError if any probability, threshold or step size is out of range.
void validate(const CoachStrategy& strategy);
std::string describe(const CoachStrategy& strategy);

/// Crash rate of the first coach round.
double initial_alpha(const CoachStrategy& strategy);

struct CoachState {
  double alpha_t = 0.0;
  long episode_index = 0;  // coach rounds completed so far
  std::optional<double> last_e;
};

/// One application of the coach's mapping F(alpha_t, e_t, beta).
double next_crash_rate(const CoachStrategy& strategy, const CoachState& state, double e_t);

/// Analytic value of the adaptive rule after t rounds with a constant indicator:
/// 1 - (1-rho)^t (1-alpha_init) if always above threshold, (1-rho)^t alpha_init otherwise.
double alpha_trajectory_closed_form(const AdaptiveRate& strategy, long t, bool always_above);

/// Owns the evolving state for one training run.
class Coach {
 public:
  explicit Coach(CoachStrategy strategy);

  double crash_rate() const noexcept { return state_.alpha_t; }
  const CoachState& state() const noexcept { return state_; }
  const CoachStrategy& strategy() const noexcept { return strategy_; }

  /// Feeds performance e_t for the round just finished; returns alpha_{t+1}.
  double observe(double e_t);

 private:
  CoachStrategy strategy_;
  CoachState state_;
};

}  // namespace coachmarl
