#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "coachmarl/rng.hpp"

namespace coachmarl {

using Action = int;
using JointAction = std::vector<Action>;

/// Which agents are out of control for the current episode. Drawn once before
/// reset and never modified afterwards.
class CrashMask {
 public:
  CrashMask() = default;
  explicit CrashMask(std::vector<bool> bits) : bits_(std::move(bits)) {}

  static CrashMask none(std::size_t n) { return CrashMask(std::vector<bool>(n, false)); }

  std::size_t size() const noexcept { return bits_.size(); }
  bool crashed(std::size_t agent) const { return bits_.at(agent); }
  bool operator[](std::size_t agent) const { return bits_[agent]; }
  std::size_t popcount() const noexcept;
  bool any() const noexcept { return popcount() > 0; }
  const std::vector<bool>& bits() const noexcept { return bits_; }

  friend bool operator==(const CrashMask&, const CrashMask&) = default;

 private:
  std::vector<bool> bits_;
};

enum class CrashBehavior { Freeze, Random };

std::string_view to_string(CrashBehavior behavior);
CrashBehavior crash_behavior_from_string(std::string_view text);

/// Bernoulli(alpha) crash bit per agent.
CrashMask sample_crash_mask(std::size_t n, double alpha, Rng& rng);

/// Largest number of crashed agents the re-sampling rule accepts: ceil(n * alpha).
std::size_t resample_cap(std::size_t n, double alpha);

/// Rejection sampling: redraws whole masks until popcount <= resample_cap(n, alpha).
/// Throws SamplingError after max_tries rejected draws.
CrashMask sample_crash_mask_resampled(std::size_t n, double alpha, Rng& rng,
                                      std::size_t max_tries = 10000);

/// Replaces crashed agents' proposed actions; uncrashed entries are copied through.
/// Random behavior draws from rng only for crashed agents.
JointAction apply_crash_behavior(const CrashMask& mask, CrashBehavior behavior,
                                 std::span<const Action> proposed, Action noop_action,
                                 int action_count, Rng& rng);

struct TimeStep {
  Eigen::MatrixXd observations;  // one row per agent
  Eigen::VectorXd state;
};

struct StepResult {
  TimeStep next;
  double reward = 0.0;
  bool done = false;        // episode over for any reason
  bool terminated = false;  // goal reached; false when only the step budget ran out
};

/// Crashed Dec-POMDP environment contract. Crash handling lives outside the
/// environment: callers substitute crashed agents' actions before step().
class EnvModel {
 public:
  virtual ~EnvModel() = default;

  virtual int agent_count() const = 0;
  virtual int action_count() const = 0;
  virtual int observation_size() const = 0;
  virtual int state_size() const = 0;
  virtual int max_steps() const = 0;
  virtual double discount() const = 0;
  virtual Action noop_action() const = 0;

  virtual TimeStep reset() = 0;
  virtual StepResult step(std::span<const Action> joint_action) = 0;
  /// Whether the episode in progress has reached its goal.
  virtual bool succeeded() const = 0;
};

}  // namespace coachmarl
