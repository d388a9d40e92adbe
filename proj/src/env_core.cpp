#include "coachmarl/env_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coachmarl/errors.hpp"

namespace coachmarl {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("crash rate must lie in [0, 1], got " + std::to_string(alpha));
  }
}

}  // namespace

std::size_t CrashMask::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

std::string_view to_string(CrashBehavior behavior) {
  return behavior == CrashBehavior::Freeze ? "freeze" : "random";
}

CrashBehavior crash_behavior_from_string(std::string_view text) {
  if (text == "freeze") return CrashBehavior::Freeze;
  if (text == "random") return CrashBehavior::Random;
  throw ParameterError("unknown crash behavior '" + std::string(text) + "' (expected freeze|random)");
}

CrashMask sample_crash_mask(std::size_t n, double alpha, Rng& rng) {
  check_alpha(alpha);
  if (n == 0) throw ParameterError("crash mask needs at least one agent");
  std::bernoulli_distribution crash(alpha);
  std::vector<bool> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = crash(rng);
  return CrashMask(std::move(bits));
}

std::size_t resample_cap(std::size_t n, double alpha) {
  check_alpha(alpha);
  // The slack absorbs products such as 10 * 0.3 = 3.0000000000000004.
  return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * alpha - 1e-9));
}

CrashMask sample_crash_mask_resampled(std::size_t n, double alpha, Rng& rng,
                                      std::size_t max_tries) {
  if (max_tries == 0) throw ParameterError("max_tries must be at least 1");
  const std::size_t cap = resample_cap(n, alpha);
  for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
    CrashMask mask = sample_crash_mask(n, alpha, rng);
    if (mask.popcount() <= cap) return mask;
  }
  throw SamplingError("no crash mask with at most " + std::to_string(cap) + " crashes in " +
                      std::to_string(max_tries) + " draws (n=" + std::to_string(n) +
                      ", alpha=" + std::to_string(alpha) + ")");
}

JointAction apply_crash_behavior(const CrashMask& mask, CrashBehavior behavior,
                                 std::span<const Action> proposed, Action noop_action,
                                 int action_count, Rng& rng) {
  if (proposed.size() != mask.size()) {
    throw ParameterError("joint action has " + std::to_string(proposed.size()) +
                         " entries but the crash mask covers " + std::to_string(mask.size()));
  }
  if (action_count < 1) throw ParameterError("action_count must be positive");
  JointAction executed(proposed.begin(), proposed.end());
  std::uniform_int_distribution<Action> any_action(0, action_count - 1);
  for (std::size_t i = 0; i < executed.size(); ++i) {
    if (!mask[i]) continue;
    executed[i] = behavior == CrashBehavior::Freeze ? noop_action : any_action(rng);
  }
  return executed;
}

}  // namespace coachmarl
