#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "coachmarl/coach.hpp"
#include "coachmarl/env_core.hpp"
#include "coachmarl/episode.hpp"
#include "coachmarl/gridworld.hpp"
#include "coachmarl/learner/learner.hpp"
#include "coachmarl/metrics_io.hpp"

namespace coachmarl {

struct TrainerConfig {
  long total_steps = 200000;
  int eval_every = 100;    // training episodes per coach round (K)
  int eval_episodes = 32;  // greedy episodes measuring e_t (E)
  CrashBehavior crash_behavior = CrashBehavior::Freeze;
  bool resample = true;
  /// Measure e_t as the success rate of the round's own training episodes instead of greedy rollouts.
  bool coach_eval_on_training = false;
  std::uint64_t seed = 1;
  std::vector<double> test_rates = {0.01, 0.05, 0.10};
  int test_episodes = 128;
  bool log_wall_clock = false;

  void validate() const;
  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

struct RunConfig {
  GridButtonsConfig env = desk_layout();
  CoachStrategy coach = AdaptiveRate{};
  LearnerConfig learner;
  TrainerConfig trainer;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

InputLayout input_layout_for(const GridButtonsConfig& env, const LearnerConfig& learner);

/// Decentralized policy: the shared agent network and how its inputs are built.
struct Policy {
  AgentNet net;
  InputLayout layout;
};

Policy policy_of(const LearnerParams& params);

/// Rolls one episode. Crashed agents' actions are substituted before every step;
/// action_rng drives epsilon-greedy, crash_rng drives random crash actions.
EpisodeRecord run_episode(EnvModel& env, const Policy& policy, const CrashMask& mask, CrashBehavior behavior,
                          double epsilon, Rng& action_rng, Rng& crash_rng);

/// Greedy rollout on the grid world that also records cell positions, for dumps and renders.
TrajectoryDump rollout_trajectory(const GridButtonsConfig& env, const Policy& policy, const CrashMask& mask,
                                  CrashBehavior behavior, std::uint64_t seed);

struct EpisodeOutcome {
  CrashMask mask;
  bool success = false;
  double episode_return = 0.0;
  int length = 0;
};

struct EvalReport {
  double crash_rate = 0.0;
  int episodes = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  std::vector<EpisodeOutcome> outcomes;
};

/// Greedy evaluation with a fresh Bernoulli(crash_rate) mask per episode (never re-sampled).
/// Episode k uses its own derived random stream, so any worker count gives the same report.
EvalReport evaluate(const Policy& policy, const GridButtonsConfig& env, double crash_rate, CrashBehavior behavior,
                    int episodes, std::uint64_t seed, int workers = 1);

/// Greedy evaluation with the same forced mask in every episode.
EvalReport evaluate_forced(const Policy& policy, const GridButtonsConfig& env, const CrashMask& mask,
                           CrashBehavior behavior, int episodes, std::uint64_t seed);

/// One cell per rate, aggregated across policies (one per training seed). All policies
/// see the same evaluation seed.
std::vector<MatrixCell> test_matrix(const std::vector<Policy>& policies, const GridButtonsConfig& env,
                                    const std::vector<double>& rates, int episodes, CrashBehavior behavior,
                                    std::uint64_t seed);

struct TrainingHooks {
  /// Called for every training episode with the coach round and its crash rate.
  std::function<void(const EpisodeRecord&, long round, double alpha)> on_episode;
};

struct TrainingResult {
  LearnerParams params;
  std::vector<TrainingLogRow> log;
};

/// The coach loop. Writes run.cfg, training_log.csv and final.ckpt into out_dir when it
/// is non-empty. On NumericError the last good parameters go to last_good.ckpt and the
/// error is rethrown.
TrainingResult run_training(const RunConfig& config, const std::filesystem::path& out_dir = {},
                            const TrainingHooks& hooks = {});

/// Adaptive-coach grid search: one training run per (beta, rho, seed), evaluated with
/// test_matrix at the config's test rates. Each cell gets its own subdirectory under
/// out_dir plus a roll-up sweep.csv.
std::vector<SweepCell> sweep(const RunConfig& base, const std::vector<double>& betas,
                             const std::vector<double>& rhos, const std::vector<std::uint64_t>& seeds,
                             const std::filesystem::path& out_dir = {});

}  // namespace coachmarl
