#include "coachmarl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

#include "coachmarl/config.hpp"
#include "coachmarl/errors.hpp"
#include "coachmarl/learner/replay_buffer.hpp"

namespace coachmarl {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ParameterError(message);
}

std::string rate_dir_name(const char* key, double v) {
  std::ostringstream out;
  out << key << v;
  return out.str();
}

struct MaskKey {
  std::vector<bool> bits;
  bool operator<(const MaskKey& o) const { return bits < o.bits; }
};

EpisodeOutcome outcome_of(const EpisodeRecord& ep) {
  return {ep.mask, ep.success, ep.episode_return, ep.length()};
}

}  // namespace

void TrainerConfig::validate() const {
  require(total_steps >= 1, "trainer.total_steps must be positive");
  require(eval_every >= 1, "trainer.eval_every must be at least 1");
  require(eval_episodes >= 1, "trainer.eval_episodes must be at least 1");
  require(test_episodes >= 1, "trainer.test_episodes must be at least 1");
  for (double r : test_rates) require(r >= 0.0 && r <= 1.0, "trainer.test_rates entries must lie in [0, 1]");
}

void RunConfig::validate() const {
  env.validate();
  coachmarl::validate(coach);
  learner.validate();
  trainer.validate();
}

InputLayout input_layout_for(const GridButtonsConfig& env, const LearnerConfig& learner) {
  return {2, env.agent_count(), kGridActionCount, learner.include_prev_action};
}

Policy policy_of(const LearnerParams& params) { return {params.agent, params.layout}; }

EpisodeRecord run_episode(EnvModel& env, const Policy& policy, const CrashMask& mask, CrashBehavior behavior,
                          double epsilon, Rng& action_rng, Rng& crash_rng) {
  require(static_cast<int>(mask.size()) == env.agent_count(), "crash mask length must equal the agent count");
  EpisodeRecord ep;
  ep.mask = mask;
  TimeStep ts = env.reset();
  ep.observations.push_back(ts.observations);
  ep.states.push_back(ts.state);
  JointAction prev;
  for (int t = 0; t < env.max_steps(); ++t) {
    JointAction proposed = select_actions(policy.net, policy.layout, ep.observations.back(), prev, epsilon, action_rng);
    JointAction executed =
        apply_crash_behavior(mask, behavior, proposed, env.noop_action(), env.action_count(), crash_rng);
    StepResult r = env.step(executed);
    ep.observations.push_back(std::move(r.next.observations));
    ep.states.push_back(std::move(r.next.state));
    ep.proposed.push_back(std::move(proposed));
    ep.executed.push_back(executed);
    ep.rewards.push_back(r.reward);
    ep.done.push_back(r.done);
    ep.episode_return += r.reward;
    prev = std::move(executed);
    if (r.done) {
      ep.terminated = r.terminated;
      break;
    }
  }
  ep.success = env.succeeded();
  return ep;
}

TrajectoryDump rollout_trajectory(const GridButtonsConfig& config, const Policy& policy, const CrashMask& mask,
                                  CrashBehavior behavior, std::uint64_t seed) {
  GridButtonsEnv env(config);
  Rng action_rng = make_rng(seed, "trajectory_actions");
  Rng crash_rng = make_rng(seed, "trajectory_crash");
  TrajectoryDump dump;
  dump.layout = config;
  dump.mask = mask;
  dump.touched_at_step.assign(config.button_positions.size(), 0);
  TimeStep ts = env.reset();
  dump.positions.push_back(env.state().agent_positions);
  JointAction prev;
  for (int t = 0; t < config.max_steps; ++t) {
    JointAction proposed = select_actions(policy.net, policy.layout, ts.observations, prev, 0.0, action_rng);
    JointAction executed = apply_crash_behavior(mask, behavior, proposed, config.noop_action, kGridActionCount, crash_rng);
    const std::vector<bool> before = env.state().button_touched;
    StepResult r = env.step(executed);
    for (std::size_t b = 0; b < before.size(); ++b) {
      if (!before[b] && env.state().button_touched[b]) dump.touched_at_step[b] = t + 1;
    }
    dump.positions.push_back(env.state().agent_positions);
    dump.actions.push_back(executed);
    dump.rewards.push_back(r.reward);
    dump.episode_return += r.reward;
    ts = std::move(r.next);
    prev = std::move(executed);
    if (r.done) break;
  }
  dump.success = env.succeeded();
  return dump;
}

namespace {

// Greedy episodes under Freeze are a deterministic function of the mask, so
// outcomes are cached per mask within one evaluation call.
class GreedyEvaluator {
 public:
  GreedyEvaluator(const Policy& policy, const GridButtonsConfig& config, CrashBehavior behavior)
      : policy_(policy), env_(config), behavior_(behavior) {}

  EpisodeOutcome run(const CrashMask& mask, Rng& crash_rng) {
    if (behavior_ == CrashBehavior::Freeze) {
      auto it = cache_.find({mask.bits()});
      if (it != cache_.end()) return it->second;
    }
    Rng unused(0);
    EpisodeOutcome out = outcome_of(run_episode(env_, policy_, mask, behavior_, 0.0, unused, crash_rng));
    if (behavior_ == CrashBehavior::Freeze) cache_.emplace(MaskKey{mask.bits()}, out);
    return out;
  }

 private:
  const Policy& policy_;
  GridButtonsEnv env_;
  CrashBehavior behavior_;
  std::map<MaskKey, EpisodeOutcome> cache_;
};

EvalReport summarize(double rate, std::vector<EpisodeOutcome> outcomes) {
  EvalReport report;
  report.crash_rate = rate;
  report.episodes = static_cast<int>(outcomes.size());
  long successes = 0;
  double returns = 0.0;
  for (const auto& o : outcomes) {
    successes += o.success ? 1 : 0;
    returns += o.episode_return;
  }
  report.success_rate = static_cast<double>(successes) / report.episodes;
  report.mean_return = returns / report.episodes;
  report.outcomes = std::move(outcomes);
  return report;
}

}  // namespace

EvalReport evaluate(const Policy& policy, const GridButtonsConfig& env, double crash_rate, CrashBehavior behavior,
                    int episodes, std::uint64_t seed, int workers) {
  require(episodes >= 1, "evaluation needs at least one episode");
  require(crash_rate >= 0.0 && crash_rate <= 1.0, "crash rate must lie in [0, 1]");
  workers = std::max(1, std::min(workers, episodes));
  std::vector<EpisodeOutcome> outcomes(episodes);
  auto work = [&](int begin, int end) {
    GreedyEvaluator evaluator(policy, env, behavior);
    for (int k = begin; k < end; ++k) {
      Rng mask_rng = make_rng(seed, "eval_mask", static_cast<std::uint64_t>(k));
      Rng crash_rng = make_rng(seed, "eval_crash", static_cast<std::uint64_t>(k));
      const CrashMask mask = sample_crash_mask(env.agent_starts.size(), crash_rate, mask_rng);
      outcomes[k] = evaluator.run(mask, crash_rng);
    }
  };
  if (workers == 1) {
    work(0, episodes);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (episodes + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk, end = std::min(episodes, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  return summarize(crash_rate, std::move(outcomes));
}

EvalReport evaluate_forced(const Policy& policy, const GridButtonsConfig& env, const CrashMask& mask,
                           CrashBehavior behavior, int episodes, std::uint64_t seed) {
  require(episodes >= 1, "evaluation needs at least one episode");
  GreedyEvaluator evaluator(policy, env, behavior);
  std::vector<EpisodeOutcome> outcomes;
  for (int k = 0; k < episodes; ++k) {
    Rng crash_rng = make_rng(seed, "eval_crash", static_cast<std::uint64_t>(k));
    outcomes.push_back(evaluator.run(mask, crash_rng));
  }
  const double rate = static_cast<double>(mask.popcount()) / static_cast<double>(mask.size());
  return summarize(rate, std::move(outcomes));
}

std::vector<MatrixCell> test_matrix(const std::vector<Policy>& policies, const GridButtonsConfig& env,
                                    const std::vector<double>& rates, int episodes, CrashBehavior behavior,
                                    std::uint64_t seed) {
  require(!policies.empty(), "test matrix needs at least one checkpoint");
  std::vector<MatrixCell> cells;
  for (double rate : rates) {
    MatrixCell cell;
    cell.crash_rate = rate;
    cell.checkpoints = static_cast<int>(policies.size());
    cell.episodes = episodes;
    double returns = 0.0;
    for (const Policy& p : policies) {
      const EvalReport report = evaluate(p, env, rate, behavior, episodes, seed);
      cell.per_checkpoint.push_back(report.success_rate);
      returns += report.mean_return;
    }
    double sum = 0.0;
    for (double v : cell.per_checkpoint) sum += v;
    cell.success_mean = sum / cell.checkpoints;
    double var = 0.0;
    for (double v : cell.per_checkpoint) var += (v - cell.success_mean) * (v - cell.success_mean);
    cell.success_std = std::sqrt(var / cell.checkpoints);
    cell.return_mean = returns / cell.checkpoints;
    cells.push_back(std::move(cell));
  }
  return cells;
}

namespace {

CrashMask draw_training_mask(const TrainerConfig& config, std::size_t n, double alpha, Rng& rng) {
  return config.resample ? sample_crash_mask_resampled(n, alpha, rng) : sample_crash_mask(n, alpha, rng);
}

double coach_performance(const Policy& policy, const RunConfig& config, double alpha, long round) {
  GridButtonsEnv env(config.env);
  Rng mask_rng = make_rng(config.trainer.seed, "coach_eval_mask", static_cast<std::uint64_t>(round));
  Rng crash_rng = make_rng(config.trainer.seed, "coach_eval_crash", static_cast<std::uint64_t>(round));
  Rng unused(0);
  int successes = 0;
  for (int k = 0; k < config.trainer.eval_episodes; ++k) {
    const CrashMask mask = draw_training_mask(config.trainer, env.agent_count(), alpha, mask_rng);
    successes += run_episode(env, policy, mask, config.trainer.crash_behavior, 0.0, unused, crash_rng).success;
  }
  return static_cast<double>(successes) / config.trainer.eval_episodes;
}

}  // namespace

TrainingResult run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                            const TrainingHooks& hooks) {
  config.validate();
  const auto& tc = config.trainer;
  const std::uint64_t seed = tc.seed;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "run.cfg", serialize_config(config));
  }

  GridButtonsEnv env(config.env);
  Rng init_rng = make_rng(seed, "init");
  Rng explore_rng = make_rng(seed, "explore");
  Rng mask_rng = make_rng(seed, "masks");
  Rng crash_rng = make_rng(seed, "crash_actions");
  Rng replay_rng = make_rng(seed, "replay");

  const InputLayout layout = input_layout_for(config.env, config.learner);
  Learner learner(config.learner,
                  make_learner_params(config.learner, layout, env.state_size(), env.discount(), init_rng),
                  CrashTargetRule{tc.crash_behavior, env.noop_action()});
  ReplayBuffer buffer(static_cast<std::size_t>(config.learner.buffer_capacity));
  Coach coach(config.coach);

  TrainingResult result;
  const auto started = std::chrono::steady_clock::now();
  long env_steps = 0;
  long episodes = 0;
  for (long round = 0; env_steps < tc.total_steps; ++round) {
    const double alpha = coach.crash_rate();
    double loss_sum = 0.0;
    long loss_count = 0;
    int round_episodes = 0;
    int round_successes = 0;
    double epsilon = epsilon_at(config.learner, env_steps, tc.total_steps);
    for (int k = 0; k < tc.eval_every && env_steps < tc.total_steps; ++k) {
      const CrashMask mask = draw_training_mask(tc, env.agent_count(), alpha, mask_rng);
      epsilon = epsilon_at(config.learner, env_steps, tc.total_steps);
      EpisodeRecord ep =
          run_episode(env, policy_of(learner.params()), mask, tc.crash_behavior, epsilon, explore_rng, crash_rng);
      env_steps += ep.length();
      ++episodes;
      ++round_episodes;
      round_successes += ep.success ? 1 : 0;
      if (hooks.on_episode) hooks.on_episode(ep, round, alpha);
      buffer.push(std::move(ep));

      const auto batch_size = static_cast<std::size_t>(config.learner.batch_size);
      if (buffer.can_sample(batch_size) && episodes % config.learner.train_interval == 0) {
        const auto batch = buffer.sample(batch_size, replay_rng);
        try {
          loss_sum += learner.train(batch);
          ++loss_count;
        } catch (const NumericError&) {
          // train() is all-or-nothing, so the learner still holds the last good parameters.
          if (!out_dir.empty()) {
            save_checkpoint(learner.params(), out_dir / "last_good.ckpt");
            write_training_log(result.log, out_dir / "training_log.csv");
          }
          throw;
        }
      }
    }

    const double e_t = tc.coach_eval_on_training
                           ? static_cast<double>(round_successes) / round_episodes
                           : coach_performance(policy_of(learner.params()), config, alpha, round);
    TrainingLogRow row;
    row.round = round;
    row.env_steps = env_steps;
    row.alpha = alpha;
    row.e = e_t;
    row.loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    row.epsilon = epsilon;
    if (tc.log_wall_clock) {
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    }
    result.log.push_back(row);
    coach.observe(e_t);
  }

  result.params = learner.params();
  if (!out_dir.empty()) {
    write_training_log(result.log, out_dir / "training_log.csv");
    save_checkpoint(result.params, out_dir / "final.ckpt");
  }
  return result;
}

std::vector<SweepCell> sweep(const RunConfig& base, const std::vector<double>& betas, const std::vector<double>& rhos,
                             const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir) {
  require(!betas.empty() && !rhos.empty(), "sweep grid must be nonempty");
  require(!seeds.empty(), "sweep needs at least one seed");
  const double alpha_init = std::holds_alternative<AdaptiveRate>(base.coach)
                                ? std::get<AdaptiveRate>(base.coach).alpha_init
                                : 0.0;
  std::vector<SweepCell> out;
  for (double beta : betas) {
    for (double rho : rhos) {
      RunConfig cell_config = base;
      cell_config.coach = AdaptiveRate{beta, rho, alpha_init};
      std::vector<Policy> policies;
      for (std::uint64_t s : seeds) {
        cell_config.trainer.seed = s;
        std::filesystem::path dir;
        if (!out_dir.empty()) {
          dir = out_dir / (rate_dir_name("beta", beta) + "_" + rate_dir_name("rho", rho)) /
                ("seed" + std::to_string(s));
        }
        policies.push_back(policy_of(run_training(cell_config, dir).params));
      }
      SweepCell cell{beta, rho,
                     test_matrix(policies, base.env, base.trainer.test_rates, base.trainer.test_episodes,
                                 base.trainer.crash_behavior, base.trainer.seed)};
      if (!out_dir.empty()) {
        write_text_file(out_dir / (rate_dir_name("beta", beta) + "_" + rate_dir_name("rho", rho)) / "test_matrix.csv",
                        format_test_matrix(cell.cells));
      }
      out.push_back(std::move(cell));
    }
  }
  if (!out_dir.empty()) write_text_file(out_dir / "sweep.csv", format_sweep(out));
  return out;
}

}  // namespace coachmarl
