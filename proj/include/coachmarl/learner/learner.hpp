#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coachmarl/env_core.hpp"
#include "coachmarl/episode.hpp"
#include "coachmarl/learner/agent_net.hpp"
#include "coachmarl/learner/mixer.hpp"
#include "coachmarl/learner/parameters.hpp"
#include "coachmarl/rng.hpp"

namespace coachmarl {

struct LearnerConfig {
  MixerKind mixer = MixerKind::QmixMono;
  int hidden = 64;
  int embed = 32;
  bool include_prev_action = false;
  /// Stops TD gradients from flowing into crashed agents' chosen Q-values.
  bool mask_crashed_agents = false;
  /// Bootstraps crashed agents from the action they will actually take instead of their argmax.
  bool crash_aware_targets = true;
  double learning_rate = 5e-4;
  double rms_alpha = 0.99;
  double rms_eps = 1e-5;
  double grad_clip = 10.0;  // global L2 norm; <= 0 disables
  int batch_size = 32;      // episodes per update
  int buffer_capacity = 5000;
  int target_period = 200;  // updates between target refreshes
  int train_interval = 1;   // episodes between updates
  double epsilon_start = 1.0;
  double epsilon_finish = 0.05;
  double epsilon_anneal_fraction = 0.1;  // of total training steps

  void validate() const;
  friend bool operator==(const LearnerConfig&, const LearnerConfig&) = default;
};

/// How an agent's network input row is assembled:
/// [observation | one-hot agent id | one-hot previous action (optional)].
struct InputLayout {
  int observation_size = 2;
  int n_agents = 2;
  int action_count = 5;
  bool include_prev_action = false;

  int width() const noexcept {
    return observation_size + n_agents + (include_prev_action ? action_count : 0);
  }
  friend bool operator==(const InputLayout&, const InputLayout&) = default;
};

/// Input rows for all agents at one step. prev_actions is empty at t = 0.
Eigen::MatrixXd agent_inputs(const InputLayout& layout, const Eigen::MatrixXd& observations,
                             std::span<const Action> prev_actions);

/// Q_i(o, .) for a single agent.
Eigen::VectorXd q_values(const AgentNet& net, const InputLayout& layout, const Eigen::VectorXd& observation,
                         int agent_id, std::optional<Action> prev_action);

/// Uniform action with probability epsilon, otherwise argmax (lowest index wins ties).
Action epsilon_greedy(const Eigen::VectorXd& qs, double epsilon, Rng& rng);

/// Online and target copies of the agent network and mixer.
struct LearnerParams {
  InputLayout layout;
  AgentNet agent;
  Mixer mixer;
  AgentNet target_agent;
  Mixer target_mixer;
  double gamma = 0.99;
  long updates = 0;

  /// Copies online weights into the target networks bit for bit.
  void refresh_target();
};

LearnerParams make_learner_params(const LearnerConfig& config, const InputLayout& layout, int state_size,
                                  double gamma, Rng& init_rng);

/// What a crashed agent does at the next step, as seen by the TD target.
struct CrashTargetRule {
  CrashBehavior behavior = CrashBehavior::Freeze;
  Action noop = 0;
};

inline constexpr int kNextGreedy = -1;   // max over actions
inline constexpr int kNextUniform = -2;  // mean over actions

/// Flattened transitions; agent rows are ordered t * n_agents + i.
struct TransitionBatch {
  int n_agents = 0;
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd next_inputs;
  Eigen::MatrixXi actions;  // executed actions, transitions x n_agents
  Eigen::MatrixXd states;
  Eigen::MatrixXd next_states;
  Eigen::VectorXd rewards;
  Eigen::VectorXd bootstrap;  // 0 on the transition that ends the episode, else 1
  Eigen::MatrixXd crashed;    // 1 for crashed agents
  Eigen::MatrixXi next_policy;  // kNextGreedy, kNextUniform or a forced action id

  Eigen::Index transitions() const noexcept { return rewards.size(); }
};

/// Without a rule every agent bootstraps greedily.
TransitionBatch make_batch(const InputLayout& layout, std::span<const EpisodeRecord* const> episodes,
                           std::optional<CrashTargetRule> rule = std::nullopt);

struct Gradients {
  ParameterSet agent;
  ParameterSet mixer;
};

struct TdResult {
  double loss = 0.0;
  Gradients grads;
  Eigen::VectorXd q_tot;
  Eigen::VectorXd targets;
};

/// Mean squared TD error of Q_tot against r + gamma * bootstrap * Q_tot^target(s', next-step choice)
/// and its gradient with respect to the online agent network and mixer.
/// Throws NumericError if anything non-finite shows up.
TdResult td_loss_and_grads(const LearnerParams& params, const TransitionBatch& batch,
                           bool mask_crashed_agents = false);

/// Rescales grads so their joint L2 norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(Gradients& grads, double max_norm);

struct RmsPropConfig {
  double learning_rate = 5e-4;
  double alpha = 0.99;
  double eps = 1e-5;
};

struct OptimizerState {
  ParameterSet agent_sq;
  ParameterSet mixer_sq;
};

OptimizerState make_optimizer_state(const LearnerParams& params);

/// sq <- alpha sq + (1 - alpha) g^2;  p <- p - lr g / (sqrt(sq) + eps). All-or-nothing:
/// parameters are left untouched if the update would be non-finite (NumericError).
void rmsprop_step(ParameterSet& params, const ParameterSet& grads, ParameterSet& sq, const RmsPropConfig& config);

void apply_gradients(LearnerParams& params, const Gradients& grads, const RmsPropConfig& config,
                     OptimizerState& state);

/// Linear epsilon schedule over the first epsilon_anneal_fraction of training.
double epsilon_at(const LearnerConfig& config, long env_steps, long total_steps);

/// Training-side wrapper: parameters, optimizer state and the target refresh cadence.
class Learner {
 public:
  /// crash_rule is consulted only when config.crash_aware_targets is set.
  Learner(LearnerConfig config, LearnerParams params, std::optional<CrashTargetRule> crash_rule = std::nullopt);

  const LearnerConfig& config() const noexcept { return config_; }
  const LearnerParams& params() const noexcept { return params_; }
  LearnerParams& params() noexcept { return params_; }

  JointAction act(const Eigen::MatrixXd& observations, std::span<const Action> prev_actions, double epsilon,
                  Rng& rng) const;

  /// One gradient step on the given episodes; returns the pre-update loss.
  double train(std::span<const EpisodeRecord* const> episodes);

 private:
  LearnerConfig config_;
  LearnerParams params_;
  OptimizerState optimizer_;
  std::optional<CrashTargetRule> crash_rule_;
};

/// Greedy or epsilon-greedy joint action from an agent network alone (decentralized execution).
JointAction select_actions(const AgentNet& net, const InputLayout& layout, const Eigen::MatrixXd& observations,
                           std::span<const Action> prev_actions, double epsilon, Rng& rng);

}  // namespace coachmarl
