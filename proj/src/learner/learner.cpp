#include "coachmarl/learner/learner.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "coachmarl/errors.hpp"

namespace coachmarl {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ParameterError(message);
}

void check_finite(const ParameterSet& set, const char* which) {
  for (const auto& t : set) {
    if (!t.value.allFinite()) {
      throw NumericError(std::string("non-finite ") + which + " in tensor " + t.name);
    }
  }
}

}  // namespace

void LearnerConfig::validate() const {
  require(hidden >= 1, "learner.hidden must be positive");
  require(embed >= 1, "learner.embed must be positive");
  require(learning_rate > 0.0, "learner.learning_rate must be positive");
  require(rms_alpha >= 0.0 && rms_alpha < 1.0, "learner.rms_alpha must lie in [0, 1)");
  require(rms_eps > 0.0, "learner.rms_eps must be positive");
  require(batch_size >= 1, "learner.batch_size must be positive");
  require(buffer_capacity >= batch_size, "learner.buffer_capacity must be at least batch_size");
  require(target_period >= 1, "learner.target_period must be positive");
  require(train_interval >= 1, "learner.train_interval must be positive");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "learner.epsilon_start must lie in [0, 1]");
  require(epsilon_finish >= 0.0 && epsilon_finish <= 1.0, "learner.epsilon_finish must lie in [0, 1]");
  require(epsilon_anneal_fraction >= 0.0 && epsilon_anneal_fraction <= 1.0,
          "learner.epsilon_anneal_fraction must lie in [0, 1]");
}

Eigen::MatrixXd agent_inputs(const InputLayout& layout, const Eigen::MatrixXd& observations,
                             std::span<const Action> prev_actions) {
  require(observations.rows() == layout.n_agents && observations.cols() == layout.observation_size,
          "observation block must be " + std::to_string(layout.n_agents) + "x" +
              std::to_string(layout.observation_size));
  require(prev_actions.empty() || static_cast<int>(prev_actions.size()) == layout.n_agents,
          "previous actions must cover every agent");
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(layout.n_agents, layout.width());
  rows.leftCols(layout.observation_size) = observations;
  for (int i = 0; i < layout.n_agents; ++i) {
    rows(i, layout.observation_size + i) = 1.0;
    if (layout.include_prev_action && !prev_actions.empty()) {
      rows(i, layout.observation_size + layout.n_agents + prev_actions[i]) = 1.0;
    }
  }
  return rows;
}

Eigen::VectorXd q_values(const AgentNet& net, const InputLayout& layout, const Eigen::VectorXd& observation,
                         int agent_id, std::optional<Action> prev_action) {
  require(observation.size() == layout.observation_size,
          "observation has " + std::to_string(observation.size()) + " features, expected " +
              std::to_string(layout.observation_size));
  require(agent_id >= 0 && agent_id < layout.n_agents, "agent id out of range");
  Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, layout.width());
  row.leftCols(layout.observation_size) = observation.transpose();
  row(0, layout.observation_size + agent_id) = 1.0;
  if (layout.include_prev_action && prev_action) {
    require(*prev_action >= 0 && *prev_action < layout.action_count, "previous action out of range");
    row(0, layout.observation_size + layout.n_agents + *prev_action) = 1.0;
  }
  return net.forward(row).row(0).transpose();
}

Action epsilon_greedy(const Eigen::VectorXd& qs, double epsilon, Rng& rng) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  require(qs.size() > 0, "epsilon_greedy needs at least one action");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<Action> any(0, static_cast<Action>(qs.size()) - 1);
      return any(rng);
    }
  }
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < qs.size(); ++a) {
    if (qs[a] > qs[best]) best = a;
  }
  return static_cast<Action>(best);
}

void LearnerParams::refresh_target() {
  target_agent = agent;
  target_mixer = mixer;
}

LearnerParams make_learner_params(const LearnerConfig& config, const InputLayout& layout, int state_size,
                                  double gamma, Rng& init_rng) {
  config.validate();
  require(layout.include_prev_action == config.include_prev_action,
          "input layout disagrees with learner.include_prev_action");
  LearnerParams p;
  p.layout = layout;
  p.agent = AgentNet({layout.width(), config.hidden, layout.action_count}, init_rng);
  p.mixer = Mixer({config.mixer, layout.n_agents, state_size, config.embed}, init_rng);
  p.gamma = gamma;
  p.refresh_target();
  return p;
}

TransitionBatch make_batch(const InputLayout& layout, std::span<const EpisodeRecord* const> episodes,
                           std::optional<CrashTargetRule> rule) {
  Eigen::Index total = 0;
  for (const EpisodeRecord* ep : episodes) total += ep->length();
  require(total > 0, "batch contains no transitions");
  const int n = layout.n_agents;
  const Eigen::Index state_size = episodes.front()->states.front().size();

  TransitionBatch b;
  b.n_agents = n;
  b.inputs.resize(total * n, layout.width());
  b.next_inputs.resize(total * n, layout.width());
  b.actions.resize(total, n);
  b.states.resize(total, state_size);
  b.next_states.resize(total, state_size);
  b.rewards.resize(total);
  b.bootstrap.resize(total);
  b.crashed.resize(total, n);
  b.next_policy.resize(total, n);

  Eigen::Index row = 0;
  const JointAction none;
  for (const EpisodeRecord* ep : episodes) {
    const int steps = ep->length();
    for (int t = 0; t < steps; ++t, ++row) {
      const JointAction& prev = t > 0 ? ep->executed[t - 1] : none;
      b.inputs.middleRows(row * n, n) = agent_inputs(layout, ep->observations[t], prev);
      b.next_inputs.middleRows(row * n, n) = agent_inputs(layout, ep->observations[t + 1], ep->executed[t]);
      for (int i = 0; i < n; ++i) {
        b.actions(row, i) = ep->executed[t][i];
        b.crashed(row, i) = ep->mask[i] ? 1.0 : 0.0;
        int next = kNextGreedy;
        if (rule && ep->mask[i]) next = rule->behavior == CrashBehavior::Freeze ? rule->noop : kNextUniform;
        b.next_policy(row, i) = next;
      }
      b.states.row(row) = ep->states[t].transpose();
      b.next_states.row(row) = ep->states[t + 1].transpose();
      b.rewards[row] = ep->rewards[t];
      b.bootstrap[row] = ep->done[t] ? 0.0 : 1.0;
    }
  }
  return b;
}

TdResult td_loss_and_grads(const LearnerParams& params, const TransitionBatch& batch, bool mask_crashed_agents) {
  const Eigen::Index count = batch.transitions();
  require(count > 0, "td_loss_and_grads needs a nonempty batch");
  const int n = batch.n_agents;
  require(n == params.layout.n_agents, "batch agent count disagrees with the learner");

  AgentNet::Cache agent_cache;
  const Eigen::MatrixXd q_all = params.agent.forward(batch.inputs, &agent_cache);
  Eigen::MatrixXd chosen(count, n);
  for (Eigen::Index t = 0; t < count; ++t)
    for (int i = 0; i < n; ++i) chosen(t, i) = q_all(t * n + i, batch.actions(t, i));

  Mixer::Cache mixer_cache;
  TdResult result;
  result.q_tot = params.mixer.forward(chosen, batch.states, &mixer_cache);

  const Eigen::MatrixXd q_next = params.target_agent.forward(batch.next_inputs);
  Eigen::MatrixXd best_next(count, n);
  for (Eigen::Index t = 0; t < count; ++t)
    for (int i = 0; i < n; ++i) {
      const auto q = q_next.row(t * n + i);
      const int next = batch.next_policy.size() ? batch.next_policy(t, i) : kNextGreedy;
      best_next(t, i) = next == kNextGreedy ? q.maxCoeff() : next == kNextUniform ? q.mean() : q(next);
    }
  const Eigen::VectorXd q_tot_next = params.target_mixer.forward(best_next, batch.next_states);
  result.targets = batch.rewards + params.gamma * batch.bootstrap.cwiseProduct(q_tot_next);

  const Eigen::VectorXd error = result.q_tot - result.targets;
  result.loss = error.squaredNorm() / static_cast<double>(count);
  if (!std::isfinite(result.loss)) {
    std::ostringstream msg;
    msg << "non-finite TD loss (max |Q_tot| = " << result.q_tot.cwiseAbs().maxCoeff()
        << ", max |target| = " << result.targets.cwiseAbs().maxCoeff() << ")";
    throw NumericError(msg.str());
  }

  const Eigen::VectorXd d_qtot = (2.0 / static_cast<double>(count)) * error;
  result.grads.agent = params.agent.parameters().zeros_like();
  result.grads.mixer = params.mixer.parameters().zeros_like();
  Eigen::MatrixXd d_chosen;
  params.mixer.backward(mixer_cache, d_qtot, result.grads.mixer, d_chosen);
  if (mask_crashed_agents) d_chosen = d_chosen.cwiseProduct((1.0 - batch.crashed.array()).matrix());

  Eigen::MatrixXd d_q_all = Eigen::MatrixXd::Zero(q_all.rows(), q_all.cols());
  for (Eigen::Index t = 0; t < count; ++t)
    for (int i = 0; i < n; ++i) d_q_all(t * n + i, batch.actions(t, i)) = d_chosen(t, i);
  params.agent.backward(agent_cache, d_q_all, result.grads.agent);

  check_finite(result.grads.agent, "gradient");
  check_finite(result.grads.mixer, "gradient");
  return result;
}

double clip_grad_norm(Gradients& grads, double max_norm) {
  const double norm = std::sqrt(grads.agent.squared_norm() + grads.mixer.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / (norm + 1e-6);
    grads.agent.scale(factor);
    grads.mixer.scale(factor);
  }
  return norm;
}

OptimizerState make_optimizer_state(const LearnerParams& params) {
  return {params.agent.parameters().zeros_like(), params.mixer.parameters().zeros_like()};
}

void rmsprop_step(ParameterSet& params, const ParameterSet& grads, ParameterSet& sq, const RmsPropConfig& config) {
  require(params.same_shapes(grads) && params.same_shapes(sq), "optimizer tensors disagree in shape");
  ParameterSet new_params = params;
  ParameterSet new_sq = sq;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto g = grads.value(k).array();
    auto s = new_sq.value(k).array();
    s = config.alpha * s + (1.0 - config.alpha) * g.square();
    new_params.value(k).array() -= config.learning_rate * g / (s.sqrt() + config.eps);
  }
  check_finite(new_params, "parameter update");
  params = std::move(new_params);
  sq = std::move(new_sq);
}

void apply_gradients(LearnerParams& params, const Gradients& grads, const RmsPropConfig& config,
                     OptimizerState& state) {
  // Stage both updates so a failure in the mixer leaves the agent net untouched too.
  ParameterSet agent = params.agent.parameters();
  ParameterSet mixer = params.mixer.parameters();
  ParameterSet agent_sq = state.agent_sq;
  ParameterSet mixer_sq = state.mixer_sq;
  rmsprop_step(agent, grads.agent, agent_sq, config);
  rmsprop_step(mixer, grads.mixer, mixer_sq, config);
  params.agent.parameters() = std::move(agent);
  params.mixer.parameters() = std::move(mixer);
  state.agent_sq = std::move(agent_sq);
  state.mixer_sq = std::move(mixer_sq);
}

double epsilon_at(const LearnerConfig& config, long env_steps, long total_steps) {
  const double anneal = config.epsilon_anneal_fraction * static_cast<double>(total_steps);
  if (anneal <= 0.0 || env_steps >= anneal) return config.epsilon_finish;
  const double frac = static_cast<double>(env_steps) / anneal;
  return config.epsilon_start + frac * (config.epsilon_finish - config.epsilon_start);
}

JointAction select_actions(const AgentNet& net, const InputLayout& layout, const Eigen::MatrixXd& observations,
                           std::span<const Action> prev_actions, double epsilon, Rng& rng) {
  const Eigen::MatrixXd qs = net.forward(agent_inputs(layout, observations, prev_actions));
  JointAction actions(layout.n_agents);
  for (int i = 0; i < layout.n_agents; ++i) actions[i] = epsilon_greedy(qs.row(i).transpose(), epsilon, rng);
  return actions;
}

Learner::Learner(LearnerConfig config, LearnerParams params, std::optional<CrashTargetRule> crash_rule)
    : config_(std::move(config)),
      params_(std::move(params)),
      optimizer_(make_optimizer_state(params_)),
      crash_rule_(crash_rule) {
  config_.validate();
}

JointAction Learner::act(const Eigen::MatrixXd& observations, std::span<const Action> prev_actions,
                         double epsilon, Rng& rng) const {
  return select_actions(params_.agent, params_.layout, observations, prev_actions, epsilon, rng);
}

double Learner::train(std::span<const EpisodeRecord* const> episodes) {
  const TransitionBatch batch =
      make_batch(params_.layout, episodes, config_.crash_aware_targets ? crash_rule_ : std::nullopt);
  TdResult td = td_loss_and_grads(params_, batch, config_.mask_crashed_agents);
  clip_grad_norm(td.grads, config_.grad_clip);
  apply_gradients(params_, td.grads, {config_.learning_rate, config_.rms_alpha, config_.rms_eps}, optimizer_);
  ++params_.updates;
  if (params_.updates % config_.target_period == 0) params_.refresh_target();
  return td.loss;
}

}  // namespace coachmarl
