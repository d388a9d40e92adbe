#include "coachmarl/gridworld.hpp"

#include <algorithm>
#include <string>

#include "coachmarl/errors.hpp"
#include "coachmarl/rng.hpp"

namespace coachmarl {

namespace {

Cell moved(Cell c, Action a) {
  switch (a) {
    case Up: return {c.x, c.y - 1};
    case Down: return {c.x, c.y + 1};
    case Left: return {c.x - 1, c.y};
    case Right: return {c.x + 1, c.y};
    default: return c;
  }
}

double scaled(int v, int extent) { return extent > 1 ? static_cast<double>(v) / (extent - 1) : 0.0; }

std::string cell_text(Cell c) { return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")"; }

}  // namespace

std::string_view action_name(Action action) {
  switch (action) {
    case Up: return "up";
    case Down: return "down";
    case Left: return "left";
    case Right: return "right";
    case Stay: return "stay";
    default: return "?";
  }
}

void GridButtonsConfig::validate() const {
  if (width < 1 || height < 1) throw ConfigError("grid dimensions must be positive");
  if (agent_starts.empty()) throw ConfigError("at least one agent is required");
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (noop_action < 0 || noop_action >= kGridActionCount) throw ConfigError("noop_action out of range");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("discount must lie in [0, 1)");
  for (const Cell& c : agent_starts) {
    if (!contains(c)) throw ConfigError("agent start " + cell_text(c) + " lies outside the grid");
  }
  for (const Cell& c : button_positions) {
    if (!contains(c)) throw ConfigError("button " + cell_text(c) + " lies outside the grid");
  }
}

GridButtonsConfig corners_layout() {
  GridButtonsConfig config;
  config.width = 10;
  config.height = 10;
  config.agent_starts = {{1, 1}, {8, 8}};
  config.button_positions = {{8, 1}, {1, 8}};
  config.max_steps = 20;
  return config;
}

GridButtonsConfig desk_layout() {
  GridButtonsConfig config;
  config.width = 6;
  config.height = 6;
  config.agent_starts = {{1, 1}, {4, 4}};
  config.button_positions = {{3, 1}, {2, 4}};
  config.max_steps = 12;
  return config;
}

GridButtonsConfig make_parametric_env(int n_agents, int n_buttons, int grid_size, int max_steps,
                                      std::uint64_t seed) {
  if (n_agents < 1) throw ConfigError("n_agents must be at least 1");
  if (n_buttons < 1) throw ConfigError("n_buttons must be at least 1");
  if (grid_size < 1) throw ConfigError("grid_size must be at least 1");
  const long cells = static_cast<long>(grid_size) * grid_size;
  if (static_cast<long>(n_agents) + n_buttons > cells) {
    throw ConfigError(std::to_string(n_agents) + " agents and " + std::to_string(n_buttons) +
                      " buttons do not fit distinctly on a " + std::to_string(grid_size) + "x" +
                      std::to_string(grid_size) + " grid");
  }
  GridButtonsConfig config;
  config.width = grid_size;
  config.height = grid_size;
  config.max_steps = max_steps;

  Rng rng = make_rng(seed, "layout");
  std::uniform_int_distribution<int> coord(0, grid_size - 1);
  std::vector<Cell> taken;
  auto draw_free_cell = [&] {
    for (;;) {
      Cell c{coord(rng), coord(rng)};
      if (std::find(taken.begin(), taken.end(), c) == taken.end()) {
        taken.push_back(c);
        return c;
      }
    }
  };
  for (int b = 0; b < n_buttons; ++b) config.button_positions.push_back(draw_free_cell());
  for (int a = 0; a < n_agents; ++a) config.agent_starts.push_back(draw_free_cell());
  config.validate();
  return config;
}

GridState initial_state(const GridButtonsConfig& config) {
  GridState state;
  state.agent_positions = config.agent_starts;
  state.button_touched.assign(config.button_positions.size(), false);
  // A start on a button cell is credited on the first step, like any other occupancy.
  return state;
}

GridStepOutcome grid_step(const GridButtonsConfig& config, const GridState& state,
                          std::span<const Action> joint_action) {
  if (joint_action.size() != state.agent_positions.size()) {
    throw ParameterError("expected " + std::to_string(state.agent_positions.size()) +
                         " actions, got " + std::to_string(joint_action.size()));
  }
  for (Action a : joint_action) {
    if (a < 0 || a >= kGridActionCount) {
      throw ParameterError("action id " + std::to_string(a) + " is not one of up/down/left/right/stay");
    }
  }
  GridStepOutcome out;
  out.next = state;
  for (std::size_t i = 0; i < joint_action.size(); ++i) {
    const Cell target = moved(state.agent_positions[i], joint_action[i]);
    if (config.contains(target)) out.next.agent_positions[i] = target;
  }
  for (std::size_t b = 0; b < config.button_positions.size(); ++b) {
    if (out.next.button_touched[b]) continue;
    const auto& pos = out.next.agent_positions;
    if (std::find(pos.begin(), pos.end(), config.button_positions[b]) != pos.end()) {
      out.next.button_touched[b] = true;
      ++out.buttons_newly_touched;
    }
  }
  out.next.step_index = state.step_index + 1;
  out.reward = config.step_reward + config.button_reward * out.buttons_newly_touched;
  out.done = is_success(out.next) || out.next.step_index >= config.max_steps;
  return out;
}

bool is_success(const GridState& state) {
  return std::all_of(state.button_touched.begin(), state.button_touched.end(),
                     [](bool touched) { return touched; });
}

Eigen::MatrixXd grid_observations(const GridButtonsConfig& config, const GridState& state) {
  Eigen::MatrixXd obs(config.agent_count(), 2);
  for (int i = 0; i < config.agent_count(); ++i) {
    obs(i, 0) = scaled(state.agent_positions[i].x, config.width);
    obs(i, 1) = scaled(state.agent_positions[i].y, config.height);
  }
  return obs;
}

Eigen::VectorXd grid_global_state(const GridButtonsConfig& config, const GridState& state) {
  const int n = config.agent_count();
  const int m = config.button_count();
  Eigen::VectorXd s(2 * n + 3 * m);
  int k = 0;
  for (const Cell& c : state.agent_positions) {
    s[k++] = scaled(c.x, config.width);
    s[k++] = scaled(c.y, config.height);
  }
  for (const Cell& c : config.button_positions) {
    s[k++] = scaled(c.x, config.width);
    s[k++] = scaled(c.y, config.height);
  }
  for (bool touched : state.button_touched) s[k++] = touched ? 1.0 : 0.0;
  return s;
}

GridButtonsEnv::GridButtonsEnv(GridButtonsConfig config) : config_(std::move(config)) {
  config_.validate();
  state_ = initial_state(config_);
}

TimeStep GridButtonsEnv::observe() const {
  return {grid_observations(config_, state_), grid_global_state(config_, state_)};
}

TimeStep GridButtonsEnv::reset() {
  state_ = initial_state(config_);
  return observe();
}

StepResult GridButtonsEnv::step(std::span<const Action> joint_action) {
  if (state_.step_index >= config_.max_steps || (state_.step_index > 0 && is_success(state_))) {
    throw ParameterError("step() called on a finished episode; call reset() first");
  }
  GridStepOutcome outcome = grid_step(config_, state_, joint_action);
  state_ = std::move(outcome.next);
  StepResult result;
  result.next = observe();
  result.reward = outcome.reward;
  result.done = outcome.done;
  result.terminated = is_success(state_);
  return result;
}

}  // namespace coachmarl
