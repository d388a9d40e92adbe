#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "coachmarl/env_core.hpp"

namespace coachmarl {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Up decreases y (row 0 is the top row when rendered).
enum GridAction : Action { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };
inline constexpr int kGridActionCount = 5;

std::string_view action_name(Action action);

struct GridButtonsConfig {
  int width = 6;
  int height = 6;
  std::vector<Cell> agent_starts;
  std::vector<Cell> button_positions;
  int max_steps = 12;
  double step_reward = -1.0;
  double button_reward = 5.0;
  Action noop_action = Stay;
  double discount = 0.99;

  int agent_count() const { return static_cast<int>(agent_starts.size()); }
  int button_count() const { return static_cast<int>(button_positions.size()); }
  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }

  /// Throws ConfigError naming the violated constraint.
  void validate() const;

  friend bool operator==(const GridButtonsConfig&, const GridButtonsConfig&) = default;
};

/// 10x10, two agents, two buttons, 20 steps. The coordinates are a stand-in
/// fixture: agents at (1,1) and (8,8), buttons at (8,1) and (1,8).
GridButtonsConfig corners_layout();

/// 6x6 desk-scale variant: each agent starts two cells from its own button and
/// six cells (via that button) from the other one; 12-step budget.
GridButtonsConfig desk_layout();

/// Seeded random layout on a square grid with all starts and buttons on
/// distinct cells. Throws ConfigError when the grid has too few cells.
GridButtonsConfig make_parametric_env(int n_agents, int n_buttons, int grid_size, int max_steps,
                                      std::uint64_t seed);

struct GridState {
  std::vector<Cell> agent_positions;
  std::vector<bool> button_touched;
  int step_index = 0;
  friend bool operator==(const GridState&, const GridState&) = default;
};

GridState initial_state(const GridButtonsConfig& config);

struct GridStepOutcome {
  GridState next;
  double reward = 0.0;
  int buttons_newly_touched = 0;
  bool done = false;
};

/// Pure transition: simultaneous moves, off-grid moves stay in place, buttons
/// are checked after all agents moved. Throws ParameterError on bad actions.
GridStepOutcome grid_step(const GridButtonsConfig& config, const GridState& state,
                          std::span<const Action> joint_action);

bool is_success(const GridState& state);

/// Own (x, y) scaled to [0, 1], one row per agent.
Eigen::MatrixXd grid_observations(const GridButtonsConfig& config, const GridState& state);
/// Scaled agent coordinates, scaled button coordinates, then touched flags.
Eigen::VectorXd grid_global_state(const GridButtonsConfig& config, const GridState& state);

class GridButtonsEnv final : public EnvModel {
 public:
  explicit GridButtonsEnv(GridButtonsConfig config);

  int agent_count() const override { return config_.agent_count(); }
  int action_count() const override { return kGridActionCount; }
  int observation_size() const override { return 2; }
  int state_size() const override { return 2 * config_.agent_count() + 3 * config_.button_count(); }
  int max_steps() const override { return config_.max_steps; }
  double discount() const override { return config_.discount; }
  Action noop_action() const override { return config_.noop_action; }

  TimeStep reset() override;
  StepResult step(std::span<const Action> joint_action) override;
  bool succeeded() const override { return is_success(state_); }

  const GridButtonsConfig& config() const noexcept { return config_; }
  const GridState& state() const noexcept { return state_; }

 private:
  TimeStep observe() const;

  GridButtonsConfig config_;
  GridState state_;
};

}  // namespace coachmarl
