#pragma once

#include <filesystem>
#include <string>

#include "coachmarl/trainer.hpp"

namespace coachmarl {

/// Reads a run configuration:
///
///   # comment
///   [env]      layout = desk|corners|parametric|custom, width, height, agents = "x y; x y",
///              buttons = "x y; ...", max_steps, n_agents, n_buttons, grid_size, layout_seed,
///              step_reward, button_reward, discount
///   [coach]    strategy = fixed|curriculum|adaptive, alpha, delta_alpha, alpha_max, beta, rho, alpha_init
///   [learner]  mixer = vdn|qmix, hidden, embed, prev_action, mask_crashed, crash_aware_targets,
///              learning_rate, rms_alpha, rms_eps, grad_clip, batch_size, buffer_capacity, target_period, train_interval,
///              epsilon_start, epsilon_finish, epsilon_anneal_fraction
///   [trainer]  total_steps, eval_every, eval_episodes, crash_behavior = freeze|random, resample,
///              coach_eval = greedy|training, seed, test_rates = "0.01,0.05,0.10", test_episodes,
///              log_wall_clock
///
/// Every key is optional; an empty file yields RunConfig{} (6x6 desk layout, adaptive coach).
/// Unknown sections or keys, duplicates, type errors and range violations raise ParseError
/// naming the key and line.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

/// Canonical text form; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

}  // namespace coachmarl
