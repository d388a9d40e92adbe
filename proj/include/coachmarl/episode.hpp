#pragma once

#include <vector>

#include <Eigen/Dense>

#include "coachmarl/env_core.hpp"

namespace coachmarl {

/// One rolled-out episode. observations/states hold T+1 entries (the last is
/// the post-terminal view); the per-step vectors hold T entries.
struct EpisodeRecord {
  CrashMask mask;
  std::vector<Eigen::MatrixXd> observations;
  std::vector<Eigen::VectorXd> states;
  std::vector<JointAction> proposed;
  std::vector<JointAction> executed;
  std::vector<double> rewards;
  std::vector<bool> done;
  bool terminated = false;  // goal reached on the final step
  bool success = false;
  double episode_return = 0.0;

  int length() const noexcept { return static_cast<int>(rewards.size()); }
};

}  // namespace coachmarl
