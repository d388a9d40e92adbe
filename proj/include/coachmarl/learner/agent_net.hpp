#pragma once

#include <Eigen/Dense>

#include "coachmarl/learner/parameters.hpp"
#include "coachmarl/rng.hpp"

namespace coachmarl {

struct AgentNetShape {
  int input_size = 0;
  int hidden = 64;
  int action_count = 5;
  friend bool operator==(const AgentNetShape&, const AgentNetShape&) = default;
};

/// Per-agent Q-network shared by all agents: input -> ReLU(hidden) -> ReLU(hidden) -> Q per action.
/// Inputs are rows; one row per (transition, agent) pair.
class AgentNet {
 public:
  enum : std::size_t { kW0, kB0, kW1, kB1, kW2, kB2 };

  struct Cache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd pre0, act0, pre1, act1;
  };

  AgentNet() = default;
  /// All-zero parameters.
  explicit AgentNet(AgentNetShape shape);
  AgentNet(AgentNetShape shape, Rng& init_rng);

  /// Rebuilds a network from loaded tensors; shapes are read off the weights.
  static AgentNet from_parameters(ParameterSet params);

  const AgentNetShape& shape() const noexcept { return shape_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  /// rows x action_count; fills cache when given (needed for backward()).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Cache* cache = nullptr) const;

  /// Accumulates dLoss/dparams into grads given dLoss/dQ for every output entry.
  void backward(const Cache& cache, const Eigen::MatrixXd& d_q, ParameterSet& grads) const;

 private:
  AgentNetShape shape_;
  ParameterSet params_;
};

}  // namespace coachmarl
