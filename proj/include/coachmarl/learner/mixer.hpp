#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "coachmarl/learner/parameters.hpp"
#include "coachmarl/rng.hpp"

namespace coachmarl {

enum class MixerKind { VdnSum, QmixMono };

std::string_view to_string(MixerKind kind);
MixerKind mixer_kind_from_string(std::string_view text);

struct MixerShape {
  MixerKind kind = MixerKind::QmixMono;
  int n_agents = 2;
  int state_size = 0;
  int embed = 32;
  friend bool operator==(const MixerShape&, const MixerShape&) = default;
};

/// Combines per-agent chosen Q-values into Q_tot.
///
/// VdnSum: Q_tot = sum_i q_i, no parameters.
///
/// QmixMono: hypernetworks read the global state s and emit
///   W1 = |s Hw1 + bw1|  (n_agents x embed),  b1 = s Hb1 + bb1,
///   w2 = |s Hw2 + bw2|  (embed),             V(s) = ReLU(s V1 + c1) V2 + c2,
/// and Q_tot = ELU(q W1 + b1) . w2 + V(s). The absolute values keep
/// dQ_tot/dq_i >= 0 for every state.
class Mixer {
 public:
  enum : std::size_t { kHw1, kBw1, kHb1, kBb1, kHw2, kBw2, kV1, kC1, kV2, kC2 };

  struct Cache {
    Eigen::MatrixXd qs, states;
    Eigen::MatrixXd w1_pre, hidden_pre, hidden, w2_pre, v_pre;
  };

  Mixer() = default;
  /// All-zero parameters (VdnSum has none).
  explicit Mixer(MixerShape shape);
  Mixer(MixerShape shape, Rng& init_rng);

  /// Rebuilds a mixer from loaded tensors; the kind follows from the tensor count.
  static Mixer from_parameters(ParameterSet params, int n_agents);

  const MixerShape& shape() const noexcept { return shape_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  /// qs: batch x n_agents, states: batch x state_size. Returns Q_tot per row.
  Eigen::VectorXd forward(const Eigen::MatrixXd& qs, const Eigen::MatrixXd& states,
                          Cache* cache = nullptr) const;

  /// Accumulates parameter gradients and writes dLoss/dqs (batch x n_agents).
  void backward(const Cache& cache, const Eigen::VectorXd& d_qtot, ParameterSet& grads,
                Eigen::MatrixXd& d_qs) const;

  /// Effective first-layer mixing weights for one state (n_agents x embed), after |.|.
  Eigen::MatrixXd first_layer_weights(const Eigen::RowVectorXd& state) const;

 private:
  MixerShape shape_;
  ParameterSet params_;
};

}  // namespace coachmarl
