// Independent reference implementations used by the unit and acceptance suites.
// Nothing in here calls into the code under test except to read parameters.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "coachmarl/learner/learner.hpp"
#include "coachmarl/learner/parameters.hpp"

namespace oracle {

// Distance in units in the last place between two finite doubles of any sign.
inline std::uint64_t ulp_distance(double a, double b) {
  if (a == b) return 0;
  auto ordered = [](double x) {
    const auto bits = std::bit_cast<std::int64_t>(x);
    return bits < 0 ? std::numeric_limits<std::int64_t>::min() - bits : bits;
  };
  const std::int64_t ia = ordered(a), ib = ordered(b);
  return ia > ib ? static_cast<std::uint64_t>(ia) - static_cast<std::uint64_t>(ib)
                 : static_cast<std::uint64_t>(ib) - static_cast<std::uint64_t>(ia);
}

// Coach rules written out literally.
inline double fixed_rule(double alpha) { return alpha; }
inline double curriculum_rule(double alpha, double delta, double cap) {
  return alpha + delta < cap ? alpha + delta : cap;
}
inline double adaptive_rule(double alpha, double e, double beta, double rho) {
  const double indicator = e >= beta ? 1.0 : 0.0;
  return alpha + rho * (indicator - alpha);
}

// Probability of every mask (bit i of the key = agent i crashed) under independent
// Bernoulli(alpha) bits, conditioned on popcount <= cap.
inline std::map<unsigned, double> truncated_bernoulli(unsigned n, double alpha, unsigned cap) {
  std::map<unsigned, double> p;
  double total = 0.0;
  for (unsigned m = 0; m < (1u << n); ++m) {
    const auto k = static_cast<unsigned>(std::popcount(m));
    if (k > cap) continue;
    const double w = std::pow(alpha, k) * std::pow(1.0 - alpha, n - k);
    p[m] = w;
    total += w;
  }
  for (auto& [m, w] : p) w /= total;
  return p;
}

inline double total_variation(const std::map<unsigned, double>& p, const std::map<unsigned, double>& q) {
  std::map<unsigned, double> keys = p;
  for (const auto& [m, w] : q) keys.emplace(m, 0.0);
  double tv = 0.0;
  for (const auto& [m, w] : keys) {
    const double a = p.contains(m) ? p.at(m) : 0.0;
    const double b = q.contains(m) ? q.at(m) : 0.0;
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

// Naive loop forward pass of the agent network, read straight off its tensors.
inline Eigen::VectorXd agent_forward(const coachmarl::AgentNet& net, const Eigen::VectorXd& x) {
  const auto& p = net.parameters();
  auto layer = [](const Eigen::MatrixXd& w, const Eigen::MatrixXd& b, const std::vector<double>& in, bool relu) {
    std::vector<double> out(static_cast<std::size_t>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double s = b(0, j);
      for (Eigen::Index i = 0; i < w.rows(); ++i) s += in[static_cast<std::size_t>(i)] * w(i, j);
      out[static_cast<std::size_t>(j)] = relu ? std::max(0.0, s) : s;
    }
    return out;
  };
  std::vector<double> h(x.data(), x.data() + x.size());
  h = layer(p.value(0), p.value(1), h, true);
  h = layer(p.value(2), p.value(3), h, true);
  h = layer(p.value(4), p.value(5), h, false);
  return Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
}

// Naive forward pass of the monotonic mixer for a single row.
inline double qmix_forward(const coachmarl::Mixer& mixer, const Eigen::VectorXd& q, const Eigen::VectorXd& s) {
  const auto& p = mixer.parameters();
  const int n = static_cast<int>(q.size());
  const int embed = mixer.shape().embed;
  auto affine = [&](std::size_t w, std::size_t b, Eigen::Index j) {
    double v = p.value(b)(0, j);
    for (Eigen::Index i = 0; i < s.size(); ++i) v += s[i] * p.value(w)(i, j);
    return v;
  };
  double out = 0.0;
  for (int k = 0; k < embed; ++k) {
    double pre = affine(2, 3, k);  // hyper_b1
    for (int i = 0; i < n; ++i) pre += q[i] * std::abs(affine(0, 1, i * embed + k));  // hyper_w1
    const double hidden = pre > 0.0 ? pre : std::expm1(pre);
    out += hidden * std::abs(affine(4, 5, k));  // hyper_w2
  }
  double v = p.value(9)(0, 0);
  for (int k = 0; k < embed; ++k) v += std::max(0.0, affine(6, 7, k)) * p.value(8)(k, 0);
  return out + v;
}

struct GradCheck {
  double worst_relative = 0.0;  // max over scalars of |a - n| / max(|a| + |n|, floor)
  double vector_relative = 0.0;  // ||a - n|| / (||a|| + ||n||)
};

// Central differences with step 1e-5 * max(1, |theta|) for every scalar in params. Smaller steps
// let round-off in the loss swamp gradients near 1e-6.
inline GradCheck finite_difference_check(coachmarl::ParameterSet& params, const coachmarl::ParameterSet& analytic,
                                         const std::function<double()>& loss, double floor = 1e-6) {
  GradCheck out;
  double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::MatrixXd& theta = params.value(k);
    for (Eigen::Index r = 0; r < theta.rows(); ++r) {
      for (Eigen::Index c = 0; c < theta.cols(); ++c) {
        const double saved = theta(r, c);
        const double h = 1e-5 * std::max(1.0, std::abs(saved));
        theta(r, c) = saved + h;
        const double up = loss();
        theta(r, c) = saved - h;
        const double down = loss();
        theta(r, c) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.value(k)(r, c);
        out.worst_relative =
            std::max(out.worst_relative, std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor));
        diff_sq += (a - numeric) * (a - numeric);
        a_sq += a * a;
        n_sq += numeric * numeric;
      }
    }
  }
  const double denom = std::sqrt(a_sq) + std::sqrt(n_sq);
  out.vector_relative = denom > 0.0 ? std::sqrt(diff_sq) / denom : 0.0;
  return out;
}

// Random transitions with the shape make_batch would produce.
inline coachmarl::TransitionBatch random_batch(const coachmarl::InputLayout& layout, int state_size, int transitions,
                                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> act(0, layout.action_count - 1);
  std::bernoulli_distribution coin(0.3);
  const int n = layout.n_agents;
  auto fill = [&](Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c) {
    m.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  };
  coachmarl::TransitionBatch b;
  b.n_agents = n;
  fill(b.inputs, transitions * n, layout.width());
  fill(b.next_inputs, transitions * n, layout.width());
  fill(b.states, transitions, state_size);
  fill(b.next_states, transitions, state_size);
  b.actions.resize(transitions, n);
  b.crashed = Eigen::MatrixXd::Zero(transitions, n);
  b.next_policy = Eigen::MatrixXi::Constant(transitions, n, coachmarl::kNextGreedy);
  for (int t = 0; t < transitions; ++t)
    for (int i = 0; i < n; ++i) b.actions(t, i) = act(rng);
  b.rewards.resize(transitions);
  b.bootstrap.resize(transitions);
  for (int t = 0; t < transitions; ++t) {
    b.rewards[t] = 5.0 * u(rng);
    b.bootstrap[t] = coin(rng) ? 0.0 : 1.0;
  }
  return b;
}

}  // namespace oracle
