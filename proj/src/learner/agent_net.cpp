#include "coachmarl/learner/agent_net.hpp"

#include <string>

#include "coachmarl/errors.hpp"

namespace coachmarl {

namespace {

ParameterSet make_layout(const AgentNetShape& s) {
  if (s.input_size < 1 || s.hidden < 1 || s.action_count < 1) {
    throw ParameterError("agent network dimensions must be positive");
  }
  ParameterSet p;
  p.add("agent.fc0.weight", s.input_size, s.hidden);
  p.add("agent.fc0.bias", 1, s.hidden);
  p.add("agent.fc1.weight", s.hidden, s.hidden);
  p.add("agent.fc1.bias", 1, s.hidden);
  p.add("agent.out.weight", s.hidden, s.action_count);
  p.add("agent.out.bias", 1, s.action_count);
  return p;
}

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& pre) {
  return (pre.array() > 0.0).cast<double>().matrix();
}

}  // namespace

AgentNet::AgentNet(AgentNetShape shape) : shape_(shape), params_(make_layout(shape)) {}

AgentNet::AgentNet(AgentNetShape shape, Rng& init_rng) : AgentNet(shape) {
  params_.init_uniform_fan_in(kW0, kB0, init_rng);
  params_.init_uniform_fan_in(kW1, kB1, init_rng);
  params_.init_uniform_fan_in(kW2, kB2, init_rng);
}

AgentNet AgentNet::from_parameters(ParameterSet params) {
  if (params.size() != 6) throw ParameterError("agent network expects 6 tensors");
  AgentNetShape shape;
  shape.input_size = static_cast<int>(params.value(kW0).rows());
  shape.hidden = static_cast<int>(params.value(kW0).cols());
  shape.action_count = static_cast<int>(params.value(kW2).cols());
  AgentNet net(shape);
  if (!net.params_.same_shapes(params)) throw ParameterError("agent network tensors have inconsistent shapes");
  net.params_ = std::move(params);
  return net;
}

Eigen::MatrixXd AgentNet::forward(const Eigen::MatrixXd& inputs, Cache* cache) const {
  if (inputs.cols() != shape_.input_size) {
    throw ParameterError("agent network expects " + std::to_string(shape_.input_size) +
                         " input features, got " + std::to_string(inputs.cols()));
  }
  const auto& p = params_;
  Eigen::MatrixXd pre0 = inputs * p.value(kW0);
  pre0.rowwise() += p.value(kB0).row(0);
  Eigen::MatrixXd act0 = pre0.cwiseMax(0.0);
  Eigen::MatrixXd pre1 = act0 * p.value(kW1);
  pre1.rowwise() += p.value(kB1).row(0);
  Eigen::MatrixXd act1 = pre1.cwiseMax(0.0);
  Eigen::MatrixXd q = act1 * p.value(kW2);
  q.rowwise() += p.value(kB2).row(0);
  if (cache) {
    cache->input = inputs;
    cache->pre0 = std::move(pre0);
    cache->act0 = std::move(act0);
    cache->pre1 = std::move(pre1);
    cache->act1 = std::move(act1);
  }
  return q;
}

void AgentNet::backward(const Cache& cache, const Eigen::MatrixXd& d_q, ParameterSet& grads) const {
  const auto& p = params_;
  grads.value(kW2).noalias() += cache.act1.transpose() * d_q;
  grads.value(kB2) += d_q.colwise().sum();
  Eigen::MatrixXd d_pre1 = (d_q * p.value(kW2).transpose()).cwiseProduct(relu_mask(cache.pre1));
  grads.value(kW1).noalias() += cache.act0.transpose() * d_pre1;
  grads.value(kB1) += d_pre1.colwise().sum();
  Eigen::MatrixXd d_pre0 = (d_pre1 * p.value(kW1).transpose()).cwiseProduct(relu_mask(cache.pre0));
  grads.value(kW0).noalias() += cache.input.transpose() * d_pre0;
  grads.value(kB0) += d_pre0.colwise().sum();
}

}  // namespace coachmarl
