#include "coachmarl/learner/mixer.hpp"

#include <string>

#include "coachmarl/errors.hpp"

namespace coachmarl {

namespace {

ParameterSet make_layout(const MixerShape& s) {
  ParameterSet p;
  if (s.kind == MixerKind::VdnSum) return p;
  if (s.n_agents < 1 || s.state_size < 1 || s.embed < 1) {
    throw ParameterError("mixer dimensions must be positive");
  }
  const int n = s.n_agents, e = s.embed, d = s.state_size;
  p.add("mixer.hyper_w1.weight", d, n * e);
  p.add("mixer.hyper_w1.bias", 1, n * e);
  p.add("mixer.hyper_b1.weight", d, e);
  p.add("mixer.hyper_b1.bias", 1, e);
  p.add("mixer.hyper_w2.weight", d, e);
  p.add("mixer.hyper_w2.bias", 1, e);
  p.add("mixer.value0.weight", d, e);
  p.add("mixer.value0.bias", 1, e);
  p.add("mixer.value1.weight", e, 1);
  p.add("mixer.value1.bias", 1, 1);
  return p;
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out = x * w;
  out.rowwise() += b.row(0);
  return out;
}

Eigen::MatrixXd elu(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Eigen::MatrixXd elu_grad(const Eigen::MatrixXd& pre) {
  return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
}

}  // namespace

std::string_view to_string(MixerKind kind) { return kind == MixerKind::VdnSum ? "vdn" : "qmix"; }

MixerKind mixer_kind_from_string(std::string_view text) {
  if (text == "vdn") return MixerKind::VdnSum;
  if (text == "qmix") return MixerKind::QmixMono;
  throw ParameterError("unknown mixer '" + std::string(text) + "' (expected vdn|qmix)");
}

Mixer::Mixer(MixerShape shape) : shape_(shape), params_(make_layout(shape)) {}

Mixer::Mixer(MixerShape shape, Rng& init_rng) : Mixer(shape) {
  if (shape_.kind == MixerKind::VdnSum) return;
  for (std::size_t w : {kHw1, kHb1, kHw2, kV1, kV2}) params_.init_uniform_fan_in(w, w + 1, init_rng);
}

Mixer Mixer::from_parameters(ParameterSet params, int n_agents) {
  MixerShape shape;
  shape.n_agents = n_agents;
  if (params.empty()) {
    shape.kind = MixerKind::VdnSum;
    return Mixer(shape);
  }
  if (params.size() != 10) throw ParameterError("qmix mixer expects 10 tensors");
  shape.kind = MixerKind::QmixMono;
  shape.state_size = static_cast<int>(params.value(kHw1).rows());
  shape.embed = static_cast<int>(params.value(kHb1).cols());
  Mixer mixer(shape);
  if (!mixer.params_.same_shapes(params)) throw ParameterError("mixer tensors have inconsistent shapes");
  mixer.params_ = std::move(params);
  return mixer;
}

Eigen::VectorXd Mixer::forward(const Eigen::MatrixXd& qs, const Eigen::MatrixXd& states, Cache* cache) const {
  if (qs.cols() != shape_.n_agents) {
    throw ParameterError("mixer expects " + std::to_string(shape_.n_agents) + " agent values, got " +
                         std::to_string(qs.cols()));
  }
  if (shape_.kind == MixerKind::VdnSum) {
    if (cache) cache->qs = qs;
    return qs.rowwise().sum();
  }
  if (states.cols() != shape_.state_size || states.rows() != qs.rows()) {
    throw ParameterError("mixer state batch has shape " + std::to_string(states.rows()) + "x" +
                         std::to_string(states.cols()) + ", expected " + std::to_string(qs.rows()) + "x" +
                         std::to_string(shape_.state_size));
  }
  const auto& p = params_;
  const Eigen::Index e = shape_.embed;

  Eigen::MatrixXd w1_pre = affine(states, p.value(kHw1), p.value(kBw1));
  Eigen::MatrixXd w1 = w1_pre.cwiseAbs();
  Eigen::MatrixXd hidden_pre = affine(states, p.value(kHb1), p.value(kBb1));
  for (Eigen::Index i = 0; i < shape_.n_agents; ++i) {
    hidden_pre.array() += w1.middleCols(i * e, e).array().colwise() * qs.col(i).array();
  }
  Eigen::MatrixXd hidden = elu(hidden_pre);
  Eigen::MatrixXd w2_pre = affine(states, p.value(kHw2), p.value(kBw2));
  Eigen::MatrixXd v_pre = affine(states, p.value(kV1), p.value(kC1));
  Eigen::VectorXd v = (v_pre.cwiseMax(0.0) * p.value(kV2)).col(0).array() + p.value(kC2)(0, 0);

  Eigen::VectorXd q_tot = hidden.cwiseProduct(w2_pre.cwiseAbs()).rowwise().sum() + v;
  if (cache) {
    cache->qs = qs;
    cache->states = states;
    cache->w1_pre = std::move(w1_pre);
    cache->hidden_pre = std::move(hidden_pre);
    cache->hidden = std::move(hidden);
    cache->w2_pre = std::move(w2_pre);
    cache->v_pre = std::move(v_pre);
  }
  return q_tot;
}

void Mixer::backward(const Cache& c, const Eigen::VectorXd& d_qtot, ParameterSet& grads,
                     Eigen::MatrixXd& d_qs) const {
  const Eigen::Index batch = c.qs.rows();
  const Eigen::Index n = shape_.n_agents;
  if (shape_.kind == MixerKind::VdnSum) {
    d_qs = d_qtot.replicate(1, n);
    return;
  }
  const auto& p = params_;
  const Eigen::Index e = shape_.embed;
  const Eigen::MatrixXd states_t = c.states.transpose();

  // Q_tot = sum_e hidden * |w2_pre| + V
  Eigen::MatrixXd d_w2_pre =
      (c.hidden.array().colwise() * d_qtot.array()).matrix().cwiseProduct(c.w2_pre.cwiseSign());
  grads.value(kHw2).noalias() += states_t * d_w2_pre;
  grads.value(kBw2) += d_w2_pre.colwise().sum();

  Eigen::MatrixXd d_hidden_pre =
      (c.w2_pre.cwiseAbs().array().colwise() * d_qtot.array()).matrix().cwiseProduct(elu_grad(c.hidden_pre));
  grads.value(kHb1).noalias() += states_t * d_hidden_pre;
  grads.value(kBb1) += d_hidden_pre.colwise().sum();

  Eigen::MatrixXd d_w1_pre(batch, n * e);
  d_qs.resize(batch, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto block_pre = c.w1_pre.middleCols(i * e, e);
    d_w1_pre.middleCols(i * e, e) =
        (d_hidden_pre.array().colwise() * c.qs.col(i).array()).matrix().cwiseProduct(block_pre.cwiseSign());
    d_qs.col(i) = d_hidden_pre.cwiseProduct(block_pre.cwiseAbs()).rowwise().sum();
  }
  grads.value(kHw1).noalias() += states_t * d_w1_pre;
  grads.value(kBw1) += d_w1_pre.colwise().sum();

  const Eigen::MatrixXd v_act = c.v_pre.cwiseMax(0.0);
  grads.value(kV2).noalias() += v_act.transpose() * d_qtot;
  grads.value(kC2)(0, 0) += d_qtot.sum();
  Eigen::MatrixXd d_v_pre = (d_qtot * p.value(kV2).transpose())
                                .cwiseProduct((c.v_pre.array() > 0.0).cast<double>().matrix());
  grads.value(kV1).noalias() += states_t * d_v_pre;
  grads.value(kC1) += d_v_pre.colwise().sum();
}

Eigen::MatrixXd Mixer::first_layer_weights(const Eigen::RowVectorXd& state) const {
  const int n = shape_.n_agents;
  if (shape_.kind == MixerKind::VdnSum) return Eigen::MatrixXd::Ones(n, 1);
  Eigen::RowVectorXd flat = (state * params_.value(kHw1) + params_.value(kBw1).row(0)).cwiseAbs();
  Eigen::MatrixXd out(n, shape_.embed);
  for (int i = 0; i < n; ++i) out.row(i) = flat.segment(i * shape_.embed, shape_.embed);
  return out;
}

}  // namespace coachmarl
