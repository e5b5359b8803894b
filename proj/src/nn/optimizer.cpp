#include "ruka/nn/optimizer.hpp"

#include <cmath>

namespace ruka::nn {

void to_json(nlohmann::json& j, const AdamWConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"epsilon", c.epsilon},
       {"weight_decay", c.weight_decay}};
}

void from_json(const nlohmann::json& j, AdamWConfig& c) {
  c.learning_rate = j.at("learning_rate");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.epsilon = j.at("epsilon");
  c.weight_decay = j.at("weight_decay");
}

OptimizerState OptimizerState::for_parameters(const AdamWConfig& config, std::span<Tensor2* const> params) {
  OptimizerState s;
  s.config = config;
  for (const Tensor2* p : params) {
    s.first_moment.emplace_back(p->rows(), p->cols());
    s.second_moment.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void optimizer_step(OptimizerState& state, std::span<Tensor2* const> params,
                    std::span<const Tensor2* const> grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw Error(ErrorCode::DimensionMismatch, "optimizer parameter/gradient count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.first_moment[i])) {
      throw Error(ErrorCode::DimensionMismatch, "optimizer tensor " + std::to_string(i) + " shape mismatch");
    }
    if (!grads[i]->all_finite()) {
      throw Error(ErrorCode::TrainingDivergence, "non-finite gradient in tensor " + std::to_string(i));
    }
  }

  const AdamWConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double decay = 1.0 - c.learning_rate * c.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] *= decay;
      p[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace ruka::nn
