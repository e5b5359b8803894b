#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ruka/nn/tensor.hpp"

namespace ruka::nn {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
  bool operator==(const AdamWConfig&) const = default;
};

void to_json(nlohmann::json& j, const AdamWConfig& c);
void from_json(const nlohmann::json& j, AdamWConfig& c);

/// Adam with decoupled weight decay:
///   p <- p * (1 - lr * wd)
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// with bias-corrected moments m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t).
struct OptimizerState {
  AdamWConfig config;
  std::vector<Tensor2> first_moment;
  std::vector<Tensor2> second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_parameters(const AdamWConfig& config, std::span<Tensor2* const> params);
};

/// Throws TrainingDivergence on a non-finite gradient (parameters untouched).
void optimizer_step(OptimizerState& state, std::span<Tensor2* const> params,
                    std::span<const Tensor2* const> grads);

}  // namespace ruka::nn
