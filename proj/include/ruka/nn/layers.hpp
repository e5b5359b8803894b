#pragma once

// Dense, ReLU, MSE and LSTM building blocks with hand-written backward passes.
// Batches are rows: a (B x features) tensor holds B samples.

#include <span>
#include <vector>

#include "ruka/nn/tensor.hpp"

namespace ruka::nn {

// ---------------------------------------------------------------- dense

struct DenseParams {
  Tensor2 weight;  // out x in
  Tensor2 bias;    // 1 x out

  std::size_t inputs() const { return weight.cols(); }
  std::size_t outputs() const { return weight.rows(); }
  bool operator==(const DenseParams&) const = default;
};

/// Weights and biases U(-1/sqrt(in), 1/sqrt(in)).
DenseParams init_dense(std::size_t in, std::size_t out, std::mt19937_64& rng);
DenseParams zeros_like(const DenseParams& p);

Tensor2 dense_forward(const DenseParams& p, const Tensor2& x);
/// Accumulates parameter gradients into `grads` and returns dL/dx.
Tensor2 dense_backward(const DenseParams& p, const Tensor2& x, const Tensor2& dy, DenseParams& grads);

Tensor2 relu(const Tensor2& x);
/// dy masked by (pre > 0).
Tensor2 relu_backward(const Tensor2& pre, const Tensor2& dy);

/// Mean over every element of (pred - target)^2. Writes dL/dpred when `grad` is set.
double mse_loss(const Tensor2& pred, const Tensor2& target, Tensor2* grad = nullptr);

// ---------------------------------------------------------------- MLP

/// Dense layers with ReLU between them; the last layer is linear.
struct Mlp {
  std::vector<DenseParams> layers;
  bool operator==(const Mlp&) const = default;
};

Mlp init_mlp(std::span<const std::size_t> widths, std::mt19937_64& rng);
Mlp zeros_like(const Mlp& m);

struct MlpTrace {
  std::vector<Tensor2> inputs;  // input of each layer (post-activation of the previous)
  std::vector<Tensor2> pre;     // pre-activation of each layer
};

Tensor2 mlp_forward(const Mlp& m, const Tensor2& x, MlpTrace* trace = nullptr);
Tensor2 mlp_backward(const Mlp& m, const MlpTrace& trace, const Tensor2& dy, Mlp& grads);

// ---------------------------------------------------------------- LSTM

/// Gates stacked as rows [input; forget; cell; output] of a (4H x (in + H))
/// weight acting on the concatenation [x_t, h_{t-1}].
struct LstmParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  Tensor2 weight;  // 4H x (in + H)
  Tensor2 bias;    // 1 x 4H
  bool operator==(const LstmParams&) const = default;
};

/// Uniform(+-1/sqrt(H)) weights, zero biases except the forget gate at 1.0.
LstmParams init_lstm(std::size_t input, std::size_t hidden, std::mt19937_64& rng);
LstmParams zeros_like(const LstmParams& p);

struct LstmCache {
  std::vector<Tensor2> xh;     // [x_t, h_{t-1}] per step, B x (in + H)
  std::vector<Tensor2> gates;  // activated i, f, g, o per step, B x 4H
  std::vector<Tensor2> cell;   // c_t per step, B x H
};

struct LstmOutput {
  std::vector<Tensor2> hidden;  // h_t per step, B x H
  LstmCache cache;
  const Tensor2& final_hidden() const { return hidden.back(); }
};

/// Runs the cell over a sequence from zero state. Every step is B x input.
LstmOutput lstm_forward(const LstmParams& p, std::span<const Tensor2> sequence);

/// Back-propagates dL/dh_T; accumulates into `grads` and returns dL/dx_t per step.
std::vector<Tensor2> lstm_backward(const LstmParams& p, const LstmCache& cache, const Tensor2& dh_final,
                                   LstmParams& grads);

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const DenseParams& p);
void from_json(const nlohmann::json& j, DenseParams& p);
void to_json(nlohmann::json& j, const Mlp& m);
void from_json(const nlohmann::json& j, Mlp& m);
void to_json(nlohmann::json& j, const LstmParams& p);
void from_json(const nlohmann::json& j, LstmParams& p);

/// Flat views of every trainable tensor, in a stable order.
std::vector<Tensor2*> parameters(Mlp& m);
std::vector<Tensor2*> parameters(LstmParams& p);

}  // namespace ruka::nn
