#include "ruka/nn/layers.hpp"

#include <cmath>

#include "ruka/simd/kernels.hpp"

namespace ruka::nn {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------- dense

DenseParams init_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  DenseParams p{Tensor2(out, in), Tensor2(1, out)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fill_uniform(p.weight, bound, rng);
  fill_uniform(p.bias, bound, rng);
  return p;
}

DenseParams zeros_like(const DenseParams& p) {
  return {Tensor2(p.weight.rows(), p.weight.cols()), Tensor2(1, p.bias.cols())};
}

Tensor2 dense_forward(const DenseParams& p, const Tensor2& x) {
  if (x.cols() != p.inputs()) {
    throw Error(ErrorCode::DimensionMismatch, "dense input has " + std::to_string(x.cols()) +
                                                  " features, layer expects " + std::to_string(p.inputs()));
  }
  const auto& k = simd::active_kernels();
  Tensor2 y(x.rows(), p.outputs());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const double* xb = x.row(b).data();
    for (std::size_t o = 0; o < p.outputs(); ++o) {
      y(b, o) = p.bias(0, o) + k.dot(xb, p.weight.row(o).data(), p.inputs());
    }
  }
  return y;
}

Tensor2 dense_backward(const DenseParams& p, const Tensor2& x, const Tensor2& dy, DenseParams& grads) {
  require_shape(dy, x.rows(), p.outputs(), "dense backward dy");
  require_shape(grads.weight, p.outputs(), p.inputs(), "dense backward grads");
  const auto& k = simd::active_kernels();
  Tensor2 dx(x.rows(), p.inputs());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const double* xb = x.row(b).data();
    double* dxb = dx.row(b).data();
    for (std::size_t o = 0; o < p.outputs(); ++o) {
      const double g = dy(b, o);
      grads.bias(0, o) += g;
      k.axpy(g, xb, grads.weight.row(o).data(), p.inputs());
      k.axpy(g, p.weight.row(o).data(), dxb, p.inputs());
    }
  }
  return dx;
}

Tensor2 relu(const Tensor2& x) {
  Tensor2 y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor2 relu_backward(const Tensor2& pre, const Tensor2& dy) {
  require_shape(dy, pre.rows(), pre.cols(), "relu backward");
  Tensor2 dx = dy;
  auto p = pre.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(p[i] > 0.0)) d[i] = 0.0;
  }
  return dx;
}

double mse_loss(const Tensor2& pred, const Tensor2& target, Tensor2* grad) {
  require_shape(target, pred.rows(), pred.cols(), "mse target");
  const double n = static_cast<double>(pred.size());
  if (grad != nullptr) *grad = Tensor2(pred.rows(), pred.cols());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred.values()[i] - target.values()[i];
    sum += r * r;
    if (grad != nullptr) grad->values()[i] = 2.0 * r / n;
  }
  return sum / n;
}

// ---------------------------------------------------------------- MLP

Mlp init_mlp(std::span<const std::size_t> widths, std::mt19937_64& rng) {
  if (widths.size() < 2) throw Error(ErrorCode::InvalidArgument, "an MLP needs at least two widths");
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) m.layers.push_back(init_dense(widths[i], widths[i + 1], rng));
  return m;
}

Mlp zeros_like(const Mlp& m) {
  Mlp z;
  for (const auto& l : m.layers) z.layers.push_back(zeros_like(l));
  return z;
}

Tensor2 mlp_forward(const Mlp& m, const Tensor2& x, MlpTrace* trace) {
  Tensor2 act = x;
  if (trace != nullptr) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    Tensor2 pre = dense_forward(m.layers[i], act);
    const bool last = i + 1 == m.layers.size();
    Tensor2 next = last ? pre : relu(pre);
    if (trace != nullptr) {
      trace->inputs.push_back(std::move(act));
      trace->pre.push_back(std::move(pre));
    }
    act = std::move(next);
  }
  return act;
}

Tensor2 mlp_backward(const Mlp& m, const MlpTrace& trace, const Tensor2& dy, Mlp& grads) {
  Tensor2 d = dy;
  for (std::size_t i = m.layers.size(); i-- > 0;) {
    if (i + 1 != m.layers.size()) d = relu_backward(trace.pre[i], d);
    d = dense_backward(m.layers[i], trace.inputs[i], d, grads.layers[i]);
  }
  return d;
}

// ---------------------------------------------------------------- LSTM

LstmParams init_lstm(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  LstmParams p{input, hidden, Tensor2(4 * hidden, input + hidden), Tensor2(1, 4 * hidden)};
  fill_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  for (std::size_t r = hidden; r < 2 * hidden; ++r) p.bias(0, r) = 1.0;
  return p;
}

LstmParams zeros_like(const LstmParams& p) {
  return {p.input, p.hidden, Tensor2(p.weight.rows(), p.weight.cols()), Tensor2(1, p.bias.cols())};
}

LstmOutput lstm_forward(const LstmParams& p, std::span<const Tensor2> sequence) {
  if (sequence.empty()) throw Error(ErrorCode::InvalidArgument, "LSTM sequence must be non-empty");
  const std::size_t batch = sequence.front().rows();
  const std::size_t in = p.input;
  const std::size_t hid = p.hidden;
  const std::size_t width = in + hid;
  const auto& k = simd::active_kernels();

  LstmOutput out;
  out.hidden.reserve(sequence.size());
  Tensor2 h_prev(batch, hid);
  Tensor2 c_prev(batch, hid);
  for (const Tensor2& x : sequence) {
    require_shape(x, batch, in, "LSTM step input");
    Tensor2 xh(batch, width);
    Tensor2 gates(batch, 4 * hid);
    Tensor2 c(batch, hid);
    Tensor2 h(batch, hid);
    for (std::size_t b = 0; b < batch; ++b) {
      auto row = xh.row(b);
      std::copy(x.row(b).begin(), x.row(b).end(), row.begin());
      std::copy(h_prev.row(b).begin(), h_prev.row(b).end(), row.begin() + static_cast<std::ptrdiff_t>(in));
      double* g = gates.row(b).data();
      for (std::size_t r = 0; r < 4 * hid; ++r) g[r] = p.bias(0, r) + k.dot(row.data(), p.weight.row(r).data(), width);
      for (std::size_t j = 0; j < hid; ++j) {
        const double ig = sigmoid(g[j]);
        const double fg = sigmoid(g[hid + j]);
        const double cg = std::tanh(g[2 * hid + j]);
        const double og = sigmoid(g[3 * hid + j]);
        g[j] = ig;
        g[hid + j] = fg;
        g[2 * hid + j] = cg;
        g[3 * hid + j] = og;
        c(b, j) = fg * c_prev(b, j) + ig * cg;
        h(b, j) = og * std::tanh(c(b, j));
      }
    }
    out.cache.xh.push_back(std::move(xh));
    out.cache.gates.push_back(std::move(gates));
    out.cache.cell.push_back(c);
    out.hidden.push_back(h);
    h_prev = std::move(h);
    c_prev = std::move(c);
  }
  return out;
}

std::vector<Tensor2> lstm_backward(const LstmParams& p, const LstmCache& cache, const Tensor2& dh_final,
                                   LstmParams& grads) {
  const std::size_t steps = cache.xh.size();
  const std::size_t batch = dh_final.rows();
  const std::size_t in = p.input;
  const std::size_t hid = p.hidden;
  const std::size_t width = in + hid;
  require_shape(dh_final, batch, hid, "LSTM dh");
  const auto& k = simd::active_kernels();

  std::vector<Tensor2> dx(steps, Tensor2(batch, in));
  Tensor2 dh = dh_final;
  Tensor2 dc(batch, hid);
  std::vector<double> dz(4 * hid);
  std::vector<double> dxh(width);
  for (std::size_t t = steps; t-- > 0;) {
    const Tensor2& gates = cache.gates[t];
    const Tensor2& c = cache.cell[t];
    const Tensor2* c_prev = t > 0 ? &cache.cell[t - 1] : nullptr;
    Tensor2 dh_prev(batch, hid);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* g = gates.row(b).data();
      for (std::size_t j = 0; j < hid; ++j) {
        const double ig = g[j], fg = g[hid + j], cg = g[2 * hid + j], og = g[3 * hid + j];
        const double tc = std::tanh(c(b, j));
        const double dog = dh(b, j) * tc;
        double dcell = dc(b, j) + dh(b, j) * og * (1.0 - tc * tc);
        const double cp = c_prev != nullptr ? (*c_prev)(b, j) : 0.0;
        dz[j] = dcell * cg * ig * (1.0 - ig);
        dz[hid + j] = dcell * cp * fg * (1.0 - fg);
        dz[2 * hid + j] = dcell * ig * (1.0 - cg * cg);
        dz[3 * hid + j] = dog * og * (1.0 - og);
        dc(b, j) = dcell * fg;
      }
      std::fill(dxh.begin(), dxh.end(), 0.0);
      const double* xh = cache.xh[t].row(b).data();
      for (std::size_t r = 0; r < 4 * hid; ++r) {
        const double gr = dz[r];
        grads.bias(0, r) += gr;
        k.axpy(gr, xh, grads.weight.row(r).data(), width);
        k.axpy(gr, p.weight.row(r).data(), dxh.data(), width);
      }
      std::copy(dxh.begin(), dxh.begin() + static_cast<std::ptrdiff_t>(in), dx[t].row(b).begin());
      std::copy(dxh.begin() + static_cast<std::ptrdiff_t>(in), dxh.end(), dh_prev.row(b).begin());
    }
    dh = std::move(dh_prev);
  }
  return dx;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const DenseParams& p) { j = {{"weight", p.weight}, {"bias", p.bias}}; }

void from_json(const nlohmann::json& j, DenseParams& p) {
  j.at("weight").get_to(p.weight);
  j.at("bias").get_to(p.bias);
  require_shape(p.bias, 1, p.weight.rows(), "dense bias");
}

void to_json(nlohmann::json& j, const Mlp& m) { j = {{"layers", m.layers}}; }

void from_json(const nlohmann::json& j, Mlp& m) {
  m.layers.clear();
  for (const auto& l : j.at("layers")) m.layers.push_back(l.get<DenseParams>());
  for (std::size_t i = 1; i < m.layers.size(); ++i) {
    if (m.layers[i].inputs() != m.layers[i - 1].outputs()) {
      throw Error(ErrorCode::DimensionMismatch, "MLP layer widths do not chain");
    }
  }
}

void to_json(nlohmann::json& j, const LstmParams& p) {
  j = {{"input", p.input}, {"hidden", p.hidden}, {"weight", p.weight}, {"bias", p.bias}};
}

void from_json(const nlohmann::json& j, LstmParams& p) {
  p.input = j.at("input");
  p.hidden = j.at("hidden");
  j.at("weight").get_to(p.weight);
  j.at("bias").get_to(p.bias);
  require_shape(p.weight, 4 * p.hidden, p.input + p.hidden, "LSTM weight");
  require_shape(p.bias, 1, 4 * p.hidden, "LSTM bias");
}

std::vector<Tensor2*> parameters(Mlp& m) {
  std::vector<Tensor2*> out;
  for (auto& l : m.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<Tensor2*> parameters(LstmParams& p) { return {&p.weight, &p.bias}; }

}  // namespace ruka::nn
