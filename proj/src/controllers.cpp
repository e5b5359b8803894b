#include "ruka/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "ruka/simd/kernels.hpp"

namespace ruka {
namespace {

using nn::Tensor2;

constexpr std::size_t kSearchChunk = 4096;

// Training pairs extracted from a dataset: one per sample, with enough
// bookkeeping to rebuild its history window.
struct Pairs {
  std::vector<FingerState> states;
  std::vector<std::vector<double>> commands;  // unit
  std::vector<std::size_t> episode_start;
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

Pairs extract_pairs(const Dataset& data, double holdout_fraction) {
  if (data.samples.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no samples");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "holdout fraction must be in [0, 1)");
  }
  const Representation rep = representation_for(data.finger);
  const std::size_t m0 = motor_offset(data.finger);
  const std::size_t nm = motor_count(data.finger);

  Pairs p;
  p.states.reserve(data.samples.size());
  std::vector<std::size_t> episode_of(data.samples.size());
  std::size_t episodes = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    if (i == 0 || data.samples[i].episode != data.samples[i - 1].episode) {
      start = i;
      ++episodes;
    }
    const auto& r = data.samples[i].reading;
    p.states.push_back(state_of(r, rep));
    std::vector<double> u(nm);
    for (std::size_t k = 0; k < nm; ++k) u[k] = data.ranges.to_unit(m0 + k, r.commanded[k]);
    p.commands.push_back(std::move(u));
    p.episode_start.push_back(start);
    episode_of[i] = episodes - 1;
  }
  const std::size_t held =
      episodes < 2 ? 0 : std::min(episodes - 1, static_cast<std::size_t>(std::ceil(holdout_fraction * episodes)));
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    (episode_of[i] + held < episodes ? p.train : p.holdout).push_back(i);
  }
  return p;
}

std::array<std::size_t, kHistoryLength> window_of(const Pairs& p, std::size_t i) {
  std::array<std::size_t, kHistoryLength> w{};
  const std::size_t first = p.episode_start[i];
  for (std::size_t t = 0; t < kHistoryLength; ++t) {
    const std::size_t back = kHistoryLength - 1 - t;
    w[t] = i >= first + back ? i - back : first;
  }
  return w;
}

ControllerInput input_at(const Pairs& p, std::size_t i, Finger f) {
  ControllerInput in;
  in.finger = f;
  in.representation = representation_for(f);
  const auto w = window_of(p, i);
  for (std::size_t t = 0; t < kHistoryLength; ++t) in.history[t] = p.states[w[t]];
  return in;
}

ControllerCheckpoint base_checkpoint(ControllerKind kind, const Dataset& data, const TrainingConfig& config,
                                     const Pairs& p) {
  ControllerCheckpoint c;
  c.kind = kind;
  c.finger = data.finger;
  c.representation = representation_for(data.finger);
  c.config = config;
  c.dataset_digest = dataset_digest(data);
  c.calibration_digest = data.calibration_digest;
  c.ranges = data.ranges;
  c.k = config.knn_k;
  c.grid_points = config.grid_points;

  std::vector<std::vector<double>> in_rows, out_rows;
  for (std::size_t i : p.train) {
    in_rows.emplace_back(p.states[i].begin(), p.states[i].end());
    out_rows.push_back(p.commands[i]);
  }
  c.input_norm = Normalizer::fit(in_rows);
  c.output_norm = Normalizer::fit(out_rows);
  return c;
}

std::vector<std::size_t> widths_of(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

double learning_rate(const TrainingConfig& config, std::size_t epoch) {
  if (!config.cosine_decay || config.epochs <= 1) return config.optimizer.learning_rate;
  const double progress = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  return config.optimizer.learning_rate * (0.1 + 0.45 * (1.0 + std::cos(kPi * progress)));
}

// Runs `step(batch)` over shuffled minibatches for every epoch. `step` does
// forward + backward and returns the batch loss.
template <class StepFn>
std::vector<double> run_epochs(const TrainingConfig& config, std::vector<std::size_t> order,
                               std::vector<nn::Tensor2*> params, StepFn&& step) {
  if (config.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  std::mt19937_64 rng(derive_seed(config.seed, 0x5eed));
  auto state = nn::OptimizerState::for_parameters(config.optimizer, params);
  std::vector<double> losses;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    state.config.learning_rate = learning_rate(config, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + b0, std::min(config.batch_size, order.size() - b0));
      std::vector<const nn::Tensor2*> grads;
      const double loss = step(batch, grads);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::TrainingDivergence, "non-finite loss in epoch " + std::to_string(epoch));
      }
      nn::optimizer_step(state, params, grads);
      total += loss * static_cast<double>(batch.size());
    }
    losses.push_back(total / static_cast<double>(order.size()));
  }
  return losses;
}

Tensor2 normalised_targets(const ControllerCheckpoint& c, const Pairs& p, std::span<const std::size_t> batch) {
  Tensor2 y(batch.size(), c.motors());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t k = 0; k < c.motors(); ++k) y(b, k) = c.output_norm.apply(k, p.commands[batch[b]][k]);
  }
  return y;
}

void collect(std::vector<const Tensor2*>& out, std::vector<Tensor2*> ptrs) { out.insert(out.end(), ptrs.begin(), ptrs.end()); }

double holdout_mse(const ControllerCheckpoint& c, const Pairs& p) {
  const auto& rows = p.holdout.empty() ? p.train : p.holdout;
  const Controller ctl(c);
  double sum = 0.0;
  for (std::size_t i : rows) {
    const auto u = ctl.predict_unit(input_at(p, i, c.finger));
    for (std::size_t k = 0; k < c.motors(); ++k) {
      const double r = c.output_norm.apply(k, u[k]) - c.output_norm.apply(k, p.commands[i][k]);
      sum += r * r;
    }
  }
  return sum / static_cast<double>(rows.size() * c.motors());
}

std::vector<double> clamp_unit(std::vector<double> u) {
  for (double& v : u) v = std::clamp(v, 0.0, 1.0);
  return u;
}

}  // namespace

// ---------------------------------------------------------------- names

std::string_view kind_name(ControllerKind k) {
  switch (k) {
    case ControllerKind::Sequence: return "sequence";
    case ControllerKind::Mlp: return "mlp";
    case ControllerKind::Knn: return "knn";
    case ControllerKind::Search: return "search";
  }
  return "?";
}

ControllerKind kind_from_name(std::string_view name) {
  for (auto k : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search}) {
    if (kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown controller kind '" + std::string(name) + "'");
}

std::string_view representation_name(Representation r) {
  return r == Representation::Fingertip ? "fingertip" : "joint_angles";
}

Representation representation_from_name(std::string_view name) {
  if (name == "fingertip") return Representation::Fingertip;
  if (name == "joint_angles") return Representation::JointAngles;
  throw Error(ErrorCode::InvalidArgument, "unknown representation '" + std::string(name) + "'");
}

FingerState state_of(const FingerReading& r, Representation rep) {
  if (rep == Representation::Fingertip) return {r.fingertip.x(), r.fingertip.y(), r.fingertip.z()};
  return r.joints;
}

FingerState state_of(const KeypointFrame& frame, Finger f, Representation rep) {
  if (rep == Representation::Fingertip) {
    const Vec3& t = frame.tip(f);
    return {t.x(), t.y(), t.z()};
  }
  return finger_joint_angles(frame.finger(f));
}

ControllerInput ControllerInput::from_history(Finger f, Representation rep, std::span<const FingerState> states) {
  if (states.empty()) throw Error(ErrorCode::InvalidArgument, "controller input needs at least one state");
  ControllerInput in;
  in.finger = f;
  in.representation = rep;
  const std::size_t n = std::min(states.size(), kHistoryLength);
  const auto recent = states.subspan(states.size() - n);
  const std::size_t pad = kHistoryLength - n;
  for (std::size_t t = 0; t < kHistoryLength; ++t) in.history[t] = recent[t < pad ? 0 : t - pad];
  for (const auto& s : in.history) {
    for (double v : s) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "controller input is not finite");
    }
  }
  return in;
}

Normalizer Normalizer::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "cannot fit a normaliser to no data");
  const std::size_t d = rows.front().size();
  Normalizer n{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) n.mean[k] += r[k];
  }
  for (double& m : n.mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) n.std[k] += (r[k] - n.mean[k]) * (r[k] - n.mean[k]);
  }
  for (double& s : n.std) {
    s = std::sqrt(s / static_cast<double>(rows.size()));
    if (!(s > 1e-9)) s = 1.0;
  }
  return n;
}

// ---------------------------------------------------------------- training

ControllerCheckpoint train_sequence_controller(const Dataset& data, const TrainingConfig& config) {
  const Pairs p = extract_pairs(data, config.holdout_fraction);
  ControllerCheckpoint c = base_checkpoint(ControllerKind::Sequence, data, config, p);
  std::mt19937_64 rng(derive_seed(config.seed, 1));
  c.lstm = nn::init_lstm(3, config.hidden, rng);
  c.head = nn::init_mlp(widths_of(config.hidden, config.head_hidden, c.motors()), rng);

  nn::LstmParams lstm_grads = nn::zeros_like(c.lstm);
  nn::Mlp head_grads = nn::zeros_like(c.head);
  std::vector<Tensor2*> params = nn::parameters(c.lstm);
  for (Tensor2* t : nn::parameters(c.head)) params.push_back(t);

  std::mt19937_64 noise_rng(derive_seed(config.seed, 0x6e6f697365ull));
  std::normal_distribution<double> noise(0.0, 1.0);
  c.epoch_losses = run_epochs(config, p.train, params, [&](std::span<const std::size_t> batch,
                                                           std::vector<const Tensor2*>& grads) {
    std::vector<Tensor2> seq(kHistoryLength, Tensor2(batch.size(), 3));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto w = window_of(p, batch[b]);
      for (std::size_t t = 0; t < kHistoryLength; ++t) {
        for (std::size_t d = 0; d < 3; ++d) {
          seq[t](b, d) = c.input_norm.apply(d, p.states[w[t]][d]);
          if (config.history_noise > 0.0) seq[t](b, d) += config.history_noise * noise(noise_rng);
        }
      }
    }
    const auto out = nn::lstm_forward(c.lstm, seq);
    nn::MlpTrace trace;
    Tensor2 dy;
    const double loss = nn::mse_loss(nn::mlp_forward(c.head, out.final_hidden(), &trace), normalised_targets(c, p, batch), &dy);
    lstm_grads = nn::zeros_like(c.lstm);
    head_grads = nn::zeros_like(c.head);
    const Tensor2 dh = nn::mlp_backward(c.head, trace, dy, head_grads);
    nn::lstm_backward(c.lstm, out.cache, dh, lstm_grads);
    collect(grads, nn::parameters(lstm_grads));
    collect(grads, nn::parameters(head_grads));
    return loss;
  });
  c.holdout_loss = holdout_mse(c, p);
  return c;
}

ControllerCheckpoint train_mlp_controller(const Dataset& data, const TrainingConfig& config) {
  const Pairs p = extract_pairs(data, config.holdout_fraction);
  ControllerCheckpoint c = base_checkpoint(ControllerKind::Mlp, data, config, p);
  std::mt19937_64 rng(derive_seed(config.seed, 2));
  c.net = nn::init_mlp(widths_of(3, config.mlp_hidden, c.motors()), rng);
  nn::Mlp grads_net = nn::zeros_like(c.net);

  c.epoch_losses = run_epochs(config, p.train, nn::parameters(c.net), [&](std::span<const std::size_t> batch,
                                                                          std::vector<const Tensor2*>& grads) {
    Tensor2 x(batch.size(), 3);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (std::size_t d = 0; d < 3; ++d) x(b, d) = c.input_norm.apply(d, p.states[batch[b]][d]);
    }
    nn::MlpTrace trace;
    Tensor2 dy;
    const double loss = nn::mse_loss(nn::mlp_forward(c.net, x, &trace), normalised_targets(c, p, batch), &dy);
    grads_net = nn::zeros_like(c.net);
    nn::mlp_backward(c.net, trace, dy, grads_net);
    collect(grads, nn::parameters(grads_net));
    return loss;
  });
  c.holdout_loss = holdout_mse(c, p);
  return c;
}

ControllerCheckpoint train_knn_controller(const Dataset& data, const TrainingConfig& config) {
  if (config.knn_k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const Pairs p = extract_pairs(data, config.holdout_fraction);
  ControllerCheckpoint c = base_checkpoint(ControllerKind::Knn, data, config, p);
  for (std::size_t i : p.train) {
    c.knn_states.push_back(p.states[i]);
    c.knn_commands.push_back(p.commands[i]);
  }
  c.holdout_loss = holdout_mse(c, p);
  return c;
}

ControllerCheckpoint train_search_controller(const Dataset& data, const TrainingConfig& config) {
  if (config.grid_points < 2) throw Error(ErrorCode::InvalidArgument, "search grid needs at least 2 points per motor");
  const Pairs p = extract_pairs(data, config.holdout_fraction);
  ControllerCheckpoint c = base_checkpoint(ControllerKind::Search, data, config, p);
  std::mt19937_64 rng(derive_seed(config.seed, 4));
  c.forward = nn::init_mlp(widths_of(c.motors(), config.forward_hidden, 3), rng);
  nn::Mlp grads_net = nn::zeros_like(c.forward);

  auto forward_batch = [&](std::span<const std::size_t> batch, Tensor2& x, Tensor2& y) {
    x = Tensor2(batch.size(), c.motors());
    y = Tensor2(batch.size(), 3);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (std::size_t k = 0; k < c.motors(); ++k) x(b, k) = c.output_norm.apply(k, p.commands[batch[b]][k]);
      for (std::size_t d = 0; d < 3; ++d) y(b, d) = c.input_norm.apply(d, p.states[batch[b]][d]);
    }
  };

  c.epoch_losses = run_epochs(config, p.train, nn::parameters(c.forward), [&](std::span<const std::size_t> batch,
                                                                              std::vector<const Tensor2*>& grads) {
    Tensor2 x, y;
    forward_batch(batch, x, y);
    nn::MlpTrace trace;
    Tensor2 dy;
    const double loss = nn::mse_loss(nn::mlp_forward(c.forward, x, &trace), y, &dy);
    grads_net = nn::zeros_like(c.forward);
    nn::mlp_backward(c.forward, trace, dy, grads_net);
    collect(grads, nn::parameters(grads_net));
    return loss;
  });

  const auto& rows = p.holdout.empty() ? p.train : p.holdout;
  Tensor2 x, y;
  forward_batch(rows, x, y);
  c.forward_holdout_loss = nn::mse_loss(nn::mlp_forward(c.forward, x), y);
  c.holdout_loss = holdout_mse(c, p);
  return c;
}

ControllerCheckpoint train_controller(ControllerKind kind, const Dataset& data, const TrainingConfig& config) {
  switch (kind) {
    case ControllerKind::Sequence: return train_sequence_controller(data, config);
    case ControllerKind::Mlp: return train_mlp_controller(data, config);
    case ControllerKind::Knn: return train_knn_controller(data, config);
    case ControllerKind::Search: return train_search_controller(data, config);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown controller kind");
}

// ---------------------------------------------------------------- grid search

GridSearch::GridSearch(std::size_t motors, std::size_t points_per_dim, const ForwardFn& forward)
    : motors_(motors), points_(points_per_dim), size_(1) {
  if (motors == 0 || points_per_dim < 2) throw Error(ErrorCode::InvalidArgument, "degenerate search grid");
  for (std::size_t m = 0; m < motors; ++m) size_ *= points_;
  for (auto& col : predicted_) col.resize(size_);
  for (std::size_t begin = 0; begin < size_; begin += kSearchChunk) {
    const std::size_t n = std::min(kSearchChunk, size_ - begin);
    Tensor2 u(n, motors_);
    for (std::size_t r = 0; r < n; ++r) {
      const auto pt = point(begin + r);
      std::copy(pt.begin(), pt.end(), u.row(r).begin());
    }
    const Tensor2 s = forward(u);
    require_shape(s, n, 3, "search forward model output");
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t d = 0; d < 3; ++d) predicted_[d][begin + r] = s(r, d);
    }
  }
}

std::vector<double> GridSearch::point(std::size_t index) const {
  std::vector<double> u(motors_);
  for (std::size_t m = motors_; m-- > 0;) {
    u[m] = static_cast<double>(index % points_) / static_cast<double>(points_ - 1);
    index /= points_;
  }
  return u;
}

std::size_t GridSearch::nearest(const FingerState& target) const {
  std::vector<double> dist(size_, 0.0);
  const auto& k = simd::active_kernels();
  for (std::size_t d = 0; d < 3; ++d) k.accumulate_sq_diff(predicted_[d].data(), target[d], dist.data(), size_);
  return k.argmin(dist.data(), size_);
}

// ---------------------------------------------------------------- inference

Controller::Controller(ControllerCheckpoint checkpoint) : ckpt_(std::move(checkpoint)) {
  if (ckpt_.kind == ControllerKind::Knn) {
    if (ckpt_.knn_states.empty()) throw Error(ErrorCode::InvalidArgument, "k-NN controller has no retained samples");
    for (std::size_t d = 0; d < 3; ++d) {
      knn_columns_[d].reserve(ckpt_.knn_states.size());
      for (const auto& s : ckpt_.knn_states) knn_columns_[d].push_back(ckpt_.input_norm.apply(d, s[d]));
    }
  } else if (ckpt_.kind == ControllerKind::Search) {
    const ControllerCheckpoint& c = ckpt_;
    grid_ = std::make_shared<const GridSearch>(c.motors(), c.grid_points, [&c](const Tensor2& u) {
      Tensor2 z(u.rows(), u.cols());
      for (std::size_t r = 0; r < u.rows(); ++r) {
        for (std::size_t k = 0; k < u.cols(); ++k) z(r, k) = c.output_norm.apply(k, u(r, k));
      }
      Tensor2 s = nn::mlp_forward(c.forward, z);
      for (std::size_t r = 0; r < s.rows(); ++r) {
        for (std::size_t d = 0; d < 3; ++d) s(r, d) = c.input_norm.invert(d, s(r, d));
      }
      return s;
    });
  }
}

std::vector<double> Controller::predict_unit(const ControllerInput& input) const {
  if (input.representation != ckpt_.representation) {
    throw Error(ErrorCode::RepresentationMismatch,
                std::string(finger_name(ckpt_.finger)) + " controller expects " +
                    std::string(representation_name(ckpt_.representation)) + " input, got " +
                    std::string(representation_name(input.representation)));
  }
  if (input.finger != ckpt_.finger) {
    throw Error(ErrorCode::InvalidArgument, "input for " + std::string(finger_name(input.finger)) + " given to the " +
                                                std::string(finger_name(ckpt_.finger)) + " controller");
  }
  switch (ckpt_.kind) {
    case ControllerKind::Sequence: return sequence_unit(input);
    case ControllerKind::Mlp: return mlp_unit(input);
    case ControllerKind::Knn: return knn_unit(input);
    case ControllerKind::Search: return search_unit(input);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown controller kind");
}

std::vector<double> Controller::predict(const ControllerInput& input, const MotorRanges& ranges) const {
  const auto u = predict_unit(input);
  std::vector<double> deg(u.size());
  const std::size_t m0 = motor_offset(ckpt_.finger);
  for (std::size_t k = 0; k < u.size(); ++k) deg[k] = ranges.to_motor(m0 + k, u[k]);
  return deg;
}

std::vector<double> Controller::sequence_unit(const ControllerInput& input) const {
  std::vector<Tensor2> seq(kHistoryLength, Tensor2(1, 3));
  for (std::size_t t = 0; t < kHistoryLength; ++t) {
    for (std::size_t d = 0; d < 3; ++d) seq[t](0, d) = ckpt_.input_norm.apply(d, input.history[t][d]);
  }
  const auto out = nn::lstm_forward(ckpt_.lstm, seq);
  const Tensor2 z = nn::mlp_forward(ckpt_.head, out.final_hidden());
  std::vector<double> u(ckpt_.motors());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = ckpt_.output_norm.invert(k, z(0, k));
  return clamp_unit(std::move(u));
}

std::vector<double> Controller::mlp_unit(const ControllerInput& input) const {
  Tensor2 x(1, 3);
  for (std::size_t d = 0; d < 3; ++d) x(0, d) = ckpt_.input_norm.apply(d, input.target()[d]);
  const Tensor2 z = nn::mlp_forward(ckpt_.net, x);
  std::vector<double> u(ckpt_.motors());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = ckpt_.output_norm.invert(k, z(0, k));
  return clamp_unit(std::move(u));
}

std::vector<double> Controller::knn_unit(const ControllerInput& input) const {
  const std::size_t n = ckpt_.knn_states.size();
  const std::size_t k = std::min(std::max<std::size_t>(ckpt_.k, 1), n);
  const auto& kern = simd::active_kernels();
  std::vector<double> dist(n, 0.0);
  for (std::size_t d = 0; d < 3; ++d) {
    kern.accumulate_sq_diff(knn_columns_[d].data(), ckpt_.input_norm.apply(d, input.target()[d]), dist.data(), n);
  }
  std::vector<double> u(ckpt_.motors(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t best = kern.argmin(dist.data(), n);
    for (std::size_t m = 0; m < u.size(); ++m) u[m] += ckpt_.knn_commands[best][m];
    dist[best] = std::numeric_limits<double>::infinity();
  }
  for (double& v : u) v /= static_cast<double>(k);
  return clamp_unit(std::move(u));
}

std::vector<double> Controller::search_unit(const ControllerInput& input) const {
  return grid_->point(grid_->nearest(input.target()));
}

std::vector<double> knn_predict(const Controller& c, const FingerState& target) {
  if (c.kind() != ControllerKind::Knn) throw Error(ErrorCode::InvalidArgument, "not a k-NN controller");
  const FingerState one[] = {target};
  return c.predict_unit(ControllerInput::from_history(c.finger(), c.checkpoint().representation, one));
}

std::vector<double> search_predict(const Controller& c, const FingerState& target) {
  if (c.kind() != ControllerKind::Search) throw Error(ErrorCode::InvalidArgument, "not a search controller");
  const FingerState one[] = {target};
  return c.predict_unit(ControllerInput::from_history(c.finger(), c.checkpoint().representation, one));
}

// ---------------------------------------------------------------- persistence

void to_json(nlohmann::json& j, const TrainingConfig& c) {
  j = {{"hidden", c.hidden},
       {"head_hidden", c.head_hidden},
       {"mlp_hidden", c.mlp_hidden},
       {"forward_hidden", c.forward_hidden},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"optimizer", c.optimizer},
       {"cosine_decay", c.cosine_decay},
       {"holdout_fraction", c.holdout_fraction},
       {"history_noise", c.history_noise},
       {"knn_k", c.knn_k},
       {"grid_points", c.grid_points},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
  const TrainingConfig d;
  c.hidden = j.value("hidden", d.hidden);
  c.head_hidden = j.value("head_hidden", d.head_hidden);
  c.mlp_hidden = j.value("mlp_hidden", d.mlp_hidden);
  c.forward_hidden = j.value("forward_hidden", d.forward_hidden);
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.optimizer = j.contains("optimizer") ? j.at("optimizer").get<nn::AdamWConfig>() : d.optimizer;
  c.cosine_decay = j.value("cosine_decay", d.cosine_decay);
  c.holdout_fraction = j.value("holdout_fraction", d.holdout_fraction);
  c.history_noise = j.value("history_noise", d.history_noise);
  c.knn_k = j.value("knn_k", d.knn_k);
  c.grid_points = j.value("grid_points", d.grid_points);
  c.seed = j.value("seed", d.seed);
  if (c.hidden == 0 || c.batch_size == 0 || c.knn_k == 0 || c.grid_points < 2) {
    throw Error(ErrorCode::InvalidArgument, "training config has a zero size");
  }
}

void to_json(nlohmann::json& j, const ControllerCheckpoint& c) {
  j = {{"schema", ControllerCheckpoint::kSchema},
       {"kind", kind_name(c.kind)},
       {"finger", finger_name(c.finger)},
       {"representation", representation_name(c.representation)},
       {"input_norm", {{"mean", c.input_norm.mean}, {"std", c.input_norm.std}}},
       {"output_norm", {{"mean", c.output_norm.mean}, {"std", c.output_norm.std}}},
       {"config", c.config},
       {"dataset_digest", c.dataset_digest},
       {"calibration_digest", c.calibration_digest},
       {"ranges", c.ranges},
       {"epoch_losses", c.epoch_losses},
       {"holdout_loss", c.holdout_loss}};
  switch (c.kind) {
    case ControllerKind::Sequence:
      j["lstm"] = c.lstm;
      j["head"] = c.head;
      break;
    case ControllerKind::Mlp: j["net"] = c.net; break;
    case ControllerKind::Knn:
      j["k"] = c.k;
      j["states"] = c.knn_states;
      j["commands"] = c.knn_commands;
      break;
    case ControllerKind::Search:
      j["forward"] = c.forward;
      j["grid_points"] = c.grid_points;
      j["forward_holdout_loss"] = c.forward_holdout_loss;
      break;
  }
}

void from_json(const nlohmann::json& j, ControllerCheckpoint& c) {
  if (j.value("schema", -1) != ControllerCheckpoint::kSchema) {
    throw Error(ErrorCode::SchemaVersion, "checkpoint schema mismatch, expected 1");
  }
  c = ControllerCheckpoint{};
  c.kind = kind_from_name(j.at("kind").get<std::string>());
  c.finger = finger_from_name(j.at("finger").get<std::string>());
  c.representation = representation_from_name(j.at("representation").get<std::string>());
  j.at("input_norm").at("mean").get_to(c.input_norm.mean);
  j.at("input_norm").at("std").get_to(c.input_norm.std);
  j.at("output_norm").at("mean").get_to(c.output_norm.mean);
  j.at("output_norm").at("std").get_to(c.output_norm.std);
  for (const auto* n : {&c.input_norm, &c.output_norm}) {
    for (double s : n->std) {
      if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "checkpoint normaliser has a non-positive spread");
    }
  }
  c.config = j.at("config").get<TrainingConfig>();
  c.k = c.config.knn_k;
  c.grid_points = c.config.grid_points;
  c.dataset_digest = j.at("dataset_digest");
  c.calibration_digest = j.at("calibration_digest");
  c.ranges = j.at("ranges").get<MotorRanges>();
  j.at("epoch_losses").get_to(c.epoch_losses);
  c.holdout_loss = j.at("holdout_loss");
  switch (c.kind) {
    case ControllerKind::Sequence:
      c.lstm = j.at("lstm").get<nn::LstmParams>();
      c.head = j.at("head").get<nn::Mlp>();
      break;
    case ControllerKind::Mlp: c.net = j.at("net").get<nn::Mlp>(); break;
    case ControllerKind::Knn:
      c.k = j.at("k");
      j.at("states").get_to(c.knn_states);
      j.at("commands").get_to(c.knn_commands);
      break;
    case ControllerKind::Search:
      c.forward = j.at("forward").get<nn::Mlp>();
      c.grid_points = j.at("grid_points");
      c.forward_holdout_loss = j.at("forward_holdout_loss");
      break;
  }
}

std::string checkpoint_digest(const ControllerCheckpoint& c) { return digest_of(nlohmann::json(c).dump()); }

void write_checkpoint(const ControllerCheckpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << nlohmann::json(c).dump() << '\n';
}

ControllerCheckpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in).get<ControllerCheckpoint>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TruncatedRecord, path.string() + ": " + e.what());
  }
}

const Controller& HandController::finger(Finger f) const {
  const auto& c = fingers[index_of(f)];
  if (!c) throw Error(ErrorCode::InvalidArgument, "no controller loaded for " + std::string(finger_name(f)));
  return *c;
}

std::string HandController::digest() const {
  Fnv1a h;
  for (const auto& c : fingers) {
    if (c) h.update(checkpoint_digest(c->checkpoint()));
  }
  return h.hex();
}

void write_manifest(const std::filesystem::path& path, ControllerKind kind,
                    const std::array<std::string, kNumFingers>& files,
                    const std::array<std::string, kNumFingers>& digests) {
  nlohmann::json j = {{"schema", 1}, {"kind", kind_name(kind)}, {"fingers", nlohmann::json::object()}};
  for (Finger f : kAllFingers) {
    j["fingers"][std::string(finger_name(f))] = {{"file", files[index_of(f)]}, {"digest", digests[index_of(f)]}};
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

HandController load_hand_controller(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TruncatedRecord, manifest.string() + ": " + e.what());
  }
  if (j.value("schema", -1) != 1) throw Error(ErrorCode::SchemaVersion, "controller manifest schema mismatch");
  HandController hand;
  hand.kind = kind_from_name(j.at("kind").get<std::string>());
  for (Finger f : kAllFingers) {
    const auto& entry = j.at("fingers").at(std::string(finger_name(f)));
    auto ckpt = read_checkpoint(manifest.parent_path() / entry.at("file").get<std::string>());
    if (checkpoint_digest(ckpt) != entry.at("digest").get<std::string>()) {
      throw Error(ErrorCode::DigestMismatch, std::string(finger_name(f)) + " checkpoint does not match its manifest digest");
    }
    if (ckpt.finger != f || ckpt.kind != hand.kind) {
      throw Error(ErrorCode::InvalidArgument, std::string(finger_name(f)) + " checkpoint is for another finger or kind");
    }
    hand.fingers[index_of(f)] = std::make_shared<const Controller>(std::move(ckpt));
  }
  return hand;
}

HandController make_hand_controller(ControllerKind kind, std::array<ControllerCheckpoint, kNumFingers> ckpts) {
  HandController hand;
  hand.kind = kind;
  for (Finger f : kAllFingers) {
    auto& c = ckpts[index_of(f)];
    if (c.finger != f || c.kind != kind) throw Error(ErrorCode::InvalidArgument, "checkpoint set is inconsistent");
    hand.fingers[index_of(f)] = std::make_shared<const Controller>(std::move(c));
  }
  return hand;
}

}  // namespace ruka
