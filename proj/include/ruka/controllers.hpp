#pragma once

// Inverse controllers: pose target in, normalised motor command out.
//
// Every controller works in the unit motor space u in [0, 1] of the ranges the
// training data was collected over, so a checkpoint moves between builds by
// swapping the MotorRanges it is mapped through.

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ruka/datagen.hpp"
#include "ruka/nn/layers.hpp"
#include "ruka/nn/optimizer.hpp"

namespace ruka {

inline constexpr std::size_t kHistoryLength = 10;

enum class ControllerKind { Sequence, Mlp, Knn, Search };
enum class Representation { Fingertip, JointAngles };

std::string_view kind_name(ControllerKind k);
ControllerKind kind_from_name(std::string_view name);
std::string_view representation_name(Representation r);
Representation representation_from_name(std::string_view name);

/// Thumb controllers take fingertip positions, the other fingers take joint angles.
constexpr Representation representation_for(Finger f) {
  return f == Finger::Thumb ? Representation::Fingertip : Representation::JointAngles;
}

using FingerState = std::array<double, 3>;

/// The finger state a controller of `r` consumes, read off a recorded sample.
FingerState state_of(const FingerReading& r, Representation rep);
FingerState state_of(const KeypointFrame& frame, Finger f, Representation rep);

struct ControllerInput {
  Finger finger = Finger::Thumb;
  Representation representation = Representation::Fingertip;
  std::array<FingerState, kHistoryLength> history{};  // oldest first; back() is the target

  const FingerState& target() const { return history.back(); }

  /// Takes up to the last kHistoryLength states; shorter histories are
  /// front-padded with their oldest state.
  static ControllerInput from_history(Finger f, Representation rep, std::span<const FingerState> states);
};

/// Per-dimension z-score statistics. Zero spreads are stored as 1.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  static Normalizer fit(const std::vector<std::vector<double>>& rows);
  double apply(std::size_t d, double v) const { return (v - mean[d]) / std[d]; }
  double invert(std::size_t d, double z) const { return z * std[d] + mean[d]; }
  std::size_t dims() const { return mean.size(); }
  bool operator==(const Normalizer&) const = default;
};

struct TrainingConfig {
  std::size_t hidden = 32;                         // LSTM width
  std::vector<std::size_t> head_hidden = {64};     // sequence head
  std::vector<std::size_t> mlp_hidden = {64, 64};  // direct MLP controller
  std::vector<std::size_t> forward_hidden = {64, 64};
  std::size_t epochs = 20;
  std::size_t batch_size = 256;
  nn::AdamWConfig optimizer;
  bool cosine_decay = true;  // learning rate decays to 10% over the run
  double holdout_fraction = 0.1;
  double history_noise = 0.0;  // sequence: Gaussian noise on z-scored training histories
  std::size_t knn_k = 5;
  std::size_t grid_points = 50;
  std::uint64_t seed = 1;
  bool operator==(const TrainingConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);

struct ControllerCheckpoint {
  static constexpr int kSchema = 1;
  ControllerKind kind = ControllerKind::Sequence;
  Finger finger = Finger::Thumb;
  Representation representation = Representation::Fingertip;
  Normalizer input_norm;   // finger state
  Normalizer output_norm;  // unit motor command

  // sequence
  nn::LstmParams lstm;
  nn::Mlp head;
  // mlp
  nn::Mlp net;
  // knn: retained training pairs (raw state, unit command)
  std::size_t k = 5;
  std::vector<FingerState> knn_states;
  std::vector<std::vector<double>> knn_commands;
  // search: forward model maps z-scored unit commands to z-scored state
  nn::Mlp forward;
  std::size_t grid_points = 50;

  TrainingConfig config;
  std::string dataset_digest;
  std::string calibration_digest;
  MotorRanges ranges;  // ranges the unit commands were defined over
  std::vector<double> epoch_losses;
  double holdout_loss = 0.0;  // normalised-output MSE on held-out episodes
  double forward_holdout_loss = 0.0;

  std::size_t motors() const { return motor_count(finger); }
  bool operator==(const ControllerCheckpoint&) const = default;
};

void to_json(nlohmann::json& j, const ControllerCheckpoint& c);
void from_json(const nlohmann::json& j, ControllerCheckpoint& c);

ControllerCheckpoint train_controller(ControllerKind kind, const Dataset& data, const TrainingConfig& config);
ControllerCheckpoint train_sequence_controller(const Dataset& data, const TrainingConfig& config);
ControllerCheckpoint train_mlp_controller(const Dataset& data, const TrainingConfig& config);
ControllerCheckpoint train_knn_controller(const Dataset& data, const TrainingConfig& config);
ControllerCheckpoint train_search_controller(const Dataset& data, const TrainingConfig& config);

/// Exhaustive search over a uniform grid on the unit motor box. Forward
/// predictions are evaluated once and cached; queries are a vectorised scan.
class GridSearch {
 public:
  /// Maps a batch of unit commands (rows) to states (rows, 3 columns).
  using ForwardFn = std::function<nn::Tensor2(const nn::Tensor2&)>;

  GridSearch(std::size_t motors, std::size_t points_per_dim, const ForwardFn& forward);

  std::size_t size() const { return size_; }
  std::size_t motors() const { return motors_; }
  std::size_t points_per_dim() const { return points_; }
  /// Grid point i as a unit command; the first motor is the most significant digit.
  std::vector<double> point(std::size_t index) const;
  /// Index of the grid point whose predicted state is nearest `target`; ties go to the lowest index.
  std::size_t nearest(const FingerState& target) const;

 private:
  std::size_t motors_;
  std::size_t points_;
  std::size_t size_;
  std::array<std::vector<double>, 3> predicted_;  // one column per state dimension
};

/// A checkpoint plus the lookup structures derived from it at load time.
class Controller {
 public:
  explicit Controller(ControllerCheckpoint checkpoint);

  const ControllerCheckpoint& checkpoint() const { return ckpt_; }
  ControllerKind kind() const { return ckpt_.kind; }
  Finger finger() const { return ckpt_.finger; }

  /// Unit command in [0, 1] per finger motor.
  std::vector<double> predict_unit(const ControllerInput& input) const;
  /// Motor degrees through `ranges`, clamped to them.
  std::vector<double> predict(const ControllerInput& input, const MotorRanges& ranges) const;

 private:
  std::vector<double> sequence_unit(const ControllerInput& input) const;
  std::vector<double> mlp_unit(const ControllerInput& input) const;
  std::vector<double> knn_unit(const ControllerInput& input) const;
  std::vector<double> search_unit(const ControllerInput& input) const;

  ControllerCheckpoint ckpt_;
  std::array<std::vector<double>, 3> knn_columns_;  // z-scored retained states
  std::shared_ptr<const GridSearch> grid_;
};

/// Mean of the k nearest retained samples in z-scored state space.
std::vector<double> knn_predict(const Controller& c, const FingerState& target);
/// Grid minimiser of the forward model's predicted state distance.
std::vector<double> search_predict(const Controller& c, const FingerState& target);

/// Five per-finger controllers used together.
struct HandController {
  std::array<std::shared_ptr<const Controller>, kNumFingers> fingers;
  ControllerKind kind = ControllerKind::Sequence;

  const Controller& finger(Finger f) const;
  /// Digest over the member checkpoints.
  std::string digest() const;
};

std::string checkpoint_digest(const ControllerCheckpoint& c);
void write_checkpoint(const ControllerCheckpoint& c, const std::filesystem::path& path);
ControllerCheckpoint read_checkpoint(const std::filesystem::path& path);

/// Manifest: {"schema":1,"kind":...,"fingers":{"thumb":{"file":..., "digest":...}, ...}}.
/// Checkpoint files are resolved relative to the manifest.
void write_manifest(const std::filesystem::path& path, ControllerKind kind,
                    const std::array<std::string, kNumFingers>& files,
                    const std::array<std::string, kNumFingers>& digests);
HandController load_hand_controller(const std::filesystem::path& manifest);
HandController make_hand_controller(ControllerKind kind, std::array<ControllerCheckpoint, kNumFingers> ckpts);

}  // namespace ruka
