#pragma once

// Validation protocols: replaying recorded poses through the controllers,
// thumb-finger opposition sampling and the range-of-motion sweep.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ruka/controllers.hpp"

namespace ruka {

enum class ValidationKind { Robot, HumanLike };
std::string_view validation_kind_name(ValidationKind k);
ValidationKind validation_kind_from_name(std::string_view name);

/// One recorded pose. `observed` is what the glove reported (controller input);
/// `desired` is where the robot's fingertips should end up: the recorded thumb
/// tip, and the robot-geometry tips of the recorded finger joint angles.
struct ValidationPose {
  KeypointFrame observed;
  FingertipSet desired;
  JointState source_joints;  // joints of the hand that produced the pose
  bool operator==(const ValidationPose&) const = default;
};

struct ValidationSet {
  static constexpr int kSchema = 1;
  ValidationKind kind = ValidationKind::Robot;
  std::vector<std::vector<ValidationPose>> trajectories;  // 15 Hz sequences
  std::uint64_t seed = 0;
  nlohmann::json parameters;

  std::size_t pose_count() const;
  bool operator==(const ValidationSet&) const = default;
};

void to_json(nlohmann::json& j, const ValidationSet& s);
void from_json(const nlohmann::json& j, ValidationSet& s);
std::string validation_digest(const ValidationSet& s);

struct RobotValidationSpec {
  std::size_t trajectory_length = 20;
  double step_size_deg = kDefaultStepSizeDeg;
};

/// Random-walk commands on all fingers at once, replayed on the noiseless plant.
/// Walk seeds come from a stream disjoint from the training collection seeds;
/// they are listed in `parameters["episode_seeds"]`.
ValidationSet make_robot_validation(const PlantConfig& plant, const HandGeometry& geometry, const MotorRanges& ranges,
                                    std::size_t n_poses, std::uint64_t seed, const RobotValidationSpec& spec = {});

/// The seed stream make_robot_validation draws its walk seeds from.
std::uint64_t robot_validation_episode_seed(std::uint64_t seed, std::size_t trajectory);

struct HumanLikeSpec {
  std::size_t trajectory_length = 30;
  double link_scale = 1.1;            // human links relative to the robot's
  double glove_noise_mm = 1.0;        // keypoint noise of the glove on a human hand
  double amplitude_min = 0.35;        // sinusoid amplitude, fraction of the joint range
  double amplitude_max = 0.6;
  double frequency_min_hz = 0.05;     // slow, deliberate posing
  double frequency_max_hz = 0.15;
  double dip_ratio_min = 0.4;         // human DIP:PIP amplitude ratio
  double dip_ratio_max = 1.0;
  double dip_phase_sd_rad = 0.35;
};

void to_json(nlohmann::json& j, const HumanLikeSpec& s);
void from_json(const nlohmann::json& j, HumanLikeSpec& s);

/// Smooth synergy trajectories on a human-proportioned hand: per-joint
/// sinusoids, PIP/DIP phase-correlated but off the robot's coupling ratio, and
/// amplitudes that push past the robot's reachable set.
ValidationSet make_humanlike_validation(const HandGeometry& geometry, std::size_t n_poses, std::uint64_t seed,
                                        const HumanLikeSpec& spec = {});

/// Geometry of the human hand make_humanlike_validation records from.
HandGeometry human_geometry(const HandGeometry& robot, double link_scale);

struct FingerError {
  std::array<double, 3> axis_cm{};  // mean |achieved - desired| per axis
  std::size_t count = 0;
  double mean_cm() const { return (axis_cm[0] + axis_cm[1] + axis_cm[2]) / 3.0; }
  bool operator==(const FingerError&) const = default;
};

struct EvalReport {
  std::string controller;  // kind name, or "oracle"
  ValidationKind set_kind = ValidationKind::Robot;
  std::array<FingerError, kNumFingers> fingers{};
  std::vector<std::array<double, kNumFingers>> tip_errors_mm;  // per pose, Euclidean
  std::uint64_t set_seed = 0;
  std::string controller_digest;
  std::string set_digest;
  std::string plant_digest;
  bool operator==(const EvalReport&) const = default;

  const FingerError& thumb() const { return fingers[0]; }
  /// Per-axis mean over every finger's poses.
  FingerError pooled() const;
};

/// Pose the noiseless plant reaches for a command, joints clamped to their limits.
KeypointFrame achieved_pose(const PlantConfig& plant, const HandGeometry& geometry, const MotorVector& command);

/// Per-finger error sums in pose order. Every scorer goes through it so that
/// equal pose sequences give bit-identical reports.
class ErrorAccumulator {
 public:
  void add(const KeypointFrame& achieved, const FingertipSet& desired);
  /// Fills `fingers` and `tip_errors_mm`.
  void finish(EvalReport& r) const;
  std::size_t count() const { return tip_errors_mm_.size(); }

 private:
  std::array<std::array<double, 3>, kNumFingers> sums_{};
  std::vector<std::array<double, kNumFingers>> tip_errors_mm_;
};

/// Maps a pose (and the history before it) to an 11-motor command.
struct PolicyContext {
  const std::vector<ValidationPose>& trajectory;
  std::size_t step;
};
using Policy = std::function<MotorVector(const PolicyContext&)>;

EvalReport replay_and_score(const Policy& policy, const ValidationSet& set, const PlantConfig& plant,
                            const HandGeometry& geometry, std::string name = "policy");
EvalReport replay_and_score(const HandController& controller, const ValidationSet& set, const PlantConfig& plant,
                            const HandGeometry& geometry, const MotorRanges& ranges);

/// Controller input for one finger at one trajectory step (history from the trajectory).
ControllerInput controller_input(const std::vector<ValidationPose>& trajectory, std::size_t step, Finger f);
/// Every finger's controller, assembled into one command.
MotorVector hand_command(const HandController& controller, const std::vector<ValidationPose>& trajectory,
                         std::size_t step, const MotorRanges& ranges);

/// Brute-force inverse of the noiseless plant: every motor scanned on a grid of
/// `resolution_deg` over `ranges`, choosing the command whose joints best match
/// the pose's source joints. Motors act on disjoint joints, so the scan is per motor.
Policy grid_inverse_oracle(const PlantConfig& plant, const MotorRanges& ranges, double resolution_deg);

/// Mean nearest-neighbour distance of the set's controller inputs to a
/// dataset's states, in the dataset's z-scored state space.
double mean_nearest_distance(const ValidationSet& set, const Dataset& data);

struct ContactCloud {
  std::array<std::vector<Vec3>, 4> thumb_tips;  // index, middle, ring, pinky pairs
  std::size_t samples = 0;
  double contact_radius_mm = 0.0;
  std::uint64_t seed = 0;
  bool operator==(const ContactCloud&) const = default;
};

inline constexpr std::size_t kOppositionSamples = 250000;
inline constexpr double kContactRadiusMm = 5.0;

/// For each finger, `samples` joint configurations of thumb and finger drawn
/// uniformly within limits; the thumb tip is kept where the two tips are
/// within the contact radius.
ContactCloud fingertip_intersection(const HandGeometry& geometry, std::size_t samples, std::uint64_t seed,
                                    double contact_radius_mm = kContactRadiusMm);

struct RangeOfMotionRow {
  std::size_t joint = 0;
  std::string name;
  double achieved_min_deg = 0.0;
  double achieved_max_deg = 0.0;
  double limit_deg = 0.0;
  double fraction() const { return (achieved_max_deg - achieved_min_deg) / limit_deg; }
};

/// Sweeps each motor over `ranges` (others at their minimum) on the noiseless plant.
std::vector<RangeOfMotionRow> range_of_motion_report(const PlantConfig& plant, const HandGeometry& geometry,
                                                     const MotorRanges& ranges, double step_deg = 0.25);

// ---------------------------------------------------------------- output

void print_report(std::ostream& out, const EvalReport& r);
nlohmann::json report_record(const EvalReport& r);
void write_error_csv(std::ostream& out, const EvalReport& r);
void write_contacts_csv(std::ostream& out, const ContactCloud& c);
void print_range_of_motion(std::ostream& out, const std::vector<RangeOfMotionRow>& rows);

}  // namespace ruka
