#pragma once

// Synthetic stand-in for the tendon hand and the glove mounted on it.
//
// Each motor winds a tendon on a spool. Excursion past the slack region,
//   e = max(0, m - offset - deadband) * spool_radius   (m in degrees, e in mm),
// turns the joints it crosses by e / pulley_radius. Thumb motors and finger MCP
// motors drive one joint each. The second motor of a finger drives PIP and DIP
// through one tendon with DIP = coupling * PIP until a joint hits its stop; the
// remaining excursion then spills into the other joint. Springs extend the
// finger, so an unloaded tendon means 0 deg.

#include <array>
#include <cstdint>
#include <random>
#include <string>

#include "json.hpp"

#include "ruka/common.hpp"
#include "ruka/hand_model.hpp"

namespace ruka {

/// Motor order: thumb CMC, MCP, IP, then (MCP, coupled PIP/DIP) for index..pinky.
struct MotorVector {
  std::array<double, kNumMotors> deg{};
  bool operator==(const MotorVector&) const = default;
};

/// Usable per-motor range, normally produced by calibration.
struct MotorRanges {
  std::array<double, kNumMotors> min{};
  std::array<double, kNumMotors> max{};

  /// Maps a normalised command u in [0, 1] to degrees (clamped).
  double to_motor(std::size_t motor, double u) const;
  double to_unit(std::size_t motor, double deg) const;
  MotorVector minimum() const;
  bool operator==(const MotorRanges&) const = default;
};

void to_json(nlohmann::json& j, const MotorRanges& r);
void from_json(const nlohmann::json& j, MotorRanges& r);

struct PlantConfig {
  static constexpr int kSchema = 1;
  std::array<double, kNumMotors> spool_radius_mm{};
  std::array<double, kNumJoints> pulley_radius_mm{};
  std::array<double, kNumMotors> deadband_deg{};
  std::array<double, kNumMotors> tension_offset_deg{};
  std::array<double, 4> coupling_ratio{};  // DIP : PIP, index..pinky
  std::array<double, kNumJoints> joint_limits_deg{};
  std::array<double, kNumMotors> hardware_min_deg{};
  std::array<double, kNumMotors> hardware_max_deg{};
  double sensor_noise_mm = 0.0;
  double servo_resolution_deg = 0.0;  // 0 disables position quantisation
  bool spill_on_saturation = true;    // false: the coupled pair stops when either joint stops
  std::uint64_t seed = 0;
};

PlantConfig default_plant_config();
void validate(const PlantConfig& c);

void to_json(nlohmann::json& j, const PlantConfig& c);
void from_json(const nlohmann::json& j, PlantConfig& c);
std::string plant_digest(const PlantConfig& c);

struct SensorReading {
  double timestamp_ms = 0.0;
  KeypointFrame keypoints;
  FingertipSet fingertips;
  JointState joints;
  MotorVector commanded;
  MotorVector actual;
};

/// Servo position actually reached for a command (quantised to the encoder).
MotorVector actual_position(const PlantConfig& c, const MotorVector& command);

/// Noise-free joint angles for a command; throws ActuationLimit outside hardware bounds.
JointState actuate(const PlantConfig& c, const MotorVector& command);

/// Joint angles of a single finger driven by its own motors (other motors irrelevant).
std::array<double, 3> actuate_finger(const PlantConfig& c, Finger f, std::span<const double> finger_motors);

/// Motor angle at which the motor's last joint reaches its stop (closed form).
double saturation_point(const PlantConfig& c, std::size_t motor);
/// Motor angle at which the motor first produces any joint motion.
double motion_onset(const PlantConfig& c, std::size_t motor);

MotorVector hardware_minimum(const PlantConfig& c);
/// The hardware bounds as a range (what an uncalibrated hand would use).
MotorRanges hardware_ranges(const PlantConfig& c);

/// Glove read-out: actuate, forward kinematics, Gaussian keypoint noise, then
/// fingertips and joint angles recomputed from the noisy keypoints.
SensorReading read_sensors(const PlantConfig& c, const HandGeometry& g, const MotorVector& command,
                           double t_ms, std::mt19937_64& rng);

/// Owns the noise generator of one reading stream.
class SensorStream {
 public:
  SensorStream(PlantConfig config, HandGeometry geometry, std::uint64_t stream_seed)
      : config_(std::move(config)), geometry_(std::move(geometry)), rng_(stream_seed) {}

  SensorReading read(const MotorVector& command, double t_ms) {
    return read_sensors(config_, geometry_, command, t_ms, rng_);
  }
  const PlantConfig& config() const { return config_; }
  const HandGeometry& geometry() const { return geometry_; }

 private:
  PlantConfig config_;
  HandGeometry geometry_;
  std::mt19937_64 rng_;
};

/// A "newly assembled" hand: offsets, deadbands and radii scaled by
/// (1 + u), u ~ U(-magnitude, magnitude), independently per entry.
PlantConfig perturb_build(const PlantConfig& c, double magnitude, std::uint64_t seed);

}  // namespace ruka
