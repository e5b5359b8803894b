#pragma once

// Autonomous data collection: per-finger random walks over motor space and the
// line-delimited dataset file.
//
// Dataset file layout (UTF-8, '\n' line ends):
//   line 1     "#ruka-dataset " + JSON header {schema, finger, seed, digests, ranges, ...}
//   lines 2..  one sample per line, comma separated, in this order:
//              episode, step, t_ms, 5 keypoints x (x,y,z), tip (x,y,z),
//              3 joint angles, n commanded motors, n actual motors   (n = 3 thumb, 2 finger)
//   last line  "#end <count> <fnv1a-64 hex of every sample line incl. '\n'>"
// Floats are written in shortest round-trip form, so read(write(d)) == d exactly.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ruka/hand_model.hpp"
#include "ruka/plant.hpp"

namespace ruka {

inline constexpr double kLoggingRateHz = 15.0;
inline constexpr double kLoggingPeriodMs = 1000.0 / kLoggingRateHz;
inline constexpr std::size_t kDefaultWalkSteps = 100;
inline constexpr double kDefaultStepSizeDeg = 2.0;

/// The slice of a SensorReading that belongs to one finger.
struct FingerReading {
  double timestamp_ms = 0.0;
  std::array<Vec3, kKeypointsPerFinger> keypoints;
  Vec3 fingertip = Vec3::Zero();
  std::array<double, 3> joints{};
  std::array<double, 3> commanded{};  // first motor_count(finger) entries used
  std::array<double, 3> actual{};
  bool operator==(const FingerReading& o) const;
};

FingerReading finger_slice(const SensorReading& r, Finger f);

struct Sample {
  std::uint32_t episode = 0;
  std::uint32_t step = 0;
  FingerReading reading;
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  static constexpr int kSchema = 1;
  Finger finger = Finger::Thumb;
  std::vector<Sample> samples;
  std::string plant_digest;
  std::string geometry_digest;
  std::string calibration_digest;
  MotorRanges ranges;  // motor range the walk was confined to
  std::uint64_t seed = 0;
  std::uint32_t steps_per_episode = 0;
  double step_size_deg = 0.0;
  bool operator==(const Dataset&) const = default;

  std::size_t episode_count() const;
};

std::size_t default_episodes(Finger f);

struct WalkSpec {
  Finger finger = Finger::Thumb;
  std::size_t steps = kDefaultWalkSteps;
  double step_size_deg = kDefaultStepSizeDeg;
};

/// One episode: a uniform start inside `ranges`, then per step each of the
/// finger's motors moves +/- step_size (independent fair signs), clamped to the
/// range. Other fingers rest at their range minimum.
std::vector<Sample> random_walk_episode(const PlantConfig& plant, const HandGeometry& geometry,
                                        const MotorRanges& ranges, const WalkSpec& walk,
                                        std::uint32_t episode, std::uint64_t seed);

Dataset collect_dataset(const PlantConfig& plant, const HandGeometry& geometry, const MotorRanges& ranges,
                        const WalkSpec& walk, std::size_t episodes, std::uint64_t seed,
                        const std::string& calibration_digest = {});

void write_dataset(const Dataset& d, std::ostream& out);
Dataset read_dataset(std::istream& in);
void write_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
std::string dataset_digest(const Dataset& d);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace ruka
