#pragma once

// Per-motor range finding by binary search against the hand's own glove readings.
//
// Each motor is searched on its own with every other motor at its hardware
// minimum. A probe reads the motor's joints, averaged over several glove frames.
//   max: the smallest angle beyond which further travel moves no joint by more
//        than the tolerance, i.e. |J(hw_max) - J(x)| <= tol.
//   min: the mirror search from below, the largest angle whose reading is still
//        within the tolerance of the fully slack reading, |J(x) - J(hw_min)| <= tol.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ruka/plant.hpp"

namespace ruka {

struct CalibrationOptions {
  double tolerance_deg = 0.5;
  std::size_t max_iters = 32;
  std::size_t readings_per_probe = 200;
  std::uint64_t seed = 1;
  bool operator==(const CalibrationOptions&) const = default;
};

struct MotorCalibration {
  double min_deg = 0.0;
  double max_deg = 0.0;
  std::size_t min_iterations = 0;
  std::size_t max_iterations = 0;
  double residual_motion_deg = 0.0;  // |J(hw_max) - J(max)|, largest over the motor's joints
  bool operator==(const MotorCalibration&) const = default;
};

struct CalibrationResult {
  static constexpr int kSchema = 1;
  MotorRanges ranges;
  std::array<MotorCalibration, kNumMotors> motors{};
  double timestamp_ms = 0.0;  // plant clock at completion: probes x readings x glove period
  std::string plant_digest;
  std::string geometry_digest;
  CalibrationOptions options;
  bool operator==(const CalibrationResult&) const = default;
};

void to_json(nlohmann::json& j, const CalibrationResult& r);
void from_json(const nlohmann::json& j, CalibrationResult& r);
std::string calibration_digest(const CalibrationResult& r);
void write_calibration(const CalibrationResult& r, const std::filesystem::path& path);
CalibrationResult read_calibration(const std::filesystem::path& path);

/// Indices of the joints a motor drives (one, or PIP and DIP for a coupled motor).
std::vector<std::size_t> joints_of_motor(std::size_t motor);

/// Reads the motor's joints with the motor at `deg` and every other motor at its hardware minimum.
using ProbeFn = std::function<std::vector<double>(std::size_t motor, double deg)>;

/// Search one motor against an arbitrary probe. Throws CalibrationFailure when
/// readings fall as the motor winds in, or the motor moves nothing at all.
MotorCalibration calibrate_motor(const ProbeFn& probe, std::size_t motor, double hw_min, double hw_max,
                                 const CalibrationOptions& options, std::size_t* probes_used = nullptr);

CalibrationResult calibrate(const PlantConfig& plant, const HandGeometry& geometry,
                            const CalibrationOptions& options = {});

/// Throws Uncalibrated unless `result` was produced for exactly this plant and geometry.
void require_calibrated(const CalibrationResult& result, const PlantConfig& plant, const HandGeometry& geometry);

}  // namespace ruka
