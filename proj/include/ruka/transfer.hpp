#pragma once

// Transfer of trained controllers to a differently built hand. The same probe
// poses are replayed through one set of controllers on both hands, each with
// its own calibrated motor ranges, and the fingertips are compared.

#include <array>
#include <cstddef>

#include "ruka/calibration.hpp"
#include "ruka/evaluation.hpp"

namespace ruka {

struct CalibratedPlant {
  PlantConfig plant;
  CalibrationResult calibration;
};

struct TransferReport {
  std::array<double, 3> axis_mm{};                // mean |tip_a - tip_b| per axis, all fingers pooled
  std::array<double, kNumFingers> finger_mm{};    // per finger, mean over axes
  std::size_t poses = 0;
  double mean_mm() const { return (axis_mm[0] + axis_mm[1] + axis_mm[2]) / 3.0; }
};

/// Raw comparison under explicit ranges; no calibration checks. Passing the
/// original ranges for the new plant measures a hand that was not recalibrated.
TransferReport transfer_discrepancy(const HandController& controller, const ValidationSet& probes,
                                    const HandGeometry& geometry, const PlantConfig& plant_a,
                                    const MotorRanges& ranges_a, const PlantConfig& plant_b,
                                    const MotorRanges& ranges_b);

/// Throws Uncalibrated unless each calibration belongs to its plant, and
/// DigestMismatch if the controllers were trained under another calibration
/// than the original hand's.
TransferReport transfer_report(const HandController& controller, const CalibratedPlant& original,
                               const CalibratedPlant& rebuilt, const ValidationSet& probes,
                               const HandGeometry& geometry);

}  // namespace ruka
