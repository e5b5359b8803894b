#include "ruka/transfer.hpp"

#include <cmath>

namespace ruka {

TransferReport transfer_discrepancy(const HandController& controller, const ValidationSet& probes,
                                    const HandGeometry& geometry, const PlantConfig& plant_a,
                                    const MotorRanges& ranges_a, const PlantConfig& plant_b,
                                    const MotorRanges& ranges_b) {
  TransferReport r;
  auto tips = [&](const PlantConfig& plant, const MotorRanges& ranges, const std::vector<ValidationPose>& traj,
                  std::size_t step) {
    const MotorVector cmd = hand_command(controller, traj, step, ranges);
    return forward_kinematics(geometry, clamp_to_limits(geometry, actuate(plant, cmd)));
  };
  for (const auto& traj : probes.trajectories) {
    for (std::size_t step = 0; step < traj.size(); ++step) {
      const KeypointFrame a = tips(plant_a, ranges_a, traj, step);
      const KeypointFrame b = tips(plant_b, ranges_b, traj, step);
      for (Finger f : kAllFingers) {
        const Vec3 d = (a.tip(f) - b.tip(f)).cwiseAbs();
        for (std::size_t ax = 0; ax < 3; ++ax) r.axis_mm[ax] += d[ax];
        r.finger_mm[index_of(f)] += d.sum() / 3.0;
      }
      ++r.poses;
    }
  }
  if (r.poses > 0) {
    const double n = static_cast<double>(r.poses);
    for (double& v : r.axis_mm) v /= n * static_cast<double>(kNumFingers);
    for (double& v : r.finger_mm) v /= n;
  }
  return r;
}

TransferReport transfer_report(const HandController& controller, const CalibratedPlant& original,
                               const CalibratedPlant& rebuilt, const ValidationSet& probes,
                               const HandGeometry& geometry) {
  require_calibrated(original.calibration, original.plant, geometry);
  require_calibrated(rebuilt.calibration, rebuilt.plant, geometry);
  const std::string expected = calibration_digest(original.calibration);
  for (Finger f : kAllFingers) {
    const auto& trained = controller.finger(f).checkpoint().calibration_digest;
    if (!trained.empty() && trained != expected) {
      throw Error(ErrorCode::DigestMismatch,
                  std::string(finger_name(f)) + " controller was trained under a different calibration");
    }
  }
  return transfer_discrepancy(controller, probes, geometry, original.plant, original.calibration.ranges,
                              rebuilt.plant, rebuilt.calibration.ranges);
}

}  // namespace ruka
