#pragma once

// Kinematic model of the 15-joint tendon hand.
//
// Frames and units
//   Palm frame: x toward the thumb side, y distal (finger extension), z palmar.
//   Positions in millimetres, angles in degrees. A straight joint reads 0 deg and
//   flexion is positive, bounded below by 0 and above by the per-joint limit.
//
// Keypoints per finger (5)
//   fingers: metacarpal base, MCP, PIP, DIP, tip
//   thumb:   thumb root, CMC, MCP, IP, tip

#include <array>
#include <span>
#include <string>

#include <Eigen/Core>
#include "json.hpp"

#include "ruka/common.hpp"

namespace ruka {

using Vec3 = Eigen::Vector3d;

/// Joint order: thumb CMC, MCP, IP, then MCP, PIP, DIP for index..pinky.
struct JointState {
  std::array<double, kNumJoints> deg{};

  double& at(Finger f, std::size_t joint) { return deg[joint_offset(f) + joint]; }
  double at(Finger f, std::size_t joint) const { return deg[joint_offset(f) + joint]; }
  std::array<double, 3> finger(Finger f) const {
    return {at(f, 0), at(f, 1), at(f, 2)};
  }
  bool operator==(const JointState&) const = default;
};

struct KeypointFrame {
  std::array<std::array<Vec3, kKeypointsPerFinger>, kNumFingers> points;

  const std::array<Vec3, kKeypointsPerFinger>& finger(Finger f) const { return points[index_of(f)]; }
  const Vec3& tip(Finger f) const { return points[index_of(f)].back(); }
  bool operator==(const KeypointFrame& o) const;
};

struct FingertipSet {
  std::array<Vec3, kNumFingers> tips;
  bool operator==(const FingertipSet& o) const;
};

struct FingerGeometry {
  std::array<double, 3> links_mm{};  // proximal, middle, distal phalanx
  double palm_segment_mm = 0.0;      // metacarpal base -> MCP keypoint
  Vec3 knuckle_mm = Vec3::Zero();    // MCP position in the palm frame
  double splay_deg = 0.0;            // rotation about palm z, positive toward the thumb
  double curvature_deg = 0.0;        // rotation about the finger's extension axis
};

struct ThumbGeometry {
  std::array<double, 3> links_mm{};  // metacarpal, proximal, distal
  double root_segment_mm = 0.0;      // thumb root keypoint -> CMC
  Vec3 cmc_mm = Vec3::Zero();
  // Base orientation of the thumb chain: yaw about z, then pitch about x, then roll about y.
  std::array<double, 3> base_rotation_deg{};
  // CMC axis tilt from the metacarpal direction, inside the local y-z plane.
  double cmc_axis_tilt_deg = 0.0;
  // IP axis = MCP axis rotated about the proximal link, toward the palm.
  double ip_axis_rotation_deg = 45.0;
};

struct HandGeometry {
  static constexpr int kSchema = 1;
  ThumbGeometry thumb;
  std::array<FingerGeometry, 4> fingers;  // index, middle, ring, pinky
  std::array<double, kNumJoints> limits_deg{};

  const FingerGeometry& finger(Finger f) const { return fingers[index_of(f) - 1]; }
  /// Sum of the three moving links (excludes the fixed palm/root segment).
  double reach_mm(Finger f) const;
  std::array<double, 4> segment_lengths(Finger f) const;
};

/// Range-of-motion defaults: DIP 120, PIP 120, finger MCP 140, thumb IP 120,
/// thumb MCP 90, CMC 190 (degrees, lower bound 0).
std::array<double, kNumJoints> default_joint_limits();

/// Adult-proportioned defaults. Link lengths and knuckle placement are configuration.
HandGeometry default_geometry();

void to_json(nlohmann::json& j, const HandGeometry& g);
void from_json(const nlohmann::json& j, HandGeometry& g);
std::string geometry_digest(const HandGeometry& g);

void check_limits(const HandGeometry& g, const JointState& joints);
JointState clamp_to_limits(const HandGeometry& g, const JointState& joints);

KeypointFrame forward_kinematics(const HandGeometry& g, const JointState& joints);
/// Keypoints of one finger only; other fingers' joints are ignored.
std::array<Vec3, kKeypointsPerFinger> finger_forward_kinematics(const HandGeometry& g, Finger f,
                                                                std::span<const double, 3> joints);

/// Bend angle at each interior keypoint, 180 deg minus the angle between the
/// segments meeting there. Exact for joints whose axis is orthogonal to both
/// adjacent links (every finger joint, thumb MCP and IP). The thumb CMC axis is
/// not, so its reading is the bend of the metacarpal off the root segment.
JointState joint_angles_from_keypoints(const KeypointFrame& frame);
std::array<double, 3> finger_joint_angles(std::span<const Vec3, kKeypointsPerFinger> points);

/// As above, but the thumb CMC is read as the rotation of the metacarpal about
/// the configured CMC axis. Exact for every joint and monotone over the CMC range.
JointState joint_angles_from_keypoints(const KeypointFrame& frame, const HandGeometry& g);
double thumb_cmc_angle(const HandGeometry& g, std::span<const Vec3, kKeypointsPerFinger> thumb_points);

FingertipSet fingertips(const KeypointFrame& frame);

}  // namespace ruka
