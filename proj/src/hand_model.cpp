#include "ruka/hand_model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace ruka {
namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 rot(const Vec3& axis, double angle_deg) {
  return Eigen::AngleAxisd(deg2rad(angle_deg), axis.normalized()).toRotationMatrix();
}

const Vec3 kUnitX = Vec3::UnitX();
const Vec3 kUnitY = Vec3::UnitY();
const Vec3 kUnitZ = Vec3::UnitZ();

Mat3 finger_base(const FingerGeometry& fg) {
  // splay toward +x is a negative turn about +z
  return rot(kUnitZ, -fg.splay_deg) * rot(kUnitY, fg.curvature_deg);
}

Mat3 thumb_base(const ThumbGeometry& tg) {
  return rot(kUnitZ, tg.base_rotation_deg[0]) * rot(kUnitX, tg.base_rotation_deg[1]) *
         rot(kUnitY, tg.base_rotation_deg[2]);
}

struct ThumbAxes {
  Vec3 cmc, mcp, ip;  // each in the frame of the link it rotates
};

ThumbAxes thumb_axes(const ThumbGeometry& tg) {
  const double tilt = deg2rad(tg.cmc_axis_tilt_deg);
  ThumbAxes a;
  a.cmc = Vec3(0.0, std::cos(tilt), std::sin(tilt));
  // orthogonal to the CMC axis and to the metacarpal
  a.mcp = kUnitY.cross(a.cmc).normalized();
  a.ip = rot(kUnitY, tg.ip_axis_rotation_deg) * a.mcp;
  return a;
}

void check_finite(const JointState& joints) {
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    if (!std::isfinite(joints.deg[i])) {
      throw Error(ErrorCode::InvalidArgument, "joint " + std::to_string(i) + " is not finite");
    }
  }
}

std::string joint_name(std::size_t i) {
  static constexpr const char* kThumb[] = {"cmc", "mcp", "ip"};
  static constexpr const char* kFinger[] = {"mcp", "pip", "dip"};
  const Finger f = kAllFingers[i / 3];
  return std::string(finger_name(f)) + "." + (f == Finger::Thumb ? kThumb[i % 3] : kFinger[i % 3]);
}

Vec3 vec3_from(const nlohmann::json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }
nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

}  // namespace

bool KeypointFrame::operator==(const KeypointFrame& o) const {
  for (std::size_t f = 0; f < kNumFingers; ++f) {
    for (std::size_t k = 0; k < kKeypointsPerFinger; ++k) {
      if (points[f][k] != o.points[f][k]) return false;
    }
  }
  return true;
}

bool FingertipSet::operator==(const FingertipSet& o) const {
  for (std::size_t f = 0; f < kNumFingers; ++f) {
    if (tips[f] != o.tips[f]) return false;
  }
  return true;
}

double HandGeometry::reach_mm(Finger f) const {
  const auto& l = f == Finger::Thumb ? thumb.links_mm : finger(f).links_mm;
  return l[0] + l[1] + l[2];
}

std::array<double, 4> HandGeometry::segment_lengths(Finger f) const {
  if (f == Finger::Thumb) {
    return {thumb.root_segment_mm, thumb.links_mm[0], thumb.links_mm[1], thumb.links_mm[2]};
  }
  const auto& fg = finger(f);
  return {fg.palm_segment_mm, fg.links_mm[0], fg.links_mm[1], fg.links_mm[2]};
}

std::array<double, kNumJoints> default_joint_limits() {
  std::array<double, kNumJoints> lim{};
  lim[0] = 190.0;  // CMC
  lim[1] = 90.0;   // thumb MCP
  lim[2] = 120.0;  // IP
  for (std::size_t f = 1; f < kNumFingers; ++f) {
    lim[3 * f + 0] = 140.0;  // MCP
    lim[3 * f + 1] = 120.0;  // PIP
    lim[3 * f + 2] = 120.0;  // DIP
  }
  return lim;
}

HandGeometry default_geometry() {
  HandGeometry g;
  g.limits_deg = default_joint_limits();

  g.thumb.links_mm = {46.0, 32.0, 27.0};
  g.thumb.root_segment_mm = 25.0;
  g.thumb.cmc_mm = Vec3(30.0, 28.0, 8.0);
  g.thumb.base_rotation_deg = {-40.0, 0.0, -30.0};
  g.thumb.cmc_axis_tilt_deg = 75.0;
  g.thumb.ip_axis_rotation_deg = 45.0;

  // index, middle, ring, pinky
  g.fingers[0] = {{40.0, 24.0, 20.0}, 60.0, Vec3(22.0, 88.0, 0.0), 6.0, 4.0};
  g.fingers[1] = {{44.0, 27.0, 21.0}, 64.0, Vec3(2.0, 92.0, 0.0), 1.0, 1.5};
  g.fingers[2] = {{41.0, 26.0, 20.0}, 60.0, Vec3(-17.0, 88.0, 2.0), -4.0, -1.5};
  g.fingers[3] = {{33.0, 20.0, 18.0}, 54.0, Vec3(-34.0, 78.0, 5.0), -10.0, -4.0};
  return g;
}

void to_json(nlohmann::json& j, const HandGeometry& g) {
  nlohmann::json fingers = nlohmann::json::array();
  for (std::size_t i = 0; i < g.fingers.size(); ++i) {
    const auto& fg = g.fingers[i];
    fingers.push_back({{"name", finger_name(kAllFingers[i + 1])},
                       {"links_mm", fg.links_mm},
                       {"palm_segment_mm", fg.palm_segment_mm},
                       {"knuckle_mm", vec3_json(fg.knuckle_mm)},
                       {"splay_deg", fg.splay_deg},
                       {"curvature_deg", fg.curvature_deg}});
  }
  j = {{"schema", HandGeometry::kSchema},
       {"kind", "hand-geometry"},
       {"thumb",
        {{"links_mm", g.thumb.links_mm},
         {"root_segment_mm", g.thumb.root_segment_mm},
         {"cmc_mm", vec3_json(g.thumb.cmc_mm)},
         {"base_rotation_deg", g.thumb.base_rotation_deg},
         {"cmc_axis_tilt_deg", g.thumb.cmc_axis_tilt_deg},
         {"ip_axis_rotation_deg", g.thumb.ip_axis_rotation_deg}}},
       {"fingers", fingers},
       {"limits_deg", g.limits_deg}};
}

void from_json(const nlohmann::json& j, HandGeometry& g) {
  if (j.value("schema", -1) != HandGeometry::kSchema) {
    throw Error(ErrorCode::SchemaVersion,
                "hand geometry schema " + j.value("schema", nlohmann::json(-1)).dump() + ", expected 1");
  }
  const auto& t = j.at("thumb");
  g.thumb.links_mm = t.at("links_mm").get<std::array<double, 3>>();
  g.thumb.root_segment_mm = t.at("root_segment_mm");
  g.thumb.cmc_mm = vec3_from(t.at("cmc_mm"));
  g.thumb.base_rotation_deg = t.at("base_rotation_deg").get<std::array<double, 3>>();
  g.thumb.cmc_axis_tilt_deg = t.at("cmc_axis_tilt_deg");
  g.thumb.ip_axis_rotation_deg = t.at("ip_axis_rotation_deg");
  const auto& fs = j.at("fingers");
  if (fs.size() != 4) throw Error(ErrorCode::InvalidArgument, "geometry needs 4 fingers");
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& f = fs.at(i);
    auto& fg = g.fingers[i];
    fg.links_mm = f.at("links_mm").get<std::array<double, 3>>();
    fg.palm_segment_mm = f.at("palm_segment_mm");
    fg.knuckle_mm = vec3_from(f.at("knuckle_mm"));
    fg.splay_deg = f.at("splay_deg");
    fg.curvature_deg = f.at("curvature_deg");
  }
  g.limits_deg = j.at("limits_deg").get<std::array<double, kNumJoints>>();
  for (Finger f : kAllFingers) {
    for (double len : g.segment_lengths(f)) {
      if (!(len > 0.0)) throw Error(ErrorCode::InvalidArgument, "link lengths must be positive");
    }
  }
}

std::string geometry_digest(const HandGeometry& g) { return digest_of(nlohmann::json(g).dump()); }

void check_limits(const HandGeometry& g, const JointState& joints) {
  check_finite(joints);
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const double a = joints.deg[i];
    if (a < 0.0 || a > g.limits_deg[i]) {
      throw Error(ErrorCode::LimitViolation, joint_name(i) + " = " + std::to_string(a) +
                                                 " deg outside [0, " + std::to_string(g.limits_deg[i]) +
                                                 "]");
    }
  }
}

JointState clamp_to_limits(const HandGeometry& g, const JointState& joints) {
  check_finite(joints);
  JointState out;
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    out.deg[i] = std::clamp(joints.deg[i], 0.0, g.limits_deg[i]);
  }
  return out;
}

std::array<Vec3, kKeypointsPerFinger> finger_forward_kinematics(const HandGeometry& g, Finger f,
                                                                std::span<const double, 3> q) {
  std::array<Vec3, kKeypointsPerFinger> kp;
  if (f == Finger::Thumb) {
    const auto& tg = g.thumb;
    const ThumbAxes axes = thumb_axes(tg);
    Mat3 r = thumb_base(tg);
    kp[0] = tg.cmc_mm - tg.root_segment_mm * (r * kUnitY);
    kp[1] = tg.cmc_mm;
    r = r * rot(axes.cmc, q[0]);
    kp[2] = kp[1] + tg.links_mm[0] * (r * kUnitY);
    r = r * rot(axes.mcp, q[1]);
    kp[3] = kp[2] + tg.links_mm[1] * (r * kUnitY);
    r = r * rot(axes.ip, q[2]);
    kp[4] = kp[3] + tg.links_mm[2] * (r * kUnitY);
    return kp;
  }
  const auto& fg = g.finger(f);
  Mat3 r = finger_base(fg);
  kp[0] = fg.knuckle_mm - fg.palm_segment_mm * (r * kUnitY);
  kp[1] = fg.knuckle_mm;
  for (std::size_t j = 0; j < 3; ++j) {
    r = r * rot(kUnitX, q[j]);
    kp[j + 2] = kp[j + 1] + fg.links_mm[j] * (r * kUnitY);
  }
  return kp;
}

KeypointFrame forward_kinematics(const HandGeometry& g, const JointState& joints) {
  check_limits(g, joints);
  KeypointFrame frame;
  for (Finger f : kAllFingers) {
    const auto q = joints.finger(f);
    frame.points[index_of(f)] = finger_forward_kinematics(g, f, std::span<const double, 3>(q));
  }
  return frame;
}

std::array<double, 3> finger_joint_angles(std::span<const Vec3, kKeypointsPerFinger> p) {
  std::array<double, 3> out{};
  for (std::size_t j = 0; j < 3; ++j) {
    const Vec3 a = p[j] - p[j + 1];
    const Vec3 b = p[j + 2] - p[j + 1];
    if (!(a.norm() > 1e-9) || !(b.norm() > 1e-9)) {
      throw Error(ErrorCode::DegenerateKeypoint,
                  "zero-length segment at keypoint " + std::to_string(j + 1));
    }
    // atan2(|a x b|, a.b) is the arccos of the normalised dot product, without
    // the loss of precision arccos has near a straight joint.
    const double between = std::atan2(a.cross(b).norm(), a.dot(b));
    out[j] = 180.0 - rad2deg(between);
  }
  return out;
}

JointState joint_angles_from_keypoints(const KeypointFrame& frame) {
  JointState js;
  for (Finger f : kAllFingers) {
    const auto a = finger_joint_angles(frame.points[index_of(f)]);
    for (std::size_t j = 0; j < 3; ++j) js.at(f, j) = a[j];
  }
  return js;
}

double thumb_cmc_angle(const HandGeometry& g, std::span<const Vec3, kKeypointsPerFinger> p) {
  const Vec3 link = p[2] - p[1];
  if (!(link.norm() > 1e-9)) throw Error(ErrorCode::DegenerateKeypoint, "zero-length thumb metacarpal");
  const Mat3 base = thumb_base(g.thumb);
  const Vec3 axis = base * thumb_axes(g.thumb).cmc;
  const Vec3 rest = base * kUnitY;
  // angle swept about the axis, measured in the plane orthogonal to it
  const Vec3 from = rest - rest.dot(axis) * axis;
  const Vec3 to = link - link.dot(axis) * axis;
  if (!(to.norm() > 1e-9)) throw Error(ErrorCode::DegenerateKeypoint, "thumb metacarpal lies on the CMC axis");
  double deg = rad2deg(std::atan2(axis.dot(from.cross(to)), from.dot(to)));
  // readings run from slightly below 0 to 190; unwrap the far side
  if (deg < -90.0) deg += 360.0;
  return deg;
}

JointState joint_angles_from_keypoints(const KeypointFrame& frame, const HandGeometry& g) {
  JointState js = joint_angles_from_keypoints(frame);
  js.at(Finger::Thumb, 0) = thumb_cmc_angle(g, frame.finger(Finger::Thumb));
  return js;
}

FingertipSet fingertips(const KeypointFrame& frame) {
  FingertipSet t;
  for (std::size_t f = 0; f < kNumFingers; ++f) t.tips[f] = frame.points[f].back();
  return t;
}

}  // namespace ruka
