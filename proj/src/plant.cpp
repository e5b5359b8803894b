#include "ruka/plant.hpp"

#include <algorithm>
#include <cmath>

namespace ruka {
namespace {

bool is_coupled_motor(std::size_t motor) { return motor >= 3 && (motor - 3) % 2 == 1; }

Finger finger_of_motor(std::size_t motor) {
  return motor < 3 ? Finger::Thumb : kAllFingers[1 + (motor - 3) / 2];
}

// First joint index driven by a motor.
std::size_t joint_of_motor(std::size_t motor) {
  if (motor < 3) return motor;
  const std::size_t f = 1 + (motor - 3) / 2;
  return 3 * f + (is_coupled_motor(motor) ? 1 : 0);
}

double excursion_mm(const PlantConfig& c, std::size_t motor, double position_deg) {
  const double slack = c.tension_offset_deg[motor] + c.deadband_deg[motor];
  return std::max(0.0, position_deg - slack) * deg2rad(1.0) * c.spool_radius_mm[motor];
}

double single_joint(const PlantConfig& c, std::size_t joint, double e_mm) {
  return std::min(c.joint_limits_deg[joint], rad2deg(e_mm / c.pulley_radius_mm[joint]));
}

// (PIP, DIP) for a coupled tendon excursion.
std::pair<double, double> coupled_joints(const PlantConfig& c, std::size_t pip_joint, double ratio,
                                         double e_mm) {
  const std::size_t dip_joint = pip_joint + 1;
  const double rp = c.pulley_radius_mm[pip_joint];
  const double rd = c.pulley_radius_mm[dip_joint];
  const double lp = deg2rad(c.joint_limits_deg[pip_joint]);
  const double ld = deg2rad(c.joint_limits_deg[dip_joint]);

  double pip = e_mm / (rp + ratio * rd);
  double dip = ratio * pip;
  if (pip <= lp && dip <= ld) return {rad2deg(pip), rad2deg(dip)};

  const bool pip_first = lp * ratio <= ld;
  if (!c.spill_on_saturation) {
    pip = pip_first ? lp : ld / ratio;
    dip = ratio * pip;
  } else if (pip_first) {
    pip = lp;
    dip = std::min(ld, (e_mm - rp * lp) / rd);
  } else {
    dip = ld;
    pip = std::min(lp, (e_mm - rd * ld) / rp);
  }
  return {rad2deg(pip), rad2deg(dip)};
}

void check_command(const PlantConfig& c, std::size_t motor, double m) {
  if (!std::isfinite(m) || m < c.hardware_min_deg[motor] || m > c.hardware_max_deg[motor]) {
    throw Error(ErrorCode::ActuationLimit, "motor " + std::to_string(motor) + " command " +
                                               std::to_string(m) + " outside [" +
                                               std::to_string(c.hardware_min_deg[motor]) + ", " +
                                               std::to_string(c.hardware_max_deg[motor]) + "]");
  }
}

double quantise(const PlantConfig& c, std::size_t motor, double m) {
  if (c.servo_resolution_deg <= 0.0) return m;
  const double q = std::round(m / c.servo_resolution_deg) * c.servo_resolution_deg;
  return std::clamp(q, c.hardware_min_deg[motor], c.hardware_max_deg[motor]);
}

}  // namespace

double MotorRanges::to_motor(std::size_t motor, double u) const {
  return min[motor] + std::clamp(u, 0.0, 1.0) * (max[motor] - min[motor]);
}

double MotorRanges::to_unit(std::size_t motor, double deg) const {
  return (deg - min[motor]) / (max[motor] - min[motor]);
}

MotorVector MotorRanges::minimum() const {
  MotorVector m;
  m.deg = min;
  return m;
}

void to_json(nlohmann::json& j, const MotorRanges& r) { j = {{"min_deg", r.min}, {"max_deg", r.max}}; }

void from_json(const nlohmann::json& j, MotorRanges& r) {
  j.at("min_deg").get_to(r.min);
  j.at("max_deg").get_to(r.max);
}

PlantConfig default_plant_config() {
  PlantConfig c;
  c.joint_limits_deg = default_joint_limits();
  c.spool_radius_mm.fill(10.0);
  c.deadband_deg = {4.0, 4.0, 4.0, 3.0, 3.5, 3.0, 3.5, 3.0, 3.5, 3.0, 3.5};
  c.tension_offset_deg = {20.0, 16.0, 18.0, 14.0, 17.0, 15.0, 18.0, 13.0, 16.0, 15.0, 19.0};
  // thumb CMC, MCP, IP
  c.pulley_radius_mm[0] = 9.0;
  c.pulley_radius_mm[1] = 9.0;
  c.pulley_radius_mm[2] = 7.0;
  for (std::size_t f = 1; f < kNumFingers; ++f) {
    c.pulley_radius_mm[3 * f + 0] = 8.0;  // MCP
    c.pulley_radius_mm[3 * f + 1] = 7.0;  // PIP
    c.pulley_radius_mm[3 * f + 2] = 5.5;  // DIP
  }
  c.coupling_ratio.fill(0.8);
  c.hardware_min_deg.fill(0.0);
  c.hardware_max_deg.fill(300.0);
  c.sensor_noise_mm = 0.3;
  c.servo_resolution_deg = 360.0 / 4096.0;
  c.spill_on_saturation = true;
  c.seed = 7;
  return c;
}

void validate(const PlantConfig& c) {
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    if (!(c.spool_radius_mm[m] > 0.0)) throw Error(ErrorCode::InvalidArgument, "spool radius must be > 0");
    if (!(c.deadband_deg[m] >= 0.0)) throw Error(ErrorCode::InvalidArgument, "deadband must be >= 0");
    if (!(c.hardware_min_deg[m] < c.hardware_max_deg[m])) {
      throw Error(ErrorCode::InvalidArgument, "hardware bounds must satisfy min < max");
    }
  }
  for (double r : c.pulley_radius_mm) {
    if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "pulley radius must be > 0");
  }
  for (double k : c.coupling_ratio) {
    if (!(k > 0.0 && k <= 2.0)) throw Error(ErrorCode::InvalidArgument, "coupling ratio must be in (0, 2]");
  }
  if (!(c.sensor_noise_mm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise std must be >= 0");
}

void to_json(nlohmann::json& j, const PlantConfig& c) {
  j = {{"schema", PlantConfig::kSchema},
       {"kind", "plant-config"},
       {"spool_radius_mm", c.spool_radius_mm},
       {"pulley_radius_mm", c.pulley_radius_mm},
       {"deadband_deg", c.deadband_deg},
       {"tension_offset_deg", c.tension_offset_deg},
       {"coupling_ratio", c.coupling_ratio},
       {"joint_limits_deg", c.joint_limits_deg},
       {"hardware_min_deg", c.hardware_min_deg},
       {"hardware_max_deg", c.hardware_max_deg},
       {"sensor_noise_mm", c.sensor_noise_mm},
       {"servo_resolution_deg", c.servo_resolution_deg},
       {"spill_on_saturation", c.spill_on_saturation},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, PlantConfig& c) {
  if (j.value("schema", -1) != PlantConfig::kSchema) {
    throw Error(ErrorCode::SchemaVersion, "plant config schema mismatch, expected 1");
  }
  j.at("spool_radius_mm").get_to(c.spool_radius_mm);
  j.at("pulley_radius_mm").get_to(c.pulley_radius_mm);
  j.at("deadband_deg").get_to(c.deadband_deg);
  j.at("tension_offset_deg").get_to(c.tension_offset_deg);
  j.at("coupling_ratio").get_to(c.coupling_ratio);
  j.at("joint_limits_deg").get_to(c.joint_limits_deg);
  j.at("hardware_min_deg").get_to(c.hardware_min_deg);
  j.at("hardware_max_deg").get_to(c.hardware_max_deg);
  c.sensor_noise_mm = j.at("sensor_noise_mm");
  c.servo_resolution_deg = j.at("servo_resolution_deg");
  c.spill_on_saturation = j.at("spill_on_saturation");
  c.seed = j.at("seed");
  validate(c);
}

std::string plant_digest(const PlantConfig& c) { return digest_of(nlohmann::json(c).dump()); }

MotorVector actual_position(const PlantConfig& c, const MotorVector& command) {
  MotorVector out;
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    check_command(c, m, command.deg[m]);
    out.deg[m] = quantise(c, m, command.deg[m]);
  }
  return out;
}

std::array<double, 3> actuate_finger(const PlantConfig& c, Finger f, std::span<const double> motors) {
  if (motors.size() != motor_count(f)) {
    throw Error(ErrorCode::DimensionMismatch, "finger motor count mismatch");
  }
  const std::size_t m0 = motor_offset(f);
  std::array<double, 3> q{};
  if (f == Finger::Thumb) {
    for (std::size_t i = 0; i < 3; ++i) {
      check_command(c, m0 + i, motors[i]);
      q[i] = single_joint(c, i, excursion_mm(c, m0 + i, quantise(c, m0 + i, motors[i])));
    }
    return q;
  }
  const std::size_t j0 = joint_offset(f);
  check_command(c, m0, motors[0]);
  check_command(c, m0 + 1, motors[1]);
  q[0] = single_joint(c, j0, excursion_mm(c, m0, quantise(c, m0, motors[0])));
  const auto [pip, dip] = coupled_joints(c, j0 + 1, c.coupling_ratio[index_of(f) - 1],
                                         excursion_mm(c, m0 + 1, quantise(c, m0 + 1, motors[1])));
  q[1] = pip;
  q[2] = dip;
  return q;
}

JointState actuate(const PlantConfig& c, const MotorVector& command) {
  JointState js;
  for (Finger f : kAllFingers) {
    const auto q = actuate_finger(
        c, f, std::span<const double>(command.deg.data() + motor_offset(f), motor_count(f)));
    for (std::size_t j = 0; j < 3; ++j) js.at(f, j) = q[j];
  }
  return js;
}

double saturation_point(const PlantConfig& c, std::size_t motor) {
  const std::size_t joint = joint_of_motor(motor);
  double e_sat = 0.0;
  if (!is_coupled_motor(motor)) {
    e_sat = c.pulley_radius_mm[joint] * deg2rad(c.joint_limits_deg[joint]);
  } else {
    const double ratio = c.coupling_ratio[index_of(finger_of_motor(motor)) - 1];
    const double rp = c.pulley_radius_mm[joint];
    const double rd = c.pulley_radius_mm[joint + 1];
    const double lp = deg2rad(c.joint_limits_deg[joint]);
    const double ld = deg2rad(c.joint_limits_deg[joint + 1]);
    e_sat = c.spill_on_saturation ? rp * lp + rd * ld : std::min(lp, ld / ratio) * (rp + ratio * rd);
  }
  return motion_onset(c, motor) + rad2deg(e_sat / c.spool_radius_mm[motor]);
}

double motion_onset(const PlantConfig& c, std::size_t motor) {
  return c.tension_offset_deg[motor] + c.deadband_deg[motor];
}

MotorVector hardware_minimum(const PlantConfig& c) {
  MotorVector m;
  m.deg = c.hardware_min_deg;
  return m;
}

MotorRanges hardware_ranges(const PlantConfig& c) {
  MotorRanges r;
  r.min = c.hardware_min_deg;
  r.max = c.hardware_max_deg;
  return r;
}

SensorReading read_sensors(const PlantConfig& c, const HandGeometry& g, const MotorVector& command,
                           double t_ms, std::mt19937_64& rng) {
  SensorReading r;
  r.timestamp_ms = t_ms;
  r.commanded = command;
  r.actual = actual_position(c, command);
  const JointState truth = clamp_to_limits(g, actuate(c, command));
  r.keypoints = forward_kinematics(g, truth);
  if (c.sensor_noise_mm > 0.0) {
    std::normal_distribution<double> noise(0.0, c.sensor_noise_mm);
    for (auto& finger : r.keypoints.points) {
      for (auto& p : finger) {
        p.x() += noise(rng);
        p.y() += noise(rng);
        p.z() += noise(rng);
      }
    }
  }
  r.joints = joint_angles_from_keypoints(r.keypoints, g);
  r.fingertips = fingertips(r.keypoints);
  return r;
}

PlantConfig perturb_build(const PlantConfig& c, double magnitude, std::uint64_t seed) {
  if (!(magnitude >= 0.0 && magnitude <= 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "perturbation magnitude must be in [0, 0.5]");
  }
  PlantConfig out = c;
  if (magnitude == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-magnitude, magnitude);
  auto jitter = [&](auto& values) {
    for (auto& v : values) v *= 1.0 + u(rng);
  };
  jitter(out.tension_offset_deg);
  jitter(out.deadband_deg);
  jitter(out.spool_radius_mm);
  jitter(out.pulley_radius_mm);
  return out;
}

}  // namespace ruka
