#include "ruka/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

#include "ruka/simd/kernels.hpp"

namespace ruka {
namespace {

constexpr std::uint64_t kRobotValidationStream = 0x726f626f74ull;  // "robot"
constexpr std::uint64_t kHumanValidationStream = 0x68756d616eull;  // "human"

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }
Vec3 vec3_from(const nlohmann::json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

ValidationPose pose_from_frame(const KeypointFrame& observed, const FingertipSet& desired, const JointState& joints) {
  return ValidationPose{observed, desired, joints};
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

}  // namespace

std::string_view validation_kind_name(ValidationKind k) { return k == ValidationKind::Robot ? "robot" : "human-like"; }

ValidationKind validation_kind_from_name(std::string_view name) {
  if (name == "robot") return ValidationKind::Robot;
  if (name == "human-like") return ValidationKind::HumanLike;
  throw Error(ErrorCode::InvalidArgument, "unknown validation set kind '" + std::string(name) + "'");
}

std::size_t ValidationSet::pose_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

// ---------------------------------------------------------------- validation sets

std::uint64_t robot_validation_episode_seed(std::uint64_t seed, std::size_t trajectory) {
  return derive_seed(derive_seed(seed, kRobotValidationStream), trajectory);
}

ValidationSet make_robot_validation(const PlantConfig& plant, const HandGeometry& geometry, const MotorRanges& ranges,
                                    std::size_t n_poses, std::uint64_t seed, const RobotValidationSpec& spec) {
  if (n_poses == 0 || spec.trajectory_length == 0) throw Error(ErrorCode::InvalidArgument, "validation set needs poses");
  ValidationSet set;
  set.kind = ValidationKind::Robot;
  set.seed = seed;
  std::vector<std::uint64_t> seeds;
  for (std::size_t t = 0; set.pose_count() < n_poses; ++t) {
    const std::uint64_t s = robot_validation_episode_seed(seed, t);
    seeds.push_back(s);
    std::mt19937_64 rng(s);
    std::bernoulli_distribution coin(0.5);
    MotorVector cmd;
    for (std::size_t m = 0; m < kNumMotors; ++m) cmd.deg[m] = uniform(rng, ranges.min[m], ranges.max[m]);
    std::vector<ValidationPose> traj;
    const std::size_t len = std::min(spec.trajectory_length, n_poses - set.pose_count());
    for (std::size_t step = 0; step < len; ++step) {
      if (step > 0) {
        for (std::size_t m = 0; m < kNumMotors; ++m) {
          const double d = coin(rng) ? spec.step_size_deg : -spec.step_size_deg;
          cmd.deg[m] = std::clamp(cmd.deg[m] + d, ranges.min[m], ranges.max[m]);
        }
      }
      const JointState js = clamp_to_limits(geometry, actuate(plant, cmd));
      const KeypointFrame frame = forward_kinematics(geometry, js);
      traj.push_back(pose_from_frame(frame, fingertips(frame), js));
    }
    set.trajectories.push_back(std::move(traj));
  }
  set.parameters = {{"trajectory_length", spec.trajectory_length},
                    {"step_size_deg", spec.step_size_deg},
                    {"plant_digest", plant_digest(plant)},
                    {"ranges", ranges},
                    {"episode_seeds", seeds}};
  return set;
}

HandGeometry human_geometry(const HandGeometry& robot, double link_scale) {
  if (!(link_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "link scale must be positive");
  HandGeometry h = robot;
  for (double& l : h.thumb.links_mm) l *= link_scale;
  h.thumb.root_segment_mm *= link_scale;
  h.thumb.cmc_mm *= link_scale;
  for (auto& f : h.fingers) {
    for (double& l : f.links_mm) l *= link_scale;
    f.palm_segment_mm *= link_scale;
    f.knuckle_mm *= link_scale;
  }
  return h;
}

void to_json(nlohmann::json& j, const HumanLikeSpec& s) {
  j = {{"trajectory_length", s.trajectory_length}, {"link_scale", s.link_scale},
       {"glove_noise_mm", s.glove_noise_mm},       {"amplitude_min", s.amplitude_min},
       {"amplitude_max", s.amplitude_max},         {"frequency_min_hz", s.frequency_min_hz},
       {"frequency_max_hz", s.frequency_max_hz},   {"dip_ratio_min", s.dip_ratio_min},
       {"dip_ratio_max", s.dip_ratio_max},         {"dip_phase_sd_rad", s.dip_phase_sd_rad}};
}

void from_json(const nlohmann::json& j, HumanLikeSpec& s) {
  const HumanLikeSpec d;
  s.trajectory_length = j.value("trajectory_length", d.trajectory_length);
  s.link_scale = j.value("link_scale", d.link_scale);
  s.glove_noise_mm = j.value("glove_noise_mm", d.glove_noise_mm);
  s.amplitude_min = j.value("amplitude_min", d.amplitude_min);
  s.amplitude_max = j.value("amplitude_max", d.amplitude_max);
  s.frequency_min_hz = j.value("frequency_min_hz", d.frequency_min_hz);
  s.frequency_max_hz = j.value("frequency_max_hz", d.frequency_max_hz);
  s.dip_ratio_min = j.value("dip_ratio_min", d.dip_ratio_min);
  s.dip_ratio_max = j.value("dip_ratio_max", d.dip_ratio_max);
  s.dip_phase_sd_rad = j.value("dip_phase_sd_rad", d.dip_phase_sd_rad);
}

ValidationSet make_humanlike_validation(const HandGeometry& geometry, std::size_t n_poses, std::uint64_t seed,
                                        const HumanLikeSpec& spec) {
  if (n_poses == 0 || spec.trajectory_length == 0) throw Error(ErrorCode::InvalidArgument, "validation set needs poses");
  const HandGeometry human = human_geometry(geometry, spec.link_scale);
  ValidationSet set;
  set.kind = ValidationKind::HumanLike;
  set.seed = seed;
  std::normal_distribution<double> glove(0.0, spec.glove_noise_mm);

  struct Wave {
    double center, amplitude, freq_hz, phase;
  };
  for (std::size_t t = 0; set.pose_count() < n_poses; ++t) {
    std::mt19937_64 rng(derive_seed(derive_seed(seed, kHumanValidationStream), t));
    std::array<Wave, kNumJoints> waves{};
    for (Finger f : kAllFingers) {
      const std::size_t j0 = joint_offset(f);
      const double freq = uniform(rng, spec.frequency_min_hz, spec.frequency_max_hz);  // one synergy per finger
      for (std::size_t k = 0; k < 3; ++k) {
        const double lim = human.limits_deg[j0 + k];
        Wave& w = waves[j0 + k];
        w.amplitude = uniform(rng, spec.amplitude_min, spec.amplitude_max) * lim;
        w.center = uniform(rng, 0.0, lim);
        w.freq_hz = freq * uniform(rng, 0.8, 1.25);
        w.phase = uniform(rng, 0.0, 2.0 * kPi);
      }
      if (f != Finger::Thumb) {
        // DIP follows PIP at a human ratio, roughly in phase
        const double ratio = uniform(rng, spec.dip_ratio_min, spec.dip_ratio_max);
        Wave& pip = waves[j0 + 1];
        Wave& dip = waves[j0 + 2];
        dip.amplitude = ratio * pip.amplitude;
        dip.center = ratio * pip.center;
        dip.freq_hz = pip.freq_hz;
        dip.phase = pip.phase + std::normal_distribution<double>(0.0, spec.dip_phase_sd_rad)(rng);
      }
    }
    std::vector<ValidationPose> traj;
    const std::size_t len = std::min(spec.trajectory_length, n_poses - set.pose_count());
    for (std::size_t step = 0; step < len; ++step) {
      const double time_s = static_cast<double>(step) * kLoggingPeriodMs / 1000.0;
      JointState js;
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        const Wave& w = waves[j];
        js.deg[j] = w.center + w.amplitude * std::sin(2.0 * kPi * w.freq_hz * time_s + w.phase);
      }
      js = clamp_to_limits(human, js);
      KeypointFrame observed = forward_kinematics(human, js);
      const Vec3 true_thumb = observed.tip(Finger::Thumb);
      if (spec.glove_noise_mm > 0.0) {
        for (auto& finger : observed.points) {
          for (Vec3& p : finger) p += Vec3(glove(rng), glove(rng), glove(rng));
        }
      }
      // goals are the hand's true pose: the thumb tip itself, and for the joint-angle
      // fingers the robot's own tips at the true angles
      const KeypointFrame robot = forward_kinematics(geometry, clamp_to_limits(geometry, js));
      FingertipSet desired = fingertips(robot);
      desired.tips[0] = true_thumb;
      traj.push_back(pose_from_frame(observed, desired, js));
    }
    set.trajectories.push_back(std::move(traj));
  }
  set.parameters = spec;
  return set;
}

// ---------------------------------------------------------------- persistence

void to_json(nlohmann::json& j, const ValidationSet& s) {
  nlohmann::json trajectories = nlohmann::json::array();
  for (const auto& traj : s.trajectories) {
    nlohmann::json poses = nlohmann::json::array();
    for (const auto& p : traj) {
      nlohmann::json kp = nlohmann::json::array();
      for (const auto& finger : p.observed.points) {
        for (const Vec3& v : finger) kp.push_back(vec3_json(v));
      }
      nlohmann::json tips = nlohmann::json::array();
      for (const Vec3& v : p.desired.tips) tips.push_back(vec3_json(v));
      poses.push_back({{"keypoints", kp}, {"desired", tips}, {"joints", p.source_joints.deg}});
    }
    trajectories.push_back(poses);
  }
  j = {{"schema", ValidationSet::kSchema},
       {"kind", validation_kind_name(s.kind)},
       {"seed", s.seed},
       {"parameters", s.parameters},
       {"trajectories", trajectories}};
}

void from_json(const nlohmann::json& j, ValidationSet& s) {
  if (j.value("schema", -1) != ValidationSet::kSchema) {
    throw Error(ErrorCode::SchemaVersion, "validation set schema mismatch, expected 1");
  }
  s.kind = validation_kind_from_name(j.at("kind").get<std::string>());
  s.seed = j.at("seed");
  s.parameters = j.at("parameters");
  s.trajectories.clear();
  for (const auto& traj : j.at("trajectories")) {
    std::vector<ValidationPose> poses;
    for (const auto& p : traj) {
      ValidationPose pose;
      const auto& kp = p.at("keypoints");
      if (kp.size() != kNumFingers * kKeypointsPerFinger) throw Error(ErrorCode::TruncatedRecord, "pose needs 25 keypoints");
      for (std::size_t i = 0; i < kp.size(); ++i) pose.observed.points[i / 5][i % 5] = vec3_from(kp[i]);
      const auto& tips = p.at("desired");
      for (std::size_t f = 0; f < kNumFingers; ++f) pose.desired.tips[f] = vec3_from(tips.at(f));
      p.at("joints").get_to(pose.source_joints.deg);
      poses.push_back(pose);
    }
    s.trajectories.push_back(std::move(poses));
  }
}

std::string validation_digest(const ValidationSet& s) { return digest_of(nlohmann::json(s).dump()); }

// ---------------------------------------------------------------- replay

FingerError EvalReport::pooled() const {
  FingerError out;
  for (const auto& f : fingers) {
    for (std::size_t a = 0; a < 3; ++a) out.axis_cm[a] += f.axis_cm[a] * static_cast<double>(f.count);
    out.count += f.count;
  }
  if (out.count > 0) {
    for (double& v : out.axis_cm) v /= static_cast<double>(out.count);
  }
  return out;
}

KeypointFrame achieved_pose(const PlantConfig& plant, const HandGeometry& geometry, const MotorVector& command) {
  return forward_kinematics(geometry, clamp_to_limits(geometry, actuate(plant, command)));
}

void ErrorAccumulator::add(const KeypointFrame& achieved, const FingertipSet& desired) {
  std::array<double, kNumFingers> tip_mm{};
  for (Finger f : kAllFingers) {
    const std::size_t i = index_of(f);
    const Vec3 d = achieved.tip(f) - desired.tips[i];
    for (std::size_t a = 0; a < 3; ++a) sums_[i][a] += std::abs(d[a]);
    tip_mm[i] = d.norm();
  }
  tip_errors_mm_.push_back(tip_mm);
}

void ErrorAccumulator::finish(EvalReport& r) const {
  r.tip_errors_mm = tip_errors_mm_;
  const std::size_t n = tip_errors_mm_.size();
  for (std::size_t i = 0; i < kNumFingers; ++i) {
    r.fingers[i].count = n;
    for (std::size_t a = 0; a < 3; ++a) r.fingers[i].axis_cm[a] = n == 0 ? 0.0 : sums_[i][a] / static_cast<double>(n) / 10.0;
  }
}

EvalReport replay_and_score(const Policy& policy, const ValidationSet& set, const PlantConfig& plant,
                            const HandGeometry& geometry, std::string name) {
  EvalReport r;
  r.controller = std::move(name);
  r.set_kind = set.kind;
  r.set_seed = set.seed;
  r.set_digest = validation_digest(set);
  r.plant_digest = plant_digest(plant);
  ErrorAccumulator acc;
  for (const auto& traj : set.trajectories) {
    for (std::size_t step = 0; step < traj.size(); ++step) {
      acc.add(achieved_pose(plant, geometry, policy(PolicyContext{traj, step})), traj[step].desired);
    }
  }
  acc.finish(r);
  return r;
}

ControllerInput controller_input(const std::vector<ValidationPose>& trajectory, std::size_t step, Finger f) {
  const Representation rep = representation_for(f);
  const std::size_t first = step + 1 >= kHistoryLength ? step + 1 - kHistoryLength : 0;
  std::vector<FingerState> states;
  for (std::size_t s = first; s <= step; ++s) states.push_back(state_of(trajectory[s].observed, f, rep));
  return ControllerInput::from_history(f, rep, states);
}

MotorVector hand_command(const HandController& controller, const std::vector<ValidationPose>& trajectory,
                         std::size_t step, const MotorRanges& ranges) {
  MotorVector cmd = ranges.minimum();
  for (Finger f : kAllFingers) {
    const auto deg = controller.finger(f).predict(controller_input(trajectory, step, f), ranges);
    for (std::size_t k = 0; k < deg.size(); ++k) cmd.deg[motor_offset(f) + k] = deg[k];
  }
  return cmd;
}

EvalReport replay_and_score(const HandController& controller, const ValidationSet& set, const PlantConfig& plant,
                            const HandGeometry& geometry, const MotorRanges& ranges) {
  EvalReport r = replay_and_score(
      [&](const PolicyContext& ctx) { return hand_command(controller, ctx.trajectory, ctx.step, ranges); }, set, plant,
      geometry, std::string(kind_name(controller.kind)));
  r.controller_digest = controller.digest();
  return r;
}

Policy grid_inverse_oracle(const PlantConfig& plant, const MotorRanges& ranges, double resolution_deg) {
  if (!(resolution_deg > 0.0)) throw Error(ErrorCode::InvalidArgument, "oracle resolution must be positive");
  struct Table {
    std::vector<double> commands;
    std::vector<std::vector<double>> joints;  // per command, the motor's joints
    std::vector<std::size_t> joint_index;
  };
  auto tables = std::make_shared<std::array<Table, kNumMotors>>();
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    Table& t = (*tables)[m];
    const std::size_t base = m < 3 ? m : 3 * (1 + (m - 3) / 2);
    t.joint_index = (m >= 3 && (m - 3) % 2 == 1) ? std::vector<std::size_t>{base + 1, base + 2}
                                                   : std::vector<std::size_t>{base};
    const auto steps = static_cast<std::size_t>(std::floor((ranges.max[m] - ranges.min[m]) / resolution_deg));
    for (std::size_t k = 0; k <= steps; ++k) {
      MotorVector cmd = ranges.minimum();
      cmd.deg[m] = std::min(ranges.max[m], ranges.min[m] + static_cast<double>(k) * resolution_deg);
      const JointState js = actuate(plant, cmd);
      std::vector<double> q;
      for (std::size_t j : t.joint_index) q.push_back(js.deg[j]);
      t.commands.push_back(cmd.deg[m]);
      t.joints.push_back(std::move(q));
    }
  }
  return [tables](const PolicyContext& ctx) {
    const JointState& goal = ctx.trajectory[ctx.step].source_joints;
    MotorVector cmd;
    for (std::size_t m = 0; m < kNumMotors; ++m) {
      const Table& t = (*tables)[m];
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < t.commands.size(); ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < t.joint_index.size(); ++i) {
          const double r = t.joints[k][i] - goal.deg[t.joint_index[i]];
          d += r * r;
        }
        if (d < best) {
          best = d;
          cmd.deg[m] = t.commands[k];
        }
      }
    }
    return cmd;
  };
}

double mean_nearest_distance(const ValidationSet& set, const Dataset& data) {
  if (data.samples.empty() || set.pose_count() == 0) throw Error(ErrorCode::InvalidArgument, "empty set or dataset");
  const Representation rep = representation_for(data.finger);
  std::vector<std::vector<double>> rows;
  for (const auto& s : data.samples) {
    const auto st = state_of(s.reading, rep);
    rows.emplace_back(st.begin(), st.end());
  }
  const Normalizer norm = Normalizer::fit(rows);
  std::array<std::vector<double>, 3> cols;
  for (const auto& r : rows) {
    for (std::size_t d = 0; d < 3; ++d) cols[d].push_back(norm.apply(d, r[d]));
  }
  const auto& k = simd::active_kernels();
  std::vector<double> dist(rows.size());
  double total = 0.0;
  for (const auto& traj : set.trajectories) {
    for (const auto& pose : traj) {
      const auto q = state_of(pose.observed, data.finger, rep);
      std::fill(dist.begin(), dist.end(), 0.0);
      for (std::size_t d = 0; d < 3; ++d) k.accumulate_sq_diff(cols[d].data(), norm.apply(d, q[d]), dist.data(), dist.size());
      total += std::sqrt(dist[k.argmin(dist.data(), dist.size())]);
    }
  }
  return total / static_cast<double>(set.pose_count());
}

// ---------------------------------------------------------------- opposition and range of motion

ContactCloud fingertip_intersection(const HandGeometry& geometry, std::size_t samples, std::uint64_t seed,
                                    double contact_radius_mm) {
  if (samples == 0) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  ContactCloud cloud;
  cloud.samples = samples;
  cloud.contact_radius_mm = contact_radius_mm;
  cloud.seed = seed;
  const double r2 = contact_radius_mm * contact_radius_mm;
  for (std::size_t pair = 0; pair < 4; ++pair) {
    const Finger f = kAllFingers[pair + 1];
    std::mt19937_64 rng(derive_seed(seed, pair));
    std::array<double, 3> qt{}, qf{};
    for (std::size_t s = 0; s < samples; ++s) {
      for (std::size_t k = 0; k < 3; ++k) qt[k] = uniform(rng, 0.0, geometry.limits_deg[k]);
      for (std::size_t k = 0; k < 3; ++k) qf[k] = uniform(rng, 0.0, geometry.limits_deg[joint_offset(f) + k]);
      const Vec3 thumb = finger_forward_kinematics(geometry, Finger::Thumb, std::span<const double, 3>(qt))[4];
      const Vec3 tip = finger_forward_kinematics(geometry, f, std::span<const double, 3>(qf))[4];
      if ((thumb - tip).squaredNorm() <= r2 && contact_radius_mm > 0.0) cloud.thumb_tips[pair].push_back(thumb);
    }
  }
  return cloud;
}

std::vector<RangeOfMotionRow> range_of_motion_report(const PlantConfig& plant, const HandGeometry& geometry,
                                                     const MotorRanges& ranges, double step_deg) {
  if (!(step_deg > 0.0)) throw Error(ErrorCode::InvalidArgument, "sweep step must be positive");
  std::vector<RangeOfMotionRow> rows(kNumJoints);
  static constexpr const char* kThumb[] = {"cmc", "mcp", "ip"};
  static constexpr const char* kFinger[] = {"mcp", "pip", "dip"};
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    rows[j].joint = j;
    rows[j].name = std::string(finger_name(kAllFingers[j / 3])) + "." + (j < 3 ? kThumb[j] : kFinger[j % 3]);
    rows[j].limit_deg = geometry.limits_deg[j];
    rows[j].achieved_min_deg = std::numeric_limits<double>::infinity();
    rows[j].achieved_max_deg = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    const auto steps = static_cast<std::size_t>(std::ceil((ranges.max[m] - ranges.min[m]) / step_deg));
    for (std::size_t k = 0; k <= steps; ++k) {
      MotorVector cmd = ranges.minimum();
      cmd.deg[m] = std::min(ranges.max[m], ranges.min[m] + static_cast<double>(k) * step_deg);
      const JointState js = actuate(plant, cmd);
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        rows[j].achieved_min_deg = std::min(rows[j].achieved_min_deg, js.deg[j]);
        rows[j].achieved_max_deg = std::max(rows[j].achieved_max_deg, js.deg[j]);
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------- output

void print_report(std::ostream& out, const EvalReport& r) {
  const auto flags = out.flags();
  out << "controller " << r.controller << " on the " << validation_kind_name(r.set_kind) << " set (seed " << r.set_seed
      << ", " << r.tip_errors_mm.size() << " poses)\n";
  out << "mean absolute fingertip error, cm (the thumb row is the comparison metric; other fingers are an extension)\n";
  out << std::left << std::setw(8) << "finger" << std::right << std::setw(8) << "x" << std::setw(8) << "y"
      << std::setw(8) << "z" << std::setw(8) << "mean" << "\n";
  auto row = [&](std::string_view name, const FingerError& e) {
    out << std::left << std::setw(8) << name << std::right << std::fixed << std::setprecision(3);
    for (double v : e.axis_cm) out << std::setw(8) << v;
    out << std::setw(8) << e.mean_cm() << "\n";
  };
  for (Finger f : kAllFingers) row(finger_name(f), r.fingers[index_of(f)]);
  row("all", r.pooled());
  out.flags(flags);
}

nlohmann::json report_record(const EvalReport& r) {
  nlohmann::json fingers = nlohmann::json::object();
  for (Finger f : kAllFingers) {
    const auto& e = r.fingers[index_of(f)];
    fingers[std::string(finger_name(f))] = {{"axis_cm", e.axis_cm}, {"mean_cm", e.mean_cm()}, {"count", e.count}};
  }
  const FingerError all = r.pooled();
  return {{"schema", 1},
          {"controller", r.controller},
          {"set", validation_kind_name(r.set_kind)},
          {"set_seed", r.set_seed},
          {"fingers", fingers},
          {"all", {{"axis_cm", all.axis_cm}, {"mean_cm", all.mean_cm()}}},
          {"controller_digest", r.controller_digest},
          {"set_digest", r.set_digest},
          {"plant_digest", r.plant_digest}};
}

void write_error_csv(std::ostream& out, const EvalReport& r) {
  out << "pose,thumb_mm,index_mm,middle_mm,ring_mm,pinky_mm\n";
  for (std::size_t i = 0; i < r.tip_errors_mm.size(); ++i) {
    out << i;
    for (double v : r.tip_errors_mm[i]) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_contacts_csv(std::ostream& out, const ContactCloud& c) {
  out << "pair,x_mm,y_mm,z_mm\n";
  for (std::size_t pair = 0; pair < 4; ++pair) {
    for (const Vec3& p : c.thumb_tips[pair]) {
      out << "thumb-" << finger_name(kAllFingers[pair + 1]) << ',' << format_double(p.x()) << ','
          << format_double(p.y()) << ',' << format_double(p.z()) << '\n';
    }
  }
}

void print_range_of_motion(std::ostream& out, const std::vector<RangeOfMotionRow>& rows) {
  const auto flags = out.flags();
  out << std::left << std::setw(14) << "joint" << std::right << std::setw(10) << "min" << std::setw(10) << "max"
      << std::setw(10) << "limit" << std::setw(10) << "reached" << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(14) << r.name << std::right << std::fixed << std::setprecision(2) << std::setw(10)
        << r.achieved_min_deg << std::setw(10) << r.achieved_max_deg << std::setw(10) << r.limit_deg << std::setw(9)
        << 100.0 * r.fraction() << "%\n";
  }
  out.flags(flags);
}

}  // namespace ruka
