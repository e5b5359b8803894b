#include "ruka/teleop.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace ruka {
namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MalformedFrame, why); }

double finite_number(const nlohmann::json& j, const std::string& what) {
  if (!j.is_number()) malformed(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) malformed(what + " must be finite");
  return v;
}

std::array<double, 3> triple(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) malformed(what + " must be an array of 3 numbers");
  return {finite_number(j[0], what), finite_number(j[1], what), finite_number(j[2], what)};
}

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string_view frame_source_name(FrameSource s) { return s == FrameSource::Ui ? "ui" : "replay-file"; }

bool TeleopFrame::operator==(const TeleopFrame& o) const {
  return timestamp_ms == o.timestamp_ms && source == o.source && segment == o.segment &&
         thumb_tip_mm == o.thumb_tip_mm && finger_joints_deg == o.finger_joints_deg && desired == o.desired;
}

FingerState TeleopFrame::state(Finger f) const {
  if (f == Finger::Thumb) return {thumb_tip_mm.x(), thumb_tip_mm.y(), thumb_tip_mm.z()};
  return finger_joints_deg[index_of(f) - 1];
}

TeleopFrame teleop_frame_from_json(const nlohmann::json& j) {
  if (!j.is_object()) malformed("frame must be a JSON object");
  const auto& schema = field(j, "schema");
  if (!schema.is_number_integer() || schema.get<int>() != TeleopFrame::kSchema) malformed("frame schema must be 1");
  if (j.contains("type") && j["type"] != "teleop") malformed("frame type must be 'teleop'");
  TeleopFrame f;
  f.timestamp_ms = finite_number(field(j, "t_ms"), "t_ms");
  if (j.contains("source")) {
    const auto& s = j["source"];
    if (s == "ui") f.source = FrameSource::Ui;
    else if (s == "replay-file") f.source = FrameSource::ReplayFile;
    else malformed("source must be 'ui' or 'replay-file'");
  }
  if (j.contains("segment")) {
    if (!j["segment"].is_number_unsigned()) malformed("segment must be a non-negative integer");
    f.segment = j["segment"].get<std::uint32_t>();
  }
  const auto tip = triple(field(j, "thumb_tip_mm"), "thumb_tip_mm");
  f.thumb_tip_mm = Vec3(tip[0], tip[1], tip[2]);
  const auto& joints = field(j, "finger_joints_deg");
  if (!joints.is_object()) malformed("finger_joints_deg must be an object keyed by finger");
  for (Finger g : kAllFingers) {
    if (g == Finger::Thumb) continue;
    const std::string name(finger_name(g));
    const auto it = joints.find(name);
    if (it == joints.end()) malformed("finger_joints_deg is missing '" + name + "'");
    f.finger_joints_deg[index_of(g) - 1] = triple(*it, "finger_joints_deg." + name);
  }
  if (j.contains("desired_tips_mm")) {
    const auto& d = j["desired_tips_mm"];
    if (!d.is_array() || d.size() != kNumFingers) malformed("desired_tips_mm must hold 5 points");
    FingertipSet tips;
    for (std::size_t i = 0; i < kNumFingers; ++i) {
      const auto p = triple(d[i], "desired_tips_mm");
      tips.tips[i] = Vec3(p[0], p[1], p[2]);
    }
    f.desired = tips;
  }
  return f;
}

nlohmann::json to_json(const TeleopFrame& f) {
  nlohmann::json joints = nlohmann::json::object();
  for (Finger g : kAllFingers) {
    if (g != Finger::Thumb) joints[std::string(finger_name(g))] = f.finger_joints_deg[index_of(g) - 1];
  }
  nlohmann::json j = {{"schema", TeleopFrame::kSchema},
                      {"type", "teleop"},
                      {"t_ms", f.timestamp_ms},
                      {"source", frame_source_name(f.source)},
                      {"segment", f.segment},
                      {"thumb_tip_mm", vec3_json(f.thumb_tip_mm)},
                      {"finger_joints_deg", joints}};
  if (f.desired) {
    nlohmann::json tips = nlohmann::json::array();
    for (const Vec3& t : f.desired->tips) tips.push_back(vec3_json(t));
    j["desired_tips_mm"] = tips;
  }
  return j;
}

TeleopFrame parse_teleop_frame(std::string_view line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) malformed("frame is not valid JSON");
  return teleop_frame_from_json(j);
}

std::string format_teleop_frame(const TeleopFrame& f) { return to_json(f).dump(); }

MotorTarget motor_target_from_json(const nlohmann::json& j) {
  if (!j.is_object()) malformed("motor target must be a JSON object");
  const auto& schema = field(j, "schema");
  if (!schema.is_number_integer() || schema.get<int>() != 1) malformed("motor target schema must be 1");
  MotorTarget t;
  t.timestamp_ms = finite_number(field(j, "t_ms"), "t_ms");
  const auto& m = field(j, "motors_deg");
  if (!m.is_array() || m.size() != kNumMotors) malformed("motors_deg must hold 11 numbers");
  for (std::size_t i = 0; i < kNumMotors; ++i) t.command.deg[i] = finite_number(m[i], "motors_deg");
  return t;
}

std::vector<TeleopFrame> read_teleop_frames(std::istream& in) {
  std::vector<TeleopFrame> frames;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      frames.push_back(parse_teleop_frame(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(n) + ": " + e.what());
    }
    if (frames.size() > 1 && !(frames.back().timestamp_ms > frames[frames.size() - 2].timestamp_ms)) {
      throw Error(ErrorCode::TimestampDisorder, "line " + std::to_string(n) + ": timestamp " +
                                                    format_double(frames.back().timestamp_ms) +
                                                    " does not follow " +
                                                    format_double(frames[frames.size() - 2].timestamp_ms));
    }
  }
  return frames;
}

std::vector<TeleopFrame> read_teleop_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_teleop_frames(in);
}

void write_teleop_frames(std::ostream& out, const std::vector<TeleopFrame>& frames) {
  for (const auto& f : frames) out << format_teleop_frame(f) << '\n';
}

void write_teleop_file(const std::filesystem::path& path, const std::vector<TeleopFrame>& frames) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_teleop_frames(out, frames);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<TeleopFrame> record_validation(const ValidationSet& set) {
  std::vector<TeleopFrame> frames;
  for (std::size_t t = 0; t < set.trajectories.size(); ++t) {
    for (const auto& pose : set.trajectories[t]) {
      TeleopFrame f;
      f.timestamp_ms = static_cast<double>(frames.size()) * kLoggingPeriodMs;
      f.source = FrameSource::ReplayFile;
      f.segment = static_cast<std::uint32_t>(t);
      f.thumb_tip_mm = pose.observed.tip(Finger::Thumb);
      for (Finger g : kAllFingers) {
        if (g != Finger::Thumb) f.finger_joints_deg[index_of(g) - 1] = state_of(pose.observed, g, representation_for(g));
      }
      f.desired = pose.desired;
      frames.push_back(f);
    }
  }
  return frames;
}

// ---------------------------------------------------------------- history

void TeleopHistory::push(const TeleopFrame& f) {
  for (Finger g : kAllFingers) ring_[index_of(g)][next_] = f.state(g);
  next_ = (next_ + 1) % kHistoryLength;
  count_ = std::min(count_ + 1, kHistoryLength);
}

void TeleopHistory::clear() {
  next_ = 0;
  count_ = 0;
}

ControllerInput TeleopHistory::input(Finger f) const {
  if (count_ == 0) throw Error(ErrorCode::InvalidArgument, "no teleop frame received yet");
  std::vector<FingerState> states;
  states.reserve(count_);
  const std::size_t first = (next_ + kHistoryLength - count_) % kHistoryLength;
  for (std::size_t k = 0; k < count_; ++k) states.push_back(ring_[index_of(f)][(first + k) % kHistoryLength]);
  return ControllerInput::from_history(f, representation_for(f), states);
}

MotorVector TeleopHistory::command(const HandController& controller, const MotorRanges& ranges) const {
  MotorVector cmd = ranges.minimum();
  for (Finger f : kAllFingers) {
    const auto deg = controller.finger(f).predict(input(f), ranges);
    for (std::size_t k = 0; k < deg.size(); ++k) cmd.deg[motor_offset(f) + k] = deg[k];
  }
  return cmd;
}

EvalReport replay_frames(const HandController& controller, const std::vector<TeleopFrame>& frames,
                         const PlantConfig& plant, const HandGeometry& geometry, const MotorRanges& ranges,
                         const std::function<void(const TeleopFrame&)>& before_frame) {
  EvalReport r;
  r.controller = std::string(kind_name(controller.kind));
  r.controller_digest = controller.digest();
  r.plant_digest = plant_digest(plant);
  Fnv1a h;
  TeleopHistory history;
  ErrorAccumulator acc;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const TeleopFrame& f = frames[i];
    if (i > 0 && !(f.timestamp_ms > frames[i - 1].timestamp_ms)) {
      throw Error(ErrorCode::TimestampDisorder, "frame " + std::to_string(i) + " is out of order");
    }
    if (i > 0 && f.segment != frames[i - 1].segment) history.clear();
    if (before_frame) before_frame(f);
    h.update(format_teleop_frame(f));
    h.update("\n");
    history.push(f);
    const MotorVector cmd = history.command(controller, ranges);
    if (f.desired) acc.add(achieved_pose(plant, geometry, cmd), *f.desired);
  }
  acc.finish(r);
  r.set_digest = h.hex();
  return r;
}

}  // namespace ruka
