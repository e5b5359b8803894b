#pragma once

// Teleoperation targets and the line-delimited frame files used for replay and recording.
//
// One frame per line, a self-describing JSON document:
//   {"schema":1, "type":"teleop", "t_ms":..., "source":"ui"|"replay-file", "segment":0,
//    "thumb_tip_mm":[x,y,z], "finger_joints_deg":{"index":[mcp,pip,dip], ...},
//    "desired_tips_mm":[[x,y,z] x5]}                      (desired is optional)
// Timestamps strictly increase through a file. A new segment starts a fresh
// controller history; recordings of validation sets use one segment per trajectory.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruka/evaluation.hpp"

namespace ruka {

enum class FrameSource { Ui, ReplayFile };
std::string_view frame_source_name(FrameSource s);

struct TeleopFrame {
  static constexpr int kSchema = 1;
  double timestamp_ms = 0.0;
  FrameSource source = FrameSource::Ui;
  std::uint32_t segment = 0;
  Vec3 thumb_tip_mm = Vec3::Zero();
  std::array<std::array<double, 3>, 4> finger_joints_deg{};  // index..pinky
  std::optional<FingertipSet> desired;                       // scoring goal, recordings only
  bool operator==(const TeleopFrame& o) const;

  /// The state a finger's controller consumes from this frame.
  FingerState state(Finger f) const;
};

/// Direct motor command, bypassing the controllers.
struct MotorTarget {
  double timestamp_ms = 0.0;
  MotorVector command;
};

/// Throws MalformedFrame (with the reason) on missing fields, wrong shapes, non-finite values.
TeleopFrame teleop_frame_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TeleopFrame& f);
TeleopFrame parse_teleop_frame(std::string_view line);
std::string format_teleop_frame(const TeleopFrame& f);

MotorTarget motor_target_from_json(const nlohmann::json& j);

/// Reads a frame file. Blank lines are skipped. Throws MalformedFrame with the
/// line number, or TimestampDisorder when a timestamp does not increase.
std::vector<TeleopFrame> read_teleop_frames(std::istream& in);
std::vector<TeleopFrame> read_teleop_file(const std::filesystem::path& path);
void write_teleop_frames(std::ostream& out, const std::vector<TeleopFrame>& frames);
void write_teleop_file(const std::filesystem::path& path, const std::vector<TeleopFrame>& frames);

/// A validation set as a recording: the controller states of each observed
/// pose, the desired tips, one segment per trajectory, at the logging rate.
std::vector<TeleopFrame> record_validation(const ValidationSet& set);

/// Rolling controller histories for the five fingers.
class TeleopHistory {
 public:
  void push(const TeleopFrame& f);
  void clear();
  bool empty() const { return count_ == 0; }
  ControllerInput input(Finger f) const;
  MotorVector command(const HandController& controller, const MotorRanges& ranges) const;

 private:
  std::array<std::array<FingerState, kHistoryLength>, kNumFingers> ring_{};
  std::size_t next_ = 0;
  std::size_t count_ = 0;
};

/// Drives the frames through the controllers on the noiseless plant, resetting
/// history at each segment, and scores the frames that carry desired tips.
/// Identical to replay_and_score on the set a recording was made from.
/// `before_frame`, if set, runs ahead of each frame (used to pace real-time replays).
EvalReport replay_frames(const HandController& controller, const std::vector<TeleopFrame>& frames,
                         const PlantConfig& plant, const HandGeometry& geometry, const MotorRanges& ranges,
                         const std::function<void(const TeleopFrame&)>& before_frame = {});

}  // namespace ruka
