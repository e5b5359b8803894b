#pragma once

// The command-line pipeline: calibrate -> gen-data -> train -> evaluate, plus
// serve and replay, all working inside one run directory.
//
// Run directory layout
//   config.json                  effective configuration (seeds resolved)
//   manifest.json                stage artifacts and their digests
//   calibration.json
//   data/<finger>.dataset
//   controllers/<kind>/<finger>.json, controllers/<kind>/manifest.json
//   validation/robot.json, validation/human-like.json
//   recordings/robot.ndjson      the robot set as a teleop recording
//   reports/evaluation.jsonl, evaluation.txt, errors-<kind>-<set>.csv, contacts.csv
//
// A stage refuses to run when an input stage is missing (DigestMissing) or an
// input file no longer matches the digest recorded for it (DigestMismatch).
// No artifact holds wall-clock time, so re-running a stage with the same
// configuration rewrites identical bytes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ruka/calibration.hpp"
#include "ruka/service.hpp"

namespace ruka {

struct DatagenConfig {
  std::array<std::size_t, kNumFingers> episodes{};  // per finger
  std::size_t steps = kDefaultWalkSteps;
  double step_size_deg = kDefaultStepSizeDeg;
  bool operator==(const DatagenConfig&) const = default;
};

struct EvaluationConfig {
  std::size_t robot_poses = 1000;
  std::size_t human_poses = 1000;
  RobotValidationSpec robot;
  HumanLikeSpec human;
  std::size_t opposition_samples = kOppositionSamples;
  double contact_radius_mm = kContactRadiusMm;
};

struct PipelineConfig {
  static constexpr int kSchema = 1;
  std::uint64_t seed = 1;  // master seed; every stage seed is derived from it
  PlantConfig plant;
  HandGeometry geometry;
  CalibrationOptions calibration;
  DatagenConfig datagen;
  TrainingConfig training;
  std::vector<ControllerKind> kinds;
  EvaluationConfig evaluation;
  ServiceConfig service;
};

/// Default plant and geometry, 500 thumb and 300 per-finger walk episodes, all four controller kinds.
PipelineConfig default_pipeline_config();
/// Overwrites the stage seeds (calibration, training, service) with ones derived from `seed`.
PipelineConfig resolve_seeds(PipelineConfig c);

/// Sections missing from the document keep their defaults.
void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
std::string config_digest(const PipelineConfig& c);

struct StageSeeds {
  std::uint64_t calibration, datagen, training, robot_set, human_set, opposition, service;
};
StageSeeds stage_seeds(std::uint64_t master);

class RunDir {
 public:
  explicit RunDir(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path(const std::string& relative) const { return root_ / relative; }
  const nlohmann::json& manifest() const { return manifest_; }

  /// Recorded entry of a stage; throws DigestMissing with a hint if absent.
  const nlohmann::json& stage(const std::string& name, const std::string& hint) const;
  bool has_stage(const std::string& name) const;
  void set_stage(const std::string& name, nlohmann::json entry);
  void save() const;

  /// Config stored by an earlier stage, if any.
  std::optional<PipelineConfig> stored_config() const;
  void store_config(const PipelineConfig& c) const;

 private:
  std::filesystem::path root_;
  nlohmann::json manifest_;
};

/// Writes text atomically enough for a single writer: temp file, then rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// ---------------------------------------------------------------- stages

CalibrationResult run_calibrate(RunDir& run, const PipelineConfig& config);
std::array<Dataset, kNumFingers> run_gen_data(RunDir& run, const PipelineConfig& config);
/// Trains every kind in `kinds` (or the configured kinds when empty).
std::vector<HandController> run_train(RunDir& run, const PipelineConfig& config,
                                      const std::vector<ControllerKind>& kinds = {});

struct EvaluationSummary {
  std::vector<EvalReport> reports;  // robot then human-like, per trained kind
  ContactCloud contacts;
  std::vector<RangeOfMotionRow> range_of_motion;
};
EvaluationSummary run_evaluate(RunDir& run, const PipelineConfig& config);

/// Replays a frame file through a trained controller on the run's plant. With
/// `realtime`, frames are released at their recorded timestamps.
EvalReport run_replay(RunDir& run, const PipelineConfig& config, const std::filesystem::path& frames,
                      ControllerKind kind, bool realtime = false);

// ---------------------------------------------------------------- artifact loading

/// Calibration recorded in the run, checked against its digest and the configured plant.
CalibrationResult load_calibration(const RunDir& run, const PipelineConfig& config);
/// A trained controller, checked against its recorded digest and the run's calibration.
HandController load_trained(const RunDir& run, ControllerKind kind, const CalibrationResult& calibration);
std::vector<ControllerKind> trained_kinds(const RunDir& run);

/// A session over every trained controller; `active` defaults to the first trained kind.
Session make_session(const RunDir& run, const PipelineConfig& config, std::optional<ControllerKind> active = {});

}  // namespace ruka
