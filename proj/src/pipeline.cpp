#include "ruka/pipeline.hpp"

#include <fstream>
#include <sstream>
#include <thread>

namespace ruka {
namespace {

namespace fs = std::filesystem;

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kConfigFile = "config.json";
constexpr const char* kCalibrationFile = "calibration.json";

std::string dataset_file(Finger f) { return "data/" + std::string(finger_name(f)) + ".dataset"; }
std::string controller_dir(ControllerKind k) { return "controllers/" + std::string(kind_name(k)); }

nlohmann::json calibration_options_json(const CalibrationOptions& o) {
  return {{"tolerance_deg", o.tolerance_deg},
          {"max_iters", o.max_iters},
          {"readings_per_probe", o.readings_per_probe},
          {"seed", o.seed}};
}

CalibrationOptions calibration_options_from(const nlohmann::json& j) {
  CalibrationOptions o;
  o.tolerance_deg = j.value("tolerance_deg", o.tolerance_deg);
  o.max_iters = j.value("max_iters", o.max_iters);
  o.readings_per_probe = j.value("readings_per_probe", o.readings_per_probe);
  o.seed = j.value("seed", o.seed);
  return o;
}

void mismatch(const std::string& what, const std::string& hint) {
  throw Error(ErrorCode::DigestMismatch, what + "; " + hint);
}

}  // namespace

// ---------------------------------------------------------------- configuration

PipelineConfig default_pipeline_config() {
  PipelineConfig c;
  c.plant = default_plant_config();
  c.geometry = default_geometry();
  for (Finger f : kAllFingers) c.datagen.episodes[index_of(f)] = default_episodes(f);
  c.kinds = {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search};
  return resolve_seeds(c);
}

StageSeeds stage_seeds(std::uint64_t master) {
  return {derive_seed(master, 1), derive_seed(master, 2), derive_seed(master, 3), derive_seed(master, 4),
          derive_seed(master, 5), derive_seed(master, 6), derive_seed(master, 7)};
}

PipelineConfig resolve_seeds(PipelineConfig c) {
  const StageSeeds s = stage_seeds(c.seed);
  c.calibration.seed = s.calibration;
  c.training.seed = s.training;
  c.service.seed = s.service;
  return c;
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  nlohmann::json episodes = nlohmann::json::object();
  for (Finger f : kAllFingers) episodes[std::string(finger_name(f))] = c.datagen.episodes[index_of(f)];
  nlohmann::json kinds = nlohmann::json::array();
  for (ControllerKind k : c.kinds) kinds.push_back(kind_name(k));
  j = {{"schema", PipelineConfig::kSchema},
       {"seed", c.seed},
       {"plant", c.plant},
       {"geometry", c.geometry},
       {"calibration", calibration_options_json(c.calibration)},
       {"datagen", {{"episodes", episodes}, {"steps", c.datagen.steps}, {"step_size_deg", c.datagen.step_size_deg}}},
       {"training", c.training},
       {"kinds", kinds},
       {"evaluation",
        {{"robot_poses", c.evaluation.robot_poses},
         {"human_poses", c.evaluation.human_poses},
         {"robot", {{"trajectory_length", c.evaluation.robot.trajectory_length},
                    {"step_size_deg", c.evaluation.robot.step_size_deg}}},
         {"human", c.evaluation.human},
         {"opposition_samples", c.evaluation.opposition_samples},
         {"contact_radius_mm", c.evaluation.contact_radius_mm}}},
       {"service", c.service}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  if (j.value("schema", PipelineConfig::kSchema) != PipelineConfig::kSchema) {
    throw Error(ErrorCode::SchemaVersion, "pipeline config schema mismatch, expected 1");
  }
  c = default_pipeline_config();
  c.seed = j.value("seed", c.seed);
  if (j.contains("plant")) c.plant = j["plant"].get<PlantConfig>();
  if (j.contains("geometry")) c.geometry = j["geometry"].get<HandGeometry>();
  if (j.contains("calibration")) c.calibration = calibration_options_from(j["calibration"]);
  if (j.contains("datagen")) {
    const auto& d = j["datagen"];
    if (d.contains("episodes")) {
      for (Finger f : kAllFingers) {
        c.datagen.episodes[index_of(f)] = d["episodes"].value(std::string(finger_name(f)), c.datagen.episodes[index_of(f)]);
      }
    }
    c.datagen.steps = d.value("steps", c.datagen.steps);
    c.datagen.step_size_deg = d.value("step_size_deg", c.datagen.step_size_deg);
  }
  if (j.contains("training")) c.training = j["training"].get<TrainingConfig>();
  if (j.contains("kinds")) {
    c.kinds.clear();
    for (const auto& k : j["kinds"]) c.kinds.push_back(kind_from_name(k.get<std::string>()));
  }
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    auto& out = c.evaluation;
    out.robot_poses = e.value("robot_poses", out.robot_poses);
    out.human_poses = e.value("human_poses", out.human_poses);
    if (e.contains("robot")) {
      out.robot.trajectory_length = e["robot"].value("trajectory_length", out.robot.trajectory_length);
      out.robot.step_size_deg = e["robot"].value("step_size_deg", out.robot.step_size_deg);
    }
    if (e.contains("human")) out.human = e["human"].get<HumanLikeSpec>();
    out.opposition_samples = e.value("opposition_samples", out.opposition_samples);
    out.contact_radius_mm = e.value("contact_radius_mm", out.contact_radius_mm);
  }
  if (j.contains("service")) c.service = j["service"].get<ServiceConfig>();
  validate(c.plant);
  for (std::size_t n : c.datagen.episodes) {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "every finger needs at least one episode");
  }
  c = resolve_seeds(c);
}

std::string config_digest(const PipelineConfig& c) { return digest_of(nlohmann::json(c).dump()); }

// ---------------------------------------------------------------- run directory

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunDir::RunDir(fs::path root) : root_(std::move(root)) {
  const fs::path m = root_ / kManifestFile;
  if (fs::exists(m)) {
    manifest_ = nlohmann::json::parse(read_text_file(m), nullptr, false);
    if (manifest_.is_discarded()) throw Error(ErrorCode::TruncatedRecord, m.string() + " is not valid JSON");
    if (manifest_.value("schema", -1) != 1) throw Error(ErrorCode::SchemaVersion, "run manifest schema mismatch");
  } else {
    manifest_ = {{"schema", 1}, {"stages", nlohmann::json::object()}};
  }
}

bool RunDir::has_stage(const std::string& name) const { return manifest_["stages"].contains(name); }

const nlohmann::json& RunDir::stage(const std::string& name, const std::string& hint) const {
  const auto& stages = manifest_.at("stages");
  const auto it = stages.find(name);
  if (it == stages.end()) {
    throw Error(ErrorCode::DigestMissing, "no " + name + " digest in " + (root_ / kManifestFile).string() + "; " + hint);
  }
  return *it;
}

void RunDir::set_stage(const std::string& name, nlohmann::json entry) { manifest_["stages"][name] = std::move(entry); }

void RunDir::save() const { write_text_file(root_ / kManifestFile, manifest_.dump(2) + "\n"); }

std::optional<PipelineConfig> RunDir::stored_config() const {
  const fs::path p = root_ / kConfigFile;
  if (!fs::exists(p)) return std::nullopt;
  const auto j = nlohmann::json::parse(read_text_file(p), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::TruncatedRecord, p.string() + " is not valid JSON");
  return j.get<PipelineConfig>();
}

void RunDir::store_config(const PipelineConfig& c) const {
  write_text_file(root_ / kConfigFile, nlohmann::json(c).dump(2) + "\n");
}

// ---------------------------------------------------------------- artifact loading

CalibrationResult load_calibration(const RunDir& run, const PipelineConfig& config) {
  const auto& entry = run.stage("calibrate", "run `calibrate` first");
  const CalibrationResult cal = read_calibration(run.path(entry.at("file").get<std::string>()));
  if (calibration_digest(cal) != entry.at("digest").get<std::string>()) {
    mismatch("calibration file does not match its recorded digest", "re-run `calibrate`");
  }
  require_calibrated(cal, config.plant, config.geometry);
  return cal;
}

std::vector<ControllerKind> trained_kinds(const RunDir& run) {
  std::vector<ControllerKind> kinds;
  if (!run.has_stage("train")) return kinds;
  for (ControllerKind k : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search}) {
    if (run.manifest()["stages"]["train"].contains(std::string(kind_name(k)))) kinds.push_back(k);
  }
  return kinds;
}

HandController load_trained(const RunDir& run, ControllerKind kind, const CalibrationResult& calibration) {
  const auto& train = run.stage("train", "run `train` first");
  const std::string name(kind_name(kind));
  if (!train.contains(name)) {
    throw Error(ErrorCode::DigestMissing, "no trained " + name + " controller; run `train --kind " + name + "`");
  }
  const auto& entry = train[name];
  HandController hand = load_hand_controller(run.path(entry.at("manifest").get<std::string>()));
  if (hand.digest() != entry.at("digest").get<std::string>()) {
    mismatch(name + " checkpoints do not match their recorded digest", "re-run `train`");
  }
  const std::string cal = calibration_digest(calibration);
  for (Finger f : kAllFingers) {
    if (hand.finger(f).checkpoint().calibration_digest != cal) {
      mismatch(name + " controllers were trained under another calibration", "re-run `gen-data` and `train`");
    }
  }
  return hand;
}

// ---------------------------------------------------------------- stages

CalibrationResult run_calibrate(RunDir& run, const PipelineConfig& config) {
  const CalibrationResult cal = calibrate(config.plant, config.geometry, config.calibration);
  run.store_config(config);
  write_calibration(cal, run.path(kCalibrationFile));
  run.set_stage("calibrate", {{"file", kCalibrationFile},
                              {"digest", calibration_digest(cal)},
                              {"plant_digest", plant_digest(config.plant)},
                              {"geometry_digest", geometry_digest(config.geometry)},
                              {"config_digest", config_digest(config)}});
  run.save();
  return cal;
}

std::array<Dataset, kNumFingers> run_gen_data(RunDir& run, const PipelineConfig& config) {
  const CalibrationResult cal = load_calibration(run, config);
  const std::string cal_digest = calibration_digest(cal);
  const std::uint64_t seed = stage_seeds(config.seed).datagen;
  std::array<Dataset, kNumFingers> data;
  nlohmann::json files = nlohmann::json::object();
  fs::create_directories(run.path("data"));
  for (Finger f : kAllFingers) {
    const WalkSpec walk{f, config.datagen.steps, config.datagen.step_size_deg};
    Dataset& d = data[index_of(f)];
    d = collect_dataset(config.plant, config.geometry, cal.ranges, walk, config.datagen.episodes[index_of(f)],
                        derive_seed(seed, index_of(f)), cal_digest);
    write_dataset(d, run.path(dataset_file(f)));
    files[std::string(finger_name(f))] = {{"file", dataset_file(f)}, {"digest", dataset_digest(d)},
                                          {"samples", d.samples.size()}};
  }
  run.store_config(config);
  run.set_stage("gen-data", {{"files", files}, {"calibration_digest", cal_digest}, {"config_digest", config_digest(config)}});
  run.save();
  return data;
}

std::vector<HandController> run_train(RunDir& run, const PipelineConfig& config,
                                      const std::vector<ControllerKind>& kinds) {
  const CalibrationResult cal = load_calibration(run, config);
  const std::string cal_digest = calibration_digest(cal);
  const auto& gen = run.stage("gen-data", "run `gen-data` first");
  if (gen.at("calibration_digest").get<std::string>() != cal_digest) {
    mismatch("datasets were collected under another calibration", "re-run `gen-data`");
  }
  std::array<Dataset, kNumFingers> data;
  nlohmann::json dataset_digests = nlohmann::json::object();
  for (Finger f : kAllFingers) {
    const std::string name(finger_name(f));
    const auto& entry = gen.at("files").at(name);
    data[index_of(f)] = read_dataset(run.path(entry.at("file").get<std::string>()));
    const std::string digest = dataset_digest(data[index_of(f)]);
    if (digest != entry.at("digest").get<std::string>()) {
      mismatch(name + " dataset does not match its recorded digest", "re-run `gen-data`");
    }
    if (data[index_of(f)].calibration_digest != cal_digest) {
      mismatch(name + " dataset was collected under another calibration", "re-run `gen-data`");
    }
    dataset_digests[name] = digest;
  }

  nlohmann::json stage = run.has_stage("train") ? run.manifest()["stages"]["train"] : nlohmann::json::object();
  std::vector<HandController> hands;
  for (ControllerKind kind : kinds.empty() ? config.kinds : kinds) {
    std::array<ControllerCheckpoint, kNumFingers> ckpts;
    std::array<std::string, kNumFingers> files, digests;
    const std::string dir = controller_dir(kind);
    fs::create_directories(run.path(dir));
    for (Finger f : kAllFingers) {
      ckpts[index_of(f)] = train_controller(kind, data[index_of(f)], config.training);
      files[index_of(f)] = std::string(finger_name(f)) + ".json";
      digests[index_of(f)] = checkpoint_digest(ckpts[index_of(f)]);
      write_checkpoint(ckpts[index_of(f)], run.path(dir + "/" + files[index_of(f)]));
    }
    write_manifest(run.path(dir + "/manifest.json"), kind, files, digests);
    HandController hand = make_hand_controller(kind, std::move(ckpts));
    stage[std::string(kind_name(kind))] = {{"manifest", dir + "/manifest.json"},
                                           {"digest", hand.digest()},
                                           {"calibration_digest", cal_digest},
                                           {"datasets", dataset_digests},
                                           {"config_digest", config_digest(config)}};
    hands.push_back(std::move(hand));
  }
  run.store_config(config);
  run.set_stage("train", stage);
  run.save();
  return hands;
}

EvaluationSummary run_evaluate(RunDir& run, const PipelineConfig& config) {
  const CalibrationResult cal = load_calibration(run, config);
  run.stage("train", "run `train` first");
  const std::vector<ControllerKind> kinds = trained_kinds(run);
  if (kinds.empty()) throw Error(ErrorCode::DigestMissing, "no trained controllers; run `train` first");
  std::vector<HandController> hands;
  for (ControllerKind k : kinds) hands.push_back(load_trained(run, k, cal));

  const StageSeeds seeds = stage_seeds(config.seed);
  const auto& ev = config.evaluation;
  const ValidationSet robot =
      make_robot_validation(config.plant, config.geometry, cal.ranges, ev.robot_poses, seeds.robot_set, ev.robot);
  const ValidationSet human = make_humanlike_validation(config.geometry, ev.human_poses, seeds.human_set, ev.human);
  write_text_file(run.path("validation/robot.json"), nlohmann::json(robot).dump() + "\n");
  write_text_file(run.path("validation/human-like.json"), nlohmann::json(human).dump() + "\n");
  write_teleop_file(run.path("recordings/robot.ndjson"), record_validation(robot));

  EvaluationSummary out;
  std::ostringstream records, table;
  nlohmann::json controllers = nlohmann::json::object();
  for (const HandController& hand : hands) {
    controllers[std::string(kind_name(hand.kind))] = hand.digest();
    for (const ValidationSet* set : {&robot, &human}) {
      EvalReport r = replay_and_score(hand, *set, config.plant, config.geometry, cal.ranges);
      records << report_record(r).dump() << '\n';
      print_report(table, r);
      table << '\n';
      std::ostringstream csv;
      write_error_csv(csv, r);
      write_text_file(run.path("reports/errors-" + r.controller + "-" + std::string(validation_kind_name(set->kind)) +
                               ".csv"),
                      csv.str());
      out.reports.push_back(std::move(r));
    }
  }

  out.contacts = fingertip_intersection(config.geometry, ev.opposition_samples, seeds.opposition, ev.contact_radius_mm);
  std::ostringstream contacts;
  write_contacts_csv(contacts, out.contacts);
  write_text_file(run.path("reports/contacts.csv"), contacts.str());
  table << "opposition (" << out.contacts.samples << " samples per pair, " << format_double(ev.contact_radius_mm)
        << " mm contact radius)\n";
  for (std::size_t p = 0; p < 4; ++p) {
    table << "  thumb-" << finger_name(kAllFingers[p + 1]) << ": " << out.contacts.thumb_tips[p].size()
          << " contacts\n";
  }
  table << '\n';
  out.range_of_motion = range_of_motion_report(config.plant, config.geometry, cal.ranges);
  print_range_of_motion(table, out.range_of_motion);

  const std::string record_text = records.str();
  write_text_file(run.path("reports/evaluation.jsonl"), record_text);
  write_text_file(run.path("reports/evaluation.txt"), table.str());
  run.store_config(config);
  run.set_stage("evaluate", {{"records", {{"file", "reports/evaluation.jsonl"}, {"digest", digest_of(record_text)}}},
                             {"calibration_digest", calibration_digest(cal)},
                             {"controllers", controllers},
                             {"robot_set_digest", validation_digest(robot)},
                             {"human_set_digest", validation_digest(human)},
                             {"config_digest", config_digest(config)}});
  run.save();
  return out;
}

EvalReport run_replay(RunDir& run, const PipelineConfig& config, const fs::path& frames_path, ControllerKind kind,
                      bool realtime) {
  const CalibrationResult cal = load_calibration(run, config);
  const HandController hand = load_trained(run, kind, cal);
  const std::vector<TeleopFrame> frames = read_teleop_file(frames_path);
  std::function<void(const TeleopFrame&)> pace;
  if (realtime && !frames.empty()) {
    const auto start = std::chrono::steady_clock::now();
    const double t0 = frames.front().timestamp_ms;
    pace = [start, t0](const TeleopFrame& f) {
      std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                std::chrono::duration<double, std::milli>(f.timestamp_ms - t0)));
    };
  }
  EvalReport r = replay_frames(hand, frames, config.plant, config.geometry, cal.ranges, pace);
  nlohmann::json record = report_record(r);
  record["frames"] = frames.size();
  record["source"] = frames_path.filename().string();
  write_text_file(run.path("reports/replay-" + std::string(kind_name(kind)) + ".jsonl"), record.dump() + "\n");
  return r;
}

Session make_session(const RunDir& run, const PipelineConfig& config, std::optional<ControllerKind> active) {
  const CalibrationResult cal = load_calibration(run, config);
  const std::vector<ControllerKind> kinds = trained_kinds(run);
  if (kinds.empty()) throw Error(ErrorCode::DigestMissing, "no trained controllers; run `train` first");
  ControllerSet set;
  for (ControllerKind k : kinds) set.emplace(k, load_trained(run, k, cal));
  return Session(std::move(set), active.value_or(kinds.front()), config.plant, config.geometry, cal,
                 config.service.seed);
}

}  // namespace ruka
