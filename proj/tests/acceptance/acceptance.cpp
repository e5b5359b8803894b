// Acceptance run: one PASS/FAIL line per criterion, at full scale.
//
//   acceptance [--work DIR] [--keep]
//
// The default pipeline runs twice (two run directories) so the second run can
// be compared byte for byte with the first. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "ruka/nn/layers.hpp"
#include "ruka/pipeline.hpp"
#include "ruka/simd/kernels.hpp"
#include "ruka/transfer.hpp"
#include "toy_search.hpp"

namespace {

using namespace ruka;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string axes(const std::array<double, 3>& a) { return "[" + fmt(a[0]) + ", " + fmt(a[1]) + ", " + fmt(a[2]) + "]"; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Ledger {
 public:
  void record(const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    ++total_;
    if (!o.pass) ++failed_;
  }
  /// Runs `check`; an exception is a failure carrying its message.
  void run(const std::string& name, const std::function<Outcome()>& check) {
    try {
      record(name, check());
    } catch (const std::exception& e) {
      record(name, {false, std::string("threw: ") + e.what()});
    }
  }
  int failed() const { return failed_; }
  int total() const { return total_; }

 private:
  int total_ = 0;
  int failed_ = 0;
};

// ---------------------------------------------------------------- neural kernels

Outcome gradient_fidelity() {
  using namespace ruka::nn;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  std::uniform_int_distribution<std::size_t> depth(1, 3);
  std::uniform_int_distribution<std::size_t> len(1, 6);
  double worst = 0.0;
  int shapes = 0;
  auto check = [&](std::vector<Tensor2*> values, std::vector<Tensor2*> grads, const std::function<double()>& loss) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      worst = std::max(worst, oracle::max_relative_error(*grads[i], oracle::numeric_gradient(*values[i], loss)));
    }
  };

  // dense stacks with ReLU under the MSE loss, inputs included
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> widths{dim(rng)};
    for (std::size_t l = depth(rng); l > 0; --l) widths.push_back(dim(rng));
    const std::size_t batch = dim(rng);
    Mlp m = init_mlp(widths, rng);
    Tensor2 x = oracle::random_tensor(batch, widths.front(), rng);
    const Tensor2 target = oracle::random_tensor(batch, widths.back(), rng);
    auto loss = [&] { return mse_loss(mlp_forward(m, x), target); };
    MlpTrace trace;
    Tensor2 dy;
    mse_loss(mlp_forward(m, x, &trace), target, &dy);
    Mlp g = zeros_like(m);
    Tensor2 dx = mlp_backward(m, trace, dy, g);
    auto values = parameters(m);
    auto grads = parameters(g);
    values.push_back(&x);
    grads.push_back(&dx);
    check(values, grads, loss);
    ++shapes;
  }

  // LSTM over a sequence, MLP head on the final hidden state
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = dim(rng), hidden = dim(rng), out = dim(rng), batch = dim(rng), steps = len(rng);
    LstmParams p = init_lstm(in, hidden, rng);
    fill_uniform(p.bias, 0.5, rng);
    const std::size_t widths[] = {hidden, dim(rng), out};
    Mlp head = init_mlp(widths, rng);
    std::vector<Tensor2> seq;
    for (std::size_t t = 0; t < steps; ++t) seq.push_back(oracle::random_tensor(batch, in, rng));
    const Tensor2 target = oracle::random_tensor(batch, out, rng);
    auto loss = [&] { return mse_loss(mlp_forward(head, lstm_forward(p, seq).final_hidden()), target); };
    const auto fwd = lstm_forward(p, seq);
    MlpTrace trace;
    Tensor2 dy;
    mse_loss(mlp_forward(head, fwd.final_hidden(), &trace), target, &dy);
    Mlp hg = zeros_like(head);
    const Tensor2 dh = mlp_backward(head, trace, dy, hg);
    LstmParams lg = zeros_like(p);
    auto dx = lstm_backward(p, fwd.cache, dh, lg);
    auto values = parameters(p);
    auto grads = parameters(lg);
    for (auto* v : parameters(head)) values.push_back(v);
    for (auto* g : parameters(hg)) grads.push_back(g);
    for (std::size_t t = 0; t < steps; ++t) {
      values.push_back(&seq[t]);
      grads.push_back(&dx[t]);
    }
    check(values, grads, loss);
    ++shapes;
  }
  const double s = seconds_since(t0);
  return {shapes >= 20 && worst < 1e-4 && s < 60.0,
          "max relative error " + fmt(worst) + " over " + std::to_string(shapes) + " shapes (< 1e-4, >= 20) in " +
              fmt(s) + " s (< 60 s)"};
}

// ---------------------------------------------------------------- hand model

Outcome fk_ik_round_trip() {
  const HandGeometry g = default_geometry();
  std::mt19937_64 rng(21);
  double worst = 0.0;
  const int poses = 10000;
  for (int trial = 0; trial < poses; ++trial) {
    JointState js;
    for (std::size_t i = 0; i < kNumJoints; ++i) js.deg[i] = std::uniform_real_distribution<double>(0.0, g.limits_deg[i])(rng);
    const JointState back = joint_angles_from_keypoints(forward_kinematics(g, js), g);
    for (std::size_t i = 0; i < kNumJoints; ++i) worst = std::max(worst, std::abs(back.deg[i] - js.deg[i]));
  }
  return {worst < 1e-6, "max joint error " + fmt(worst) + " deg over " + std::to_string(poses) + " poses (< 1e-6)"};
}

// ---------------------------------------------------------------- controllers

Outcome search_equals_brute_force() {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> target(-4.0, 4.0);
  int exact = 0, queries = 0;
  // linear and one-hidden-layer toys on a two-motor finger and the three-motor thumb
  const std::tuple<Finger, std::size_t, std::size_t> cases[] = {
      {Finger::Index, 0, 50}, {Finger::Ring, 8, 50}, {Finger::Thumb, 8, 20}, {Finger::Thumb, 0, 20}};
  for (const auto& [finger, hidden, points] : cases) {
    const std::size_t motors = motor_count(finger);
    const oracle::ToyForward toy = oracle::random_toy(motors, hidden, rng);
    const Controller ctl(oracle::search_toy(finger, toy, points));
    for (int q = 0; q < 25; ++q, ++queries) {
      const FingerState t{target(rng), target(rng), target(rng)};
      exact += search_predict(ctl, t) == oracle::brute_force_search(toy, motors, points, t) ? 1 : 0;
    }
  }
  return {exact == queries && queries == 100,
          std::to_string(exact) + "/" + std::to_string(queries) + " targets match exhaustive grid minimisation"};
}

// ---------------------------------------------------------------- calibration

Outcome calibration_spread() {
  const PlantConfig plant = default_plant_config();
  std::array<double, kNumMotors> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (std::uint64_t run = 1; run <= 10; ++run) {
    CalibrationOptions opts;
    opts.seed = run;
    const auto r = calibrate(plant, default_geometry(), opts);
    for (std::size_t m = 0; m < kNumMotors; ++m) {
      lo[m] = std::min(lo[m], r.ranges.max[m]);
      hi[m] = std::max(hi[m], r.ranges.max[m]);
    }
  }
  double worst = 0.0;
  std::size_t motor = 0;
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    if (hi[m] - lo[m] > worst) {
      worst = hi[m] - lo[m];
      motor = m;
    }
  }
  return {worst <= 0.5, "largest max-range spread over 10 runs " + fmt(worst) + " deg on motor " +
                            std::to_string(motor) + " (<= 0.5)"};
}

// ---------------------------------------------------------------- opposition

Outcome opposition(const HandGeometry& g, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto cloud = fingertip_intersection(g, kOppositionSamples, seed);
  const double s = seconds_since(t0);
  bool all = true;
  std::string counts;
  for (std::size_t pair = 0; pair < 4; ++pair) {
    all = all && !cloud.thumb_tips[pair].empty();
    counts += (pair ? ", " : "") + std::string(finger_name(kAllFingers[pair + 1])) + " " +
              std::to_string(cloud.thumb_tips[pair].size());
  }
  return {all && s < 300.0, std::to_string(kOppositionSamples) + " samples, contacts " + counts + ", " + fmt(s) +
                                " s (< 300 s)"};
}

// ---------------------------------------------------------------- pipeline

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path());
  }
  return out;
}

struct PipelineRun {
  EvaluationSummary summary;
  std::array<std::size_t, kNumFingers> samples{};
  double seconds = 0.0;
};

PipelineRun run_pipeline(RunDir& run, const PipelineConfig& c) {
  const auto t0 = Clock::now();
  PipelineRun out;
  run_calibrate(run, c);
  const auto data = run_gen_data(run, c);
  for (Finger f : kAllFingers) out.samples[index_of(f)] = data[index_of(f)].samples.size();
  run_train(run, c);
  out.summary = run_evaluate(run, c);
  out.seconds = seconds_since(t0);
  return out;
}

const EvalReport& report_for(const EvaluationSummary& s, std::string_view kind, ValidationKind set) {
  for (const auto& r : s.reports) {
    if (r.controller == kind && r.set_kind == set) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "no report for " + std::string(kind));
}

Outcome robot_accuracy(const PipelineRun& p) {
  const EvalReport& seq = report_for(p.summary, "sequence", ValidationKind::Robot);
  const auto& thumb = seq.thumb().axis_cm;
  const auto pooled = seq.pooled().axis_cm;
  bool ok = true;
  for (std::size_t a = 0; a < 3; ++a) ok = ok && thumb[a] < 0.5 && pooled[a] < 0.5;
  std::size_t total = 0;
  for (auto n : p.samples) total += n;
  const bool fast = p.seconds < 1800.0;
  return {ok && fast, "sequence thumb per-axis " + axes(thumb) + " cm, all fingers " + axes(pooled) +
                          " cm (< 0.5); pipeline over " + std::to_string(p.samples[0]) + " + 4x" +
                          std::to_string(p.samples[1]) + " = " + std::to_string(total) + " samples in " +
                          fmt(p.seconds / 60.0) + " min (< 30)"};
}

Outcome table_robot(const PipelineRun& p) {
  bool ok = true;
  std::string detail = "thumb mean cm:";
  for (const char* k : {"sequence", "mlp", "knn", "search"}) {
    const auto& t = report_for(p.summary, k, ValidationKind::Robot).thumb();
    for (double a : t.axis_cm) ok = ok && a < 0.5;
    detail += std::string(" ") + k + " " + fmt(t.mean_cm());
  }
  return {ok, detail + " (every axis < 0.5)"};
}

Outcome table_human(const PipelineRun& p) {
  auto mean = [&](const char* k) { return report_for(p.summary, k, ValidationKind::HumanLike).thumb().mean_cm(); };
  const double seq = mean("sequence"), mlp = mean("mlp"), knn = mean("knn"), search = mean("search");
  const double floor = std::max(seq, knn);
  const bool ok = mlp > floor && search > floor && seq < knn;
  return {ok, "thumb mean cm: sequence " + fmt(seq) + ", mlp " + fmt(mlp) + ", knn " + fmt(knn) + ", search " +
                  fmt(search) + " (need mlp, search > max(sequence, knn) and sequence < knn)"};
}

Outcome transfer(const RunDir& run, const PipelineConfig& c) {
  const CalibrationResult cal = load_calibration(run, c);
  const HandController hand = load_trained(run, ControllerKind::Sequence, cal);
  const ValidationSet probes = make_robot_validation(c.plant, c.geometry, cal.ranges, 200, stage_seeds(c.seed).robot_set + 1);
  double worst_after = 0.0;
  double best_stale = std::numeric_limits<double>::infinity();
  bool worse = true;
  for (std::uint64_t build = 1; build <= 5; ++build) {
    const PlantConfig rebuilt = perturb_build(c.plant, 0.1, build);
    const CalibrationResult recal = calibrate(rebuilt, c.geometry, c.calibration);
    const double after = transfer_report(hand, {c.plant, cal}, {rebuilt, recal}, probes, c.geometry).mean_mm();
    const double stale = transfer_discrepancy(hand, probes, c.geometry, c.plant, cal.ranges, rebuilt, cal.ranges).mean_mm();
    worst_after = std::max(worst_after, after);
    best_stale = std::min(best_stale, stale);
    worse = worse && stale > after;
  }
  return {worst_after <= 3.0 && worse, "5 rebuilds at 0.1: recalibrated worst " + fmt(worst_after) +
                                           " mm (<= 3), without recalibration best " + fmt(best_stale) +
                                           " mm (strictly worse on every rebuild: " + (worse ? "yes" : "no") + ")"};
}

Outcome determinism(const fs::path& first_dir, RunDir& second, RunDir& first, const PipelineConfig& c) {
  const auto reference = snapshot(first_dir);
  // every stage again in place, then the whole pipeline in a fresh directory
  run_pipeline(first, c);
  run_pipeline(second, c);
  std::size_t differing = 0;
  std::string example;
  for (const fs::path* dir : {&first_dir, &second.root()}) {
    const auto now = snapshot(*dir);
    if (now.size() != reference.size()) ++differing;
    for (const auto& [name, bytes] : reference) {
      const auto it = now.find(name);
      if (it == now.end() || it->second != bytes) {
        ++differing;
        if (example.empty()) example = name;
      }
    }
  }
  return {differing == 0, std::to_string(reference.size()) + " artifacts compared after an in-place re-run and a fresh-directory run, " +
                              std::to_string(differing) + " differ" + (example.empty() ? "" : " (first: " + example + ")")};
}

// ---------------------------------------------------------------- service

// Teleop frames replayed from the robot recording, re-stamped so they
// cycle without end.
struct FrameCycle {
  std::vector<TeleopFrame> frames;
  std::size_t next = 0;
  TeleopFrame take(double t_ms) {
    TeleopFrame f = frames[next++ % frames.size()];
    f.timestamp_ms = t_ms;
    f.source = FrameSource::Ui;
    f.segment = 0;
    f.desired.reset();
    return f;
  }
};

Outcome service_rate(Session session, const ServiceConfig& cfg, bool direct, FrameCycle& frames, double duration_s) {
  const double target_hz = direct ? cfg.direct_rate_hz : cfg.teleop_rate_hz;
  const MotorRanges ranges = session.calibration().ranges;
  ControlService service(std::move(session), cfg);
  std::mt19937_64 rng(23);
  auto motor_target = [&](double t_ms) {
    MotorTarget m;
    m.timestamp_ms = t_ms;
    for (std::size_t i = 0; i < kNumMotors; ++i) {
      m.command.deg[i] = std::uniform_real_distribution<double>(ranges.min[i], ranges.max[i])(rng);
    }
    return m;
  };
  // the first target is queued before the loop starts so every tick runs in the measured mode
  if (direct) service.submit(motor_target(0.0));
  else service.submit(frames.take(0.0));
  service.start();
  const auto t0 = Clock::now();
  const auto period = std::chrono::duration<double>(1.0 / target_hz);
  std::size_t sent = 1;
  while (seconds_since(t0) < duration_s) {
    std::this_thread::sleep_until(t0 + sent * period);
    const double t_ms = 1000.0 * static_cast<double>(sent) / target_hz;
    if (direct) service.submit(motor_target(t_ms));
    else service.submit(frames.take(t_ms));
    ++sent;
  }
  service.stop();
  const LoopStats s = summarize_ticks(service.ticks(), duration_s);
  const ControlMode mode = direct ? ControlMode::Direct : ControlMode::Teleop;
  const bool rate_ok = s.rate_hz >= 0.99 * target_hz && s.window_s >= 0.99 * duration_s;
  const bool ok = rate_ok && s.p99_within_period() && std::abs(s.period_ms - 1000.0 / target_hz) < 1e-9;
  return {ok, std::string(control_mode_name(mode)) + ": " + std::to_string(s.ticks) + " ticks, " + fmt(s.rate_hz, 6) +
                  " Hz over " + fmt(s.window_s, 4) + " s (>= " + fmt(0.99 * target_hz) + "), p99 " + fmt(s.p99_ms) +
                  " ms of " + fmt(s.period_ms) + " ms period, max " + fmt(s.max_ms) + " ms, " +
                  std::to_string(s.missed) + " ticks late, " + std::to_string(sent) + " targets sent"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-scale acceptance checks"};
  std::string work = (fs::temp_directory_path() / "ruka_acceptance").string();
  bool keep = false;
  double service_s = 60.0;
  app.add_option("--work", work, "Scratch directory for the two pipeline runs")->capture_default_str();
  app.add_flag("--keep", keep, "Keep the run directories");
  app.add_option("--service-seconds", service_s, "Duration of each service-rate run")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::cout << "kernels: " << simd::active_kernels().name << std::endl;
  Ledger ledger;
  const PipelineConfig config = default_pipeline_config();

  ledger.run("gradient fidelity", gradient_fidelity);
  ledger.run("fk/ik round trip", fk_ik_round_trip);
  ledger.run("search equals brute force", search_equals_brute_force);
  ledger.run("calibration repeatability", calibration_spread);
  ledger.run("opposition coverage", [&] { return opposition(config.geometry, stage_seeds(config.seed).opposition); });

  const fs::path first_dir = fs::path(work) / "first";
  const fs::path second_dir = fs::path(work) / "second";
  fs::remove_all(work);
  RunDir first(first_dir);
  std::optional<PipelineRun> pipeline;
  try {
    pipeline = run_pipeline(first, config);
  } catch (const std::exception& e) {
    std::cout << "pipeline failed: " << e.what() << std::endl;
  }
  auto needs_pipeline = [&](const std::string& name, const std::function<Outcome()>& check) {
    if (pipeline) ledger.run(name, check);
    else ledger.record(name, {false, "pipeline did not complete"});
  };
  needs_pipeline("robot-validation accuracy", [&] { return robot_accuracy(*pipeline); });
  needs_pipeline("ordering, robot set", [&] { return table_robot(*pipeline); });
  needs_pipeline("ordering, human-like set", [&] { return table_human(*pipeline); });
  needs_pipeline("transfer", [&] { return transfer(first, config); });

  needs_pipeline("service rate, teleop", [&] {
    FrameCycle cycle{read_teleop_file(first.path("recordings/robot.ndjson"))};
    return service_rate(make_session(first, config, ControllerKind::Sequence), config.service, false, cycle, service_s);
  });
  needs_pipeline("service rate, direct", [&] {
    FrameCycle unused;
    return service_rate(make_session(first, config, ControllerKind::Sequence), config.service, true, unused, service_s);
  });

  needs_pipeline("determinism", [&] {
    RunDir second(second_dir);
    return determinism(first_dir, second, first, config);
  });

  if (!keep) fs::remove_all(work);
  std::cout << "acceptance: " << ledger.total() - ledger.failed() << "/" << ledger.total() << " passed" << std::endl;
  return ledger.failed();
}
