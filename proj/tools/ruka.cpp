// ruka: command-line driver for the tendon-hand pipeline.
//
//   ruka calibrate --run-dir run
//   ruka gen-data  --run-dir run
//   ruka train     --run-dir run [--kind sequence]
//   ruka evaluate  --run-dir run
//   ruka serve     --run-dir run [--port 8080] [--duration 60]
//   ruka replay    --run-dir run recordings/robot.ndjson [--kind sequence] [--realtime]
//
// Every command takes --seed, --config and --run-dir. Without --config the
// configuration stored in the run directory (or the default) is used.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "ruka/pipeline.hpp"

namespace {

using namespace ruka;

std::atomic<bool> g_interrupted{false};

struct CommonOptions {
  std::string run_dir = "run";
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--run-dir", o.run_dir, "Run directory for artifacts and the manifest")->capture_default_str();
  cmd->add_option("--config", o.config, "Pipeline configuration (JSON); sections left out keep their defaults");
  cmd->add_option("--seed", o.seed, "Master seed; every stage seed is derived from it");
}

PipelineConfig resolve_config(const CommonOptions& o, const RunDir& run) {
  PipelineConfig c;
  if (!o.config.empty()) {
    const auto j = nlohmann::json::parse(read_text_file(o.config), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, o.config + " is not valid JSON");
    c = j.get<PipelineConfig>();
  } else if (auto stored = run.stored_config()) {
    c = *stored;
  } else {
    c = default_pipeline_config();
  }
  if (o.seed) c.seed = *o.seed;
  return resolve_seeds(c);
}

ControllerKind kind_or(const std::string& name, const RunDir& run) {
  if (!name.empty()) return kind_from_name(name);
  const auto kinds = trained_kinds(run);
  if (kinds.empty()) throw Error(ErrorCode::DigestMissing, "no trained controllers; run `train` first");
  return kinds.front();
}

void print_stats(std::ostream& out, const LoopStats& s) {
  out << "loop: " << s.ticks << " ticks, " << format_double(s.rate_hz) << " Hz over " << format_double(s.window_s)
      << " s, p99 " << format_double(s.p99_ms) << " ms of " << format_double(s.period_ms) << " ms period, " << s.missed
      << " missed, " << s.coalesced << " coalesced, " << s.rejected << " rejected\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tendon-hand learned-control workbench"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* calibrate_cmd = app.add_subcommand("calibrate", "Find each motor's usable range on the configured plant");
  auto* gen_cmd = app.add_subcommand("gen-data", "Collect per-finger random-walk datasets over the calibrated ranges");
  auto* train_cmd = app.add_subcommand("train", "Train controllers on the collected datasets");
  auto* eval_cmd = app.add_subcommand("evaluate", "Score trained controllers on the robot and human-like sets");
  auto* serve_cmd = app.add_subcommand("serve", "Run the live control loop behind the HTTP service");
  auto* replay_cmd = app.add_subcommand("replay", "Replay a teleop frame file and score it");
  for (auto* cmd : {calibrate_cmd, gen_cmd, train_cmd, eval_cmd, serve_cmd, replay_cmd}) add_common(cmd, common);

  std::vector<std::string> train_kinds;
  train_cmd->add_option("--kind", train_kinds, "Controller kinds (sequence, mlp, knn, search); default: configured kinds");

  std::string serve_kind, host = "127.0.0.1";
  int port = 8080;
  double duration_s = 0.0;
  serve_cmd->add_option("--kind", serve_kind, "Active controller at start; default: first trained");
  serve_cmd->add_option("--host", host, "Address to bind")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port to bind (0 picks a free one)")->capture_default_str();
  serve_cmd->add_option("--duration", duration_s, "Stop after this many seconds (0: until interrupted)");

  std::string replay_file, replay_kind;
  bool realtime = false;
  replay_cmd->add_option("file", replay_file, "Teleop frame file (one JSON frame per line)")->required();
  replay_cmd->add_option("--kind", replay_kind, "Controller kind; default: first trained");
  replay_cmd->add_flag("--realtime", realtime, "Release frames at their recorded timestamps");

  CLI11_PARSE(app, argc, argv);

  try {
    RunDir run(common.run_dir);
    const PipelineConfig config = resolve_config(common, run);

    if (calibrate_cmd->parsed()) {
      const auto cal = run_calibrate(run, config);
      std::cout << "calibrated " << kNumMotors << " motors, digest " << calibration_digest(cal) << "\n";
      for (std::size_t m = 0; m < kNumMotors; ++m) {
        std::cout << "  motor " << m << ": " << format_double(cal.ranges.min[m]) << " .. "
                  << format_double(cal.ranges.max[m]) << " deg\n";
      }
    } else if (gen_cmd->parsed()) {
      const auto data = run_gen_data(run, config);
      for (const auto& d : data) {
        std::cout << finger_name(d.finger) << ": " << d.samples.size() << " samples, digest " << dataset_digest(d)
                  << "\n";
      }
    } else if (train_cmd->parsed()) {
      std::vector<ControllerKind> kinds;
      for (const auto& k : train_kinds) kinds.push_back(kind_from_name(k));
      for (const auto& hand : run_train(run, config, kinds)) {
        std::cout << kind_name(hand.kind) << ": digest " << hand.digest() << ", held-out loss";
        for (Finger f : kAllFingers) std::cout << ' ' << format_double(hand.finger(f).checkpoint().holdout_loss);
        std::cout << "\n";
      }
    } else if (eval_cmd->parsed()) {
      run_evaluate(run, config);
      std::cout << read_text_file(run.path("reports/evaluation.txt"));
    } else if (serve_cmd->parsed()) {
      const auto kind = serve_kind.empty() ? std::optional<ControllerKind>{} : kind_from_name(serve_kind);
      ControlService service(make_session(run, config, kind), config.service);
      HttpService http(service);
      service.start();
      const int bound = http.start(host, port);
      std::cout << "serving on http://" << host << ":" << bound << std::endl;
      std::signal(SIGINT, [](int) { g_interrupted = true; });
      std::signal(SIGTERM, [](int) { g_interrupted = true; });
      const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(duration_s);
      while (!g_interrupted && (duration_s <= 0.0 || std::chrono::steady_clock::now() < until)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      http.stop();
      service.stop();
      print_stats(std::cout, service.stats());
    } else if (replay_cmd->parsed()) {
      const EvalReport r = run_replay(run, config, replay_file, kind_or(replay_kind, run), realtime);
      if (r.tip_errors_mm.empty()) {
        std::cout << "no scored frames in " << replay_file << "\n";
      } else {
        print_report(std::cout, r);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
