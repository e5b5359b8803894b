#pragma once

// Live teleoperation service: one control-loop thread owns the plant and runs at
// a fixed rate; request handlers talk to it through a latest-wins mailbox and
// read published state without blocking it.
//
// HTTP endpoints (JSON bodies, every document carries "schema":1 and a "type"):
//   GET  /state      session state, recent readings (?n=), loop statistics
//   GET  /configs    plant, geometry, calibration digest, controllers, loop rates
//   POST /configs    {"controller":"knn"} switches the active controller between ticks
//   POST /target     a teleop frame, or {"schema":1,"type":"motors","t_ms":..,"motors_deg":[11]}
//   POST /calibrate  starts a calibration in the background; GET /calibrate polls it
//   GET  /stream     newline-delimited readings pushed at the control rate (?max= ends after n)
//   POST /stream     newline-delimited frames, applied as they arrive
// Rejected frames get status 422 (malformed) or 409 (out of order) with the reason.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "ruka/calibration.hpp"
#include "ruka/teleop.hpp"

namespace ruka {

enum class ControlMode { Idle, Teleop, Direct };
std::string_view control_mode_name(ControlMode m);

struct ServiceConfig {
  double teleop_rate_hz = 25.0;
  double direct_rate_hz = 40.0;
  std::size_t ring_capacity = 64;  // readings kept for /state
  std::size_t stats_capacity = 4096;  // ticks kept for latency percentiles
  std::uint64_t seed = 1;             // glove noise stream
  bool operator==(const ServiceConfig&) const = default;
};

void to_json(nlohmann::json& j, const ServiceConfig& c);
void from_json(const nlohmann::json& j, ServiceConfig& c);

/// Fixed-capacity buffer that keeps the newest `capacity` items.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorCode::InvalidArgument, "ring buffer capacity must be positive");
  }
  void push(T item) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(item));
  }
  /// The newest `n` items, oldest first.
  std::vector<T> last(std::size_t n) const {
    n = std::min(n, items_.size());
    return std::vector<T>(items_.end() - static_cast<std::ptrdiff_t>(n), items_.end());
  }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
};

/// Latest-wins single slot. A put over an unconsumed value counts as coalesced.
template <typename T>
class Mailbox {
 public:
  void put(T value) {
    std::lock_guard lock(mutex_);
    if (slot_) ++coalesced_;
    slot_ = std::move(value);
  }
  std::optional<T> take() {
    std::lock_guard lock(mutex_);
    std::optional<T> out;
    out.swap(slot_);
    return out;
  }
  std::uint64_t coalesced() const {
    std::lock_guard lock(mutex_);
    return coalesced_;
  }

 private:
  mutable std::mutex mutex_;
  std::optional<T> slot_;
  std::uint64_t coalesced_ = 0;
};

struct TickRecord {
  double start_ms = 0.0;     // since loop start
  double lateness_ms = 0.0;  // wake-up after the scheduled deadline
  double compute_ms = 0.0;   // target -> motor -> plant -> reading
  double period_ms = 0.0;
  bool missed() const { return lateness_ms + compute_ms > period_ms; }
};

struct LoopStats {
  std::uint64_t ticks = 0;
  std::uint64_t missed = 0;       // ticks that finished after the next deadline
  std::uint64_t coalesced = 0;    // targets replaced before the loop consumed them
  std::uint64_t rejected = 0;     // malformed or out-of-order submissions
  double period_ms = 0.0;
  double rate_hz = 0.0;           // ticks per second over the last window
  double window_s = 0.0;          // at least one second once the loop has run that long
  double p50_ms = 0.0;            // of lateness + compute
  double p99_ms = 0.0;
  double max_ms = 0.0;
  bool p99_within_period() const { return p99_ms <= period_ms; }
};

nlohmann::json to_json(const LoopStats& s);
/// Statistics over a tick history; percentiles of lateness + compute.
LoopStats summarize_ticks(const std::vector<TickRecord>& ticks, double min_window_s = 1.0);

nlohmann::json reading_json(const SensorReading& r, std::uint64_t seq, ControlMode mode, std::string_view controller);

/// Controllers a session may switch between, keyed by kind.
using ControllerSet = std::map<ControllerKind, HandController>;

/// What the control loop owns. Not thread-safe; the loop thread drives it.
class Session {
 public:
  Session(ControllerSet controllers, ControllerKind active, PlantConfig plant, HandGeometry geometry,
          CalibrationResult calibration, std::uint64_t seed);

  /// One control step at plant time `t_ms`: the held target (teleop or
  /// direct) becomes a command, the plant moves and the glove is read.
  SensorReading tick(double t_ms);
  void apply(const TeleopFrame& f);
  void apply(const MotorTarget& t);
  void select(ControllerKind kind);
  void set_calibration(CalibrationResult calibration);

  ControlMode mode() const { return mode_; }
  ControllerKind active() const { return active_; }
  const HandController& controller() const { return controllers_.at(active_); }
  const ControllerSet& controllers() const { return controllers_; }
  const PlantConfig& plant() const { return plant_; }
  const HandGeometry& geometry() const { return geometry_; }
  const CalibrationResult& calibration() const { return calibration_; }
  const MotorVector& last_command() const { return command_; }

 private:
  ControllerSet controllers_;
  ControllerKind active_;
  PlantConfig plant_;
  HandGeometry geometry_;
  CalibrationResult calibration_;
  SensorStream sensors_;
  TeleopHistory history_;
  std::optional<std::uint32_t> segment_;
  ControlMode mode_ = ControlMode::Idle;
  MotorVector command_;
};

/// The fixed-rate loop around a Session, plus the request-side API.
class ControlService {
 public:
  ControlService(Session session, ServiceConfig config);
  ~ControlService();
  ControlService(const ControlService&) = delete;
  ControlService& operator=(const ControlService&) = delete;

  void start();
  void stop();
  bool running() const { return running_; }

  /// Queue a target for the next tick. Throws TimestampDisorder unless the
  /// timestamp is later than the last accepted one.
  void submit(const TeleopFrame& f);
  void submit(const MotorTarget& t);
  /// Parses and submits a /target body (teleop frame or motor target).
  void submit_json(const nlohmann::json& body);
  void select_controller(ControllerKind kind);
  void count_rejection() { ++rejected_; }

  /// Starts a background calibration of the session's plant; false if one is running.
  bool trigger_calibration(const CalibrationOptions& options);
  /// Options of the calibration the session started with.
  const CalibrationOptions& calibration_options() const { return initial_options_; }
  nlohmann::json calibration_status() const;
  /// Blocks until the background calibration (if any) finishes.
  void wait_calibration();

  nlohmann::json state_json(std::size_t last_n) const;
  nlohmann::json configs_json() const;
  LoopStats stats() const;
  std::vector<TickRecord> ticks() const;
  std::vector<SensorReading> recent(std::size_t n) const;

  /// Waits for a reading newer than `after_seq`; nullopt on timeout or stop.
  std::optional<std::pair<std::uint64_t, nlohmann::json>> next_reading(std::uint64_t after_seq,
                                                                       std::chrono::milliseconds timeout) const;
  std::uint64_t latest_seq() const;

 private:
  using Target = std::variant<TeleopFrame, MotorTarget>;
  struct Published {
    std::uint64_t seq = 0;
    ControlMode mode = ControlMode::Idle;
    ControllerKind kind = ControllerKind::Sequence;
    std::string controller_digest;
    std::string calibration_digest;
    nlohmann::json reading;  // latest, serialised by the loop
  };

  void loop();
  void accept_timestamp(double t_ms);
  double period_ms(ControlMode mode) const;

  Session session_;
  const ServiceConfig config_;
  const std::string plant_digest_;
  const std::string geometry_digest_;
  const CalibrationOptions initial_options_;

  Mailbox<Target> targets_;
  Mailbox<ControllerKind> selection_;
  Mailbox<CalibrationResult> calibrations_;
  std::mutex submit_mutex_;
  std::optional<double> last_timestamp_;
  std::atomic<std::uint64_t> rejected_{0};

  mutable std::mutex publish_mutex_;
  mutable std::condition_variable published_cv_;
  Published published_;
  RingBuffer<SensorReading> ring_;
  std::deque<TickRecord> ticks_;

  mutable std::mutex calibration_mutex_;
  std::thread calibration_thread_;
  std::string calibration_state_ = "idle";
  std::string calibration_error_;
  std::optional<CalibrationResult> calibration_result_;

  std::atomic<bool> running_{false};
  std::thread thread_;
};

/// HTTP front end over a ControlService.
class HttpService {
 public:
  explicit HttpService(ControlService& service);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds and serves on a background thread; returns the bound port (0 picks one).
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ruka
