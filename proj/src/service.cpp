#include "ruka/service.hpp"

#include <algorithm>
#include <cmath>

namespace ruka {
namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

std::string_view control_mode_name(ControlMode m) {
  switch (m) {
    case ControlMode::Idle: return "idle";
    case ControlMode::Teleop: return "teleop";
    case ControlMode::Direct: return "direct";
  }
  return "idle";
}

void to_json(nlohmann::json& j, const ServiceConfig& c) {
  j = {{"teleop_rate_hz", c.teleop_rate_hz},
       {"direct_rate_hz", c.direct_rate_hz},
       {"ring_capacity", c.ring_capacity},
       {"stats_capacity", c.stats_capacity},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ServiceConfig& c) {
  const ServiceConfig d;
  c.teleop_rate_hz = j.value("teleop_rate_hz", d.teleop_rate_hz);
  c.direct_rate_hz = j.value("direct_rate_hz", d.direct_rate_hz);
  c.ring_capacity = j.value("ring_capacity", d.ring_capacity);
  c.stats_capacity = j.value("stats_capacity", d.stats_capacity);
  c.seed = j.value("seed", d.seed);
  if (!(c.teleop_rate_hz > 0.0) || !(c.direct_rate_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "loop rates must be positive");
  }
  if (c.ring_capacity == 0 || c.stats_capacity == 0) throw Error(ErrorCode::InvalidArgument, "buffers must be non-empty");
}

nlohmann::json to_json(const LoopStats& s) {
  return {{"ticks", s.ticks},       {"missed", s.missed},     {"coalesced", s.coalesced},
          {"rejected", s.rejected}, {"period_ms", s.period_ms}, {"rate_hz", s.rate_hz},
          {"window_s", s.window_s}, {"p50_ms", s.p50_ms},     {"p99_ms", s.p99_ms},
          {"max_ms", s.max_ms},     {"p99_within_period", s.p99_within_period()}};
}

LoopStats summarize_ticks(const std::vector<TickRecord>& ticks, double min_window_s) {
  LoopStats s;
  s.ticks = ticks.size();
  if (ticks.empty()) return s;
  std::vector<double> busy;
  busy.reserve(ticks.size());
  for (const auto& t : ticks) {
    busy.push_back(t.lateness_ms + t.compute_ms);
    if (t.missed()) ++s.missed;
    s.max_ms = std::max(s.max_ms, busy.back());
  }
  s.p50_ms = percentile(busy, 0.50);
  s.p99_ms = percentile(busy, 0.99);
  s.period_ms = ticks.back().period_ms;
  // rate over the shortest trailing window of at least min_window_s (or everything recorded)
  const double end = ticks.back().start_ms;
  std::size_t first = ticks.size() - 1;
  while (first > 0 && end - ticks[first].start_ms < 1000.0 * min_window_s) --first;
  const double span = end - ticks[first].start_ms;
  s.window_s = span / 1000.0;
  if (span > 0.0) s.rate_hz = static_cast<double>(ticks.size() - 1 - first) / s.window_s;
  return s;
}

nlohmann::json reading_json(const SensorReading& r, std::uint64_t seq, ControlMode mode, std::string_view controller) {
  nlohmann::json keypoints = nlohmann::json::array();
  for (const auto& finger : r.keypoints.points) {
    for (const Vec3& p : finger) keypoints.push_back(vec3_json(p));
  }
  nlohmann::json tips = nlohmann::json::array();
  for (const Vec3& t : r.fingertips.tips) tips.push_back(vec3_json(t));
  return {{"schema", 1},
          {"type", "reading"},
          {"seq", seq},
          {"t_ms", r.timestamp_ms},
          {"mode", control_mode_name(mode)},
          {"controller", controller},
          {"fingertips_mm", tips},
          {"joints_deg", r.joints.deg},
          {"commanded_deg", r.commanded.deg},
          {"actual_deg", r.actual.deg},
          {"keypoints_mm", keypoints}};
}

// ---------------------------------------------------------------- session

Session::Session(ControllerSet controllers, ControllerKind active, PlantConfig plant, HandGeometry geometry,
                 CalibrationResult calibration, std::uint64_t seed)
    : controllers_(std::move(controllers)),
      active_(active),
      plant_(std::move(plant)),
      geometry_(std::move(geometry)),
      calibration_(std::move(calibration)),
      sensors_(plant_, geometry_, seed) {
  if (!controllers_.contains(active_)) {
    throw Error(ErrorCode::InvalidArgument, "no " + std::string(kind_name(active_)) + " controller loaded");
  }
  require_calibrated(calibration_, plant_, geometry_);
  command_ = calibration_.ranges.minimum();
}

void Session::apply(const TeleopFrame& f) {
  if (segment_ && *segment_ != f.segment) history_.clear();
  segment_ = f.segment;
  history_.push(f);
  mode_ = ControlMode::Teleop;
}

void Session::apply(const MotorTarget& t) {
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    const double v = t.command.deg[m];
    if (v < plant_.hardware_min_deg[m] || v > plant_.hardware_max_deg[m]) {
      throw Error(ErrorCode::ActuationLimit, "motor " + std::to_string(m) + " command outside hardware bounds");
    }
  }
  command_ = t.command;
  history_.clear();
  segment_.reset();
  mode_ = ControlMode::Direct;
}

void Session::select(ControllerKind kind) {
  if (!controllers_.contains(kind)) {
    throw Error(ErrorCode::InvalidArgument, "no " + std::string(kind_name(kind)) + " controller loaded");
  }
  active_ = kind;
}

void Session::set_calibration(CalibrationResult calibration) {
  require_calibrated(calibration, plant_, geometry_);
  calibration_ = std::move(calibration);
  if (mode_ == ControlMode::Idle) command_ = calibration_.ranges.minimum();
}

SensorReading Session::tick(double t_ms) {
  if (mode_ == ControlMode::Teleop) command_ = history_.command(controller(), calibration_.ranges);
  return sensors_.read(command_, t_ms);
}

// ---------------------------------------------------------------- control loop

ControlService::ControlService(Session session, ServiceConfig config)
    : session_(std::move(session)),
      config_(config),
      plant_digest_(plant_digest(session_.plant())),
      geometry_digest_(geometry_digest(session_.geometry())),
      initial_options_(session_.calibration().options),
      ring_(config.ring_capacity) {
  if (!(config_.teleop_rate_hz > 0.0) || !(config_.direct_rate_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "loop rates must be positive");
  }
  published_.kind = session_.active();
  published_.controller_digest = session_.controller().digest();
  published_.calibration_digest = calibration_digest(session_.calibration());
}

ControlService::~ControlService() {
  stop();
  if (calibration_thread_.joinable()) calibration_thread_.join();
}

double ControlService::period_ms(ControlMode mode) const {
  return 1000.0 / (mode == ControlMode::Direct ? config_.direct_rate_hz : config_.teleop_rate_hz);
}

void ControlService::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { loop(); });
}

void ControlService::stop() {
  if (!running_.exchange(false)) return;
  if (thread_.joinable()) thread_.join();
  published_cv_.notify_all();
}

void ControlService::loop() {
  const Clock::time_point t0 = Clock::now();
  Clock::time_point deadline = t0;
  while (running_) {
    std::this_thread::sleep_until(deadline);
    const Clock::time_point wake = Clock::now();

    SensorReading reading;
    std::optional<std::string> new_calibration;
    try {
      if (auto kind = selection_.take()) session_.select(*kind);
      if (auto cal = calibrations_.take()) {
        session_.set_calibration(std::move(*cal));
        new_calibration = calibration_digest(session_.calibration());
      }
      if (auto target = targets_.take()) std::visit([this](const auto& t) { session_.apply(t); }, *target);
      reading = session_.tick(ms_between(t0, wake));
    } catch (const std::exception&) {
      // requests are validated on submission; a failure here drops the update, never the loop
      ++rejected_;
      reading = session_.tick(ms_between(t0, wake));
    }
    const ControlMode mode = session_.mode();
    const double period = period_ms(mode);
    nlohmann::json doc = reading_json(reading, published_.seq + 1, mode, kind_name(session_.active()));

    const Clock::time_point done = Clock::now();
    const TickRecord rec{ms_between(t0, wake), ms_between(deadline, wake), ms_between(wake, done), period};
    {
      std::lock_guard lock(publish_mutex_);
      ++published_.seq;
      published_.mode = mode;
      if (published_.kind != session_.active()) {
        published_.kind = session_.active();
        published_.controller_digest = session_.controller().digest();
      }
      if (new_calibration) published_.calibration_digest = *new_calibration;
      published_.reading = std::move(doc);
      ring_.push(reading);
      ticks_.push_back(rec);
      if (ticks_.size() > config_.stats_capacity) ticks_.pop_front();
    }
    published_cv_.notify_all();

    deadline += std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(period));
    // after a long stall, resume on schedule instead of bursting through the backlog
    if (Clock::now() > deadline + std::chrono::duration_cast<Clock::duration>(
                                      std::chrono::duration<double, std::milli>(period))) {
      deadline = Clock::now();
    }
  }
}

void ControlService::accept_timestamp(double t_ms) {
  if (last_timestamp_ && !(t_ms > *last_timestamp_)) {
    ++rejected_;
    throw Error(ErrorCode::TimestampDisorder,
                "timestamp " + format_double(t_ms) + " does not follow " + format_double(*last_timestamp_));
  }
  last_timestamp_ = t_ms;
}

void ControlService::submit(const TeleopFrame& f) {
  std::lock_guard lock(submit_mutex_);
  accept_timestamp(f.timestamp_ms);
  targets_.put(f);
}

void ControlService::submit(const MotorTarget& t) {
  const PlantConfig& p = session_.plant();
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    if (t.command.deg[m] < p.hardware_min_deg[m] || t.command.deg[m] > p.hardware_max_deg[m]) {
      ++rejected_;
      throw Error(ErrorCode::ActuationLimit, "motor " + std::to_string(m) + " command outside hardware bounds");
    }
  }
  std::lock_guard lock(submit_mutex_);
  accept_timestamp(t.timestamp_ms);
  targets_.put(t);
}

void ControlService::submit_json(const nlohmann::json& body) {
  try {
    if (body.is_object() && body.value("type", std::string()) == "motors") {
      submit(motor_target_from_json(body));
    } else {
      submit(teleop_frame_from_json(body));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedFrame) ++rejected_;
    throw;
  }
}

void ControlService::select_controller(ControllerKind kind) {
  if (!session_.controllers().contains(kind)) {
    throw Error(ErrorCode::InvalidArgument, "no " + std::string(kind_name(kind)) + " controller loaded");
  }
  selection_.put(kind);
}

bool ControlService::trigger_calibration(const CalibrationOptions& options) {
  std::lock_guard lock(calibration_mutex_);
  if (calibration_state_ == "running") return false;
  if (calibration_thread_.joinable()) calibration_thread_.join();
  calibration_state_ = "running";
  calibration_error_.clear();
  // plant and geometry are never modified after construction, so the copies are safe to take here
  calibration_thread_ = std::thread([this, options, plant = session_.plant(), geometry = session_.geometry()] {
    try {
      CalibrationResult r = calibrate(plant, geometry, options);
      calibrations_.put(r);
      std::lock_guard l(calibration_mutex_);
      calibration_result_ = std::move(r);
      calibration_state_ = "done";
    } catch (const std::exception& e) {
      std::lock_guard l(calibration_mutex_);
      calibration_error_ = e.what();
      calibration_state_ = "failed";
    }
  });
  return true;
}

void ControlService::wait_calibration() {
  std::thread t;
  {
    std::lock_guard lock(calibration_mutex_);
    t.swap(calibration_thread_);
  }
  if (t.joinable()) t.join();
}

nlohmann::json ControlService::calibration_status() const {
  std::lock_guard lock(calibration_mutex_);
  nlohmann::json j = {{"schema", 1}, {"type", "calibration"}, {"state", calibration_state_}};
  if (!calibration_error_.empty()) j["error"] = calibration_error_;
  if (calibration_result_) {
    const std::string digest = calibration_digest(*calibration_result_);
    bool matches = true;
    for (const auto& [kind, hand] : session_.controllers()) {
      for (Finger f : kAllFingers) {
        const auto& trained = hand.finger(f).checkpoint().calibration_digest;
        if (!trained.empty() && trained != digest) matches = false;
      }
    }
    j["calibration"] = *calibration_result_;
    j["digest"] = digest;
    j["matches_controllers"] = matches;
  }
  return j;
}

std::vector<TickRecord> ControlService::ticks() const {
  std::lock_guard lock(publish_mutex_);
  return {ticks_.begin(), ticks_.end()};
}

LoopStats ControlService::stats() const {
  LoopStats s = summarize_ticks(ticks());
  s.coalesced = targets_.coalesced();
  s.rejected = rejected_;
  return s;
}

std::vector<SensorReading> ControlService::recent(std::size_t n) const {
  std::lock_guard lock(publish_mutex_);
  return ring_.last(n);
}

std::uint64_t ControlService::latest_seq() const {
  std::lock_guard lock(publish_mutex_);
  return published_.seq;
}

std::optional<std::pair<std::uint64_t, nlohmann::json>> ControlService::next_reading(
    std::uint64_t after_seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(publish_mutex_);
  const bool ready =
      published_cv_.wait_for(lock, timeout, [&] { return published_.seq > after_seq || !running_; });
  if (!ready || published_.seq <= after_seq) return std::nullopt;
  return std::make_pair(published_.seq, published_.reading);
}

nlohmann::json ControlService::state_json(std::size_t last_n) const {
  Published snapshot;
  std::vector<SensorReading> readings;
  {
    std::lock_guard lock(publish_mutex_);
    snapshot.seq = published_.seq;
    snapshot.mode = published_.mode;
    snapshot.kind = published_.kind;
    snapshot.controller_digest = published_.controller_digest;
    snapshot.calibration_digest = published_.calibration_digest;
    readings = ring_.last(last_n);
  }
  nlohmann::json recent = nlohmann::json::array();
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const std::uint64_t seq = snapshot.seq - (readings.size() - 1 - i);
    recent.push_back(reading_json(readings[i], seq, snapshot.mode, kind_name(snapshot.kind)));
  }
  return {{"schema", 1},
          {"type", "state"},
          {"running", running_.load()},
          {"mode", control_mode_name(snapshot.mode)},
          {"controller", kind_name(snapshot.kind)},
          {"controller_digest", snapshot.controller_digest},
          {"calibration_digest", snapshot.calibration_digest},
          {"plant_digest", plant_digest_},
          {"geometry_digest", geometry_digest_},
          {"seq", snapshot.seq},
          {"readings", recent},
          {"stats", to_json(stats())}};
}

nlohmann::json ControlService::configs_json() const {
  nlohmann::json controllers = nlohmann::json::object();
  for (const auto& [kind, hand] : session_.controllers()) controllers[std::string(kind_name(kind))] = hand.digest();
  std::string active, calibration;
  {
    std::lock_guard lock(publish_mutex_);
    active = kind_name(published_.kind);
    calibration = published_.calibration_digest;
  }
  return {{"schema", 1},
          {"type", "configs"},
          {"plant", session_.plant()},
          {"geometry", session_.geometry()},
          {"controllers", controllers},
          {"active_controller", active},
          {"calibration_digest", calibration},
          {"service", config_},
          {"teleop_period_ms", period_ms(ControlMode::Teleop)},
          {"direct_period_ms", period_ms(ControlMode::Direct)}};
}

}  // namespace ruka
