#include "ruka/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "ruka/datagen.hpp"

namespace ruka {
namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Remembers every probe so a falling response can be reported.
class ProbeLog {
 public:
  ProbeLog(const ProbeFn& probe, std::size_t motor, double tolerance)
      : probe_(probe), motor_(motor), tolerance_(tolerance) {}

  const std::vector<double>& read(double deg) {
    auto [it, inserted] = seen_.try_emplace(deg);
    if (inserted) {
      it->second = probe_(motor_, deg);
      ++count_;
      check_order(it);
    }
    return it->second;
  }
  std::size_t count() const { return count_; }

 private:
  using Map = std::map<double, std::vector<double>>;

  void check_order(Map::iterator it) {
    auto falls = [&](const std::vector<double>& lower, const std::vector<double>& upper) {
      for (std::size_t j = 0; j < lower.size(); ++j) {
        if (lower[j] - upper[j] > tolerance_) return true;
      }
      return false;
    };
    const bool bad = (it != seen_.begin() && falls(std::prev(it)->second, it->second)) ||
                     (std::next(it) != seen_.end() && falls(it->second, std::next(it)->second));
    if (bad) {
      throw Error(ErrorCode::CalibrationFailure,
                  "motor " + std::to_string(motor_) + " response falls while winding in near " +
                      format_double(it->first) + " deg");
    }
  }

  const ProbeFn& probe_;
  std::size_t motor_;
  double tolerance_;
  Map seen_;
  std::size_t count_ = 0;
};

}  // namespace

std::vector<std::size_t> joints_of_motor(std::size_t motor) {
  if (motor >= kNumMotors) throw Error(ErrorCode::InvalidArgument, "motor index out of range");
  if (motor < 3) return {motor};
  const std::size_t f = 1 + (motor - 3) / 2;
  const std::size_t j0 = 3 * f;
  if ((motor - 3) % 2 == 0) return {j0};
  return {j0 + 1, j0 + 2};
}

MotorCalibration calibrate_motor(const ProbeFn& probe, std::size_t motor, double hw_min, double hw_max,
                                 const CalibrationOptions& options, std::size_t* probes_used) {
  if (!(options.tolerance_deg > 0.0)) throw Error(ErrorCode::InvalidArgument, "calibration tolerance must be > 0");
  if (!(hw_max > hw_min)) throw Error(ErrorCode::InvalidArgument, "hardware range is empty");
  ProbeLog log(probe, motor, options.tolerance_deg);
  const std::vector<double> slack = log.read(hw_min);
  const std::vector<double> curled = log.read(hw_max);
  if (max_abs_diff(slack, curled) <= options.tolerance_deg) {
    throw Error(ErrorCode::CalibrationFailure, "motor " + std::to_string(motor) + " moves no joint");
  }

  MotorCalibration out;
  // max: hi always satisfies the saturation test, lo never does
  double lo = hw_min, hi = hw_max;
  while (hi - lo > options.tolerance_deg && out.max_iterations < options.max_iters) {
    const double mid = 0.5 * (lo + hi);
    (max_abs_diff(curled, log.read(mid)) <= options.tolerance_deg ? hi : lo) = mid;
    ++out.max_iterations;
  }
  out.max_deg = hi;
  out.residual_motion_deg = max_abs_diff(curled, log.read(hi));

  // min: lo always reads as slack, hi never does
  lo = hw_min;
  hi = out.max_deg;
  while (hi - lo > options.tolerance_deg && out.min_iterations < options.max_iters) {
    const double mid = 0.5 * (lo + hi);
    (max_abs_diff(log.read(mid), slack) <= options.tolerance_deg ? lo : hi) = mid;
    ++out.min_iterations;
  }
  out.min_deg = lo;
  if (!(out.min_deg < out.max_deg)) {
    throw Error(ErrorCode::CalibrationFailure, "motor " + std::to_string(motor) + " has an empty usable range");
  }
  if (probes_used != nullptr) *probes_used = log.count();
  return out;
}

CalibrationResult calibrate(const PlantConfig& plant, const HandGeometry& geometry, const CalibrationOptions& options) {
  validate(plant);
  if (options.readings_per_probe == 0) throw Error(ErrorCode::InvalidArgument, "need at least one reading per probe");
  CalibrationResult result;
  result.options = options;
  result.plant_digest = plant_digest(plant);
  result.geometry_digest = geometry_digest(geometry);

  std::size_t total_probes = 0;
  for (std::size_t motor = 0; motor < kNumMotors; ++motor) {
    SensorStream stream(plant, geometry, derive_seed(derive_seed(plant.seed, options.seed), motor));
    const auto joints = joints_of_motor(motor);
    const ProbeFn probe = [&](std::size_t m, double deg) {
      MotorVector cmd = hardware_minimum(plant);
      cmd.deg[m] = deg;
      std::vector<double> mean(joints.size(), 0.0);
      for (std::size_t r = 0; r < options.readings_per_probe; ++r) {
        const auto reading = stream.read(cmd, 0.0);
        for (std::size_t j = 0; j < joints.size(); ++j) mean[j] += reading.joints.deg[joints[j]];
      }
      for (double& v : mean) v /= static_cast<double>(options.readings_per_probe);
      return mean;
    };
    std::size_t used = 0;
    result.motors[motor] =
        calibrate_motor(probe, motor, plant.hardware_min_deg[motor], plant.hardware_max_deg[motor], options, &used);
    result.ranges.min[motor] = result.motors[motor].min_deg;
    result.ranges.max[motor] = result.motors[motor].max_deg;
    total_probes += used;
  }
  result.timestamp_ms =
      static_cast<double>(total_probes) * static_cast<double>(options.readings_per_probe) * kLoggingPeriodMs;
  return result;
}

void require_calibrated(const CalibrationResult& result, const PlantConfig& plant, const HandGeometry& geometry) {
  if (result.plant_digest != plant_digest(plant) || result.geometry_digest != geometry_digest(geometry)) {
    throw Error(ErrorCode::Uncalibrated, "calibration was produced for a different plant or geometry");
  }
}

void to_json(nlohmann::json& j, const CalibrationResult& r) {
  nlohmann::json motors = nlohmann::json::array();
  for (const auto& m : r.motors) {
    motors.push_back({{"min_deg", m.min_deg},
                      {"max_deg", m.max_deg},
                      {"min_iterations", m.min_iterations},
                      {"max_iterations", m.max_iterations},
                      {"residual_motion_deg", m.residual_motion_deg}});
  }
  j = {{"schema", CalibrationResult::kSchema},
       {"ranges", r.ranges},
       {"motors", motors},
       {"timestamp_ms", r.timestamp_ms},
       {"plant_digest", r.plant_digest},
       {"geometry_digest", r.geometry_digest},
       {"options",
        {{"tolerance_deg", r.options.tolerance_deg},
         {"max_iters", r.options.max_iters},
         {"readings_per_probe", r.options.readings_per_probe},
         {"seed", r.options.seed}}}};
}

void from_json(const nlohmann::json& j, CalibrationResult& r) {
  if (j.value("schema", -1) != CalibrationResult::kSchema) {
    throw Error(ErrorCode::SchemaVersion, "calibration schema mismatch, expected 1");
  }
  r.ranges = j.at("ranges").get<MotorRanges>();
  const auto& motors = j.at("motors");
  if (motors.size() != kNumMotors) throw Error(ErrorCode::DimensionMismatch, "calibration needs 11 motors");
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    auto& out = r.motors[m];
    out.min_deg = motors[m].at("min_deg");
    out.max_deg = motors[m].at("max_deg");
    out.min_iterations = motors[m].at("min_iterations");
    out.max_iterations = motors[m].at("max_iterations");
    out.residual_motion_deg = motors[m].at("residual_motion_deg");
    if (!(r.ranges.min[m] < r.ranges.max[m])) {
      throw Error(ErrorCode::InvalidArgument, "calibrated range of motor " + std::to_string(m) + " is empty");
    }
  }
  r.timestamp_ms = j.at("timestamp_ms");
  r.plant_digest = j.at("plant_digest");
  r.geometry_digest = j.at("geometry_digest");
  const auto& o = j.at("options");
  r.options.tolerance_deg = o.at("tolerance_deg");
  r.options.max_iters = o.at("max_iters");
  r.options.readings_per_probe = o.at("readings_per_probe");
  r.options.seed = o.at("seed");
}

std::string calibration_digest(const CalibrationResult& r) { return digest_of(nlohmann::json(r).dump()); }

void write_calibration(const CalibrationResult& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << nlohmann::json(r).dump(2) << '\n';
}

CalibrationResult read_calibration(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in).get<CalibrationResult>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TruncatedRecord, path.string() + ": " + e.what());
  }
}

}  // namespace ruka
