#include "ruka/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

namespace ruka {
namespace {

constexpr std::string_view kHeaderTag = "#ruka-dataset ";
constexpr std::string_view kTrailerTag = "#end ";

std::size_t fields_per_line(Finger f) { return 3 + 15 + 3 + 3 + 2 * motor_count(f); }

void append(std::string& line, double v) {
  line += format_double(v);
  line += ',';
}

std::string sample_line(const Sample& s, Finger f) {
  std::string line;
  line.reserve(640);
  line += std::to_string(s.episode);
  line += ',';
  line += std::to_string(s.step);
  line += ',';
  const auto& r = s.reading;
  append(line, r.timestamp_ms);
  for (const auto& p : r.keypoints) {
    append(line, p.x());
    append(line, p.y());
    append(line, p.z());
  }
  append(line, r.fingertip.x());
  append(line, r.fingertip.y());
  append(line, r.fingertip.z());
  for (double j : r.joints) append(line, j);
  const std::size_t n = motor_count(f);
  for (std::size_t i = 0; i < n; ++i) append(line, r.commanded[i]);
  for (std::size_t i = 0; i < n; ++i) append(line, r.actual[i]);
  line.back() = '\n';
  return line;
}

template <class T>
T parse_number(std::string_view token, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::TruncatedRecord,
                "line " + std::to_string(line_no) + ": bad field '" + std::string(token) + "'");
  }
  return value;
}

Sample parse_sample(std::string_view line, Finger f, std::size_t line_no) {
  std::vector<std::string_view> tokens;
  tokens.reserve(fields_per_line(f));
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t comma = line.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? line.size() : comma;
    tokens.push_back(line.substr(start, end - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (tokens.size() != fields_per_line(f)) {
    throw Error(ErrorCode::TruncatedRecord, "line " + std::to_string(line_no) + ": expected " +
                                                std::to_string(fields_per_line(f)) + " fields, got " +
                                                std::to_string(tokens.size()));
  }
  Sample s;
  std::size_t k = 0;
  s.episode = parse_number<std::uint32_t>(tokens[k++], line_no);
  s.step = parse_number<std::uint32_t>(tokens[k++], line_no);
  auto next = [&] { return parse_number<double>(tokens[k++], line_no); };
  auto& r = s.reading;
  r.timestamp_ms = next();
  for (auto& p : r.keypoints) {
    p.x() = next();
    p.y() = next();
    p.z() = next();
  }
  r.fingertip.x() = next();
  r.fingertip.y() = next();
  r.fingertip.z() = next();
  for (double& j : r.joints) j = next();
  const std::size_t n = motor_count(f);
  for (std::size_t i = 0; i < n; ++i) r.commanded[i] = next();
  for (std::size_t i = 0; i < n; ++i) r.actual[i] = next();
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool FingerReading::operator==(const FingerReading& o) const {
  if (timestamp_ms != o.timestamp_ms || fingertip != o.fingertip || joints != o.joints ||
      commanded != o.commanded || actual != o.actual) {
    return false;
  }
  for (std::size_t k = 0; k < kKeypointsPerFinger; ++k) {
    if (keypoints[k] != o.keypoints[k]) return false;
  }
  return true;
}

FingerReading finger_slice(const SensorReading& r, Finger f) {
  FingerReading out;
  out.timestamp_ms = r.timestamp_ms;
  out.keypoints = r.keypoints.finger(f);
  out.fingertip = r.fingertips.tips[index_of(f)];
  out.joints = r.joints.finger(f);
  for (std::size_t i = 0; i < motor_count(f); ++i) {
    out.commanded[i] = r.commanded.deg[motor_offset(f) + i];
    out.actual[i] = r.actual.deg[motor_offset(f) + i];
  }
  return out;
}

std::size_t Dataset::episode_count() const {
  if (samples.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].episode != samples[i - 1].episode) ++n;
  }
  return n;
}

std::size_t default_episodes(Finger f) { return f == Finger::Thumb ? 500 : 300; }

std::vector<Sample> random_walk_episode(const PlantConfig& plant, const HandGeometry& geometry,
                                        const MotorRanges& ranges, const WalkSpec& walk,
                                        std::uint32_t episode, std::uint64_t seed) {
  if (walk.steps < 1) throw Error(ErrorCode::InvalidArgument, "random walk needs at least one step");
  if (!(walk.step_size_deg >= 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be >= 0");

  std::mt19937_64 walk_rng(derive_seed(seed, 0));
  std::mt19937_64 noise_rng(derive_seed(plant.seed, seed));
  std::bernoulli_distribution coin(0.5);

  const Finger f = walk.finger;
  const std::size_t m0 = motor_offset(f);
  const std::size_t n = motor_count(f);

  MotorVector command = ranges.minimum();
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_real_distribution<double> start(ranges.min[m0 + i], ranges.max[m0 + i]);
    command.deg[m0 + i] = start(walk_rng);
  }

  std::vector<Sample> out;
  out.reserve(walk.steps);
  for (std::size_t step = 0; step < walk.steps; ++step) {
    if (step > 0) {
      for (std::size_t i = 0; i < n; ++i) {
        const double delta = coin(walk_rng) ? walk.step_size_deg : -walk.step_size_deg;
        command.deg[m0 + i] =
            std::clamp(command.deg[m0 + i] + delta, ranges.min[m0 + i], ranges.max[m0 + i]);
      }
    }
    const double t = static_cast<double>(step) * kLoggingPeriodMs;
    const SensorReading reading = read_sensors(plant, geometry, command, t, noise_rng);
    out.push_back({episode, static_cast<std::uint32_t>(step), finger_slice(reading, f)});
  }
  return out;
}

Dataset collect_dataset(const PlantConfig& plant, const HandGeometry& geometry, const MotorRanges& ranges,
                        const WalkSpec& walk, std::size_t episodes, std::uint64_t seed,
                        const std::string& calibration_digest) {
  if (episodes < 1) throw Error(ErrorCode::InvalidArgument, "need at least one episode");
  Dataset d;
  d.finger = walk.finger;
  d.plant_digest = plant_digest(plant);
  d.geometry_digest = geometry_digest(geometry);
  d.calibration_digest = calibration_digest;
  d.ranges = ranges;
  d.seed = seed;
  d.steps_per_episode = static_cast<std::uint32_t>(walk.steps);
  d.step_size_deg = walk.step_size_deg;
  d.samples.reserve(episodes * walk.steps);
  for (std::size_t e = 0; e < episodes; ++e) {
    auto ep = random_walk_episode(plant, geometry, ranges, walk, static_cast<std::uint32_t>(e),
                                  derive_seed(seed, e));
    d.samples.insert(d.samples.end(), ep.begin(), ep.end());
  }
  return d;
}

void write_dataset(const Dataset& d, std::ostream& out) {
  const nlohmann::json header = {{"schema", Dataset::kSchema},
                                 {"finger", finger_name(d.finger)},
                                 {"seed", d.seed},
                                 {"plant_digest", d.plant_digest},
                                 {"geometry_digest", d.geometry_digest},
                                 {"calibration_digest", d.calibration_digest},
                                 {"ranges", d.ranges},
                                 {"steps_per_episode", d.steps_per_episode},
                                 {"step_size_deg", d.step_size_deg}};
  out << kHeaderTag << header.dump() << '\n';
  Fnv1a checksum;
  for (const Sample& s : d.samples) {
    const std::string line = sample_line(s, d.finger);
    checksum.update(line);
    out << line;
  }
  out << kTrailerTag << d.samples.size() << ' ' << checksum.hex() << '\n';
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || !line.starts_with(kHeaderTag)) {
    throw Error(ErrorCode::TruncatedRecord, "missing dataset header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line.substr(kHeaderTag.size()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TruncatedRecord, std::string("dataset header: ") + e.what());
  }
  if (header.value("schema", -1) != Dataset::kSchema) {
    throw Error(ErrorCode::SchemaVersion, "dataset schema " + header.value("schema", nlohmann::json()).dump() +
                                              ", this build reads schema 1");
  }
  Dataset d;
  d.finger = finger_from_name(header.at("finger").get<std::string>());
  d.seed = header.at("seed");
  d.plant_digest = header.at("plant_digest");
  d.geometry_digest = header.at("geometry_digest");
  d.calibration_digest = header.at("calibration_digest");
  d.ranges = header.at("ranges").get<MotorRanges>();
  d.steps_per_episode = header.at("steps_per_episode");
  d.step_size_deg = header.at("step_size_deg");

  Fnv1a checksum;
  std::size_t line_no = 1;
  bool trailer = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.starts_with(kTrailerTag)) {
      std::istringstream ts(line.substr(kTrailerTag.size()));
      std::size_t count = 0;
      std::string hex;
      ts >> count >> hex;
      if (count != d.samples.size()) {
        throw Error(ErrorCode::TruncatedRecord, "trailer count " + std::to_string(count) + " but read " +
                                                    std::to_string(d.samples.size()) + " samples");
      }
      if (hex != checksum.hex()) throw Error(ErrorCode::ChecksumMismatch, "dataset checksum mismatch");
      trailer = true;
      break;
    }
    d.samples.push_back(parse_sample(line, d.finger, line_no));
    checksum.update(line);
    checksum.update("\n");
  }
  if (!trailer) throw Error(ErrorCode::TruncatedRecord, "dataset ends without trailer");
  return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_dataset(d, out);
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return read_dataset(in);
}

std::string dataset_digest(const Dataset& d) {
  std::ostringstream os;
  write_dataset(d, os);
  return digest_of(os.str());
}

}  // namespace ruka
