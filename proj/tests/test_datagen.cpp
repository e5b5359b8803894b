#include <sstream>

#include "doctest.h"
#include "ruka/datagen.hpp"

using namespace ruka;

namespace {

Dataset small_dataset(Finger f, std::uint64_t seed = 21) {
  const auto plant = default_plant_config();
  return collect_dataset(plant, default_geometry(), hardware_ranges(plant), WalkSpec{f, 20, 2.0}, 4, seed, "cal");
}

std::string serialise(const Dataset& d) {
  std::ostringstream out;
  write_dataset(d, out);
  return out.str();
}

}  // namespace

TEST_CASE("default episode counts") {
  CHECK(default_episodes(Finger::Thumb) == 500);
  for (Finger f : {Finger::Index, Finger::Middle, Finger::Ring, Finger::Pinky}) CHECK(default_episodes(f) == 300);
  CHECK(kDefaultWalkSteps == 100);
  CHECK(kLoggingPeriodMs == doctest::Approx(1000.0 / 15.0));
}

TEST_CASE("a walk stays inside its range and moves by one step per motor") {
  const auto plant = default_plant_config();
  MotorRanges ranges = hardware_ranges(plant);
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    ranges.min[m] = 40.0;
    ranges.max[m] = 80.0;
  }
  for (Finger f : kAllFingers) {
    const auto ep = random_walk_episode(plant, default_geometry(), ranges, WalkSpec{f, 100, 2.0}, 3, 17);
    REQUIRE(ep.size() == 100);
    for (std::size_t s = 0; s < ep.size(); ++s) {
      CHECK(ep[s].step == s);
      CHECK(ep[s].episode == 3);
      CHECK(ep[s].reading.timestamp_ms == doctest::Approx(s * kLoggingPeriodMs));
      for (std::size_t k = 0; k < motor_count(f); ++k) {
        const double c = ep[s].reading.commanded[k];
        CHECK(c >= 40.0);
        CHECK(c <= 80.0);
        if (s > 0) {
          const double step = std::abs(c - ep[s - 1].reading.commanded[k]);
          CHECK(step <= 2.0 + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("collection is reproducible from the seed") {
  const auto a = small_dataset(Finger::Middle);
  const auto b = small_dataset(Finger::Middle);
  CHECK(a == b);
  CHECK(serialise(a) == serialise(b));
  const auto c = small_dataset(Finger::Middle, 22);
  CHECK_FALSE(a == c);
  CHECK(a.episode_count() == 4);
  CHECK(a.samples.size() == 4 * 20);
}

TEST_CASE("dataset files round-trip exactly") {
  for (Finger f : {Finger::Thumb, Finger::Pinky}) {
    const auto d = small_dataset(f);
    std::istringstream in(serialise(d));
    const auto back = read_dataset(in);
    CHECK(back == d);
    CHECK(dataset_digest(back) == dataset_digest(d));
  }
}

TEST_CASE("corrupted dataset files are rejected") {
  const auto d = small_dataset(Finger::Index);
  const std::string text = serialise(d);

  SUBCASE("flipped digit") {
    std::string bad = text;
    const auto pos = bad.find('\n', bad.find('\n') + 1) - 3;
    bad[pos] = bad[pos] == '1' ? '2' : '1';
    std::istringstream in(bad);
    try {
      read_dataset(in);
      FAIL("corruption not detected");
    } catch (const Error& e) {
      CHECK((e.code() == ErrorCode::ChecksumMismatch || e.code() == ErrorCode::TruncatedRecord));
    }
  }
  SUBCASE("truncated") {
    std::istringstream in(text.substr(0, text.size() / 2));
    try {
      read_dataset(in);
      FAIL("truncation not detected");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TruncatedRecord);
    }
  }
  SUBCASE("schema version") {
    std::string bad = text;
    const auto pos = bad.find("\"schema\":1");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 10, "\"schema\":7");
    std::istringstream in(bad);
    try {
      read_dataset(in);
      FAIL("schema not checked");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaVersion);
    }
  }
}

TEST_CASE("shortest round-trip number formatting") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 123456789.123456789}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("only the walking finger's motors move") {
  const auto plant = default_plant_config();
  const auto ranges = hardware_ranges(plant);
  const auto ep = random_walk_episode(plant, default_geometry(), ranges, WalkSpec{Finger::Ring, 30, 2.0}, 0, 5);
  const auto& first = ep.front().reading;
  bool moved = false;
  for (const auto& s : ep) {
    for (std::size_t k = 0; k < 2; ++k) moved |= s.reading.commanded[k] != first.commanded[k];
    CHECK(s.reading.commanded[2] == 0.0);
  }
  CHECK(moved);
}

TEST_CASE("zero step size holds a single command") {
  const auto plant = default_plant_config();
  const auto ep =
      random_walk_episode(plant, default_geometry(), hardware_ranges(plant), WalkSpec{Finger::Thumb, 25, 0.0}, 0, 9);
  REQUIRE(ep.size() == 25);
  for (const auto& s : ep) CHECK(s.reading.commanded == ep.front().reading.commanded);
}

namespace {

// Independent 64-bit FNV-1a for authoring the fixture trailer.
std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

TEST_CASE("hand-built two-sample file parses to the expected samples") {
  const std::string header =
      R"(#ruka-dataset {"schema":1,"finger":"index","seed":3,"plant_digest":"p","geometry_digest":"g",)"
      R"("calibration_digest":"c","ranges":{"min_deg":[0,0,0,0,0,0,0,0,0,0,0],)"
      R"("max_deg":[300,300,300,300,300,300,300,300,300,300,300]},"steps_per_episode":2,"step_size_deg":2.0})";
  std::string body;
  // episode, step, t, 5 keypoints, tip, 3 joints, 2 commanded, 2 actual
  body += "0,0,0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,13,14,15,0,0.5,0.4,40,50,40,50\n";
  body += "0,1,66.66666666666667,-1,-2,-3,4,5,6,7,8,9,10,11,12,13,14,15.25,13,14,15.25,1,2,1.6,42,48,42.041015625,48.076171875\n";
  const std::string text = header + "\n" + body + "#end 2 " + fnv_hex(body) + "\n";

  std::istringstream in(text);
  const Dataset d = read_dataset(in);
  CHECK(d.finger == Finger::Index);
  CHECK(d.seed == 3);
  CHECK(d.steps_per_episode == 2);
  REQUIRE(d.samples.size() == 2);
  const auto& a = d.samples[0];
  CHECK(a.episode == 0);
  CHECK(a.step == 0);
  CHECK(a.reading.keypoints[0] == Vec3(1, 2, 3));
  CHECK(a.reading.keypoints[4] == Vec3(13, 14, 15));
  CHECK(a.reading.fingertip == Vec3(13, 14, 15));
  CHECK(a.reading.joints == std::array<double, 3>{0, 0.5, 0.4});
  CHECK(a.reading.commanded[0] == 40);
  CHECK(a.reading.commanded[1] == 50);
  CHECK(a.reading.actual[1] == 50);
  const auto& b = d.samples[1];
  CHECK(b.step == 1);
  CHECK(b.reading.timestamp_ms == 66.66666666666667);
  CHECK(b.reading.keypoints[0] == Vec3(-1, -2, -3));
  CHECK(b.reading.fingertip.z() == 15.25);
  CHECK(b.reading.actual[0] == 42.041015625);
  CHECK(b.reading.actual[1] == 48.076171875);

  std::ostringstream again;
  write_dataset(d, again);
  std::istringstream in2(again.str());
  CHECK(read_dataset(in2) == d);
}

TEST_CASE("default collection sizes and action-space coverage") {
  const auto plant = default_plant_config();
  const auto geometry = default_geometry();
  const auto ranges = hardware_ranges(plant);
  for (Finger f : {Finger::Thumb, Finger::Index}) {
    CAPTURE(finger_name(f));
    const auto d = collect_dataset(plant, geometry, ranges, WalkSpec{f}, default_episodes(f), 1);
    CHECK(d.samples.size() == (f == Finger::Thumb ? 50000u : 30000u));
    for (std::size_t k = 0; k < motor_count(f); ++k) {
      const std::size_t m = motor_offset(f) + k;
      std::array<std::size_t, 20> bins{};
      for (const auto& s : d.samples) {
        const double u = (s.reading.commanded[k] - ranges.min[m]) / (ranges.max[m] - ranges.min[m]);
        bins[std::min<std::size_t>(19, static_cast<std::size_t>(u * 20.0))]++;
      }
      for (std::size_t b : bins) CHECK(b > 0);
    }
  }
}
