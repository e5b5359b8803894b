#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "ruka/hand_model.hpp"

using namespace ruka;

namespace {

JointState random_pose(const HandGeometry& g, std::mt19937_64& rng) {
  JointState js;
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    std::uniform_real_distribution<double> u(0.0, g.limits_deg[i]);
    js.deg[i] = u(rng);
  }
  return js;
}

}  // namespace

TEST_CASE("default limits follow the range-of-motion table") {
  const auto g = default_geometry();
  CHECK(g.limits_deg[0] == 190.0);
  CHECK(g.limits_deg[1] == 90.0);
  CHECK(g.limits_deg[2] == 120.0);
  for (Finger f : {Finger::Index, Finger::Middle, Finger::Ring, Finger::Pinky}) {
    CHECK(g.limits_deg[joint_offset(f) + 0] == 140.0);
    CHECK(g.limits_deg[joint_offset(f) + 1] == 120.0);
    CHECK(g.limits_deg[joint_offset(f) + 2] == 120.0);
  }
  CHECK(g.limits_deg.size() == 15);
}

TEST_CASE("identity pose lays every finger out straight") {
  const auto g = default_geometry();
  const auto frame = forward_kinematics(g, JointState{});
  for (Finger f : kAllFingers) {
    CAPTURE(finger_name(f));
    const auto& p = frame.finger(f);
    const Vec3 axis = (p[1] - p[0]).normalized();
    for (std::size_t k = 2; k < kKeypointsPerFinger; ++k) {
      CHECK((p[k] - p[k - 1]).normalized().dot(axis) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK((p[4] - p[1]).norm() == doctest::Approx(g.reach_mm(f)).epsilon(1e-12));
  }
}

TEST_CASE("index chain matches a planar rotation-chain oracle") {
  auto g = default_geometry();
  auto& index = g.fingers[0];
  index.splay_deg = 0.0;
  index.curvature_deg = 0.0;
  const std::vector<double> links(index.links_mm.begin(), index.links_mm.end());

  SUBCASE("MCP at 90 deg points the finger along the flexion direction") {
    JointState js;
    js.at(Finger::Index, 0) = 90.0;
    const Vec3 tip = forward_kinematics(g, js).tip(Finger::Index) - index.knuckle_mm;
    const auto [ext, flex] = oracle::planar_chain_tip(links, {90.0, 0.0, 0.0});
    CHECK(tip.x() == doctest::Approx(0.0));
    CHECK(tip.y() == doctest::Approx(ext));
    CHECK(tip.z() == doctest::Approx(flex));
    CHECK(flex == doctest::Approx(links[0] + links[1] + links[2]));
  }

  SUBCASE("random flexions") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      JointState js = random_pose(g, rng);
      const auto q = js.finger(Finger::Index);
      const Vec3 tip = forward_kinematics(g, js).tip(Finger::Index) - index.knuckle_mm;
      const auto [ext, flex] = oracle::planar_chain_tip(links, {q[0], q[1], q[2]});
      CHECK(std::abs(tip.x()) < 1e-9);
      CHECK(std::abs(tip.y() - ext) < 1e-9);
      CHECK(std::abs(tip.z() - flex) < 1e-9);
    }
  }
}

TEST_CASE("forward kinematics rejects out-of-limit joints") {
  const auto g = default_geometry();
  JointState js;
  js.at(Finger::Middle, 0) = 141.0;
  try {
    forward_kinematics(g, js);
    FAIL("expected a limit violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LimitViolation);
    CHECK(std::string(e.what()).find("middle.mcp") != std::string::npos);
  }
  js.at(Finger::Middle, 0) = 140.0;
  CHECK_NOTHROW(forward_kinematics(g, js));
  js.deg[0] = -0.5;
  CHECK_THROWS_AS(forward_kinematics(g, js), Error);
}

TEST_CASE("joint angles from keypoints") {
  std::array<Vec3, 5> straight = {Vec3(0, 0, 0), Vec3(0, 10, 0), Vec3(0, 20, 0), Vec3(0, 30, 0), Vec3(0, 45, 0)};
  for (double a : finger_joint_angles(straight)) CHECK(a == doctest::Approx(0.0).epsilon(1e-12));

  std::array<Vec3, 5> bent = {Vec3(0, 0, 0), Vec3(0, 10, 0), Vec3(0, 10, 7), Vec3(0, 10, 12), Vec3(0, 10, 20)};
  const auto a = finger_joint_angles(bent);
  CHECK(a[0] == doctest::Approx(90.0));
  CHECK(a[1] == doctest::Approx(0.0));
  CHECK(a[2] == doctest::Approx(0.0));

  std::array<Vec3, 5> degenerate = straight;
  degenerate[3] = degenerate[2];
  CHECK_THROWS_AS(finger_joint_angles(degenerate), Error);
}

TEST_CASE("round trip recovers finger and thumb MCP/IP joints") {
  const auto g = default_geometry();
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const JointState js = random_pose(g, rng);
    const JointState back = joint_angles_from_keypoints(forward_kinematics(g, js));
    for (std::size_t i = 1; i < kNumJoints; ++i) worst = std::max(worst, std::abs(back.deg[i] - js.deg[i]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("geometry-aware extraction also recovers the thumb CMC") {
  const auto g = default_geometry();
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const JointState js = random_pose(g, rng);
    const JointState back = joint_angles_from_keypoints(forward_kinematics(g, js), g);
    for (std::size_t i = 0; i < kNumJoints; ++i) worst = std::max(worst, std::abs(back.deg[i] - js.deg[i]));
  }
  CHECK(worst < 1e-6);

  double previous = -1.0;
  for (double a = 0.0; a <= 190.0; a += 0.5) {
    JointState js;
    js.deg[0] = a;
    const double read = thumb_cmc_angle(g, forward_kinematics(g, js).finger(Finger::Thumb));
    CHECK(read > previous);
    previous = read;
  }
}

TEST_CASE("link lengths are preserved for every pose") {
  const auto g = default_geometry();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto frame = forward_kinematics(g, random_pose(g, rng));
    for (Finger f : kAllFingers) {
      const auto lengths = g.segment_lengths(f);
      const auto& p = frame.finger(f);
      for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs((p[k + 1] - p[k]).norm() - lengths[k]) < 1e-6);
    }
  }
}

TEST_CASE("forward kinematics is bit-deterministic and fingertips are the last keypoints") {
  const auto g = default_geometry();
  std::mt19937_64 rng(8);
  const JointState js = random_pose(g, rng);
  const auto a = forward_kinematics(g, js);
  const auto b = forward_kinematics(g, js);
  CHECK(a == b);
  const auto tips = fingertips(a);
  for (Finger f : kAllFingers) CHECK(tips.tips[index_of(f)] == a.tip(f));
}

TEST_CASE("clamp_to_limits") {
  const auto g = default_geometry();
  JointState in_range;
  in_range.deg[4] = 33.0;
  CHECK(clamp_to_limits(g, in_range) == in_range);

  JointState js;
  js.deg[0] = 200.0;
  js.deg[5] = -5.0;
  const auto c = clamp_to_limits(g, js);
  CHECK(c.deg[0] == 190.0);
  CHECK(c.deg[5] == 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> wide(-300.0, 300.0);
  for (int trial = 0; trial < 200; ++trial) {
    JointState r;
    for (double& v : r.deg) v = wide(rng);
    const auto once = clamp_to_limits(g, r);
    CHECK(clamp_to_limits(g, once) == once);
    CHECK_NOTHROW(check_limits(g, once));
  }
}

TEST_CASE("geometry document round-trips and is versioned") {
  const auto g = default_geometry();
  const nlohmann::json doc = g;
  CHECK(doc.at("schema") == 1);
  const auto back = doc.get<HandGeometry>();
  CHECK(nlohmann::json(back) == doc);
  CHECK(geometry_digest(back) == geometry_digest(g));

  auto bad = doc;
  bad["schema"] = 2;
  CHECK_THROWS_AS(bad.get<HandGeometry>(), Error);
  auto zero = doc;
  zero["fingers"][1]["links_mm"][0] = 0.0;
  CHECK_THROWS_AS(zero.get<HandGeometry>(), Error);
}
