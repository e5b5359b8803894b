#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ruka/calibration.hpp"
#include "ruka/evaluation.hpp"

using namespace ruka;

namespace {

struct Fixture {
  PlantConfig plant = default_plant_config();
  HandGeometry geometry = default_geometry();
  CalibrationResult cal = calibrate(plant, geometry);
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

// Per-axis mean |achieved - desired| in cm, computed directly from the plant.
std::array<double, 3> direct_thumb_error(const Policy& policy, const ValidationSet& set) {
  std::array<double, 3> sum{};
  std::size_t n = 0;
  for (const auto& traj : set.trajectories) {
    for (std::size_t s = 0; s < traj.size(); ++s) {
      const MotorVector cmd = policy(PolicyContext{traj, s});
      const auto tip = finger_forward_kinematics(fx().geometry, Finger::Thumb,
                                                 std::span<const double, 3>(actuate(fx().plant, cmd).deg.data(), 3))[4];
      for (std::size_t a = 0; a < 3; ++a) sum[a] += std::abs(tip[a] - traj[s].desired.tips[0][a]);
      ++n;
    }
  }
  for (double& v : sum) v /= static_cast<double>(n) * 10.0;
  return sum;
}

double worst_tip_mm(const EvalReport& r) {
  double w = 0.0;
  for (const auto& pose : r.tip_errors_mm) {
    for (double v : pose) w = std::max(w, v);
  }
  return w;
}

}  // namespace

TEST_CASE("robot validation set: size, feasibility, determinism") {
  const auto& f = fx();
  const auto set = make_robot_validation(f.plant, f.geometry, f.cal.ranges, 45, 3);
  CHECK(set.pose_count() == 45);
  CHECK(set.trajectories.size() == 3);
  CHECK(set.trajectories[2].size() == 5);
  for (const auto& traj : set.trajectories) {
    for (const auto& p : traj) {
      CHECK_NOTHROW(check_limits(f.geometry, p.source_joints));
      CHECK(p.observed == forward_kinematics(f.geometry, p.source_joints));
      CHECK(p.desired == fingertips(p.observed));
    }
  }
  CHECK(make_robot_validation(f.plant, f.geometry, f.cal.ranges, 45, 3) == set);
  CHECK(validation_digest(make_robot_validation(f.plant, f.geometry, f.cal.ranges, 45, 4)) != validation_digest(set));

  // walk seeds never coincide with the training collection's episode seeds
  std::set<std::uint64_t> training;
  for (std::uint64_t e = 0; e < 1000; ++e) training.insert(derive_seed(3, e));
  for (std::uint64_t s : set.parameters.at("episode_seeds").get<std::vector<std::uint64_t>>()) {
    CHECK(training.count(s) == 0);
  }
  CHECK_THROWS_AS(make_robot_validation(f.plant, f.geometry, f.cal.ranges, 0, 3), Error);
}

TEST_CASE("validation sets round-trip through JSON") {
  const auto& f = fx();
  for (const auto& set : {make_robot_validation(f.plant, f.geometry, f.cal.ranges, 12, 1),
                          make_humanlike_validation(f.geometry, 12, 1)}) {
    const nlohmann::json j = set;
    const auto back = j.get<ValidationSet>();
    CHECK(back == set);
    CHECK(validation_digest(back) == validation_digest(set));
  }
  nlohmann::json bad = make_humanlike_validation(f.geometry, 3, 1);
  bad["schema"] = 7;
  CHECK_THROWS_AS(bad.get<ValidationSet>(), Error);
}

TEST_CASE("human-like set: scaled hand, noisy glove, goals at the true pose") {
  const auto& f = fx();
  HumanLikeSpec quiet;
  quiet.glove_noise_mm = 0.0;
  const auto set = make_humanlike_validation(f.geometry, 60, 5, quiet);
  const HandGeometry human = human_geometry(f.geometry, quiet.link_scale);
  CHECK(human.reach_mm(Finger::Index) == doctest::Approx(1.1 * f.geometry.reach_mm(Finger::Index)));
  for (const auto& traj : set.trajectories) {
    for (const auto& p : traj) {
      CHECK_NOTHROW(check_limits(human, p.source_joints));
      CHECK(p.observed == forward_kinematics(human, p.source_joints));
      CHECK(p.desired.tips[0] == p.observed.tip(Finger::Thumb));
      CHECK(p.desired.tips[1] == forward_kinematics(f.geometry, p.source_joints).tip(Finger::Index));
    }
  }
  const auto noisy = make_humanlike_validation(f.geometry, 60, 5);
  CHECK(noisy.trajectories[0][0].observed != set.trajectories[0][0].observed);
  CHECK(noisy.trajectories[0][0].desired == set.trajectories[0][0].desired);
  CHECK(make_humanlike_validation(f.geometry, 60, 5) == noisy);
}

TEST_CASE("human-like poses lie further from the training data than robot poses") {
  const auto& f = fx();
  const auto robot = make_robot_validation(f.plant, f.geometry, f.cal.ranges, 200, 8);
  const auto human = make_humanlike_validation(f.geometry, 200, 8);
  for (Finger finger : {Finger::Thumb, Finger::Index}) {
    const auto data = collect_dataset(f.plant, f.geometry, f.cal.ranges, WalkSpec{finger}, 100, 1);
    const double r = mean_nearest_distance(robot, data);
    const double h = mean_nearest_distance(human, data);
    CAPTURE(finger_name(finger));
    CHECK(h > r);
  }
}

TEST_CASE("replay scores match a direct computation") {
  const auto& f = fx();
  const auto set = make_humanlike_validation(f.geometry, 40, 2);
  const Policy fixed = [&](const PolicyContext& ctx) {
    MotorVector cmd = f.cal.ranges.minimum();
    cmd.deg[0] = f.cal.ranges.min[0] + 0.5 * (f.cal.ranges.max[0] - f.cal.ranges.min[0]) + static_cast<double>(ctx.step);
    return cmd;
  };
  const auto r = replay_and_score(fixed, set, f.plant, f.geometry, "fixed");
  const auto expected = direct_thumb_error(fixed, set);
  for (std::size_t a = 0; a < 3; ++a) CHECK(r.thumb().axis_cm[a] == doctest::Approx(expected[a]).epsilon(1e-12));
  CHECK(r.thumb().count == 40);
  CHECK(r.tip_errors_mm.size() == 40);
  CHECK(r.controller == "fixed");
  CHECK(r.set_digest == validation_digest(set));

  const ValidationSet empty;
  const auto none = replay_and_score(fixed, empty, f.plant, f.geometry);
  CHECK(none.tip_errors_mm.empty());
  CHECK(none.pooled().count == 0);
}

TEST_CASE("grid inverse oracle: error bounded by resolution and shrinking with it") {
  const auto& f = fx();
  PlantConfig plant = f.plant;
  const auto set = make_robot_validation(plant, f.geometry, f.cal.ranges, 120, 12);
  const auto fine = replay_and_score(grid_inverse_oracle(plant, f.cal.ranges, 0.1), set, plant, f.geometry, "oracle");
  const auto coarse = replay_and_score(grid_inverse_oracle(plant, f.cal.ranges, 1.0), set, plant, f.geometry, "oracle");

  // a grid step of r moves a joint by at most slope * (r/2 + servo step) per motor; with
  // spill-over a coupled joint can take both of its motor's shares
  double slope = 0.0;
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    for (std::size_t j : joints_of_motor(m)) slope = std::max(slope, plant.spool_radius_mm[m] / plant.pulley_radius_mm[j]);
  }
  slope *= 2.0;
  double reach = 0.0;
  for (Finger finger : kAllFingers) reach = std::max(reach, f.geometry.reach_mm(finger));
  const double joint_err = slope * (0.1 / 2.0 + plant.servo_resolution_deg) * std::sqrt(2.0);
  const double bound_mm = reach * deg2rad(3.0 * joint_err);
  MESSAGE("oracle worst tip error at 0.1 deg: " << worst_tip_mm(fine) << " mm (bound " << bound_mm << " mm)");
  CHECK(worst_tip_mm(fine) <= bound_mm);
  CHECK(coarse.pooled().mean_cm() > fine.pooled().mean_cm());
  CHECK(worst_tip_mm(coarse) > worst_tip_mm(fine));
  CHECK_THROWS_AS(grid_inverse_oracle(plant, f.cal.ranges, 0.0), Error);
}

TEST_CASE("hand controllers replay like the equivalent policy") {
  const auto& f = fx();
  std::array<ControllerCheckpoint, kNumFingers> ckpts;
  for (Finger finger : kAllFingers) {
    const auto data = collect_dataset(f.plant, f.geometry, f.cal.ranges, WalkSpec{finger}, 20, 2);
    ckpts[index_of(finger)] = train_knn_controller(data, TrainingConfig{});
  }
  const auto hand = make_hand_controller(ControllerKind::Knn, ckpts);
  const auto set = make_robot_validation(f.plant, f.geometry, f.cal.ranges, 30, 2);
  const auto a = replay_and_score(hand, set, f.plant, f.geometry, f.cal.ranges);
  const auto b = replay_and_score(
      [&](const PolicyContext& ctx) { return hand_command(hand, ctx.trajectory, ctx.step, f.cal.ranges); }, set, f.plant,
      f.geometry, "knn");
  CHECK(a.fingers == b.fingers);
  CHECK(a.controller == "knn");
  CHECK(a.controller_digest == hand.digest());
  CHECK(a == replay_and_score(hand, set, f.plant, f.geometry, f.cal.ranges));

  // history for a step is the trajectory up to and including it
  const auto in = controller_input(set.trajectories[0], 3, Finger::Thumb);
  CHECK(in.target() == state_of(set.trajectories[0][3].observed, Finger::Thumb, Representation::Fingertip));
  CHECK(in.history[0] == state_of(set.trajectories[0][0].observed, Finger::Thumb, Representation::Fingertip));
}

TEST_CASE("opposition: every finger meets the thumb within the sampling budget") {
  const auto& f = fx();
  const auto t0 = std::chrono::steady_clock::now();
  const auto cloud = fingertip_intersection(f.geometry, kOppositionSamples, 1);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (std::size_t pair = 0; pair < 4; ++pair) {
    CAPTURE(pair);
    CHECK(!cloud.thumb_tips[pair].empty());
  }
  CHECK(s < 300.0);
  CHECK(fingertip_intersection(f.geometry, 5000, 3) == fingertip_intersection(f.geometry, 5000, 3));
  const auto none = fingertip_intersection(f.geometry, 5000, 3, 0.0);
  for (const auto& c : none.thumb_tips) CHECK(c.empty());
  const auto wide = fingertip_intersection(f.geometry, 5000, 3, 10.0);
  const auto narrow = fingertip_intersection(f.geometry, 5000, 3, 5.0);
  for (std::size_t pair = 0; pair < 4; ++pair) CHECK(wide.thumb_tips[pair].size() >= narrow.thumb_tips[pair].size());

  std::ostringstream csv;
  write_contacts_csv(csv, narrow);
  std::size_t total = 0;
  for (const auto& c : narrow.thumb_tips) total += c.size();
  const std::string lines = csv.str();
  CHECK(static_cast<std::size_t>(std::count(lines.begin(), lines.end(), '\n')) == total + 1);
}

TEST_CASE("calibrated ranges reach nearly the full range of motion") {
  const auto& f = fx();
  PlantConfig plant = f.plant;
  plant.sensor_noise_mm = 0.0;
  const auto rows = range_of_motion_report(plant, f.geometry, f.cal.ranges);
  REQUIRE(rows.size() == kNumJoints);
  for (const auto& r : rows) {
    CAPTURE(r.name);
    CHECK(r.fraction() >= 0.95);
    CHECK(r.achieved_max_deg <= r.limit_deg);
    CHECK(r.achieved_min_deg >= 0.0);
  }
  CHECK(rows[14].name == "pinky.dip");
  CHECK(rows[0].name == "thumb.cmc");
  CHECK(range_of_motion_report(plant, f.geometry, f.cal.ranges)[5].achieved_max_deg == rows[5].achieved_max_deg);
  std::ostringstream out;
  print_range_of_motion(out, rows);
  CHECK(out.str().find("index.pip") != std::string::npos);
}

TEST_CASE("report outputs") {
  const auto& f = fx();
  const auto set = make_robot_validation(f.plant, f.geometry, f.cal.ranges, 10, 1);
  const auto r = replay_and_score(grid_inverse_oracle(f.plant, f.cal.ranges, 1.0), set, f.plant, f.geometry, "oracle");
  std::ostringstream text, csv;
  print_report(text, r);
  CHECK(text.str().find("thumb") != std::string::npos);
  CHECK(text.str().find("oracle") != std::string::npos);
  write_error_csv(csv, r);
  const std::string lines = csv.str();
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 11);
  const auto j = report_record(r);
  CHECK(j.at("controller") == "oracle");
  CHECK(j.at("set") == "robot");
  CHECK(j.at("fingers").at("thumb").at("axis_cm").size() == 3);
  CHECK(j.at("fingers").at("thumb").at("mean_cm").get<double>() == doctest::Approx(r.thumb().mean_cm()));
}
