#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "doctest.h"
#include "ruka/controllers.hpp"
#include "toy_search.hpp"

using namespace ruka;
using namespace ruka::oracle;

namespace {

const PlantConfig& plant() {
  static const PlantConfig p = default_plant_config();
  return p;
}

MotorRanges saturation_ranges() {
  MotorRanges r;
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    r.min[m] = motion_onset(plant(), m);
    r.max[m] = saturation_point(plant(), m);
  }
  return r;
}

Dataset index_dataset(std::size_t episodes) {
  return collect_dataset(plant(), default_geometry(), saturation_ranges(), WalkSpec{Finger::Index}, episodes, 5, "cal");
}

// Enough walks to cover the index finger's command square.
const Dataset& covering_dataset() {
  static const Dataset d = index_dataset(150);
  return d;
}

TrainingConfig quick_config(std::size_t epochs = 4) {
  TrainingConfig c;
  c.epochs = epochs;
  c.hidden = 16;
  c.head_hidden = {32};
  c.mlp_hidden = {32, 32};
  c.forward_hidden = {32, 32};
  c.grid_points = 30;
  return c;
}

template <typename F>
void check_code(F&& f, ErrorCode code) {
  try {
    f();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

ControllerCheckpoint knn_toy(std::vector<FingerState> states, std::vector<std::vector<double>> commands, std::size_t k) {
  ControllerCheckpoint c;
  c.kind = ControllerKind::Knn;
  c.finger = Finger::Index;
  c.representation = Representation::JointAngles;
  c.input_norm = identity_norm(3);
  c.output_norm = identity_norm(2);
  c.k = k;
  c.knn_states = std::move(states);
  c.knn_commands = std::move(commands);
  return c;
}

std::vector<double> knn_query(const ControllerCheckpoint& c, FingerState q) { return knn_predict(Controller(c), q); }

ControllerInput single(Finger f, FingerState s) {
  const FingerState one[] = {s};
  return ControllerInput::from_history(f, representation_for(f), one);
}


}  // namespace

TEST_CASE("thumb uses fingertips, the other fingers joint angles") {
  CHECK(representation_for(Finger::Thumb) == Representation::Fingertip);
  for (Finger f : {Finger::Index, Finger::Middle, Finger::Ring, Finger::Pinky}) {
    CHECK(representation_for(f) == Representation::JointAngles);
  }
  for (auto k : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search}) {
    CHECK(kind_from_name(kind_name(k)) == k);
  }
  CHECK_THROWS_AS(kind_from_name("lstm"), Error);
}

TEST_CASE("histories are front-padded with the oldest state") {
  const std::vector<FingerState> states = {{1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  const auto in = ControllerInput::from_history(Finger::Index, Representation::JointAngles, states);
  for (std::size_t t = 0; t + 2 < kHistoryLength; ++t) CHECK(in.history[t] == FingerState{1, 1, 1});
  CHECK(in.target() == FingerState{3, 3, 3});

  std::vector<FingerState> long_history;
  for (int i = 0; i < 15; ++i) long_history.push_back({double(i), 0, 0});
  const auto tail = ControllerInput::from_history(Finger::Index, Representation::JointAngles, long_history);
  CHECK(tail.history.front()[0] == 5.0);
  CHECK(tail.target()[0] == 14.0);

  const std::vector<FingerState> bad = {{1, std::nan(""), 0}};
  check_code([&] { ControllerInput::from_history(Finger::Index, Representation::JointAngles, bad); },
             ErrorCode::InvalidArgument);
  check_code([&] { ControllerInput::from_history(Finger::Index, Representation::JointAngles, {}); },
             ErrorCode::InvalidArgument);
}

TEST_CASE("normaliser stores unit spread for constant dimensions") {
  const auto n = Normalizer::fit({{1.0, 5.0}, {3.0, 5.0}});
  CHECK(n.mean == std::vector<double>{2.0, 5.0});
  CHECK(n.std[0] == doctest::Approx(1.0));
  CHECK(n.std[1] == 1.0);
  CHECK(n.apply(0, 3.0) == doctest::Approx(1.0));
  CHECK(n.invert(0, n.apply(0, 2.7)) == doctest::Approx(2.7));
}

TEST_CASE("k-NN: exact match, equidistant mean, k clamped to the sample count, ties to the lower index") {
  const std::vector<FingerState> states = {{1, 0, 0}, {-1, 0, 0}, {10, 0, 0}};
  const std::vector<std::vector<double>> commands = {{0.2, 0.4}, {0.6, 0.8}, {1.0, 0.0}};

  CHECK(knn_query(knn_toy(states, commands, 1), {10, 0, 0}) == std::vector<double>{1.0, 0.0});
  const auto mid = knn_query(knn_toy(states, commands, 2), {0, 0, 0});
  CHECK(mid[0] == doctest::Approx(0.4));
  CHECK(mid[1] == doctest::Approx(0.6));
  const auto all = knn_query(knn_toy(states, commands, 10), {0, 0, 0});
  CHECK(all[0] == doctest::Approx(0.6));
  CHECK(all[1] == doctest::Approx(0.4));

  const std::vector<FingerState> twins = {{2, 2, 2}, {2, 2, 2}};
  CHECK(knn_query(knn_toy(twins, {{0.1, 0.1}, {0.9, 0.9}}, 1), {2, 2, 2}) == std::vector<double>{0.1, 0.1});
}

TEST_CASE("search over the grid equals brute force on toy forward models") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> target(-4.0, 4.0);
  struct Case {
    Finger finger;
    std::size_t hidden;
    std::size_t points;
  };
  for (const Case cs : {Case{Finger::Index, 0, 50}, Case{Finger::Index, 8, 50}, Case{Finger::Thumb, 8, 20}}) {
    const ToyForward toy = random_toy(motor_count(cs.finger), cs.hidden, rng);
    const Controller ctl(search_toy(cs.finger, toy, cs.points));
    const GridSearch grid(motor_count(cs.finger), cs.points, [](const nn::Tensor2& u) { return nn::Tensor2(u.rows(), 3); });
    int exact = 0;
    for (int q = 0; q < 100; ++q) {
      const FingerState t{target(rng), target(rng), target(rng)};
      double best = std::numeric_limits<double>::infinity();
      std::vector<double> best_u;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto u = grid.point(i);
        const FingerState s = toy(u);
        double d = 0.0;
        for (std::size_t k = 0; k < 3; ++k) d += (s[k] - t[k]) * (s[k] - t[k]);
        if (d < best) {
          best = d;
          best_u = u;
        }
      }
      const auto got = search_predict(ctl, t);
      const FingerState s = toy(got);
      double d = 0.0;
      for (std::size_t k = 0; k < 3; ++k) d += (s[k] - t[k]) * (s[k] - t[k]);
      CHECK(d <= best * (1.0 + 1e-12) + 1e-12);
      exact += got == best_u ? 1 : 0;
    }
    CHECK(exact == 100);
  }
}

TEST_CASE("grid points enumerate the unit box with the first motor most significant") {
  const GridSearch grid(2, 3, [](const nn::Tensor2& u) {
    nn::Tensor2 s(u.rows(), 3);
    for (std::size_t r = 0; r < u.rows(); ++r) s(r, 0) = u(r, 0);
    return s;
  });
  CHECK(grid.size() == 9);
  CHECK(grid.point(0) == std::vector<double>{0.0, 0.0});
  CHECK(grid.point(1) == std::vector<double>{0.0, 0.5});
  CHECK(grid.point(3) == std::vector<double>{0.5, 0.0});
  CHECK(grid.point(8) == std::vector<double>{1.0, 1.0});
  // every point with u0 = 0.5 ties; the lowest index wins
  CHECK(grid.nearest({0.5, 0.0, 0.0}) == 3);
  CHECK_THROWS_AS(GridSearch(2, 1, [](const nn::Tensor2& u) { return u; }), Error);
}

TEST_CASE("a constant pose is learned with near-zero error") {
  Dataset d = index_dataset(6);
  const Sample first = d.samples.front();
  for (auto& s : d.samples) s.reading = first.reading;
  auto cfg = quick_config(300);
  cfg.batch_size = 64;
  for (auto kind : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn}) {
    const auto c = train_controller(kind, d, cfg);
    CAPTURE(kind_name(kind));
    CHECK(c.holdout_loss < 1e-4);
    const Controller ctl(c);
    const auto u = ctl.predict_unit(single(Finger::Index, state_of(first.reading, Representation::JointAngles)));
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(u[k] == doctest::Approx(d.ranges.to_unit(motor_offset(Finger::Index) + k, first.reading.commanded[k])).epsilon(1e-2));
    }
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Dataset d = index_dataset(8);
  for (auto kind : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search}) {
    const auto a = train_controller(kind, d, quick_config(2));
    const auto b = train_controller(kind, d, quick_config(2));
    CHECK(a == b);
    CHECK(checkpoint_digest(a) == checkpoint_digest(b));
  }
  auto other = quick_config(2);
  other.seed = 2;
  CHECK(checkpoint_digest(train_controller(ControllerKind::Mlp, d, other)) !=
        checkpoint_digest(train_controller(ControllerKind::Mlp, d, quick_config(2))));
}

TEST_CASE("held-out error of trained controllers is small") {
  const Dataset& d = covering_dataset();
  auto cfg = quick_config(8);
  cfg.hidden = 32;
  cfg.head_hidden = {64};
  for (auto kind : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search}) {
    const auto c = train_controller(kind, d, cfg);
    CAPTURE(kind_name(kind));
    CHECK(c.holdout_loss < 0.05);
    if (kind == ControllerKind::Sequence || kind == ControllerKind::Mlp) {
      REQUIRE(c.epoch_losses.size() == 8);
      CHECK(c.epoch_losses.back() < c.epoch_losses.front());
    }
  }
}

TEST_CASE("sequence controller replays its own training windows") {
  const Dataset& d = covering_dataset();
  auto cfg = quick_config(8);
  cfg.hidden = 32;
  cfg.head_hidden = {64};
  const Controller ctl(train_sequence_controller(d, cfg));
  // windows from the first (training) episodes
  double worst_mean = 0.0;
  for (std::uint32_t ep = 0; ep < 3; ++ep) {
    std::vector<FingerState> history;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : d.samples) {
      if (s.episode != ep) continue;
      history.push_back(state_of(s.reading, Representation::JointAngles));
      const auto in = ControllerInput::from_history(Finger::Index, Representation::JointAngles, history);
      const auto deg = ctl.predict(in, d.ranges);
      for (std::size_t k = 0; k < 2; ++k) {
        const std::size_t m = motor_offset(Finger::Index) + k;
        sum += std::abs(deg[k] - s.reading.commanded[k]) / (d.ranges.max[m] - d.ranges.min[m]);
        ++n;
      }
    }
    worst_mean = std::max(worst_mean, sum / static_cast<double>(n));
  }
  MESSAGE("worst per-episode mean replay error, fraction of range: " << worst_mean);
  CHECK(worst_mean < 0.05);
}

TEST_CASE("predictions respect the motor ranges and input representation") {
  const Dataset d = index_dataset(8);
  const MotorRanges ranges = saturation_ranges();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> wild(-500.0, 500.0);
  for (auto kind : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search}) {
    const Controller ctl(train_controller(kind, d, quick_config(2)));
    for (int q = 0; q < 50; ++q) {
      const auto deg = ctl.predict(single(Finger::Index, {wild(rng), wild(rng), wild(rng)}), ranges);
      for (std::size_t k = 0; k < 2; ++k) {
        const std::size_t m = motor_offset(Finger::Index) + k;
        CHECK(deg[k] >= ranges.min[m]);
        CHECK(deg[k] <= ranges.max[m]);
      }
    }
    const FingerState one[] = {{0, 0, 0}};
    check_code([&] { ctl.predict_unit(ControllerInput::from_history(Finger::Index, Representation::Fingertip, one)); },
               ErrorCode::RepresentationMismatch);
    check_code([&] { ctl.predict_unit(single(Finger::Middle, {0, 0, 0})); }, ErrorCode::InvalidArgument);
  }
}

TEST_CASE("prediction latency stays within the control budget") {
  const Dataset& d = covering_dataset();
  for (auto kind : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search}) {
    auto cfg = quick_config(1);
    cfg.hidden = 32;
    cfg.head_hidden = {64};
    cfg.grid_points = 50;
    const Controller ctl(train_controller(kind, d, cfg));
    const auto in = single(Finger::Index, {30, 40, 20});
    const int calls = 200;
    const auto t0 = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (int i = 0; i < calls; ++i) sink += ctl.predict_unit(in)[0];
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / calls;
    CAPTURE(kind_name(kind));
    CHECK(std::isfinite(sink));
    CHECK(ms <= 2.0);
  }
}

TEST_CASE("checkpoints and manifests round-trip and detect tampering") {
  const Dataset d = index_dataset(8);
  const auto dir = std::filesystem::temp_directory_path() / "ruka_test_controllers";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  for (auto kind : {ControllerKind::Sequence, ControllerKind::Mlp, ControllerKind::Knn, ControllerKind::Search}) {
    const auto c = train_controller(kind, d, quick_config(1));
    write_checkpoint(c, dir / "c.json");
    const auto back = read_checkpoint(dir / "c.json");
    CHECK(back == c);
    const auto in = single(Finger::Index, {20, 30, 10});
    CHECK(Controller(back).predict_unit(in) == Controller(c).predict_unit(in));
  }

  std::array<ControllerCheckpoint, kNumFingers> ckpts;
  std::array<std::string, kNumFingers> files, digests;
  for (Finger f : kAllFingers) {
    const auto data = collect_dataset(plant(), default_geometry(), saturation_ranges(), WalkSpec{f, 20, 2.0}, 3, 1, "cal");
    ckpts[index_of(f)] = train_controller(ControllerKind::Knn, data, quick_config(1));
    files[index_of(f)] = std::string(finger_name(f)) + ".json";
    digests[index_of(f)] = checkpoint_digest(ckpts[index_of(f)]);
    write_checkpoint(ckpts[index_of(f)], dir / files[index_of(f)]);
  }
  write_manifest(dir / "manifest.json", ControllerKind::Knn, files, digests);
  const HandController hand = load_hand_controller(dir / "manifest.json");
  CHECK(hand.kind == ControllerKind::Knn);
  CHECK(hand.digest() == make_hand_controller(ControllerKind::Knn, ckpts).digest());
  CHECK(hand.finger(Finger::Ring).finger() == Finger::Ring);

  auto tampered = ckpts[2];
  tampered.k = 3;
  write_checkpoint(tampered, dir / files[2]);
  check_code([&] { load_hand_controller(dir / "manifest.json"); }, ErrorCode::DigestMismatch);

  write_manifest(dir / "manifest.json", ControllerKind::Mlp, files, digests);
  write_checkpoint(ckpts[2], dir / files[2]);
  check_code([&] { load_hand_controller(dir / "manifest.json"); }, ErrorCode::InvalidArgument);

  std::ofstream(dir / "broken.json") << "{\"schema\": 1, \"kind\": ";
  CHECK_THROWS_AS(read_checkpoint(dir / "broken.json"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training config round-trips and rejects zero sizes") {
  TrainingConfig c;
  c.hidden = 48;
  c.history_noise = 0.25;
  c.mlp_hidden = {16};
  const nlohmann::json j = c;
  CHECK(j.get<TrainingConfig>() == c);
  CHECK(nlohmann::json::object().get<TrainingConfig>() == TrainingConfig{});
  nlohmann::json bad = c;
  bad["batch_size"] = 0;
  CHECK_THROWS_AS(bad.get<TrainingConfig>(), Error);
}

TEST_CASE("training rejects degenerate inputs") {
  Dataset empty = index_dataset(8);
  empty.samples.clear();
  CHECK_THROWS_AS(train_controller(ControllerKind::Mlp, empty, quick_config(1)), Error);
  auto cfg = quick_config(1);
  cfg.grid_points = 1;
  CHECK_THROWS_AS(train_search_controller(index_dataset(8), cfg), Error);
}
