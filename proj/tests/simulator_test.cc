/*
 * Copyright 2026 The semmap Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "doctest.h"
#include "semmap/ingestion.h"
#include "semmap/replay.h"
#include "semmap/simulator.h"

namespace semmap {
namespace {

constexpr double kPi = std::numbers::pi;

Scenario QuietScenario() {
  Scenario s;
  s.noise.pixel_sigma = 0.0;
  s.noise.depth_sigma = 0.0;
  s.noise.miss_probability = 0.0;
  s.noise.false_positive_rate = 0.0;
  s.noise.score_min = s.noise.score_max = 0.8;
  return s;
}

std::vector<const DetectionFrame*> Frames(const SyntheticRun& run) {
  std::vector<const DetectionFrame*> out;
  for (const LogRecord& r : run.records) {
    if (r.stream() == Stream::kDetections) {
      out.push_back(&std::get<DetectionFrame>(r.payload));
    }
  }
  return out;
}

TEST_CASE("noise-free chair in front of a parked robot") {
  Scenario s = QuietScenario();
  s.objects = {{"chair", {2.0, 0.0}, 0.3, 0.45}};
  s.trajectory = {{0.0, Pose2(0, 0, 0)}, {1.9, Pose2(0, 0, 0)}};
  const RunConfig config;
  const SyntheticRun run = SynthesizeLog(s, config);

  const auto frames = Frames(run);
  REQUIRE(frames.size() == 20);
  for (const DetectionFrame* f : frames) {
    REQUIRE(f->items.size() == 1);
    const LoggedDetection& d = f->items[0];
    const LoggedDetection& first = frames[0]->items[0];
    CHECK(d.detection.class_label == "chair");
    CHECK(d.detection.score == 0.8);
    CHECK(d.detection.bbox.u_min == first.detection.bbox.u_min);
    CHECK(d.detection.bbox.v_max == first.detection.bbox.v_max);
    CHECK(d.depth_m == first.depth_m);
  }

  // Through the text format as well, where depth is whole millimeters.
  std::istringstream text(LogToText(run.records));
  const std::vector<LogRecord> parsed = ReadLog(text);
  for (const auto* records : {&run.records, &parsed}) {
    const ReplayResult r = Replay(*records, config);
    REQUIRE(r.final_snapshot->objects.size() == 1);
    const MapObject& o = r.final_snapshot->objects[0];
    CHECK(o.class_label == "chair");
    CHECK(std::abs(o.pose.x - 2.0) < 1e-6);
    CHECK(std::abs(o.pose.y) < 1e-6);
  }
}

TEST_CASE("objects behind walls are never detected") {
  Scenario s = QuietScenario();
  s.walls = {{{1.0, -1.0}, {1.0, 1.0}}};
  s.objects = {{"chair", {2.0, 0.0}, 0.3, 0.45}};
  s.trajectory = {{0.0, Pose2(0, 0, 0)}, {3.0, Pose2(0, 0, 0.3)}};
  const SyntheticRun run = SynthesizeLog(s, RunConfig{});
  CHECK(Frames(run).empty());
}

TEST_CASE("objects outside the field of view or range are not detected") {
  Scenario s = QuietScenario();
  s.objects = {{"chair", {-2.0, 0.0}, 0.3, 0.45},
               {"person", {0.0, 3.0}, 0.3, 0.9},
               {"chair", {9.0, 0.0}, 0.3, 0.45}};
  s.trajectory = {{0.0, Pose2(0, 0, 0)}, {1.0, Pose2(0, 0, 0)}};
  CHECK(Frames(SynthesizeLog(s, RunConfig{})).empty());
}

TEST_CASE("seeded generation is reproducible") {
  const Scenario s = DefaultLabScenario();
  const RunConfig config;
  const SyntheticRun a = SynthesizeLog(s, config);
  const SyntheticRun b = SynthesizeLog(s, config);
  CHECK(LogToText(a.records) == LogToText(b.records));

  Scenario other = s;
  other.seed = s.seed + 1;
  const SyntheticRun c = SynthesizeLog(other, config);
  CHECK(LogToText(a.records) != LogToText(c.records));
  CHECK(GroundTruthToJson(a.truth) == GroundTruthToJson(c.truth));
}

TEST_CASE("streams are time ordered with the documented tie rule") {
  const SyntheticRun run = SynthesizeLog(DefaultLabScenario(), RunConfig{});
  for (size_t i = 1; i < run.records.size(); ++i) {
    const LogRecord& a = run.records[i - 1];
    const LogRecord& b = run.records[i];
    CHECK((a.stamp < b.stamp || (a.stamp == b.stamp && a.stream() < b.stream())));
  }
}

// Distance from p along angle to the boundary of the axis-aligned box.
double BoxDistance(double x0, double y0, double x1, double y1,
                   const Eigen::Vector2d& p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  double best = std::numeric_limits<double>::infinity();
  if (c > 0) best = std::min(best, (x1 - p.x()) / c);
  if (c < 0) best = std::min(best, (x0 - p.x()) / c);
  if (s > 0) best = std::min(best, (y1 - p.y()) / s);
  if (s < 0) best = std::min(best, (y0 - p.y()) / s);
  return best;
}

TEST_CASE("scan ranges equal exact wall distances") {
  Scenario s = QuietScenario();
  s.walls = {{{-2, -1.5}, {3, -1.5}},
             {{3, -1.5}, {3, 2.5}},
             {{3, 2.5}, {-2, 2.5}},
             {{-2, 2.5}, {-2, -1.5}}};
  s.trajectory = {{0.0, Pose2(0.1, 0.2, 0.3)}, {2.0, Pose2(1.0, 0.5, 2.0)}};
  const RunConfig config;
  const SyntheticRun run = SynthesizeLog(s, config);
  int scans = 0;
  for (const LogRecord& r : run.records) {
    if (r.stream() != Stream::kScan) continue;
    ++scans;
    const LaserScan& scan = std::get<LaserScan>(r.payload);
    const Pose2 sensor =
        Compose(TrajectoryPose(s.trajectory, r.stamp), config.body_from_lidar);
    for (size_t i = 0; i < scan.ranges.size(); ++i) {
      const double angle = sensor.yaw + scan.angle_min +
                           static_cast<double>(i) * scan.angle_increment;
      const double expected =
          BoxDistance(-2, -1.5, 3, 2.5, {sensor.x, sensor.y}, angle);
      CHECK(std::abs(scan.ranges[i] - expected) < 1e-9);
    }
  }
  CHECK(scans == 11);
}

TEST_CASE("rendering and back-projection invert each other") {
  const CameraIntrinsics intr;
  const Pose3 body_from_camera = RunConfig{}.body_from_camera;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int rendered = 0;
  for (int i = 0; i < 2000; ++i) {
    const Pose3 map_from_body = Pose3::FromYaw(u(rng), u(rng), u(rng) * kPi);
    const ScenarioObject object{"chair",
                                {u(rng) * 5.0, u(rng) * 5.0},
                                0.25,
                                0.3 + 0.3 * (u(rng) + 1.0)};
    const auto r = RenderObject(object, {}, Compose(map_from_body, body_from_camera),
                                intr, 6.0);
    if (!r) continue;
    ++rendered;
    const auto point = BackProject(r->detection.bbox,
                                   PrecollectedDepth({r->point_camera.z()}), intr);
    REQUIRE(point.has_value());
    const MapDetection m = DetectionToMap(r->detection, *point, body_from_camera,
                                          map_from_body, 0.0);
    CHECK((m.position - object.position).norm() < 1e-6);
  }
  CHECK(rendered > 100);
}

TEST_CASE("trajectory interpolation") {
  const std::vector<Waypoint> w{{0.0, Pose2(0, 0, 3.0)}, {1.0, Pose2(2, 4, -3.0)}};
  const Pose2 mid = TrajectoryPose(w, 0.5);
  CHECK(mid.x == doctest::Approx(1.0));
  CHECK(mid.y == doctest::Approx(2.0));
  CHECK(std::abs(WrapAngle(mid.yaw - kPi)) < 1e-9);
  CHECK(TrajectoryPose(w, -1.0).x == 0.0);
  CHECK(TrajectoryPose(w, 5.0).y == 4.0);
}

TEST_CASE("ray and segment intersection") {
  const WallSegment wall{{1.0, -1.0}, {1.0, 1.0}};
  CHECK(*RaySegmentDistance({0, 0}, {1, 0}, wall) == doctest::Approx(1.0));
  CHECK_FALSE(RaySegmentDistance({0, 0}, {-1, 0}, wall).has_value());
  CHECK_FALSE(RaySegmentDistance({0, 0}, {0, 1}, wall).has_value());
  CHECK(Occluded(std::vector<WallSegment>{wall}, {0, 0}, {2, 0}));
  CHECK_FALSE(Occluded(std::vector<WallSegment>{wall}, {0, 0}, {0.5, 0}));
}

ObjectMapSnapshot SnapshotOf(const std::vector<MapObject>& objects) {
  ObjectMapSnapshot s;
  s.objects = ObjectList(objects);
  return s;
}

MapObject Obj(uint64_t id, const std::string& label, double x, double y) {
  MapObject o;
  o.id = id;
  o.class_label = label;
  o.pose = Pose2(x, y, 0.0);
  return o;
}

TEST_CASE("score_run") {
  const GroundTruth truth{{{"chair", {0, 0}},
                           {"chair", {3, 0}},
                           {"person", {0, 3}},
                           {"person", {3, 3}}}};
  SUBCASE("perfect map") {
    const auto m = ScoreRun(SnapshotOf({Obj(1, "chair", 0.1, 0), Obj(2, "chair", 3, 0),
                                        Obj(3, "person", 0, 3), Obj(4, "person", 3, 3)}),
                            truth, 0.5);
    CHECK(m.true_positives == 4);
    CHECK(m.duplicates == 0);
    CHECK(m.false_objects == 0);
    REQUIRE(m.mean_position_error.has_value());
    CHECK(*m.mean_position_error == doctest::Approx(0.025));
  }
  SUBCASE("two chairs for one") {
    const GroundTruth one{{{"chair", {0, 0}}}};
    const auto m = ScoreRun(
        SnapshotOf({Obj(1, "chair", 0.3, 0), Obj(2, "chair", -0.1, 0)}), one, 0.5);
    CHECK(m.true_positives == 1);
    CHECK(m.duplicates == 1);
    CHECK(m.false_objects == 0);
    CHECK(*m.mean_position_error == doctest::Approx(0.1));
  }
  SUBCASE("empty snapshot") {
    const auto m = ScoreRun(ObjectMapSnapshot{}, truth, 0.5);
    CHECK(m.true_positives == 0);
    CHECK(m.duplicates == 0);
    CHECK(m.false_objects == 0);
    CHECK_FALSE(m.mean_position_error.has_value());
    CHECK(MetricsToJson(m)["mean_position_error"].is_null());
  }
  SUBCASE("wrong class or far away is a false object") {
    const auto m = ScoreRun(
        SnapshotOf({Obj(1, "person", 0, 0), Obj(2, "chair", 1.5, 0)}), truth, 0.5);
    CHECK(m.true_positives == 0);
    CHECK(m.false_objects == 2);
  }
}

TEST_CASE("scenario documents") {
  const Scenario s = DefaultLabScenario();
  const Scenario back = ScenarioFromJson(ScenarioToJson(s));
  CHECK(ScenarioToJson(back) == ScenarioToJson(s));
  CHECK(back.objects.size() == 4);

  auto doc = ScenarioToJson(s);
  doc["rates"]["detection"] = 0;
  CHECK_THROWS_AS(ScenarioFromJson(doc), ScenarioError);
  doc = ScenarioToJson(s);
  doc["trajectory"] = nlohmann::json::array();
  CHECK_THROWS_AS(ScenarioFromJson(doc), ScenarioError);
  doc = ScenarioToJson(s);
  doc["noise"]["miss_probability"] = 1.5;
  CHECK_THROWS_AS(ScenarioFromJson(doc), ScenarioError);
}

TEST_CASE("default lab scene replays to two chairs and two people") {
  const RunConfig config;
  const SyntheticRun run = SynthesizeLog(DefaultLabScenario(), config);
  const ReplayResult r = Replay(run.records, config);
  int chairs = 0;
  int persons = 0;
  for (const MapObject& o : r.final_snapshot->objects) {
    chairs += o.class_label == "chair";
    persons += o.class_label == "person";
  }
  CHECK(chairs == 2);
  CHECK(persons == 2);
  const RunMetrics m = ScoreRun(*r.final_snapshot, run.truth, 0.5);
  CHECK(m.true_positives == 4);
  CHECK(m.duplicates == 0);
  CHECK(m.false_objects == 0);
}

}  // namespace
}  // namespace semmap
