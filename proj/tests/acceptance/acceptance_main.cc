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

// Acceptance gate: runs every criterion, prints one PASS/FAIL line each and
// exits non-zero if any fails.
//
//   acceptance [--only N] [--write-golden DIR]

#include <unistd.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <latch>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "cli.h"
#include "json.hpp"
#include "oracle/layer_oracle.h"
#include "oracle/ray_march.h"
#include "semmap/geometry.h"
#include "semmap/ingestion.h"
#include "semmap/occupancy.h"
#include "semmap/query.h"
#include "semmap/query_server.h"
#include "semmap/replay.h"
#include "semmap/run_config.h"
#include "semmap/semantic_layer.h"
#include "semmap/simulator.h"
#include "semmap/snapshot_io.h"
#include "support/line_client.h"

namespace semmap {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Format(const char* fmt, ...) {
  char buffer[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buffer, sizeof(buffer), fmt, args);
  va_end(args);
  return buffer;
}

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

// ---------------------------------------------------------------------------
// Shared helpers.

std::vector<LogRecord> TextRoundTrip(std::span<const LogRecord> records) {
  std::istringstream in(LogToText(records));
  return ReadLog(in);
}

struct Frame {
  std::shared_ptr<const ObjectMapSnapshot> snapshot;
  std::vector<AssociationEvent> events;
};

class CaptureSink : public ReplaySink {
 public:
  void OnFrame(const std::shared_ptr<const ObjectMapSnapshot>& snapshot,
               std::span<const AssociationEvent> events) override {
    frames.push_back({snapshot, {events.begin(), events.end()}});
  }
  std::vector<Frame> frames;
};

ReplayResult ReplayCapturing(const Scenario& scenario, CaptureSink& sink) {
  const RunConfig config;
  const SyntheticRun run = SynthesizeLog(scenario, config);
  const std::vector<LogRecord> records = TextRoundTrip(run.records);
  ReplaySink* sinks[] = {&sink};
  return Replay(records, config, sinks);
}

std::vector<WallSegment> RoomWalls(double hx, double hy) {
  return {{{-hx, -hy}, {hx, -hy}},
          {{hx, -hy}, {hx, hy}},
          {{hx, hy}, {-hx, hy}},
          {{-hx, hy}, {-hx, -hy}}};
}

bool SamePose(const Pose2& a, const Pose2& b) {
  return std::memcmp(&a.x, &b.x, sizeof(double)) == 0 &&
         std::memcmp(&a.y, &b.y, sizeof(double)) == 0 &&
         std::memcmp(&a.yaw, &b.yaw, sizeof(double)) == 0;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------------------
// 1. Lab scene over 100 seeds.

Outcome LabScene() {
  const auto start = Clock::now();
  const Scenario base = DefaultLabScenario();
  if (base.noise.pixel_sigma != 2.0 || base.noise.depth_sigma != 0.02 ||
      base.noise.miss_probability != 0.1 || base.rates.detection_hz != 10.0 ||
      base.trajectory.back().stamp != 60.0) {
    return {false, "default scenario does not use the reference noise/rates"};
  }
  const RunConfig config;
  int good = 0;
  double worst_error = 0.0;
  std::string failures;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    Scenario scenario = base;
    scenario.seed = seed;
    const SyntheticRun run = SynthesizeLog(scenario, config);
    const std::vector<LogRecord> records = TextRoundTrip(run.records);
    const ReplayResult result = Replay(records, config);
    const RunMetrics m = ScoreRun(*result.final_snapshot, run.truth, 0.5);
    const double error = m.mean_position_error.value_or(INFINITY);
    worst_error = std::max(worst_error, error);
    if (m.true_positives == 4 && m.duplicates == 0 && m.false_objects == 0 &&
        error <= 0.15) {
      ++good;
    } else if (failures.size() < 120) {
      failures += Format(" seed%llu(tp=%d,dup=%d,fp=%d,err=%.3f)",
                         static_cast<unsigned long long>(seed), m.true_positives,
                         m.duplicates, m.false_objects, error);
    }
  }
  const double elapsed = Seconds(start);
  return {good >= 95 && elapsed < 30.0,
          Format("%d/100 seeds clean, worst mean error %.3f m, %.1f s", good,
                 worst_error, elapsed) +
              failures};
}

// ---------------------------------------------------------------------------
// 2. Objects persist while out of view.

Outcome Persistence() {
  Scenario s = DefaultLabScenario();
  s.walls = RoomWalls(4.0, 3.0);
  s.objects = {{"chair", {2.5, 0.8}, 0.3, 0.45}, {"person", {2.7, -0.9}, 0.3, 0.9}};
  // Face the objects, turn around by t = 10 and look away for 30 s. False
  // positives keep frames flowing through the layer while facing away.
  const double pi = std::numbers::pi;
  s.trajectory = {{0.0, Pose2(0, 0, 0)},
                  {8.0, Pose2(0, 0, 0)},
                  {9.0, Pose2(0, 0, 0.5 * pi)},
                  {10.0, Pose2(0, 0, pi)},
                  {40.5, Pose2(0, 0, pi)}};
  s.noise.false_positive_rate = 0.5;
  s.seed = 11;
  CaptureSink sink;
  ReplayCapturing(s, sink);

  size_t confirmed = sink.frames.size();
  for (size_t i = 0; i < sink.frames.size(); ++i) {
    if (sink.frames[i].snapshot->objects.size() == 2) {
      confirmed = i;
      break;
    }
  }
  if (confirmed == sink.frames.size()) {
    return {false, "the two objects were never confirmed"};
  }
  const ObjectMapSnapshot& ref = *sink.frames[confirmed].snapshot;
  int away_frames = 0;
  double last_stamp = 0.0;
  for (size_t i = confirmed; i < sink.frames.size(); ++i) {
    const ObjectMapSnapshot& snap = *sink.frames[i].snapshot;
    last_stamp = snap.stamp;
    if (snap.stamp > 10.0) ++away_frames;
    if (snap.objects.size() != ref.objects.size()) {
      return {false, Format("object count changed to %zu at t=%.2f",
                            snap.objects.size(), snap.stamp)};
    }
    for (size_t k = 0; k < ref.objects.size(); ++k) {
      if (snap.objects[k].id != ref.objects[k].id ||
          !SamePose(snap.objects[k].pose, ref.objects[k].pose)) {
        return {false, Format("object %llu moved at t=%.2f",
                              static_cast<unsigned long long>(ref.objects[k].id),
                              snap.stamp)};
      }
    }
  }
  const bool pass = away_frames > 0 && last_stamp >= 39.0;
  return {pass, Format("2 objects confirmed at t=%.1f, unchanged through %d "
                       "frames facing away (last t=%.1f)",
                       ref.stamp, away_frames, last_stamp)};
}

// ---------------------------------------------------------------------------
// 3. Revisiting a confirmed object from 8 viewpoints.

Outcome Revisit() {
  Scenario s = DefaultLabScenario();
  s.walls = RoomWalls(4.0, 3.0);
  s.objects = {{"chair", {0.0, 0.0}, 0.3, 0.45}};
  s.trajectory.clear();
  const double pi = std::numbers::pi;
  for (int k = 0; k < 8; ++k) {
    const double theta = k * pi / 4.0;
    const Pose2 view(2.0 * std::cos(theta), 2.0 * std::sin(theta), theta + pi);
    s.trajectory.push_back({4.0 * k, view});
    s.trajectory.push_back({4.0 * k + 3.0, view});
  }
  s.seed = 5;
  CaptureSink sink;
  ReplayCapturing(s, sink);

  std::optional<MapObject> first;
  std::vector<int64_t> hits_at_view(8, -1);
  for (const Frame& f : sink.frames) {
    const ObjectMapSnapshot& snap = *f.snapshot;
    int chairs = 0;
    const MapObject* chair = nullptr;
    for (const MapObject& o : snap.objects) {
      if (o.class_label == "chair") {
        ++chairs;
        chair = &o;
      }
    }
    if (chairs > 1) {
      return {false, Format("%d chair ids at t=%.2f", chairs, snap.stamp)};
    }
    if (!chair) {
      if (first) return {false, "the chair disappeared"};
      continue;
    }
    if (!first) first = *chair;
    if (chair->id != first->id || !SamePose(chair->pose, first->pose)) {
      return {false, Format("chair id or pose changed at t=%.2f", snap.stamp)};
    }
    for (int k = 0; k < 8; ++k) {
      if (snap.stamp <= 4.0 * k + 3.0 + 1e-9 && snap.stamp > 4.0 * k - 1.0) {
        hits_at_view[static_cast<size_t>(k)] = chair->hit_count;
      }
    }
  }
  if (!first) return {false, "the chair was never confirmed"};
  std::string trace;
  bool increasing = true;
  for (int k = 0; k < 8; ++k) {
    trace += Format("%s%lld", k ? "," : "", static_cast<long long>(hits_at_view[k]));
    if (hits_at_view[k] < 0 || (k > 0 && hits_at_view[k] <= hits_at_view[k - 1])) {
      increasing = false;
    }
  }
  return {increasing, "one chair id, constant pose, hits per viewpoint " + trace};
}

// ---------------------------------------------------------------------------
// 4. Promotion gate and in-frame merge conformance.

MapDetection Det(const std::string& label, double x, double y, double score,
                 double stamp) {
  MapDetection d;
  d.class_label = label;
  d.position = {x, y};
  d.score = score;
  d.stamp = stamp;
  return d;
}

// Feeds one detection per frame at 10 Hz; returns the object count after
// each frame.
std::vector<size_t> FeedSingle(SemanticLayer& layer, int frames, double score) {
  std::vector<size_t> counts;
  for (int k = 0; k < frames; ++k) {
    const double t = 0.1 * k;
    const MapDetection d = Det("chair", 1.0, 0.0, score, t);
    counts.push_back(layer.ProcessFrame(std::span(&d, 1), t).snapshot->objects.size());
  }
  return counts;
}

Outcome GateConformance() {
  std::vector<std::string> failed;

  {
    SemanticLayer layer{LayerConfig{}};
    const std::vector<size_t> counts = FeedSingle(layer, 10, 0.9);
    if (counts[8] != 0) failed.push_back("9 hits promoted");
    if (counts[9] != 1) failed.push_back("10th hit did not promote in its frame");
  }
  {
    LayerConfig config;
    config.default_cutoff = 0.3;
    SemanticLayer low{config};
    SemanticLayer high{config};
    if (FeedSingle(low, 12, 0.49).back() != 0) failed.push_back("mean 0.49 promoted");
    if (FeedSingle(high, 10, 0.51).back() != 1) failed.push_back("mean 0.51 rejected");
  }
  for (const double gap : {0.19, 0.21}) {
    SemanticLayer layer{LayerConfig{}};
    const std::vector<MapDetection> frame{Det("chair", 1.0, 0.0, 0.9, 0.0),
                                          Det("chair", 1.0 + gap, 0.0, 0.8, 0.0)};
    const size_t survivors = MergeInFrame(frame, layer.config()).size();
    const FrameResult r = layer.ProcessFrame(frame, 0.0);
    const bool merged = r.events[1].kind == EventKind::kMergedInFrame;
    const size_t expected = gap < 0.2 ? 1 : 2;
    if (survivors != expected || merged != (expected == 1)) {
      failed.push_back(Format("%.2f m apart left %zu survivors", gap, survivors));
    }
  }

  std::string detail = "9/10 hits, 0.49/0.51 mean, 0.19/0.21 m merge";
  for (const std::string& f : failed) detail += "; " + f;
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------------------
// 5. Engine against the brute-force evaluator.

std::vector<std::vector<MapDetection>> RandomScenario(uint64_t seed,
                                                      std::vector<double>& stamps) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> labels{"chair", "person", "table"};
  const auto pick = [&] { return labels[static_cast<size_t>(u(rng) * 3)]; };
  struct Truth {
    std::string label;
    double x, y;
  };
  std::vector<Truth> truth;
  const int n = 1 + static_cast<int>(u(rng) * 5);
  const double extent = 2.0 + u(rng) * 4.0;
  for (int i = 0; i < n; ++i) truth.push_back({pick(), u(rng) * extent, u(rng) * extent});
  const int frames = 20 + static_cast<int>(u(rng) * 181);
  std::normal_distribution<double> noise(0.0, 0.05 + 0.25 * u(rng));
  const double detect_p = 0.5 + 0.5 * u(rng);

  std::vector<std::vector<MapDetection>> out;
  double t = 0.0;
  stamps.clear();
  for (int f = 0; f < frames; ++f) {
    // Mostly 10 Hz, with repeated stamps and occasional long gaps.
    const double r = u(rng);
    t += r < 0.05 ? 0.0 : (r < 0.1 ? 1.0 + 3.0 * u(rng) : 0.05 + 0.1 * u(rng));
    std::vector<MapDetection> frame;
    for (const Truth& g : truth) {
      if (u(rng) > detect_p) continue;
      frame.push_back(Det(g.label, g.x + noise(rng), g.y + noise(rng),
                          0.3 + 0.7 * u(rng), t));
      frame.back().yaw = (u(rng) - 0.5) * 6.0;
      if (u(rng) < 0.1) frame.push_back(frame.back());
    }
    if (u(rng) < 0.3) frame.push_back(Det(pick(), u(rng) * extent, u(rng) * extent, u(rng), t));
    std::shuffle(frame.begin(), frame.end(), rng);
    out.push_back(std::move(frame));
    stamps.push_back(t);
  }
  return out;
}

std::string CompareSnapshots(const ObjectMapSnapshot& got,
                             const std::vector<oracle::Object>& want) {
  if (got.objects.size() != want.size()) {
    return Format("object count %zu vs %zu", got.objects.size(), want.size());
  }
  for (size_t i = 0; i < want.size(); ++i) {
    const MapObject& a = got.objects[i];
    const oracle::Object& b = want[i];
    if (a.id != b.id || a.class_label != b.class_label || a.pose.x != b.x ||
        a.pose.y != b.y || a.pose.yaw != b.yaw || a.hit_count != b.hits ||
        a.score_sum != b.score_sum || a.mean_score != b.mean_score ||
        a.first_seen != b.first_seen || a.last_seen != b.last_seen) {
      return Format("object %zu differs", i);
    }
  }
  return {};
}

Outcome OracleEquivalence() {
  int matched = 0;
  std::string first_failure;
  for (uint64_t seed = 1; seed <= 200; ++seed) {
    std::vector<double> stamps;
    const auto frames = RandomScenario(seed, stamps);
    LayerConfig config;
    if (seed % 4 == 0) config.per_class_cutoff["person"] = 0.45;
    SemanticLayer engine{config};
    oracle::BruteForceLayer reference{config};
    std::string failure;
    for (size_t f = 0; f < frames.size() && failure.empty(); ++f) {
      const FrameResult r = engine.ProcessFrame(frames[f], stamps[f]);
      const std::vector<oracle::Event> events = reference.Step(frames[f], stamps[f]);
      if (r.events.size() != events.size()) {
        failure = "event count";
        break;
      }
      for (size_t i = 0; i < events.size(); ++i) {
        if (r.events[i].kind != events[i].kind ||
            r.events[i].reason != events[i].reason ||
            r.events[i].object_id != events[i].object_id) {
          failure = Format("event %zu of frame %zu", i, f);
        }
      }
      if (failure.empty()) failure = CompareSnapshots(*r.snapshot, reference.Snapshot());
      if (failure.empty() && engine.candidates().size() != reference.candidates().size()) {
        failure = "candidate count";
      }
      if (!failure.empty()) failure = Format("frame %zu: ", f) + failure;
    }
    if (failure.empty()) {
      ++matched;
    } else if (first_failure.empty()) {
      first_failure = Format(" first mismatch: seed %llu ",
                             static_cast<unsigned long long>(seed)) + failure;
    }
  }
  return {matched == 200,
          Format("%d/200 random scenarios identical frame by frame", matched) +
              first_failure};
}

// ---------------------------------------------------------------------------
// 6. Geometry round trip.

Outcome GeometryRoundTrip() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto axis = [&] {
    Eigen::Vector3d a(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
    return Eigen::Vector3d(a.normalized());
  };
  double worst_pixel = 0.0;
  double worst_chain = 0.0;
  int failures = 0;
  for (int i = 0; i < 100000; ++i) {
    CameraIntrinsics intr;
    intr.width = u(rng) < 0.5 ? 640 : 1280;
    intr.height = intr.width == 640 ? 480 : 720;
    intr.fx = 300.0 + 600.0 * u(rng);
    intr.fy = intr.fx * (0.95 + 0.1 * u(rng));
    intr.cx = 0.5 * intr.width + 20.0 * (u(rng) - 0.5);
    intr.cy = 0.5 * intr.height + 20.0 * (u(rng) - 0.5);
    const double pu = 10.0 + (intr.width - 20.0) * u(rng);
    const double pv = 10.0 + (intr.height - 20.0) * u(rng);
    const double depth = 0.2 + 19.8 * u(rng);
    BBox box{pu - 5.0, pv - 4.0, pu + 5.0, pv + 4.0};

    const Eigen::AngleAxisd cam_rot(2.0 * std::numbers::pi * u(rng), axis());
    const Eigen::Vector3d cam_t(u(rng) - 0.5, u(rng) - 0.5, u(rng));
    const double yaw = 2.0 * std::numbers::pi * u(rng);
    const double pitch = 0.1 * (u(rng) - 0.5);
    const double roll = 0.1 * (u(rng) - 0.5);
    const Eigen::Matrix3d body_rot =
        Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix() *
        Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()).toRotationMatrix() *
        Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()).toRotationMatrix();
    const Eigen::Vector3d body_t(100.0 * (u(rng) - 0.5), 100.0 * (u(rng) - 0.5),
                                 0.2 * u(rng));
    const Pose3 body_from_camera(cam_t, Eigen::Quaterniond(cam_rot));
    const Pose3 map_from_body(body_t, Eigen::Quaterniond(body_rot));

    const auto point = BackProject(box, PrecollectedDepth({depth}), intr);
    if (!point) {
      ++failures;
      continue;
    }
    const Eigen::Vector2d pixel = ProjectToPixel(*point, intr);
    worst_pixel = std::max(worst_pixel, (pixel - box.center()).norm());

    const Detection2D detection{"chair", 0.9, box};
    const MapDetection mapped =
        DetectionToMap(detection, *point, body_from_camera, map_from_body, 0.0);

    // Independent route: explicit pinhole and 4x4 homogeneous matrices.
    const Eigen::Vector2d c = box.center();
    const Eigen::Vector4d p_cam((c.x() - intr.cx) * depth / intr.fx,
                                (c.y() - intr.cy) * depth / intr.fy, depth, 1.0);
    Eigen::Matrix4d t_bc = Eigen::Matrix4d::Identity();
    t_bc.topLeftCorner<3, 3>() = cam_rot.toRotationMatrix();
    t_bc.topRightCorner<3, 1>() = cam_t;
    Eigen::Matrix4d t_mb = Eigen::Matrix4d::Identity();
    t_mb.topLeftCorner<3, 3>() = body_rot;
    t_mb.topRightCorner<3, 1>() = body_t;
    const Eigen::Vector4d p_map = t_mb * (t_bc * p_cam);
    worst_chain = std::max(worst_chain, (mapped.position - p_map.head<2>()).norm());
  }
  const bool pass = failures == 0 && worst_pixel < 1e-6 && worst_chain < 1e-9;
  return {pass, Format("1e5 tuples, max pixel error %.2e px, max map error %.2e m",
                       worst_pixel, worst_chain)};
}

// ---------------------------------------------------------------------------
// 7. Occupancy against ray marching, plus golden export.

Scenario SquareRoomScenario() {
  Scenario s = DefaultLabScenario();
  // Walls lie off cell boundaries, where a hit's cell would hinge on the
  // last bit of the endpoint.
  s.walls = RoomWalls(3.02, 3.02);
  s.objects.clear();
  s.noise.false_positive_rate = 0.0;
  const double h = 0.5 * std::numbers::pi;
  s.trajectory = {{0.0, Pose2(-1, -1, 0)},  {5.0, Pose2(1, -1, 0)},
                  {6.0, Pose2(1, -1, h)},   {11.0, Pose2(1, 1, h)},
                  {12.0, Pose2(1, 1, 2 * h)}, {17.0, Pose2(-1, 1, 2 * h)},
                  {18.0, Pose2(-1, 1, -h)}, {23.0, Pose2(-1, -1, -h)}};
  s.seed = 3;
  return s;
}

Outcome OccupancyOracle(const std::string& write_golden) {
  const Scenario scenario = SquareRoomScenario();
  const RunConfig config;
  const SyntheticRun run = SynthesizeLog(scenario, config);
  const std::vector<LogRecord> records = TextRoundTrip(run.records);
  const ReplayResult result = Replay(records, config);
  const OccupancyGrid& grid = result.grid;

  const Pose2 origin = grid.origin();
  oracle::MarchGrid reference(grid.resolution(), {origin.x, origin.y}, grid.width(),
                              grid.height());
  for (const LogRecord& r : records) {
    if (r.stream() != Stream::kScan) continue;
    const Pose2 sensor =
        Compose(TrajectoryPose(scenario.trajectory, r.stamp), config.body_from_lidar);
    reference.IntegrateScan(sensor, std::get<LaserScan>(r.payload), config.occupancy);
  }
  int64_t touched = 0;
  int64_t agree = 0;
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const double mine = grid.at(CellIndex{x, y});
      const double theirs = reference.at(x, y);
      if (mine == 0.0 && theirs == 0.0) continue;
      ++touched;
      agree += ClassifyCell(mine) == ClassifyCell(theirs);
    }
  }
  const double ratio = touched ? static_cast<double>(agree) / touched : 0.0;

  const std::string pgm = EncodePgm(grid);
  const std::string yaml = EncodeMapMetadata(grid, "square_room.pgm");
  if (!write_golden.empty()) {
    fs::create_directories(write_golden);
    std::ofstream(fs::path(write_golden) / "square_room.pgm", std::ios::binary) << pgm;
    std::ofstream(fs::path(write_golden) / "square_room.yaml", std::ios::binary) << yaml;
  }
  const fs::path golden(SEMMAP_GOLDEN_DIR);
  const bool pgm_ok = fs::exists(golden / "square_room.pgm") &&
                      ReadFile(golden / "square_room.pgm") == pgm;
  const bool yaml_ok = fs::exists(golden / "square_room.yaml") &&
                       ReadFile(golden / "square_room.yaml") == yaml;
  return {touched > 0 && ratio >= 0.99 && pgm_ok && yaml_ok,
          Format("%.4f agreement over %lld touched cells, golden pgm %s, yaml %s",
                 ratio, static_cast<long long>(touched), pgm_ok ? "match" : "DIFFER",
                 yaml_ok ? "match" : "DIFFER")};
}

// ---------------------------------------------------------------------------
// 8. Determinism of CLI replay outputs.

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag)
      : path_(fs::temp_directory_path() /
              ("semmap_acceptance_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

int RunCli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"semmap"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  return cli::Run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome Determinism() {
  ScratchDir dir("determinism");
  const fs::path& root = dir.path();
  std::ofstream(root / "square.json") << ScenarioToJson(SquareRoomScenario()).dump();
  std::vector<fs::path> logs;
  for (const char* seed : {"3", "42"}) {
    const fs::path log = root / (std::string("lab_") + seed + ".jsonl");
    if (RunCli({"simulate", "--seed", seed, "--out", log.string()}) != cli::kOk) {
      return {false, "simulate failed"};
    }
    logs.push_back(log);
  }
  logs.push_back(root / "square.jsonl");
  if (RunCli({"simulate", (root / "square.json").string(), "--out",
              logs.back().string()}) != cli::kOk) {
    return {false, "simulate failed"};
  }

  int identical = 0;
  std::string differing;
  for (const fs::path& log : logs) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path out = root / (log.stem().string() + "_out" + std::to_string(run));
      if (RunCli({"replay", log.string(), "--out", out.string()}) != cli::kOk) {
        return {false, "replay failed on " + log.filename().string()};
      }
      json report = json::parse(ReadFile(out / "report.json"));
      report.erase("wall_clock_s");
      for (const char* name : {"snapshot.json", "events.jsonl", "map.pgm", "map.yaml"}) {
        outputs[run] += ReadFile(out / name);
        outputs[run] += '\x1f';
      }
      outputs[run] += report.dump();
    }
    if (outputs[0] == outputs[1]) {
      ++identical;
    } else {
      differing += " " + log.filename().string();
    }
  }
  return {identical == static_cast<int>(logs.size()),
          Format("%d/%zu logs replayed twice with byte-identical outputs", identical,
                 logs.size()) + differing};
}

// ---------------------------------------------------------------------------
// 9. Throughput against 10^4 confirmed objects.

constexpr int kGridSide = 100;
constexpr double kSpacing = 2.0;

std::vector<MapDetection> SeedFrame(double stamp) {
  std::vector<MapDetection> frame;
  frame.reserve(kGridSide * kGridSide);
  for (int i = 0; i < kGridSide; ++i) {
    for (int j = 0; j < kGridSide; ++j) {
      frame.push_back(Det((i + j) % 2 ? "chair" : "person", kSpacing * i,
                          kSpacing * j, 0.9, stamp));
    }
  }
  return frame;
}

// Frame f: a few detections near random objects plus one stray.
std::vector<MapDetection> WorkFrame(int64_t f, double stamp) {
  std::mt19937_64 rng(static_cast<uint64_t>(f) * 7919u + 1);
  std::uniform_int_distribution<int> cell(0, kGridSide - 1);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::uniform_real_distribution<double> score(0.7, 1.0);
  std::vector<MapDetection> frame;
  for (int k = 0; k < 4; ++k) {
    const int i = cell(rng);
    const int j = cell(rng);
    frame.push_back(Det((i + j) % 2 ? "chair" : "person", kSpacing * i + jitter(rng),
                        kSpacing * j + jitter(rng), score(rng), stamp));
  }
  frame.push_back(Det("table", kSpacing * cell(rng) + 1.0,
                      kSpacing * cell(rng) + 1.0, score(rng), stamp));
  return frame;
}

Outcome Throughput() {
  constexpr int64_t kFrames = 100000;
  constexpr int64_t kOracleFrames = 1000;
  const LayerConfig config;

  SemanticLayer engine{config};
  oracle::BruteForceLayer reference{config};
  for (int k = 0; k < 10; ++k) {
    const auto frame = SeedFrame(0.1 * k);
    engine.ProcessFrame(frame, 0.1 * k);
    reference.Step(frame, 0.1 * k);
  }
  if (engine.object_count() != kGridSide * kGridSide ||
      reference.Snapshot().size() != kGridSide * kGridSide) {
    return {false, Format("setup confirmed %zu objects", engine.object_count())};
  }

  std::vector<std::vector<MapDetection>> frames;
  frames.reserve(kFrames);
  for (int64_t f = 0; f < kFrames; ++f) {
    frames.push_back(WorkFrame(f, 1.0 + 0.1 * static_cast<double>(f)));
  }

  // Engine: every frame yields a published snapshot.
  // Keeps the loops from being optimized away.
  volatile size_t sink = 0;
  const auto engine_start = Clock::now();
  for (int64_t f = 0; f < kFrames; ++f) {
    const FrameResult r = engine.ProcessFrame(frames[f], frames[f][0].stamp);
    sink = sink + r.snapshot->objects.size();
  }
  const double engine_s = Seconds(engine_start);

  // Reference: exhaustive search plus a full snapshot copy per frame, run
  // on a prefix and extrapolated.
  SemanticLayer check{config};
  for (int k = 0; k < 10; ++k) check.ProcessFrame(SeedFrame(0.1 * k), 0.1 * k);
  const auto oracle_start = Clock::now();
  for (int64_t f = 0; f < kOracleFrames; ++f) {
    reference.Step(frames[f], frames[f][0].stamp);
    sink = sink + reference.Snapshot().size();
  }
  const double oracle_s = Seconds(oracle_start) * (kFrames / kOracleFrames);
  for (int64_t f = 0; f < kOracleFrames; ++f) {
    check.ProcessFrame(frames[f], frames[f][0].stamp);
  }
  const bool same = CompareSnapshots(*check.Snapshot(0.0), reference.Snapshot()).empty();

  const double speedup = oracle_s / engine_s;
  const bool pass = same && engine_s < 10.0 && speedup >= 20.0;
  return {pass, Format("1e5 frames vs 1e4 objects in %.2f s; reference ~%.1f s "
                       "(extrapolated), speedup %.1fx%s",
                       engine_s, oracle_s, speedup,
                       same ? "" : ", REFERENCE MISMATCH")};
}

// ---------------------------------------------------------------------------
// 10. Query endpoint under live replay.

class PacedPublisher : public ReplaySink {
 public:
  PacedPublisher(std::shared_ptr<SnapshotBoard> board, double speed)
      : board_(std::move(board)), speed_(speed) {}

  void OnFrame(const std::shared_ptr<const ObjectMapSnapshot>& snapshot,
               std::span<const AssociationEvent>) override {
    if (!started_) {
      started_ = true;
      first_ = snapshot->stamp;
      start_ = Clock::now();
    }
    std::this_thread::sleep_until(
        start_ + std::chrono::duration_cast<Clock::duration>(
                     std::chrono::duration<double>((snapshot->stamp - first_) / speed_)));
    published.push_back(snapshot);
    board_->Publish(snapshot);
  }

  std::vector<std::shared_ptr<const ObjectMapSnapshot>> published;

 private:
  std::shared_ptr<SnapshotBoard> board_;
  double speed_;
  bool started_ = false;
  double first_ = 0.0;
  Clock::time_point start_;
};

bool ValidObject(const json& o) {
  return o.is_object() && o.size() == 7 && o.contains("id") &&
         o["id"].is_number_unsigned() && o.contains("class") && o["class"].is_string() &&
         o.contains("x") && o["x"].is_number() && o.contains("y") &&
         o["y"].is_number() && o.contains("yaw") && o["yaw"].is_number() &&
         o.contains("hits") && o["hits"].is_number_integer() &&
         o.contains("mean_score") && o["mean_score"].is_number();
}

bool SchemaValid(const std::string& request, const std::string& response) {
  json doc;
  try {
    doc = json::parse(response);
  } catch (const json::exception&) {
    return false;
  }
  if (request == "LIST") {
    return doc.is_array() && std::all_of(doc.begin(), doc.end(), ValidObject);
  }
  if (request.rfind("NEAREST", 0) == 0) return doc.is_null() || ValidObject(doc);
  return doc.is_number_unsigned();
}

Outcome LiveQueries() {
  const std::vector<std::string> menu{
      "LIST",           "COUNT chair",        "COUNT person",
      "COUNT table",    "NEAREST chair 0 0",  "NEAREST person 0 0",
      "NEAREST chair 3 2", "NEAREST person -3 2", "NEAREST table 1 1"};
  Scenario scenario = DefaultLabScenario();
  scenario.seed = 8;
  const RunConfig config;
  const std::vector<LogRecord> records =
      TextRoundTrip(SynthesizeLog(scenario, config).records);

  auto board = std::make_shared<SnapshotBoard>();
  const auto initial = board->Current();
  QueryServer server(board);
  server.Start("127.0.0.1", 0);

  constexpr int kClients = 100;
  struct Exchange {
    uint16_t request;
    std::string response;
  };
  std::vector<std::vector<Exchange>> logs(kClients);
  std::atomic<bool> done{false};
  std::atomic<int> broken{0};
  std::latch connected(kClients + 1);
  std::vector<std::thread> clients;
  for (int c = 0; c < kClients; ++c) {
    clients.emplace_back([&, c] {
      std::mt19937 rng(static_cast<unsigned>(c));
      std::optional<testing::LineClient> client;
      try {
        client.emplace(server.port());
      } catch (const std::exception&) {
        ++broken;
      }
      connected.count_down();
      connected.wait();
      if (!client) return;
      try {
        bool last = false;
        while (!last) {
          last = done.load();
          const auto q = static_cast<uint16_t>(rng() % menu.size());
          client->SendRaw(menu[q] + "\n");
          auto line = client->ReadLine();
          if (!line || !client->pending().empty()) {
            ++broken;
            return;
          }
          logs[static_cast<size_t>(c)].push_back({q, std::move(*line)});
          std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
      } catch (const std::exception&) {
        ++broken;
      }
    });
  }
  connected.arrive_and_wait();

  PacedPublisher publisher(board, 20.0);
  ReplaySink* sinks[] = {&publisher};
  const ReplayResult result = Replay(records, config, sinks);
  board->Publish(result.final_snapshot);
  done = true;
  for (std::thread& t : clients) t.join();
  server.Stop();

  // Every answer any published snapshot could have produced, per request.
  std::vector<std::set<std::string>> possible(menu.size());
  std::vector<std::shared_ptr<const ObjectMapSnapshot>> published{initial};
  published.insert(published.end(), publisher.published.begin(),
                   publisher.published.end());
  published.push_back(result.final_snapshot);
  for (size_t q = 0; q < menu.size(); ++q) {
    for (const auto& snap : published) possible[q].insert(HandleQueryLine(menu[q], *snap));
  }

  int64_t total = 0;
  int64_t invalid = 0;
  int64_t inconsistent = 0;
  std::set<std::string> distinct_lists;
  for (const auto& log : logs) {
    for (const Exchange& e : log) {
      ++total;
      if (!SchemaValid(menu[e.request], e.response)) ++invalid;
      if (!possible[e.request].count(e.response)) ++inconsistent;
      if (e.request == 0) distinct_lists.insert(e.response);
    }
  }
  const bool pass = broken == 0 && invalid == 0 && inconsistent == 0 &&
                    total >= kClients && distinct_lists.size() > 1;
  return {pass, Format("%d connections, %lld responses over %zu snapshots: %lld "
                       "invalid, %lld inconsistent, %d broken, %zu distinct LIST answers",
                       kClients, static_cast<long long>(total), published.size(),
                       static_cast<long long>(invalid),
                       static_cast<long long>(inconsistent), broken.load(),
                       distinct_lists.size())};
}

}  // namespace
}  // namespace semmap

int main(int argc, char** argv) {
  using namespace semmap;
  int only = 0;
  std::string write_golden;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (arg == "--write-golden" && i + 1 < argc) {
      write_golden = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--only N] [--write-golden DIR]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"lab scene over 100 seeds", LabScene},
      {"persistence out of view", Persistence},
      {"re-sighting stability", Revisit},
      {"promotion gate conformance", GateConformance},
      {"oracle equivalence", OracleEquivalence},
      {"geometry round trip", GeometryRoundTrip},
      {"occupancy oracle and golden export",
       [&] { return OccupancyOracle(write_golden); }},
      {"replay determinism", Determinism},
      {"throughput", Throughput},
      {"query endpoint under live replay", LiveQueries},
  };

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i + 1) != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2zu %s: %s (%.1f s)\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, outcome.detail.c_str(), elapsed);
    std::fflush(stdout);
    failed += outcome.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
