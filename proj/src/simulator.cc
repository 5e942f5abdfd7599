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

#include "semmap/simulator.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "semmap/random.h"

namespace semmap {
namespace {

using nlohmann::json;

constexpr uint64_t kDetectionStream = 1;
constexpr uint64_t kFalsePositiveStream = 2;

double Cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

std::vector<double> StreamStamps(double t0, double t1, double rate_hz) {
  std::vector<double> out;
  for (int64_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) / rate_hz;
    if (t > t1 + 1e-9) break;
    out.push_back(t);
  }
  return out;
}

std::vector<double> NoisyDepth(double z, int count, double sigma,
                               CounterRng& rng) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(std::max(0.0, z + rng.Normal(sigma)));
  }
  return out;
}

// Bbox centered on (u, v), shrunk symmetrically to stay inside the image.
std::optional<BBox> CenteredBox(double u, double v, double half_w,
                                double half_h,
                                const CameraIntrinsics& intrinsics) {
  if (!(u > 0.0 && u < intrinsics.width && v > 0.0 && v < intrinsics.height)) {
    return std::nullopt;
  }
  half_w = std::min({half_w, u, intrinsics.width - u});
  half_h = std::min({half_h, v, intrinsics.height - v});
  if (!(half_w > 0.0) || !(half_h > 0.0)) return std::nullopt;
  return BBox{u - half_w, v - half_h, u + half_w, v + half_h};
}

}  // namespace

void Scenario::Validate() const {
  if (trajectory.empty()) throw ScenarioError("trajectory is empty");
  for (size_t i = 1; i < trajectory.size(); ++i) {
    if (!(trajectory[i].stamp > trajectory[i - 1].stamp)) {
      throw ScenarioError("trajectory stamps must increase strictly");
    }
  }
  if (!(rates.pose_hz > 0.0) || !(rates.scan_hz > 0.0) ||
      !(rates.detection_hz > 0.0)) {
    throw ScenarioError("sensor rates must be > 0");
  }
  auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!probability(noise.miss_probability)) {
    throw ScenarioError("miss_probability outside [0, 1]");
  }
  if (!probability(noise.score_min) || !probability(noise.score_max) ||
      noise.score_min > noise.score_max) {
    throw ScenarioError("score bounds must satisfy 0 <= min <= max <= 1");
  }
  if (noise.pixel_sigma < 0.0 || noise.depth_sigma < 0.0 ||
      noise.false_positive_rate < 0.0) {
    throw ScenarioError("noise parameters must be >= 0");
  }
  if (lidar.beams <= 0 || lidar.range_min < 0.0 ||
      !(lidar.range_max > lidar.range_min)) {
    throw ScenarioError("invalid lidar model");
  }
  if (!(camera.max_range > 0.0) || camera.depth_samples <= 0) {
    throw ScenarioError("invalid camera model");
  }
  for (const ScenarioObject& o : objects) {
    if (o.class_label.empty() || !(o.radius > 0.0)) {
      throw ScenarioError("objects need a class and a positive radius");
    }
  }
}

Scenario DefaultLabScenario() {
  Scenario s;
  const double hx = 4.0;
  const double hy = 3.0;
  s.walls = {{{-hx, -hy}, {hx, -hy}},
             {{hx, -hy}, {hx, hy}},
             {{hx, hy}, {-hx, hy}},
             {{-hx, hy}, {-hx, -hy}},
             {{0.0, -hy}, {0.0, -2.2}}};
  s.objects = {{"chair", {2.5, 1.8}, 0.3, 0.45},
               {"chair", {-2.4, -1.6}, 0.3, 0.45},
               {"person", {2.7, -1.5}, 0.3, 0.9},
               {"person", {-2.6, 1.5}, 0.3, 0.9}};
  // Two slow turns in place, a drive across the room, then a slower
  // three-quarter turn the other way.
  const double quarter = 0.5 * std::numbers::pi;
  s.trajectory.push_back(Waypoint{0.0, Pose2(-0.8, 0.0, 0.0)});
  for (int i = 1; i <= 8; ++i) {
    s.trajectory.push_back(Waypoint{5.0 * i, Pose2(-0.8, 0.0, i * quarter)});
  }
  s.trajectory.push_back(Waypoint{46.0, Pose2(0.8, 0.0, 0.0)});
  for (int i = 1; i <= 3; ++i) {
    s.trajectory.push_back(
        Waypoint{46.0 + 14.0 * i / 3.0, Pose2(0.8, 0.0, -i * quarter)});
  }
  return s;
}

namespace {

template <typename T>
void Read(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ScenarioError(std::string("bad value for '") + key + "'");
  }
}

}  // namespace

Scenario ScenarioFromJson(const json& document) {
  if (!document.is_object()) throw ScenarioError("scenario must be an object");
  Scenario s = DefaultLabScenario();
  try {
    Read(document, "seed", s.seed);
    if (document.contains("room")) {
      s.walls.clear();
      for (const json& w : document.at("room")) {
        const auto v = w.get<std::array<double, 4>>();
        s.walls.push_back({{v[0], v[1]}, {v[2], v[3]}});
      }
    }
    if (document.contains("objects")) {
      s.objects.clear();
      for (const json& o : document.at("objects")) {
        ScenarioObject object;
        object.class_label = o.at("class").get<std::string>();
        object.position = {o.at("x").get<double>(), o.at("y").get<double>()};
        Read(o, "radius", object.radius);
        Read(o, "height", object.height);
        s.objects.push_back(std::move(object));
      }
    }
    if (document.contains("trajectory")) {
      s.trajectory.clear();
      for (const json& w : document.at("trajectory")) {
        s.trajectory.push_back(
            Waypoint{w.at("t").get<double>(),
                     Pose2(w.at("x").get<double>(), w.at("y").get<double>(),
                           w.value("yaw", 0.0))});
      }
    }
    if (const auto it = document.find("rates"); it != document.end()) {
      Read(*it, "pose", s.rates.pose_hz);
      Read(*it, "scan", s.rates.scan_hz);
      Read(*it, "detection", s.rates.detection_hz);
    }
    if (const auto it = document.find("noise"); it != document.end()) {
      Read(*it, "pixel_sigma", s.noise.pixel_sigma);
      Read(*it, "depth_sigma", s.noise.depth_sigma);
      Read(*it, "miss_probability", s.noise.miss_probability);
      Read(*it, "false_positive_rate", s.noise.false_positive_rate);
      Read(*it, "score_min", s.noise.score_min);
      Read(*it, "score_max", s.noise.score_max);
    }
    if (const auto it = document.find("lidar"); it != document.end()) {
      Read(*it, "beams", s.lidar.beams);
      Read(*it, "range_min", s.lidar.range_min);
      Read(*it, "range_max", s.lidar.range_max);
    }
    if (const auto it = document.find("camera"); it != document.end()) {
      Read(*it, "max_range", s.camera.max_range);
      Read(*it, "depth_samples", s.camera.depth_samples);
    }
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  }
  s.Validate();
  return s;
}

json ScenarioToJson(const Scenario& s) {
  json room = json::array();
  for (const WallSegment& w : s.walls) {
    room.push_back({w.a.x(), w.a.y(), w.b.x(), w.b.y()});
  }
  json objects = json::array();
  for (const ScenarioObject& o : s.objects) {
    objects.push_back({{"class", o.class_label},
                       {"x", o.position.x()},
                       {"y", o.position.y()},
                       {"radius", o.radius},
                       {"height", o.height}});
  }
  json trajectory = json::array();
  for (const Waypoint& w : s.trajectory) {
    trajectory.push_back(
        {{"t", w.stamp}, {"x", w.pose.x}, {"y", w.pose.y}, {"yaw", w.pose.yaw}});
  }
  return json{{"version", 1},
              {"seed", s.seed},
              {"room", room},
              {"objects", objects},
              {"trajectory", trajectory},
              {"rates",
               {{"pose", s.rates.pose_hz},
                {"scan", s.rates.scan_hz},
                {"detection", s.rates.detection_hz}}},
              {"noise",
               {{"pixel_sigma", s.noise.pixel_sigma},
                {"depth_sigma", s.noise.depth_sigma},
                {"miss_probability", s.noise.miss_probability},
                {"false_positive_rate", s.noise.false_positive_rate},
                {"score_min", s.noise.score_min},
                {"score_max", s.noise.score_max}}},
              {"lidar",
               {{"beams", s.lidar.beams},
                {"range_min", s.lidar.range_min},
                {"range_max", s.lidar.range_max}}},
              {"camera",
               {{"max_range", s.camera.max_range},
                {"depth_samples", s.camera.depth_samples}}}};
}

Scenario LoadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario '" + path + "'");
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("scenario '" + path + "': " + e.what());
  }
  return ScenarioFromJson(document);
}

json GroundTruthToJson(const GroundTruth& truth) {
  json objects = json::array();
  for (const GroundTruthObject& o : truth.objects) {
    objects.push_back(
        {{"class", o.class_label}, {"x", o.position.x()}, {"y", o.position.y()}});
  }
  return json{{"version", 1}, {"objects", objects}};
}

GroundTruth GroundTruthFromJson(const json& document) {
  GroundTruth truth;
  try {
    for (const json& o : document.at("objects")) {
      truth.objects.push_back(
          {o.at("class").get<std::string>(),
           {o.at("x").get<double>(), o.at("y").get<double>()}});
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("ground truth: ") + e.what());
  }
  return truth;
}

Pose2 TrajectoryPose(std::span<const Waypoint> trajectory, double t) {
  if (t <= trajectory.front().stamp) return trajectory.front().pose;
  if (t >= trajectory.back().stamp) return trajectory.back().pose;
  const auto after = std::upper_bound(
      trajectory.begin(), trajectory.end(), t,
      [](double stamp, const Waypoint& w) { return stamp < w.stamp; });
  const Waypoint& w0 = *(after - 1);
  const Waypoint& w1 = *after;
  const double f = (t - w0.stamp) / (w1.stamp - w0.stamp);
  const double dyaw = WrapAngle(w1.pose.yaw - w0.pose.yaw);
  return Pose2(w0.pose.x + f * (w1.pose.x - w0.pose.x),
               w0.pose.y + f * (w1.pose.y - w0.pose.y),
               w0.pose.yaw + f * dyaw);
}

std::optional<double> RaySegmentDistance(const Eigen::Vector2d& origin,
                                         const Eigen::Vector2d& direction,
                                         const WallSegment& wall) {
  const Eigen::Vector2d edge = wall.b - wall.a;
  const double denom = Cross(direction, edge);
  if (denom == 0.0) return std::nullopt;
  const Eigen::Vector2d offset = wall.a - origin;
  const double t = Cross(offset, edge) / denom;
  const double s = Cross(offset, direction) / denom;
  if (t < 0.0 || s < 0.0 || s > 1.0) return std::nullopt;
  return t * direction.norm();
}

double CastRay(std::span<const WallSegment> walls,
               const Eigen::Vector2d& origin, double angle) {
  const Eigen::Vector2d direction(std::cos(angle), std::sin(angle));
  double best = std::numeric_limits<double>::infinity();
  for (const WallSegment& wall : walls) {
    if (const auto d = RaySegmentDistance(origin, direction, wall)) {
      best = std::min(best, *d);
    }
  }
  return best;
}

bool Occluded(std::span<const WallSegment> walls, const Eigen::Vector2d& from,
              const Eigen::Vector2d& to) {
  const Eigen::Vector2d span = to - from;
  const double length = span.norm();
  if (length == 0.0) return false;
  const Eigen::Vector2d direction = span / length;
  for (const WallSegment& wall : walls) {
    const auto d = RaySegmentDistance(from, direction, wall);
    if (d && *d > 0.0 && *d < length) return true;
  }
  return false;
}

std::optional<RenderedObject> RenderObject(const ScenarioObject& object,
                                           std::span<const WallSegment> walls,
                                           const Pose3& map_from_camera,
                                           const CameraIntrinsics& intrinsics,
                                           double max_range) {
  const Eigen::Vector3d point_map(object.position.x(), object.position.y(),
                                  object.height);
  const Eigen::Vector3d point_camera = map_from_camera.inverse() * point_map;
  if (!(point_camera.z() > 0.0)) return std::nullopt;
  const Eigen::Vector2d camera_xy = map_from_camera.translation().head<2>();
  if ((object.position - camera_xy).norm() > max_range) return std::nullopt;
  if (Occluded(walls, camera_xy, object.position)) return std::nullopt;

  const Eigen::Vector2d pixel = ProjectToPixel(point_camera, intrinsics);
  const std::optional<BBox> box = CenteredBox(
      pixel.x(), pixel.y(), intrinsics.fx * object.radius / point_camera.z(),
      intrinsics.fy * object.radius / point_camera.z(), intrinsics);
  if (!box) return std::nullopt;
  return RenderedObject{Detection2D{object.class_label, 1.0, *box},
                        point_camera};
}

SyntheticRun SynthesizeLog(const Scenario& scenario, const RunConfig& config) {
  scenario.Validate();
  config.Validate();
  const double t0 = scenario.trajectory.front().stamp;
  const double t1 = scenario.trajectory.back().stamp;
  const CameraIntrinsics& intr = config.intrinsics;
  const DetectorNoise& noise = scenario.noise;

  SyntheticRun run;
  for (const ScenarioObject& o : scenario.objects) {
    run.truth.objects.push_back({o.class_label, o.position});
  }
  std::vector<std::string> classes;
  {
    std::set<std::string> unique;
    for (const ScenarioObject& o : scenario.objects) unique.insert(o.class_label);
    classes.assign(unique.begin(), unique.end());
    if (classes.empty()) classes = {"chair", "person"};
  }

  for (const double t : StreamStamps(t0, t1, scenario.rates.pose_hz)) {
    const Pose2 p = TrajectoryPose(scenario.trajectory, t);
    run.records.push_back(LogRecord{t, Pose3::FromYaw(p.x, p.y, p.yaw)});
  }

  const LidarModel& lidar = scenario.lidar;
  const double increment = 2.0 * std::numbers::pi / lidar.beams;
  for (const double t : StreamStamps(t0, t1, scenario.rates.scan_hz)) {
    const Pose2 sensor = Compose(TrajectoryPose(scenario.trajectory, t),
                                 config.body_from_lidar);
    LaserScan scan;
    scan.stamp = t;
    scan.angle_min = -std::numbers::pi;
    scan.angle_increment = increment;
    scan.range_min = lidar.range_min;
    scan.range_max = lidar.range_max;
    scan.ranges.reserve(static_cast<size_t>(lidar.beams));
    for (int i = 0; i < lidar.beams; ++i) {
      const double angle = sensor.yaw + scan.angle_min + i * increment;
      const double r =
          CastRay(scenario.walls, Eigen::Vector2d(sensor.x, sensor.y), angle);
      scan.ranges.push_back(r >= lidar.range_min && r <= lidar.range_max
                                ? r
                                : std::numeric_limits<double>::quiet_NaN());
    }
    run.records.push_back(LogRecord{t, std::move(scan)});
  }

  const std::vector<double> frame_stamps =
      StreamStamps(t0, t1, scenario.rates.detection_hz);
  for (size_t k = 0; k < frame_stamps.size(); ++k) {
    const double t = frame_stamps[k];
    const Pose2 body = TrajectoryPose(scenario.trajectory, t);
    const Pose3 map_from_camera = Compose(Pose3::FromYaw(body.x, body.y, body.yaw),
                                          config.body_from_camera);
    DetectionFrame frame;
    for (size_t j = 0; j < scenario.objects.size(); ++j) {
      const ScenarioObject& object = scenario.objects[j];
      const auto rendered = RenderObject(object, scenario.walls,
                                         map_from_camera, intr,
                                         scenario.camera.max_range);
      if (!rendered) continue;
      CounterRng rng(scenario.seed, kDetectionStream, k, j);
      if (rng.Bernoulli(noise.miss_probability)) continue;
      const Eigen::Vector2d center = rendered->detection.bbox.center();
      const double du = rng.Normal(noise.pixel_sigma);
      const double dv = rng.Normal(noise.pixel_sigma);
      const double score = rng.Uniform(noise.score_min, noise.score_max);
      const BBox& clean = rendered->detection.bbox;
      const auto box = CenteredBox(center.x() + du, center.y() + dv,
                                   0.5 * clean.width(), 0.5 * clean.height(),
                                   intr);
      if (!box) continue;
      frame.items.push_back(LoggedDetection{
          Detection2D{object.class_label, score, *box},
          NoisyDepth(rendered->point_camera.z(), scenario.camera.depth_samples,
                     noise.depth_sigma, rng)});
    }

    CounterRng fp(scenario.seed, kFalsePositiveStream, k);
    const double whole = std::floor(noise.false_positive_rate);
    const int count = static_cast<int>(whole) +
                      (fp.Bernoulli(noise.false_positive_rate - whole) ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      const double u = fp.Uniform(0.0, intr.width);
      const double v = fp.Uniform(0.0, intr.height);
      const double z = fp.Uniform(0.5, scenario.camera.max_range);
      const double radius = fp.Uniform(0.15, 0.4);
      const std::string& label =
          classes[static_cast<size_t>(fp.Uniform() * classes.size())];
      const double score = fp.Uniform(noise.score_min, noise.score_max);
      const auto box = CenteredBox(u, v, intr.fx * radius / z,
                                   intr.fy * radius / z, intr);
      if (!box) continue;
      frame.items.push_back(LoggedDetection{
          Detection2D{label, score, *box},
          NoisyDepth(z, scenario.camera.depth_samples, noise.depth_sigma, fp)});
    }
    if (!frame.items.empty()) {
      run.records.push_back(LogRecord{t, std::move(frame)});
    }
  }

  std::stable_sort(run.records.begin(), run.records.end(),
                   [](const LogRecord& a, const LogRecord& b) {
                     if (a.stamp != b.stamp) return a.stamp < b.stamp;
                     return a.stream() < b.stream();
                   });
  return run;
}

std::string LogToText(std::span<const LogRecord> records) {
  std::string out;
  for (const LogRecord& r : records) {
    out += SerializeLogRecord(r);
    out += '\n';
  }
  return out;
}

}  // namespace semmap
