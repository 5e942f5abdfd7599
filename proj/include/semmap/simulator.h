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

#ifndef SEMMAP_SIMULATOR_H_
#define SEMMAP_SIMULATOR_H_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "json.hpp"
#include "semmap/geometry.h"
#include "semmap/ingestion.h"
#include "semmap/run_config.h"
#include "semmap/semantic_layer.h"

namespace semmap {

struct WallSegment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
};

struct ScenarioObject {
  std::string class_label;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  // Sets the rendered bbox size.
  double radius = 0.25;
  // Height of the object's center above the floor.
  double height = 0.5;
};

struct Waypoint {
  double stamp = 0.0;
  Pose2 pose;
};

struct SensorRates {
  double pose_hz = 50.0;
  double scan_hz = 5.0;
  double detection_hz = 10.0;
};

struct DetectorNoise {
  double pixel_sigma = 2.0;
  double depth_sigma = 0.02;
  double miss_probability = 0.1;
  // Expected false positives per detection frame.
  double false_positive_rate = 0.05;
  double score_min = 0.55;
  double score_max = 0.95;
};

struct LidarModel {
  int beams = 360;
  double range_min = 0.1;
  double range_max = 12.0;
};

struct CameraModel {
  double max_range = 6.0;
  int depth_samples = 16;
};

struct Scenario {
  std::vector<WallSegment> walls;
  std::vector<ScenarioObject> objects;
  std::vector<Waypoint> trajectory;
  SensorRates rates;
  DetectorNoise noise;
  LidarModel lidar;
  CameraModel camera;
  uint64_t seed = 1;

  // Throws ScenarioError.
  void Validate() const;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An 8 m x 6 m lab with a short partition wall, two chairs and two people,
// and a 60 s trajectory of slow turns and a short drive.
Scenario DefaultLabScenario();

// Missing sections fall back to DefaultLabScenario(). Throws ScenarioError.
Scenario ScenarioFromJson(const nlohmann::json& document);
nlohmann::json ScenarioToJson(const Scenario& scenario);
Scenario LoadScenario(const std::string& path);

struct GroundTruthObject {
  std::string class_label;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
};

struct GroundTruth {
  std::vector<GroundTruthObject> objects;
};

nlohmann::json GroundTruthToJson(const GroundTruth& truth);
GroundTruth GroundTruthFromJson(const nlohmann::json& document);

// Robot pose along the waypoints: linear in position, shortest arc in yaw,
// held constant outside the waypoint span.
Pose2 TrajectoryPose(std::span<const Waypoint> trajectory, double t);

// Distance along the ray to the segment, if they intersect at t >= 0.
std::optional<double> RaySegmentDistance(const Eigen::Vector2d& origin,
                                         const Eigen::Vector2d& direction,
                                         const WallSegment& wall);

// Nearest wall along the ray, or +inf.
double CastRay(std::span<const WallSegment> walls,
               const Eigen::Vector2d& origin, double angle);

// True if the open segment from -> to crosses a wall.
bool Occluded(std::span<const WallSegment> walls, const Eigen::Vector2d& from,
              const Eigen::Vector2d& to);

// Noise-free rendering of one object into the camera.
struct RenderedObject {
  Detection2D detection;
  Eigen::Vector3d point_camera;
};

std::optional<RenderedObject> RenderObject(const ScenarioObject& object,
                                           std::span<const WallSegment> walls,
                                           const Pose3& map_from_camera,
                                           const CameraIntrinsics& intrinsics,
                                           double max_range);

struct SyntheticRun {
  std::vector<LogRecord> records;
  GroundTruth truth;
};

// Pose, scan and detection records in stamp order (equal stamps: pose, scan,
// detections). Frames without any detection are not emitted.
SyntheticRun SynthesizeLog(const Scenario& scenario, const RunConfig& config);

// One serialized record per line.
std::string LogToText(std::span<const LogRecord> records);

struct RunMetrics {
  int true_positives = 0;
  int duplicates = 0;
  int false_objects = 0;
  // Absent when there are no true positives.
  std::optional<double> mean_position_error;
};

// Greedy nearest-first matching of map objects to same-class truth objects
// within match_radius; each truth is matched at most once. Unmatched objects
// within match_radius of a same-class truth are duplicates, the rest are
// false objects.
RunMetrics ScoreRun(const ObjectMapSnapshot& snapshot, const GroundTruth& truth,
                    double match_radius);

nlohmann::json MetricsToJson(const RunMetrics& metrics);

}  // namespace semmap

#endif  // SEMMAP_SIMULATOR_H_
