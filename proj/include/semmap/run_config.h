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

#ifndef SEMMAP_RUN_CONFIG_H_
#define SEMMAP_RUN_CONFIG_H_

#include <stdexcept>
#include <string>

#include "json.hpp"
#include "semmap/geometry.h"
#include "semmap/occupancy.h"
#include "semmap/semantic_layer.h"

namespace semmap {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optical frame (z forward, x right, y down) mounted 0.3 m ahead of and
// 0.5 m above the body origin, looking along body +x.
Pose3 DefaultBodyFromCamera();

struct RunConfig {
  LayerConfig layer;
  OccupancyParams occupancy;
  CameraIntrinsics intrinsics;
  Pose3 body_from_camera = DefaultBodyFromCamera();
  Pose2 body_from_lidar{0.2, 0.0, 0.0};
  double max_pose_skew = 0.05;

  // Throws ConfigError.
  void Validate() const;
};

// Every field is optional and defaults to the values above. Unknown keys
// are rejected. Throws ConfigError.
RunConfig RunConfigFromJson(const nlohmann::json& document);
nlohmann::json RunConfigToJson(const RunConfig& config);
RunConfig LoadRunConfig(const std::string& path);

}  // namespace semmap

#endif  // SEMMAP_RUN_CONFIG_H_
