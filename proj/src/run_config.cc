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

#include "semmap/run_config.h"

#include <array>
#include <fstream>
#include <set>

namespace semmap {

using nlohmann::json;

Pose3 DefaultBodyFromCamera() {
  Eigen::Matrix3d body_from_optical;
  body_from_optical << 0.0, 0.0, 1.0,  //
      -1.0, 0.0, 0.0,                  //
      0.0, -1.0, 0.0;
  return Pose3(Eigen::Vector3d(0.3, 0.0, 0.5),
               Eigen::Quaterniond(body_from_optical));
}

void RunConfig::Validate() const {
  try {
    layer.Validate();
    occupancy.Validate();
    intrinsics.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(max_pose_skew > 0.0)) {
    throw ConfigError("max_pose_skew must be > 0");
  }
}

namespace {

void RejectUnknown(const json& object, const std::set<std::string>& allowed,
                   const std::string& where) {
  if (!object.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : object.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void ReadIfPresent(const json& object, const char* key, T& out) {
  const auto it = object.find(key);
  if (it == object.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

void ReadLayer(const json& j, LayerConfig& layer) {
  RejectUnknown(j,
                {"default_cutoff", "per_class_cutoff", "frame_merge_radius",
                 "reuse_radius", "promote_min_hits", "promote_window",
                 "promote_min_mean_score", "candidate_ttl"},
                "layer");
  ReadIfPresent(j, "default_cutoff", layer.default_cutoff);
  ReadIfPresent(j, "per_class_cutoff", layer.per_class_cutoff);
  ReadIfPresent(j, "frame_merge_radius", layer.frame_merge_radius);
  ReadIfPresent(j, "reuse_radius", layer.reuse_radius);
  ReadIfPresent(j, "promote_min_hits", layer.promote_min_hits);
  ReadIfPresent(j, "promote_window", layer.promote_window);
  ReadIfPresent(j, "promote_min_mean_score", layer.promote_min_mean_score);
  ReadIfPresent(j, "candidate_ttl", layer.candidate_ttl);
}

void ReadOccupancy(const json& j, OccupancyParams& params) {
  RejectUnknown(j, {"resolution", "p_occ", "p_free", "p_min", "p_max"},
                "occupancy");
  ReadIfPresent(j, "resolution", params.resolution);
  auto read_probability = [&j](const char* key, double& log_odds) {
    double p = LogOddsToProbability(log_odds);
    ReadIfPresent(j, key, p);
    if (!(p > 0.0 && p < 1.0)) {
      throw ConfigError(std::string("'") + key + "' must lie in (0, 1)");
    }
    log_odds = Logit(p);
  };
  if (j.contains("p_occ")) read_probability("p_occ", params.l_occ);
  if (j.contains("p_free")) read_probability("p_free", params.l_free);
  if (j.contains("p_min")) read_probability("p_min", params.l_min);
  if (j.contains("p_max")) read_probability("p_max", params.l_max);
}

void ReadIntrinsics(const json& j, CameraIntrinsics& intr) {
  RejectUnknown(j, {"fx", "fy", "cx", "cy", "width", "height"}, "intrinsics");
  ReadIfPresent(j, "fx", intr.fx);
  ReadIfPresent(j, "fy", intr.fy);
  ReadIfPresent(j, "cx", intr.cx);
  ReadIfPresent(j, "cy", intr.cy);
  ReadIfPresent(j, "width", intr.width);
  ReadIfPresent(j, "height", intr.height);
}

Pose3 ReadPose3(const json& j, const std::string& where) {
  RejectUnknown(j, {"p", "q"}, where);
  std::array<double, 3> p{0.0, 0.0, 0.0};
  std::array<double, 4> q{1.0, 0.0, 0.0, 0.0};
  ReadIfPresent(j, "p", p);
  ReadIfPresent(j, "q", q);
  if (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3] < 1e-18) {
    throw ConfigError(where + ": zero quaternion");
  }
  return Pose3(Eigen::Vector3d(p[0], p[1], p[2]),
               Eigen::Quaterniond(q[0], q[1], q[2], q[3]));
}

}  // namespace

RunConfig RunConfigFromJson(const json& document) {
  RunConfig config;
  RejectUnknown(document,
                {"version", "layer", "occupancy", "intrinsics",
                 "body_from_camera", "body_from_lidar", "max_pose_skew"},
                "config");
  if (document.contains("layer")) ReadLayer(document["layer"], config.layer);
  if (document.contains("occupancy")) {
    ReadOccupancy(document["occupancy"], config.occupancy);
  }
  if (document.contains("intrinsics")) {
    ReadIntrinsics(document["intrinsics"], config.intrinsics);
  }
  if (document.contains("body_from_camera")) {
    config.body_from_camera =
        ReadPose3(document["body_from_camera"], "body_from_camera");
  }
  if (document.contains("body_from_lidar")) {
    std::array<double, 3> v{};
    ReadIfPresent(document, "body_from_lidar", v);
    config.body_from_lidar = Pose2(v[0], v[1], v[2]);
  }
  ReadIfPresent(document, "max_pose_skew", config.max_pose_skew);
  config.Validate();
  return config;
}

json RunConfigToJson(const RunConfig& config) {
  const LayerConfig& l = config.layer;
  const OccupancyParams& o = config.occupancy;
  const CameraIntrinsics& i = config.intrinsics;
  const Eigen::Vector3d& p = config.body_from_camera.translation();
  const Eigen::Quaterniond& q = config.body_from_camera.rotation();
  return json{
      {"version", 1},
      {"layer",
       {{"default_cutoff", l.default_cutoff},
        {"per_class_cutoff", l.per_class_cutoff},
        {"frame_merge_radius", l.frame_merge_radius},
        {"reuse_radius", l.reuse_radius},
        {"promote_min_hits", l.promote_min_hits},
        {"promote_window", l.promote_window},
        {"promote_min_mean_score", l.promote_min_mean_score},
        {"candidate_ttl", l.candidate_ttl}}},
      {"occupancy",
       {{"resolution", o.resolution},
        {"p_occ", LogOddsToProbability(o.l_occ)},
        {"p_free", LogOddsToProbability(o.l_free)},
        {"p_min", LogOddsToProbability(o.l_min)},
        {"p_max", LogOddsToProbability(o.l_max)}}},
      {"intrinsics",
       {{"fx", i.fx},
        {"fy", i.fy},
        {"cx", i.cx},
        {"cy", i.cy},
        {"width", i.width},
        {"height", i.height}}},
      {"body_from_camera",
       {{"p", {p.x(), p.y(), p.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}}},
      {"body_from_lidar",
       {config.body_from_lidar.x, config.body_from_lidar.y,
        config.body_from_lidar.yaw}},
      {"max_pose_skew", config.max_pose_skew}};
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return RunConfigFromJson(document);
}

}  // namespace semmap
