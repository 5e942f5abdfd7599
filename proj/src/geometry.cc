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

#include "semmap/geometry.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace semmap {

double WrapAngle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * std::numbers::pi);
  if (wrapped <= -std::numbers::pi) wrapped += 2.0 * std::numbers::pi;
  return wrapped;
}

void CameraIntrinsics::Validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera intrinsics: focal lengths must be > 0");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("camera intrinsics: image size must be > 0");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw std::invalid_argument(
        "camera intrinsics: principal point outside the image");
  }
}

Pose3::Pose3()
    : translation_(Eigen::Vector3d::Zero()),
      rotation_(Eigen::Quaterniond::Identity()) {}

Pose3::Pose3(const Eigen::Vector3d& translation,
             const Eigen::Quaterniond& rotation)
    : translation_(translation), rotation_(rotation.normalized()) {}

Pose3 Pose3::FromTranslation(const Eigen::Vector3d& translation) {
  return Pose3(translation, Eigen::Quaterniond::Identity());
}

Pose3 Pose3::FromYaw(double x, double y, double yaw) {
  return Pose3(Eigen::Vector3d(x, y, 0.0),
               Eigen::Quaterniond(
                   Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())));
}

Pose3 Pose3::inverse() const {
  const Eigen::Quaterniond inverse_rotation = rotation_.conjugate();
  return Pose3(-(inverse_rotation * translation_), inverse_rotation);
}

Eigen::Vector3d Pose3::operator*(const Eigen::Vector3d& point) const {
  return rotation_ * point + translation_;
}

double Pose3::yaw() const {
  const Eigen::Quaterniond& q = rotation_;
  return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()),
                    1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z()));
}

Pose3 Compose(const Pose3& a, const Pose3& b) {
  return Pose3(a.rotation() * b.translation() + a.translation(),
               a.rotation() * b.rotation());
}

Pose2 Compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.yaw);
  const double s = std::sin(a.yaw);
  return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y,
               a.yaw + b.yaw);
}

Pose2 Flatten(const Pose3& pose) {
  return Pose2(pose.translation().x(), pose.translation().y(), pose.yaw());
}

bool BBox::IsInside(const CameraIntrinsics& intrinsics) const {
  return IsWellFormed() && u_min >= 0.0 && v_min >= 0.0 &&
         u_max <= intrinsics.width && v_max <= intrinsics.height;
}

BBox CentralSubBox(const BBox& box) {
  const Eigen::Vector2d c = box.center();
  const double half_w = 0.25 * box.width();
  const double half_h = 0.25 * box.height();
  return BBox{c.x() - half_w, c.y() - half_h, c.x() + half_w, c.y() + half_h};
}

DepthImage::DepthImage(int width, int height, std::vector<double> depth_m)
    : width_(width), height_(height), depth_m_(std::move(depth_m)) {
  if (width_ <= 0 || height_ <= 0 ||
      depth_m_.size() != static_cast<size_t>(width_) * height_) {
    throw std::invalid_argument("depth image: size mismatch");
  }
}

std::vector<double> DepthImage::Samples(const BBox& region) const {
  const int c0 = std::max(0, static_cast<int>(std::floor(region.u_min)));
  const int c1 = std::min(width_, static_cast<int>(std::ceil(region.u_max)));
  const int r0 = std::max(0, static_cast<int>(std::floor(region.v_min)));
  const int r1 = std::min(height_, static_cast<int>(std::ceil(region.v_max)));
  std::vector<double> out;
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      out.push_back(depth_m_[static_cast<size_t>(r) * width_ + c]);
    }
  }
  return out;
}

std::optional<double> MedianValidDepth(std::span<const double> samples) {
  std::vector<double> valid;
  valid.reserve(samples.size());
  for (const double d : samples) {
    if (std::isfinite(d) && d > 0.0) valid.push_back(d);
  }
  if (valid.empty()) return std::nullopt;
  const size_t mid = valid.size() / 2;
  std::nth_element(valid.begin(), valid.begin() + mid, valid.end());
  const double upper = valid[mid];
  if (valid.size() % 2 == 1) return upper;
  const double lower = *std::max_element(valid.begin(), valid.begin() + mid);
  return 0.5 * (lower + upper);
}

std::optional<Eigen::Vector3d> BackProject(
    const BBox& bbox, const DepthSampler& depth,
    const CameraIntrinsics& intrinsics) {
  const std::vector<double> samples = depth.Samples(CentralSubBox(bbox));
  const std::optional<double> z = MedianValidDepth(samples);
  if (!z) return std::nullopt;
  const Eigen::Vector2d center = bbox.center();
  return Eigen::Vector3d((center.x() - intrinsics.cx) * *z / intrinsics.fx,
                         (center.y() - intrinsics.cy) * *z / intrinsics.fy,
                         *z);
}

Eigen::Vector2d ProjectToPixel(const Eigen::Vector3d& point_camera,
                               const CameraIntrinsics& intrinsics) {
  return {intrinsics.fx * point_camera.x() / point_camera.z() + intrinsics.cx,
          intrinsics.fy * point_camera.y() / point_camera.z() + intrinsics.cy};
}

MapDetection DetectionToMap(const Detection2D& detection,
                            const Eigen::Vector3d& point_camera,
                            const Pose3& body_from_camera,
                            const Pose3& map_from_body, double stamp) {
  const Eigen::Vector3d point_map =
      map_from_body * (body_from_camera * point_camera);
  const Eigen::Vector2d robot = map_from_body.translation().head<2>();
  const Eigen::Vector2d object = point_map.head<2>();
  const Eigen::Vector2d ray = object - robot;

  MapDetection out;
  out.class_label = detection.class_label;
  out.position = object;
  out.yaw = (ray.x() == 0.0 && ray.y() == 0.0)
                ? 0.0
                : WrapAngle(std::atan2(ray.y(), ray.x()));
  out.score = detection.score;
  out.stamp = stamp;
  return out;
}

}  // namespace semmap
