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

#ifndef SEMMAP_GEOMETRY_H_
#define SEMMAP_GEOMETRY_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "Eigen/Geometry"

namespace semmap {

// Wraps an angle into (-pi, pi].
double WrapAngle(double angle);

struct CameraIntrinsics {
  double fx = 615.0;
  double fy = 615.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  // Throws std::invalid_argument when the invariants do not hold.
  void Validate() const;
};

// Rigid transform in 3D. The rotation is renormalized on construction.
class Pose3 {
 public:
  Pose3();
  Pose3(const Eigen::Vector3d& translation, const Eigen::Quaterniond& rotation);

  static Pose3 Identity() { return Pose3(); }
  static Pose3 FromTranslation(const Eigen::Vector3d& translation);
  static Pose3 FromYaw(double x, double y, double yaw);

  const Eigen::Vector3d& translation() const { return translation_; }
  const Eigen::Quaterniond& rotation() const { return rotation_; }

  Pose3 inverse() const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const;

  // Heading of the rotated x axis projected onto the xy plane.
  double yaw() const;

 private:
  Eigen::Vector3d translation_;
  Eigen::Quaterniond rotation_;
};

// Returns a∘b: transforming a point by the result equals transforming it by
// b, then by a.
Pose3 Compose(const Pose3& a, const Pose3& b);

struct Pose2 {
  Pose2() = default;
  Pose2(double x, double y, double yaw) : x(x), y(y), yaw(WrapAngle(yaw)) {}

  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

Pose2 Compose(const Pose2& a, const Pose2& b);

// Drops z, roll and pitch.
Pose2 Flatten(const Pose3& pose);

struct BBox {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;

  Eigen::Vector2d center() const {
    return {0.5 * (u_min + u_max), 0.5 * (v_min + v_max)};
  }
  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }

  bool IsWellFormed() const { return u_min < u_max && v_min < v_max; }
  bool IsInside(const CameraIntrinsics& intrinsics) const;
};

// The centered sub-box with half the width and half the height of `box`,
// i.e. 25% of its area. Depth for a detection is read from this region.
BBox CentralSubBox(const BBox& box);

struct Detection2D {
  std::string class_label;
  double score = 0.0;
  BBox bbox;
};

// A detection placed on the 2D map plane. There is no height component.
struct MapDetection {
  std::string class_label;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double yaw = 0.0;
  double score = 0.0;
  double stamp = 0.0;
};

// Source of depth readings (meters) for a pixel region. Readings of zero or
// non-finite values are invalid.
class DepthSampler {
 public:
  virtual ~DepthSampler() = default;
  virtual std::vector<double> Samples(const BBox& region) const = 0;
};

// Dense depth image aligned with the color image, row-major, meters.
class DepthImage : public DepthSampler {
 public:
  DepthImage(int width, int height, std::vector<double> depth_m);

  std::vector<double> Samples(const BBox& region) const override;

 private:
  int width_;
  int height_;
  std::vector<double> depth_m_;
};

// Depth readings already restricted to a detection's central sub-box, as
// stored in run logs. The requested region is ignored.
class PrecollectedDepth : public DepthSampler {
 public:
  explicit PrecollectedDepth(std::vector<double> depth_m)
      : depth_m_(std::move(depth_m)) {}

  std::vector<double> Samples(const BBox&) const override { return depth_m_; }

 private:
  std::vector<double> depth_m_;
};

// Median over valid readings; for an even count the mean of the two middle
// values. Empty when no reading is valid.
std::optional<double> MedianValidDepth(std::span<const double> samples);

// Pinhole inversion of the bbox center at the median depth of its central
// sub-box, in the camera optical frame (z forward, x right, y down). Returns
// nullopt when no valid depth exists (the detection must be dropped).
std::optional<Eigen::Vector3d> BackProject(const BBox& bbox,
                                           const DepthSampler& depth,
                                           const CameraIntrinsics& intrinsics);

Eigen::Vector2d ProjectToPixel(const Eigen::Vector3d& point_camera,
                               const CameraIntrinsics& intrinsics);

// Chains camera -> body -> map, drops the height, and stores the bearing of
// the robot-to-object ray as yaw.
MapDetection DetectionToMap(const Detection2D& detection,
                            const Eigen::Vector3d& point_camera,
                            const Pose3& body_from_camera,
                            const Pose3& map_from_body, double stamp);

}  // namespace semmap

#endif  // SEMMAP_GEOMETRY_H_
