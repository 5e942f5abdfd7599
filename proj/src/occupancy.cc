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

#include "semmap/occupancy.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace semmap {

double LogOddsToProbability(double log_odds) {
  return 1.0 / (1.0 + std::exp(-log_odds));
}

void OccupancyParams::Validate() const {
  if (!(resolution > 0.0)) {
    throw std::invalid_argument("occupancy: resolution must be > 0");
  }
  if (!(l_occ > 0.0) || !(l_free < 0.0)) {
    throw std::invalid_argument(
        "occupancy: l_occ must be > 0 and l_free must be < 0");
  }
  if (!(l_min < 0.0) || !(l_max > 0.0)) {
    throw std::invalid_argument("occupancy: clamp bounds must straddle 0");
  }
}

OccupancyGrid::OccupancyGrid(double resolution, const Eigen::Vector2d& origin,
                             int width, int height)
    : resolution_(resolution),
      anchor_(origin),
      width_(width),
      height_(height),
      cells_(static_cast<size_t>(width) * height, 0.0) {
  if (!(resolution > 0.0) || width <= 0 || height <= 0) {
    throw std::invalid_argument("occupancy grid: invalid geometry");
  }
}

Pose2 OccupancyGrid::origin() const {
  return Pose2(anchor_.x() + static_cast<double>(offset_x_) * resolution_,
               anchor_.y() + static_cast<double>(offset_y_) * resolution_,
               0.0);
}

CellIndex OccupancyGrid::CellOf(const Eigen::Vector2d& point) const {
  const Eigen::Vector2d g = AnchorCoords(point);
  return CellIndex{static_cast<int64_t>(std::floor(g.x())) - offset_x_,
                   static_cast<int64_t>(std::floor(g.y())) - offset_y_};
}

CellIndex OccupancyGrid::GrowToContain(const CellIndex& lo,
                                       const CellIndex& hi) {
  int64_t left = 0;
  int64_t right = 0;
  int64_t bottom = 0;
  int64_t top = 0;
  int64_t w = width_;
  int64_t h = height_;
  while (lo.x + left < 0 || hi.x + left >= w) {
    if (lo.x + left < 0) {
      left += w;
    } else {
      right += w;
    }
    w *= 2;
  }
  while (lo.y + bottom < 0 || hi.y + bottom >= h) {
    if (lo.y + bottom < 0) {
      bottom += h;
    } else {
      top += h;
    }
    h *= 2;
  }
  if (w == width_ && h == height_) return CellIndex{0, 0};
  if (w > std::numeric_limits<int>::max() / 2 ||
      h > std::numeric_limits<int>::max() / 2 || w * h > (int64_t{1} << 31)) {
    throw std::length_error("occupancy grid: growth exceeds size limit");
  }

  std::vector<double> grown(static_cast<size_t>(w * h), 0.0);
  for (int64_t y = 0; y < height_; ++y) {
    std::copy_n(cells_.begin() + y * width_, width_,
                grown.begin() + (y + bottom) * w + left);
  }
  cells_ = std::move(grown);
  width_ = static_cast<int>(w);
  height_ = static_cast<int>(h);
  offset_x_ -= left;
  offset_y_ -= bottom;
  return CellIndex{left, bottom};
}

std::vector<CellIndex> TraverseRay(const OccupancyGrid& grid,
                                   const Eigen::Vector2d& from,
                                   const Eigen::Vector2d& to) {
  std::vector<CellIndex> out;
  ForEachRayCell(grid, from, to, [&out](const CellIndex& c) { out.push_back(c); });
  return out;
}

void IntegrateRays(OccupancyGrid& grid, const Eigen::Vector2d& sensor,
                   std::span<const RayEndpoint> rays,
                   const OccupancyParams& params) {
  if (rays.empty()) return;
  CellIndex lo = grid.CellOf(sensor);
  CellIndex hi = lo;
  for (const RayEndpoint& ray : rays) {
    const CellIndex c = grid.CellOf(ray.end);
    lo = {std::min(lo.x, c.x), std::min(lo.y, c.y)};
    hi = {std::max(hi.x, c.x), std::max(hi.y, c.y)};
  }
  const CellIndex shift = grid.GrowToContain(lo, hi);
  lo = {lo.x + shift.x, lo.y + shift.y};
  hi = {hi.x + shift.x, hi.y + shift.y};

  // Per-cell update counts over the rays' bounding box, applied in one step
  // per cell.
  const int64_t region_w = hi.x - lo.x + 1;
  const int64_t region_h = hi.y - lo.y + 1;
  std::vector<uint32_t> n_free(static_cast<size_t>(region_w * region_h), 0);
  std::vector<uint32_t> n_occ(n_free.size(), 0);
  auto region_index = [&](const CellIndex& c) {
    return static_cast<size_t>((c.y - lo.y) * region_w + (c.x - lo.x));
  };
  for (const RayEndpoint& ray : rays) {
    ForEachRayCell(grid, sensor, ray.end,
                   [&](const CellIndex& c) { ++n_free[region_index(c)]; });
    if (ray.hit) ++n_occ[region_index(grid.CellOf(ray.end))];
  }

  for (int64_t y = lo.y; y <= hi.y; ++y) {
    for (int64_t x = lo.x; x <= hi.x; ++x) {
      const CellIndex c{x, y};
      const size_t k = region_index(c);
      if (n_free[k] == 0 && n_occ[k] == 0) continue;
      double& value = grid.at(c);
      value += static_cast<double>(n_free[k]) * params.l_free +
               static_cast<double>(n_occ[k]) * params.l_occ;
      value = std::clamp(value, params.l_min, params.l_max);
    }
  }
}

void IntegrateScan(OccupancyGrid& grid, const Pose2& sensor_pose,
                   const LaserScan& scan, const OccupancyParams& params) {
  const Eigen::Vector2d sensor(sensor_pose.x, sensor_pose.y);
  std::vector<RayEndpoint> rays;
  rays.reserve(scan.ranges.size());
  for (size_t i = 0; i < scan.ranges.size(); ++i) {
    const double r = scan.ranges[i];
    if (!std::isfinite(r) || r < scan.range_min) continue;
    const double length = std::min(r, scan.range_max);
    const double angle = sensor_pose.yaw + scan.angle_min +
                         static_cast<double>(i) * scan.angle_increment;
    rays.push_back(RayEndpoint{
        sensor + length * Eigen::Vector2d(std::cos(angle), std::sin(angle)),
        r < scan.range_max});
  }
  IntegrateRays(grid, sensor, rays, params);
}

CellState ClassifyCell(double log_odds) {
  const double p = LogOddsToProbability(log_odds);
  if (p > kOccupiedThreshold) return CellState::kOccupied;
  if (p < kFreeThreshold) return CellState::kFree;
  return CellState::kUnknown;
}

std::vector<CellState> Classify(const OccupancyGrid& grid) {
  std::vector<CellState> out;
  out.reserve(grid.cells().size());
  for (const double l : grid.cells()) out.push_back(ClassifyCell(l));
  return out;
}

std::string EncodePgm(const OccupancyGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.width()) + " " +
                    std::to_string(grid.height()) + "\n255\n";
  out.reserve(out.size() + grid.cells().size());
  for (int64_t row = grid.height() - 1; row >= 0; --row) {
    for (int64_t col = 0; col < grid.width(); ++col) {
      switch (ClassifyCell(grid.at(CellIndex{col, row}))) {
        case CellState::kOccupied:
          out.push_back(static_cast<char>(0));
          break;
        case CellState::kFree:
          out.push_back(static_cast<char>(254));
          break;
        case CellState::kUnknown:
          out.push_back(static_cast<char>(205));
          break;
      }
    }
  }
  return out;
}

std::string EncodeMapMetadata(const OccupancyGrid& grid,
                              const std::string& image_name) {
  const Pose2 origin = grid.origin();
  char buffer[512];
  std::snprintf(buffer, sizeof(buffer),
                "image: %s\nresolution: %f\norigin: [%f, %f, %f]\nnegate: 0\n"
                "occupied_thresh: %.2f\nfree_thresh: %.2f\n",
                image_name.c_str(), grid.resolution(), origin.x, origin.y,
                origin.yaw, kOccupiedThreshold, kFreeThreshold);
  return buffer;
}

namespace {

void WriteFile(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExportError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ExportError("write to '" + path + "' failed");
}

}  // namespace

void ExportMap(const OccupancyGrid& grid, const std::string& path_prefix) {
  const std::string image_path = path_prefix + ".pgm";
  const std::string image_name =
      std::filesystem::path(image_path).filename().string();
  WriteFile(image_path, EncodePgm(grid));
  WriteFile(path_prefix + ".yaml", EncodeMapMetadata(grid, image_name));
}

}  // namespace semmap
