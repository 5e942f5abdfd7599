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

#ifndef SEMMAP_OCCUPANCY_H_
#define SEMMAP_OCCUPANCY_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "semmap/geometry.h"

namespace semmap {

inline double Logit(double p) { return std::log(p / (1.0 - p)); }
double LogOddsToProbability(double log_odds);

struct OccupancyParams {
  double resolution = 0.05;
  double l_occ = Logit(0.7);
  double l_free = Logit(0.4);
  double l_min = Logit(0.12);
  double l_max = Logit(0.97);

  void Validate() const;
};

struct LaserScan {
  double stamp = 0.0;
  double angle_min = 0.0;
  double angle_increment = 0.0;
  double range_min = 0.0;
  double range_max = 0.0;
  // Non-finite entries are "no return".
  std::vector<double> ranges;
};

struct CellIndex {
  int64_t x = 0;
  int64_t y = 0;
  bool operator==(const CellIndex&) const = default;
};

// Log-odds grid anchored in the world. Cell (0, 0) is the bottom-left cell;
// its lower-left corner is origin(). Growing the grid moves the origin by a
// whole number of cells, so world coordinates of existing cells never change.
class OccupancyGrid {
 public:
  OccupancyGrid(double resolution, const Eigen::Vector2d& origin, int width,
                int height);

  double resolution() const { return resolution_; }
  Pose2 origin() const;
  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const double> cells() const { return cells_; }
  std::span<double> mutable_cells() { return cells_; }

  // Position of `point` in cell units relative to the anchor. The integer
  // part, shifted by the growth offset, is the cell index.
  Eigen::Vector2d AnchorCoords(const Eigen::Vector2d& point) const {
    return (point - anchor_) / resolution_;
  }
  // Index of the cell containing `point`; may lie outside the grid.
  CellIndex CellOf(const Eigen::Vector2d& point) const;
  bool Contains(const CellIndex& cell) const {
    return cell.x >= 0 && cell.y >= 0 && cell.x < width_ && cell.y < height_;
  }
  double at(const CellIndex& cell) const {
    return cells_[static_cast<size_t>(cell.y) * width_ + cell.x];
  }
  double& at(const CellIndex& cell) {
    return cells_[static_cast<size_t>(cell.y) * width_ + cell.x];
  }

  // Doubles the grid toward the missing side until [lo, hi] fits. Returns
  // the shift applied to existing cell indices.
  CellIndex GrowToContain(const CellIndex& lo, const CellIndex& hi);

 private:
  double resolution_;
  Eigen::Vector2d anchor_;
  // Offset (cells) of cell (0, 0) relative to the anchor.
  int64_t offset_x_ = 0;
  int64_t offset_y_ = 0;
  int width_;
  int height_;
  std::vector<double> cells_;
};

// Visits the cells strictly between the cells of `from` and `to` along the
// segment, in traversal order, using integer grid traversal. The cell of
// `to` is not visited; nothing is visited when both points share a cell.
template <typename Visit>
void ForEachRayCell(const OccupancyGrid& grid, const Eigen::Vector2d& from,
                    const Eigen::Vector2d& to, Visit&& visit) {
  CellIndex cell = grid.CellOf(from);
  const CellIndex end = grid.CellOf(to);
  if (cell == end) return;

  // Fractional position inside the start cell, in cell units.
  const Eigen::Vector2d g_from = grid.AnchorCoords(from);
  const Eigen::Vector2d g_to = grid.AnchorCoords(to);
  const double sx = g_from.x() - std::floor(g_from.x());
  const double sy = g_from.y() - std::floor(g_from.y());
  const double dx = g_to.x() - g_from.x();
  const double dy = g_to.y() - g_from.y();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  const int step_x = end.x > cell.x ? 1 : (end.x < cell.x ? -1 : 0);
  const int step_y = end.y > cell.y ? 1 : (end.y < cell.y ? -1 : 0);
  double t_max_x = kInf;
  double t_max_y = kInf;
  double t_delta_x = kInf;
  double t_delta_y = kInf;
  if (step_x != 0 && dx != 0.0) {
    t_max_x = (step_x > 0 ? 1.0 - sx : sx) / std::abs(dx);
    t_delta_x = 1.0 / std::abs(dx);
  }
  if (step_y != 0 && dy != 0.0) {
    t_max_y = (step_y > 0 ? 1.0 - sy : sy) / std::abs(dy);
    t_delta_y = 1.0 / std::abs(dy);
  }

  // Every step moves one cell closer to `end`, so the walk is bounded.
  const int64_t steps = std::abs(end.x - cell.x) + std::abs(end.y - cell.y);
  for (int64_t i = 0; i < steps; ++i) {
    visit(static_cast<const CellIndex&>(cell));
    const bool x_open = cell.x != end.x;
    const bool y_open = cell.y != end.y;
    if (x_open && (!y_open || t_max_x <= t_max_y)) {
      cell.x += step_x;
      t_max_x += t_delta_x;
    } else {
      cell.y += step_y;
      t_max_y += t_delta_y;
    }
    if (cell == end) break;
  }
}

std::vector<CellIndex> TraverseRay(const OccupancyGrid& grid,
                                   const Eigen::Vector2d& from,
                                   const Eigen::Vector2d& to);

struct RayEndpoint {
  Eigen::Vector2d end;
  // False for max-range readings: the ray clears cells but marks no hit.
  bool hit = true;
};

// Cells between the sensor and each endpoint get l_free, the endpoint cell
// of a hit gets l_occ. Every cell receives n_free * l_free + n_occ * l_occ in
// one step, so ray order does not matter; values are then clamped. The grid
// grows to contain all rays.
void IntegrateRays(OccupancyGrid& grid, const Eigen::Vector2d& sensor,
                   std::span<const RayEndpoint> rays,
                   const OccupancyParams& params);

// Inverse sensor model update from one scan taken at `sensor_pose` (map
// frame). Non-finite ranges and ranges below range_min are skipped; ranges
// at or beyond range_max are cut there and only clear cells.
void IntegrateScan(OccupancyGrid& grid, const Pose2& sensor_pose,
                   const LaserScan& scan, const OccupancyParams& params);

enum class CellState : uint8_t { kUnknown, kFree, kOccupied };

inline constexpr double kOccupiedThreshold = 0.65;
inline constexpr double kFreeThreshold = 0.25;

CellState ClassifyCell(double log_odds);
std::vector<CellState> Classify(const OccupancyGrid& grid);

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bytes of the P5 graymap: row 0 is the highest y. occupied -> 0,
// free -> 254, unknown -> 205.
std::string EncodePgm(const OccupancyGrid& grid);
std::string EncodeMapMetadata(const OccupancyGrid& grid,
                              const std::string& image_name);

// Writes <prefix>.pgm and <prefix>.yaml.
void ExportMap(const OccupancyGrid& grid, const std::string& path_prefix);

}  // namespace semmap

#endif  // SEMMAP_OCCUPANCY_H_
