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

#ifndef SEMMAP_SPATIAL_HASH_H_
#define SEMMAP_SPATIAL_HASH_H_

#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "Eigen/Core"

namespace semmap {

// Uniform grid hash over (class, cell) buckets for fixed-radius nearest
// neighbour queries. Query radii must not exceed the cell size, so a query
// only needs to inspect the 3x3 block of cells around the query point.
class SpatialHash {
 public:
  explicit SpatialHash(double cell_size) : cell_size_(cell_size) {}

  double cell_size() const { return cell_size_; }
  size_t size() const { return size_; }

  void Insert(int class_id, const Eigen::Vector2d& position, uint64_t key);

  // Returns false if `key` was not stored at `position`.
  bool Erase(int class_id, const Eigen::Vector2d& position, uint64_t key);

  // Nearest key of `class_id` with squared distance <= radius^2. Ties on
  // distance go to the smaller key. `position_of(key)` must return the
  // position the key was inserted with.
  template <typename PositionOf>
  std::optional<uint64_t> Nearest(int class_id, const Eigen::Vector2d& query,
                                  double radius,
                                  PositionOf&& position_of) const {
    std::optional<uint64_t> best;
    double best_d2 = 0.0;
    const double r2 = radius * radius;
    const int64_t qx = CellCoord(query.x());
    const int64_t qy = CellCoord(query.y());
    for (int64_t dx = -1; dx <= 1; ++dx) {
      for (int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = buckets_.find(CellKey{class_id, qx + dx, qy + dy});
        if (it == buckets_.end()) continue;
        for (const uint64_t key : it->second) {
          const Eigen::Vector2d p = position_of(key);
          const double ex = p.x() - query.x();
          const double ey = p.y() - query.y();
          const double d2 = ex * ex + ey * ey;
          if (d2 > r2) continue;
          if (!best || d2 < best_d2 || (d2 == best_d2 && key < *best)) {
            best = key;
            best_d2 = d2;
          }
        }
      }
    }
    return best;
  }

 private:
  struct CellKey {
    int class_id;
    int64_t x;
    int64_t y;
    bool operator==(const CellKey&) const = default;
  };
  struct CellKeyHash {
    size_t operator()(const CellKey& k) const {
      uint64_t h = static_cast<uint64_t>(k.class_id) * 0x9E3779B97F4A7C15ull;
      h ^= static_cast<uint64_t>(k.x) + 0x7F4A7C159E3779B9ull + (h << 6) +
           (h >> 2);
      h ^= static_cast<uint64_t>(k.y) + 0x94D049BB133111EBull + (h << 6) +
           (h >> 2);
      return static_cast<size_t>(h);
    }
  };

  int64_t CellCoord(double v) const {
    return static_cast<int64_t>(std::floor(v / cell_size_));
  }
  CellKey KeyFor(int class_id, const Eigen::Vector2d& p) const {
    return CellKey{class_id, CellCoord(p.x()), CellCoord(p.y())};
  }

  double cell_size_;
  size_t size_ = 0;
  std::unordered_map<CellKey, std::vector<uint64_t>, CellKeyHash> buckets_;
};

inline void SpatialHash::Insert(int class_id, const Eigen::Vector2d& position,
                                uint64_t key) {
  buckets_[KeyFor(class_id, position)].push_back(key);
  ++size_;
}

inline bool SpatialHash::Erase(int class_id, const Eigen::Vector2d& position,
                               uint64_t key) {
  const auto it = buckets_.find(KeyFor(class_id, position));
  if (it == buckets_.end()) return false;
  std::vector<uint64_t>& bucket = it->second;
  for (size_t i = 0; i < bucket.size(); ++i) {
    if (bucket[i] != key) continue;
    bucket[i] = bucket.back();
    bucket.pop_back();
    if (bucket.empty()) buckets_.erase(it);
    --size_;
    return true;
  }
  return false;
}

}  // namespace semmap

#endif  // SEMMAP_SPATIAL_HASH_H_
