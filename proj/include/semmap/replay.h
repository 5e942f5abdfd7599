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

#ifndef SEMMAP_REPLAY_H_
#define SEMMAP_REPLAY_H_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"
#include "semmap/ingestion.h"
#include "semmap/occupancy.h"
#include "semmap/run_config.h"
#include "semmap/semantic_layer.h"

namespace semmap {

struct RunReport {
  int64_t records = 0;
  int64_t poses = 0;
  int64_t scans = 0;
  int64_t detection_frames = 0;
  int64_t detections = 0;

  int64_t scans_integrated = 0;
  int64_t frames_processed = 0;
  int64_t scans_dropped_pose_gap = 0;
  int64_t frames_dropped_pose_gap = 0;
  int64_t detections_dropped_pose_gap = 0;
  int64_t detections_dropped_no_depth = 0;
  int64_t detections_dropped_invalid_bbox = 0;
  int64_t detections_dropped_low_score = 0;
  int64_t detections_merged_in_frame = 0;

  int64_t objects = 0;
  int64_t pending_candidates = 0;
  double wall_clock_s = 0.0;
};

// Wall-clock time is omitted when `include_wall_clock` is false.
nlohmann::json ReportToJson(const RunReport& report,
                            bool include_wall_clock = true);

// Receives per-frame output during replay, on the replaying thread.
class ReplaySink {
 public:
  virtual ~ReplaySink() = default;
  virtual void OnFrame(const std::shared_ptr<const ObjectMapSnapshot>& snapshot,
                       std::span<const AssociationEvent> events) = 0;
};

// Records ordered by stamp; equal stamps go pose, then scan, then
// detections, then file order.
std::vector<const LogRecord*> MergeStreams(std::span<const LogRecord> records);

struct ReplayResult {
  RunReport report;
  OccupancyGrid grid;
  std::shared_ptr<const ObjectMapSnapshot> final_snapshot;
};

// Replays a parsed log: scans go into the occupancy grid, detection frames
// are projected into the map and fed to the semantic layer. Scans and
// frames without a pose within max_pose_skew are counted and skipped.
ReplayResult Replay(std::span<const LogRecord> records, const RunConfig& config,
                    std::span<ReplaySink* const> sinks = {});

}  // namespace semmap

#endif  // SEMMAP_REPLAY_H_
