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

#include "semmap/replay.h"

#include <algorithm>
#include <chrono>
#include <deque>

namespace semmap {

nlohmann::json ReportToJson(const RunReport& r, bool include_wall_clock) {
  nlohmann::json out{
      {"version", 1},
      {"records", r.records},
      {"poses", r.poses},
      {"scans", r.scans},
      {"detection_frames", r.detection_frames},
      {"detections", r.detections},
      {"scans_integrated", r.scans_integrated},
      {"frames_processed", r.frames_processed},
      {"scans_dropped_pose_gap", r.scans_dropped_pose_gap},
      {"frames_dropped_pose_gap", r.frames_dropped_pose_gap},
      {"detections_dropped_pose_gap", r.detections_dropped_pose_gap},
      {"detections_dropped_no_depth", r.detections_dropped_no_depth},
      {"detections_dropped_invalid_bbox", r.detections_dropped_invalid_bbox},
      {"detections_dropped_low_score", r.detections_dropped_low_score},
      {"detections_merged_in_frame", r.detections_merged_in_frame},
      {"objects", r.objects},
      {"pending_candidates", r.pending_candidates}};
  if (include_wall_clock) out["wall_clock_s"] = r.wall_clock_s;
  return out;
}

std::vector<const LogRecord*> MergeStreams(std::span<const LogRecord> records) {
  std::vector<const LogRecord*> merged;
  merged.reserve(records.size());
  for (const LogRecord& r : records) merged.push_back(&r);
  std::stable_sort(merged.begin(), merged.end(),
                   [](const LogRecord* a, const LogRecord* b) {
                     if (a->stamp != b->stamp) return a->stamp < b->stamp;
                     return a->stream() < b->stream();
                   });
  return merged;
}

namespace {

constexpr int kInitialGridCells = 64;

class ReplayRun {
 public:
  ReplayRun(const RunConfig& config, std::span<ReplaySink* const> sinks)
      : config_(config),
        sinks_(sinks),
        layer_(config.layer),
        grid_(config.occupancy.resolution,
              Eigen::Vector2d::Constant(-0.5 * kInitialGridCells *
                                        config.occupancy.resolution),
              kInitialGridCells, kInitialGridCells) {}

  void Feed(const LogRecord& record) {
    ++report_.records;
    switch (record.stream()) {
      case Stream::kPose:
        ++report_.poses;
        poses_.Add(record.stamp, std::get<Pose3>(record.payload));
        // Everything waiting at or before this stamp now has its bracket.
        while (!pending_.empty() &&
               pending_.front()->stamp <= poses_.newest_stamp()) {
          Process(*pending_.front());
          pending_.pop_front();
        }
        return;
      case Stream::kScan:
        ++report_.scans;
        break;
      case Stream::kDetections:
        ++report_.detection_frames;
        report_.detections += static_cast<int64_t>(
            std::get<DetectionFrame>(record.payload).items.size());
        break;
    }
    if (pending_.empty() && !poses_.empty() &&
        record.stamp <= poses_.newest_stamp()) {
      Process(record);
    } else {
      pending_.push_back(&record);
    }
  }

  ReplayResult Finish(double wall_clock_s) {
    while (!pending_.empty()) {
      Process(*pending_.front());
      pending_.pop_front();
    }
    if (!last_snapshot_) last_snapshot_ = layer_.Snapshot(0.0);
    report_.objects = static_cast<int64_t>(layer_.object_count());
    report_.pending_candidates =
        static_cast<int64_t>(layer_.candidates().size());
    report_.wall_clock_s = wall_clock_s;
    return ReplayResult{report_, std::move(grid_), last_snapshot_};
  }

 private:
  void Process(const LogRecord& record) {
    const std::optional<Pose3> map_from_body =
        poses_.Interpolate(record.stamp, config_.max_pose_skew);
    if (record.stream() == Stream::kScan) {
      if (!map_from_body) {
        ++report_.scans_dropped_pose_gap;
      } else {
        const Pose2 sensor =
            Compose(Flatten(*map_from_body), config_.body_from_lidar);
        IntegrateScan(grid_, sensor, std::get<LaserScan>(record.payload),
                      config_.occupancy);
        ++report_.scans_integrated;
      }
    } else {
      const auto& frame = std::get<DetectionFrame>(record.payload);
      if (!map_from_body) {
        ++report_.frames_dropped_pose_gap;
        report_.detections_dropped_pose_gap +=
            static_cast<int64_t>(frame.items.size());
      } else {
        ProcessFrame(record.stamp, frame, *map_from_body);
      }
    }
    poses_.TrimBefore(record.stamp);
  }

  void ProcessFrame(double stamp, const DetectionFrame& frame,
                    const Pose3& map_from_body) {
    std::vector<MapDetection> projected;
    std::vector<size_t> source;
    std::vector<AssociationEvent> events;
    std::vector<bool> has_event(frame.items.size(), false);
    events.resize(frame.items.size());
    for (size_t i = 0; i < frame.items.size(); ++i) {
      const LoggedDetection& item = frame.items[i];
      if (!item.detection.bbox.IsInside(config_.intrinsics)) {
        ++report_.detections_dropped_invalid_bbox;
        continue;
      }
      const std::optional<Eigen::Vector3d> point =
          BackProject(item.detection.bbox, PrecollectedDepth(item.depth_m),
                      config_.intrinsics);
      has_event[i] = true;
      if (!point) {
        ++report_.detections_dropped_no_depth;
        events[i] = AssociationEvent{EventKind::kDropped, DropReason::kNoDepth,
                                     0, stamp, item.detection.class_label};
        continue;
      }
      projected.push_back(DetectionToMap(item.detection, *point,
                                         config_.body_from_camera,
                                         map_from_body, stamp));
      source.push_back(i);
    }

    FrameResult result = layer_.ProcessFrame(projected, stamp);
    ++report_.frames_processed;
    for (size_t k = 0; k < source.size(); ++k) {
      const AssociationEvent& e = result.events[k];
      if (e.kind == EventKind::kDropped) ++report_.detections_dropped_low_score;
      if (e.kind == EventKind::kMergedInFrame) {
        ++report_.detections_merged_in_frame;
      }
      events[source[k]] = std::move(result.events[k]);
    }
    std::vector<AssociationEvent> emitted;
    emitted.reserve(events.size());
    for (size_t i = 0; i < events.size(); ++i) {
      if (has_event[i]) emitted.push_back(std::move(events[i]));
    }
    last_snapshot_ = result.snapshot;
    for (ReplaySink* sink : sinks_) sink->OnFrame(last_snapshot_, emitted);
  }

  const RunConfig& config_;
  std::span<ReplaySink* const> sinks_;
  SemanticLayer layer_;
  OccupancyGrid grid_;
  PoseBuffer poses_;
  std::deque<const LogRecord*> pending_;
  RunReport report_;
  std::shared_ptr<const ObjectMapSnapshot> last_snapshot_;
};

}  // namespace

ReplayResult Replay(std::span<const LogRecord> records, const RunConfig& config,
                    std::span<ReplaySink* const> sinks) {
  config.Validate();
  const auto start = std::chrono::steady_clock::now();
  ReplayRun run(config, sinks);
  for (const LogRecord* record : MergeStreams(records)) run.Feed(*record);
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  return run.Finish(elapsed.count());
}

}  // namespace semmap
