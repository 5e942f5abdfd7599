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

#ifndef SEMMAP_SEMANTIC_LAYER_H_
#define SEMMAP_SEMANTIC_LAYER_H_

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "Eigen/Core"
#include "semmap/geometry.h"
#include "semmap/spatial_hash.h"

namespace semmap {

// Association and memory settings. Distances are in meters, times in
// seconds. All thresholds are inclusive: a detection passes the gate when
// score >= cutoff and two points are "within" a radius when their distance
// is <= the radius.
struct LayerConfig {
  double default_cutoff = 0.65;
  std::map<std::string, double> per_class_cutoff;
  double frame_merge_radius = 0.20;
  double reuse_radius = 0.80;
  int promote_min_hits = 10;
  double promote_window = 2.0;
  double promote_min_mean_score = 0.50;
  // Candidates whose newest hit is older than this are evicted.
  double candidate_ttl = 3.0;

  double CutoffFor(const std::string& class_label) const;

  // Throws std::invalid_argument when a field is out of range.
  void Validate() const;
};

struct CandidateHit {
  double stamp = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double yaw = 0.0;
  double score = 0.0;
};

// Short-term record of co-located same-class hits awaiting confirmation.
struct TrackCandidate {
  uint64_t seq = 0;
  std::string class_label;
  // Arithmetic mean of `hits` positions, summed in hit order.
  Eigen::Vector2d mean_position = Eigen::Vector2d::Zero();
  std::deque<CandidateHit> hits;

  void RecomputeMean();
};

// Confirmed long-term object. The pose is frozen at promotion.
struct MapObject {
  uint64_t id = 0;
  std::string class_label;
  Pose2 pose;
  int64_t hit_count = 0;
  double score_sum = 0.0;
  double mean_score = 0.0;
  double first_seen = 0.0;
  double last_seen = 0.0;
};

// Immutable list of objects. Storage is shared in fixed-size chunks with
// the layer that produced it; the layer copies a chunk before writing to it
// when anyone else still holds that chunk.
class ObjectList {
 public:
  static constexpr size_t kChunkSize = 64;
  using Chunk = std::vector<MapObject>;

  ObjectList() = default;
  explicit ObjectList(std::vector<MapObject> objects);
  ObjectList(std::vector<std::shared_ptr<const Chunk>> chunks, size_t size)
      : chunks_(std::move(chunks)), size_(size) {}

  size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  const MapObject& operator[](size_t i) const {
    return (*chunks_[i / kChunkSize])[i % kChunkSize];
  }

  class const_iterator {
   public:
    using value_type = MapObject;
    using difference_type = std::ptrdiff_t;
    using reference = const MapObject&;
    using pointer = const MapObject*;
    using iterator_category = std::forward_iterator_tag;

    const_iterator() = default;
    const_iterator(const ObjectList* list, size_t i) : list_(list), i_(i) {}
    reference operator*() const { return (*list_)[i_]; }
    pointer operator->() const { return &(*list_)[i_]; }
    const_iterator& operator++() {
      ++i_;
      return *this;
    }
    const_iterator operator++(int) {
      const_iterator copy = *this;
      ++i_;
      return copy;
    }
    bool operator==(const const_iterator& o) const { return i_ == o.i_; }

   private:
    const ObjectList* list_ = nullptr;
    size_t i_ = 0;
  };

  const_iterator begin() const { return {this, 0}; }
  const_iterator end() const { return {this, size_}; }

 private:
  std::vector<std::shared_ptr<const Chunk>> chunks_;
  size_t size_ = 0;
};

// Published set of confirmed objects, ordered by id.
struct ObjectMapSnapshot {
  double stamp = 0.0;
  ObjectList objects;
};

enum class EventKind {
  kDropped,
  kMergedInFrame,
  kMatchedLongTerm,
  kUpdatedCandidate,
  kNewCandidate,
  kPromoted,
};

enum class DropReason { kNone, kLowScore, kNoDepth };

struct AssociationEvent {
  EventKind kind = EventKind::kDropped;
  DropReason reason = DropReason::kNone;
  // Set for kMatchedLongTerm and kPromoted.
  uint64_t object_id = 0;
  double stamp = 0.0;
  std::string class_label;
};

const char* ToString(EventKind kind);
const char* ToString(DropReason reason);

class NonMonotonicStamp : public std::runtime_error {
 public:
  NonMonotonicStamp(double stamp, double previous);
};

struct GateResult {
  std::vector<MapDetection> kept;
  std::vector<MapDetection> dropped;
};

// Keeps detections with score >= the cutoff for their class. Order is
// preserved in both outputs.
GateResult GateByConfidence(std::span<const MapDetection> detections,
                            const LayerConfig& config);

// Order in which same-frame detections are considered: score descending,
// then x, then y ascending, then input position.
std::vector<size_t> FrameProcessingOrder(
    std::span<const MapDetection> detections);

// Per class, keeps a detection unless an already kept same-class detection
// lies within frame_merge_radius. Survivors come back in processing order.
std::vector<MapDetection> MergeInFrame(std::span<const MapDetection> detections,
                                       const LayerConfig& config);

// Applies the promotion gate to the hits inside [now - promote_window, now]:
// at least promote_min_hits hits with mean score >= promote_min_mean_score.
// The object's pose is the mean of those hits with the latest hit's yaw.
std::optional<MapObject> TryPromote(const TrackCandidate& candidate, double now,
                                    const LayerConfig& config, uint64_t id);

struct FrameResult {
  std::shared_ptr<const ObjectMapSnapshot> snapshot;
  // One event per input detection, in input order.
  std::vector<AssociationEvent> events;
};

// Short-term/long-term object memory. Single writer: one caller drives
// ProcessFrame at a time. Snapshots are immutable and may be read from any
// thread.
class SemanticLayer {
 public:
  explicit SemanticLayer(LayerConfig config);

  const LayerConfig& config() const { return config_; }

  // gate -> in-frame merge -> associate (processing order) -> promote
  // touched candidates -> prune -> snapshot. Throws NonMonotonicStamp if
  // `stamp` precedes the previous frame.
  FrameResult ProcessFrame(std::span<const MapDetection> frame, double stamp);

  // Matches `detection` against long-term objects, then candidates, else
  // starts a new candidate. Returns kMatchedLongTerm, kUpdatedCandidate or
  // kNewCandidate.
  AssociationEvent Associate(const MapDetection& detection);

  // Drops hits older than now - promote_window and evicts empty or expired
  // candidates. Returns the number of candidates removed. Long-term objects
  // are never pruned.
  size_t Prune(double now);

  std::shared_ptr<const ObjectMapSnapshot> Snapshot(double stamp) const;

  size_t object_count() const { return object_count_; }
  const MapObject& object(uint64_t id) const;
  const std::map<uint64_t, TrackCandidate>& candidates() const {
    return candidates_;
  }

 private:
  int ClassId(const std::string& class_label);
  std::optional<uint64_t> NearestObject(int class_id,
                                        const Eigen::Vector2d& p) const;
  std::optional<uint64_t> NearestCandidate(int class_id,
                                           const Eigen::Vector2d& p) const;
  MapObject& MutableObject(uint64_t id);
  void AddObject(MapObject object);
  AssociationEvent AssociateDetection(const MapDetection& detection,
                                      uint64_t* candidate_seq);
  // Re-indexes a candidate after its hits changed.
  void RefreshCandidate(TrackCandidate& candidate, int class_id);
  void RemoveCandidate(uint64_t seq);
  // Promotes or folds the candidate into an existing object. Returns the id
  // of the object it ended up in and whether it was a new promotion.
  std::optional<std::pair<uint64_t, bool>> PromoteCandidate(uint64_t seq,
                                                            double now);

  LayerConfig config_;
  std::unordered_map<std::string, int> class_ids_;

  std::vector<std::shared_ptr<ObjectList::Chunk>> chunks_;
  size_t object_count_ = 0;
  SpatialHash object_index_;

  std::map<uint64_t, TrackCandidate> candidates_;
  std::unordered_map<uint64_t, int> candidate_class_;
  SpatialHash candidate_index_;
  uint64_t next_candidate_seq_ = 1;

  std::optional<double> last_stamp_;
};

}  // namespace semmap

#endif  // SEMMAP_SEMANTIC_LAYER_H_
