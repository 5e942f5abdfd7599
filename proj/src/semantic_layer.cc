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

#include "semmap/semantic_layer.h"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace semmap {
namespace {

bool Within(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double radius) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  return dx * dx + dy * dy <= radius * radius;
}

}  // namespace

double LayerConfig::CutoffFor(const std::string& class_label) const {
  const auto it = per_class_cutoff.find(class_label);
  return it == per_class_cutoff.end() ? default_cutoff : it->second;
}

void LayerConfig::Validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(default_cutoff)) {
    throw std::invalid_argument("layer config: default_cutoff outside [0, 1]");
  }
  for (const auto& [label, cutoff] : per_class_cutoff) {
    if (!in_unit(cutoff)) {
      throw std::invalid_argument("layer config: cutoff for '" + label +
                                  "' outside [0, 1]");
    }
  }
  if (!(frame_merge_radius > 0.0) || !(reuse_radius > 0.0)) {
    throw std::invalid_argument("layer config: radii must be > 0");
  }
  if (promote_min_hits < 1) {
    throw std::invalid_argument("layer config: promote_min_hits must be >= 1");
  }
  if (!(promote_window > 0.0)) {
    throw std::invalid_argument("layer config: promote_window must be > 0");
  }
  if (!in_unit(promote_min_mean_score)) {
    throw std::invalid_argument(
        "layer config: promote_min_mean_score outside [0, 1]");
  }
  if (!(candidate_ttl > 0.0)) {
    throw std::invalid_argument("layer config: candidate_ttl must be > 0");
  }
}

void TrackCandidate::RecomputeMean() {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (const CandidateHit& hit : hits) sum += hit.position;
  mean_position = hits.empty() ? sum : sum / static_cast<double>(hits.size());
}

ObjectList::ObjectList(std::vector<MapObject> objects) : size_(objects.size()) {
  for (size_t begin = 0; begin < objects.size(); begin += kChunkSize) {
    const size_t end = std::min(objects.size(), begin + kChunkSize);
    chunks_.push_back(std::make_shared<const Chunk>(
        std::make_move_iterator(objects.begin() + begin),
        std::make_move_iterator(objects.begin() + end)));
  }
}

const char* ToString(EventKind kind) {
  switch (kind) {
    case EventKind::kDropped:
      return "dropped";
    case EventKind::kMergedInFrame:
      return "merged_in_frame";
    case EventKind::kMatchedLongTerm:
      return "matched_long_term";
    case EventKind::kUpdatedCandidate:
      return "updated_candidate";
    case EventKind::kNewCandidate:
      return "new_candidate";
    case EventKind::kPromoted:
      return "promoted";
  }
  return "unknown";
}

const char* ToString(DropReason reason) {
  switch (reason) {
    case DropReason::kNone:
      return "none";
    case DropReason::kLowScore:
      return "low_score";
    case DropReason::kNoDepth:
      return "no_depth";
  }
  return "unknown";
}

namespace {

std::string NonMonotonicMessage(double stamp, double previous) {
  std::ostringstream os;
  os.precision(17);
  os << "frame stamp " << stamp << " precedes previous stamp " << previous;
  return os.str();
}

}  // namespace

NonMonotonicStamp::NonMonotonicStamp(double stamp, double previous)
    : std::runtime_error(NonMonotonicMessage(stamp, previous)) {}

GateResult GateByConfidence(std::span<const MapDetection> detections,
                            const LayerConfig& config) {
  GateResult result;
  for (const MapDetection& d : detections) {
    if (d.score >= config.CutoffFor(d.class_label)) {
      result.kept.push_back(d);
    } else {
      result.dropped.push_back(d);
    }
  }
  return result;
}

std::vector<size_t> FrameProcessingOrder(
    std::span<const MapDetection> detections) {
  std::vector<size_t> order(detections.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const MapDetection& da = detections[a];
    const MapDetection& db = detections[b];
    if (da.score != db.score) return da.score > db.score;
    if (da.position.x() != db.position.x()) {
      return da.position.x() < db.position.x();
    }
    return da.position.y() < db.position.y();
  });
  return order;
}

namespace {

// Indices (into `detections`) of the survivors, in processing order.
std::vector<size_t> MergeSurvivors(std::span<const MapDetection> detections,
                                   double radius) {
  std::vector<size_t> kept;
  for (const size_t i : FrameProcessingOrder(detections)) {
    const MapDetection& d = detections[i];
    const bool duplicate =
        std::any_of(kept.begin(), kept.end(), [&](size_t k) {
          return detections[k].class_label == d.class_label &&
                 Within(detections[k].position, d.position, radius);
        });
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

}  // namespace

std::vector<MapDetection> MergeInFrame(std::span<const MapDetection> detections,
                                       const LayerConfig& config) {
  std::vector<MapDetection> out;
  for (const size_t i :
       MergeSurvivors(detections, config.frame_merge_radius)) {
    out.push_back(detections[i]);
  }
  return out;
}

std::optional<MapObject> TryPromote(const TrackCandidate& candidate, double now,
                                    const LayerConfig& config, uint64_t id) {
  const double window_start = now - config.promote_window;
  int64_t count = 0;
  double score_sum = 0.0;
  Eigen::Vector2d position_sum = Eigen::Vector2d::Zero();
  const CandidateHit* first = nullptr;
  const CandidateHit* latest = nullptr;
  for (const CandidateHit& hit : candidate.hits) {
    if (hit.stamp < window_start || hit.stamp > now) continue;
    ++count;
    score_sum += hit.score;
    position_sum += hit.position;
    if (first == nullptr) first = &hit;
    latest = &hit;
  }
  if (count < config.promote_min_hits) return std::nullopt;
  const double mean_score = score_sum / static_cast<double>(count);
  if (mean_score < config.promote_min_mean_score) return std::nullopt;

  const Eigen::Vector2d mean = position_sum / static_cast<double>(count);
  MapObject object;
  object.id = id;
  object.class_label = candidate.class_label;
  object.pose = Pose2(mean.x(), mean.y(), latest->yaw);
  object.hit_count = count;
  object.score_sum = score_sum;
  object.mean_score = mean_score;
  object.first_seen = first->stamp;
  object.last_seen = latest->stamp;
  return object;
}

SemanticLayer::SemanticLayer(LayerConfig config)
    : config_(std::move(config)),
      object_index_(config_.reuse_radius),
      candidate_index_(config_.reuse_radius) {
  config_.Validate();
}

int SemanticLayer::ClassId(const std::string& class_label) {
  const auto [it, inserted] =
      class_ids_.try_emplace(class_label, static_cast<int>(class_ids_.size()));
  return it->second;
}

const MapObject& SemanticLayer::object(uint64_t id) const {
  if (id == 0 || id > object_count_) {
    throw std::out_of_range("no object with id " + std::to_string(id));
  }
  const size_t i = id - 1;
  return (*chunks_[i / ObjectList::kChunkSize])[i % ObjectList::kChunkSize];
}

MapObject& SemanticLayer::MutableObject(uint64_t id) {
  const size_t i = id - 1;
  std::shared_ptr<ObjectList::Chunk>& chunk =
      chunks_[i / ObjectList::kChunkSize];
  // A snapshot still references this chunk: write to a private copy.
  if (chunk.use_count() > 1) {
    chunk = std::make_shared<ObjectList::Chunk>(*chunk);
  }
  return (*chunk)[i % ObjectList::kChunkSize];
}

void SemanticLayer::AddObject(MapObject object) {
  const size_t i = object_count_;
  if (i % ObjectList::kChunkSize == 0) {
    chunks_.push_back(std::make_shared<ObjectList::Chunk>());
    chunks_.back()->reserve(ObjectList::kChunkSize);
  } else if (chunks_.back().use_count() > 1) {
    auto copy = std::make_shared<ObjectList::Chunk>(*chunks_.back());
    copy->reserve(ObjectList::kChunkSize);
    chunks_.back() = std::move(copy);
  }
  const int class_id = ClassId(object.class_label);
  object_index_.Insert(class_id, Eigen::Vector2d(object.pose.x, object.pose.y),
                       object.id);
  chunks_.back()->push_back(std::move(object));
  ++object_count_;
}

std::optional<uint64_t> SemanticLayer::NearestObject(
    int class_id, const Eigen::Vector2d& p) const {
  return object_index_.Nearest(
      class_id, p, config_.reuse_radius, [this](uint64_t id) {
        const MapObject& o = object(id);
        return Eigen::Vector2d(o.pose.x, o.pose.y);
      });
}

std::optional<uint64_t> SemanticLayer::NearestCandidate(
    int class_id, const Eigen::Vector2d& p) const {
  return candidate_index_.Nearest(
      class_id, p, config_.reuse_radius,
      [this](uint64_t seq) { return candidates_.at(seq).mean_position; });
}

// `candidate.mean_position` must still be the indexed (stale) position.
void SemanticLayer::RefreshCandidate(TrackCandidate& candidate, int class_id) {
  candidate_index_.Erase(class_id, candidate.mean_position, candidate.seq);
  candidate.RecomputeMean();
  candidate_index_.Insert(class_id, candidate.mean_position, candidate.seq);
}

void SemanticLayer::RemoveCandidate(uint64_t seq) {
  const auto it = candidates_.find(seq);
  if (it == candidates_.end()) return;
  const int class_id = candidate_class_.at(seq);
  candidate_index_.Erase(class_id, it->second.mean_position, seq);
  candidate_class_.erase(seq);
  candidates_.erase(it);
}

AssociationEvent SemanticLayer::Associate(const MapDetection& detection) {
  return AssociateDetection(detection, nullptr);
}

AssociationEvent SemanticLayer::AssociateDetection(
    const MapDetection& detection, uint64_t* candidate_seq) {
  AssociationEvent event;
  event.stamp = detection.stamp;
  event.class_label = detection.class_label;
  const int class_id = ClassId(detection.class_label);

  if (const auto id = NearestObject(class_id, detection.position)) {
    MapObject& o = MutableObject(*id);
    ++o.hit_count;
    o.score_sum += detection.score;
    o.mean_score = o.score_sum / static_cast<double>(o.hit_count);
    o.last_seen = std::max(o.last_seen, detection.stamp);
    event.kind = EventKind::kMatchedLongTerm;
    event.object_id = *id;
    return event;
  }

  const CandidateHit hit{detection.stamp, detection.position, detection.yaw,
                         detection.score};
  if (const auto seq = NearestCandidate(class_id, detection.position)) {
    TrackCandidate& candidate = candidates_.at(*seq);
    candidate.hits.push_back(hit);
    RefreshCandidate(candidate, class_id);
    event.kind = EventKind::kUpdatedCandidate;
    if (candidate_seq != nullptr) *candidate_seq = *seq;
    return event;
  }

  TrackCandidate candidate;
  candidate.seq = next_candidate_seq_++;
  candidate.class_label = detection.class_label;
  candidate.hits.push_back(hit);
  candidate.RecomputeMean();
  candidate_index_.Insert(class_id, candidate.mean_position, candidate.seq);
  candidate_class_.emplace(candidate.seq, class_id);
  if (candidate_seq != nullptr) *candidate_seq = candidate.seq;
  candidates_.emplace(candidate.seq, std::move(candidate));
  event.kind = EventKind::kNewCandidate;
  return event;
}

std::optional<std::pair<uint64_t, bool>> SemanticLayer::PromoteCandidate(
    uint64_t seq, double now) {
  const TrackCandidate& candidate = candidates_.at(seq);
  std::optional<MapObject> promoted =
      TryPromote(candidate, now, config_, object_count_ + 1);
  if (!promoted) return std::nullopt;

  const int class_id = candidate_class_.at(seq);
  const Eigen::Vector2d pose(promoted->pose.x, promoted->pose.y);
  std::pair<uint64_t, bool> outcome;
  if (const auto existing = NearestObject(class_id, pose)) {
    // Folding keeps same-class objects at least reuse_radius apart.
    MapObject& o = MutableObject(*existing);
    o.hit_count += promoted->hit_count;
    o.score_sum += promoted->score_sum;
    o.mean_score = o.score_sum / static_cast<double>(o.hit_count);
    o.last_seen = std::max(o.last_seen, promoted->last_seen);
    outcome = {*existing, false};
  } else {
    outcome = {promoted->id, true};
    AddObject(std::move(*promoted));
  }
  RemoveCandidate(seq);
  return outcome;
}

size_t SemanticLayer::Prune(double now) {
  const double window_start = now - config_.promote_window;
  const double ttl_start = now - config_.candidate_ttl;
  std::vector<uint64_t> expired;
  for (auto& [seq, candidate] : candidates_) {
    if (!candidate.hits.empty() && candidate.hits.front().stamp < window_start) {
      while (!candidate.hits.empty() &&
             candidate.hits.front().stamp < window_start) {
        candidate.hits.pop_front();
      }
      RefreshCandidate(candidate, candidate_class_.at(seq));
    }
    if (candidate.hits.empty() || candidate.hits.back().stamp < ttl_start) {
      expired.push_back(seq);
    }
  }
  for (const uint64_t seq : expired) RemoveCandidate(seq);
  return expired.size();
}

std::shared_ptr<const ObjectMapSnapshot> SemanticLayer::Snapshot(
    double stamp) const {
  std::vector<std::shared_ptr<const ObjectList::Chunk>> shared(chunks_.begin(),
                                                               chunks_.end());
  auto snapshot = std::make_shared<ObjectMapSnapshot>();
  snapshot->stamp = stamp;
  snapshot->objects = ObjectList(std::move(shared), object_count_);
  return snapshot;
}

FrameResult SemanticLayer::ProcessFrame(std::span<const MapDetection> frame,
                                        double stamp) {
  if (last_stamp_ && stamp < *last_stamp_) {
    throw NonMonotonicStamp(stamp, *last_stamp_);
  }
  last_stamp_ = stamp;

  FrameResult result;
  result.events.resize(frame.size());
  for (AssociationEvent& e : result.events) e.stamp = stamp;

  std::vector<MapDetection> gated;
  std::vector<size_t> gated_index;
  for (size_t i = 0; i < frame.size(); ++i) {
    result.events[i].class_label = frame[i].class_label;
    if (frame[i].score >= config_.CutoffFor(frame[i].class_label)) {
      gated.push_back(frame[i]);
      gated.back().stamp = stamp;
      gated_index.push_back(i);
    } else {
      result.events[i].kind = EventKind::kDropped;
      result.events[i].reason = DropReason::kLowScore;
    }
  }

  std::vector<bool> survived(gated.size(), false);
  const std::vector<size_t> survivors =
      MergeSurvivors(gated, config_.frame_merge_radius);
  for (const size_t k : survivors) survived[k] = true;
  for (size_t k = 0; k < gated.size(); ++k) {
    if (!survived[k]) {
      result.events[gated_index[k]].kind = EventKind::kMergedInFrame;
    }
  }

  // Candidate seq -> input index of the last detection that touched it.
  std::map<uint64_t, size_t> touched;
  for (const size_t k : survivors) {
    const MapDetection& detection = gated[k];
    uint64_t seq = 0;
    AssociationEvent event = AssociateDetection(detection, &seq);
    const size_t input = gated_index[k];
    if (seq != 0) touched[seq] = input;
    result.events[input] = std::move(event);
  }

  for (const auto& [seq, input] : touched) {
    if (!candidates_.contains(seq)) continue;
    const auto outcome = PromoteCandidate(seq, stamp);
    if (!outcome) continue;
    AssociationEvent& event = result.events[input];
    event.object_id = outcome->first;
    event.kind = outcome->second ? EventKind::kPromoted
                                 : EventKind::kMatchedLongTerm;
  }

  Prune(stamp);
  result.snapshot = Snapshot(stamp);
  return result;
}

}  // namespace semmap
