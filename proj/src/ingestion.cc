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

#include "semmap/ingestion.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace semmap {

using nlohmann::json;

const char* ToString(Stream stream) {
  switch (stream) {
    case Stream::kPose:
      return "pose";
    case Stream::kScan:
      return "scan";
    case Stream::kDetections:
      return "detections";
  }
  return "unknown";
}

MalformedRecord::MalformedRecord(size_t line, const std::string& reason)
    : std::runtime_error("line " + std::to_string(line) + ": " + reason),
      line_(line) {}

NonMonotonicStream::NonMonotonicStream(Stream stream, double stamp,
                                       size_t line)
    : std::runtime_error("line " + std::to_string(line) + ": " +
                         ToString(stream) + " stamp " + std::to_string(stamp) +
                         " does not increase"),
      stream_(stream),
      stamp_(stamp) {}

namespace {

class FieldReader {
 public:
  FieldReader(const json& object, size_t line) : object_(object), line_(line) {}

  const json& Get(const char* key) const {
    const auto it = object_.find(key);
    if (it == object_.end()) Fail(std::string("missing field '") + key + "'");
    return *it;
  }

  double Number(const char* key) const { return NumberOf(Get(key), key); }

  double NumberOf(const json& value, const char* what) const {
    if (!value.is_number()) Fail(std::string("'") + what + "' must be a number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) Fail(std::string("'") + what + "' must be finite");
    return v;
  }

  std::vector<double> Numbers(const char* key, size_t expected) const {
    const json& value = Get(key);
    if (!value.is_array() || value.size() != expected) {
      Fail(std::string("'") + key + "' must be an array of " +
           std::to_string(expected) + " numbers");
    }
    std::vector<double> out;
    for (const json& v : value) out.push_back(NumberOf(v, key));
    return out;
  }

  [[noreturn]] void Fail(const std::string& reason) const {
    throw MalformedRecord(line_, reason);
  }

 private:
  const json& object_;
  size_t line_;
};

Pose3 ParsePose(const FieldReader& r) {
  const std::vector<double> p = r.Numbers("p", 3);
  const std::vector<double> q = r.Numbers("q", 4);
  const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] +
                                q[3] * q[3]);
  if (!(norm > 1e-9)) r.Fail("'q' must be a non-zero quaternion");
  return Pose3(Eigen::Vector3d(p[0], p[1], p[2]),
               Eigen::Quaterniond(q[0], q[1], q[2], q[3]));
}

LaserScan ParseScan(const FieldReader& r, double stamp) {
  LaserScan scan;
  scan.stamp = stamp;
  scan.angle_min = r.Number("angle_min");
  scan.angle_increment = r.Number("angle_increment");
  scan.range_min = r.Number("range_min");
  scan.range_max = r.Number("range_max");
  if (scan.angle_increment == 0.0) r.Fail("'angle_increment' must be non-zero");
  if (scan.range_min < 0.0 || !(scan.range_max > scan.range_min)) {
    r.Fail("require 0 <= range_min < range_max");
  }
  const json& ranges = r.Get("ranges");
  if (!ranges.is_array()) r.Fail("'ranges' must be an array");
  scan.ranges.reserve(ranges.size());
  for (const json& v : ranges) {
    if (v.is_null()) {
      scan.ranges.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double range = r.NumberOf(v, "ranges");
    if (range < 0.0) r.Fail("negative range");
    scan.ranges.push_back(range);
  }
  return scan;
}

DetectionFrame ParseDetections(const FieldReader& r, size_t line) {
  const json& items = r.Get("items");
  if (!items.is_array()) r.Fail("'items' must be an array");
  DetectionFrame frame;
  for (const json& item : items) {
    if (!item.is_object()) r.Fail("detection item must be an object");
    const FieldReader ir(item, line);
    LoggedDetection d;
    const json& label = ir.Get("class");
    if (!label.is_string() || label.get<std::string>().empty()) {
      r.Fail("'class' must be a non-empty string");
    }
    d.detection.class_label = label.get<std::string>();
    d.detection.score = ir.Number("score");
    if (d.detection.score < 0.0 || d.detection.score > 1.0) {
      r.Fail("'score' outside [0, 1]");
    }
    const std::vector<double> b = ir.Numbers("bbox", 4);
    d.detection.bbox = BBox{b[0], b[1], b[2], b[3]};
    if (!d.detection.bbox.IsWellFormed()) {
      r.Fail("'bbox' requires u0 < u1 and v0 < v1");
    }
    const json& depth = ir.Get("depth_samples_mm");
    if (!depth.is_array()) r.Fail("'depth_samples_mm' must be an array");
    d.depth_m.reserve(depth.size());
    for (const json& v : depth) {
      if (!v.is_number_integer() || v.get<int64_t>() < 0) {
        r.Fail("'depth_samples_mm' entries must be non-negative integers");
      }
      d.depth_m.push_back(static_cast<double>(v.get<int64_t>()) * 1e-3);
    }
    frame.items.push_back(std::move(d));
  }
  return frame;
}

}  // namespace

LogRecord ParseLogLine(std::string_view line, size_t line_number) {
  json document;
  try {
    document = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedRecord(line_number, std::string("invalid JSON: ") + e.what());
  }
  if (!document.is_object()) {
    throw MalformedRecord(line_number, "record must be a JSON object");
  }
  const FieldReader r(document, line_number);
  LogRecord record;
  record.stamp = r.Number("t");
  const json& type = r.Get("type");
  if (!type.is_string()) r.Fail("'type' must be a string");
  const std::string kind = type.get<std::string>();
  if (kind == "pose") {
    record.payload = ParsePose(r);
  } else if (kind == "scan") {
    record.payload = ParseScan(r, record.stamp);
  } else if (kind == "detections") {
    record.payload = ParseDetections(r, line_number);
  } else {
    r.Fail("unknown record type '" + kind + "'");
  }
  return record;
}

std::string SerializeLogRecord(const LogRecord& record) {
  nlohmann::ordered_json out;
  out["t"] = record.stamp;
  if (const auto* pose = std::get_if<Pose3>(&record.payload)) {
    const Eigen::Vector3d& p = pose->translation();
    const Eigen::Quaterniond& q = pose->rotation();
    out["type"] = "pose";
    out["p"] = {p.x(), p.y(), p.z()};
    out["q"] = {q.w(), q.x(), q.y(), q.z()};
  } else if (const auto* scan = std::get_if<LaserScan>(&record.payload)) {
    out["type"] = "scan";
    out["angle_min"] = scan->angle_min;
    out["angle_increment"] = scan->angle_increment;
    out["range_min"] = scan->range_min;
    out["range_max"] = scan->range_max;
    nlohmann::ordered_json ranges = nlohmann::ordered_json::array();
    for (const double r : scan->ranges) {
      if (std::isfinite(r)) {
        ranges.push_back(r);
      } else {
        ranges.push_back(nullptr);
      }
    }
    out["ranges"] = std::move(ranges);
  } else {
    const auto& frame = std::get<DetectionFrame>(record.payload);
    out["type"] = "detections";
    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    for (const LoggedDetection& d : frame.items) {
      nlohmann::ordered_json item;
      const BBox& b = d.detection.bbox;
      item["class"] = d.detection.class_label;
      item["score"] = d.detection.score;
      item["bbox"] = {b.u_min, b.v_min, b.u_max, b.v_max};
      nlohmann::ordered_json depth = nlohmann::ordered_json::array();
      for (const double m : d.depth_m) {
        depth.push_back(std::isfinite(m) && m > 0.0
                            ? static_cast<int64_t>(std::llround(m * 1e3))
                            : int64_t{0});
      }
      item["depth_samples_mm"] = std::move(depth);
      items.push_back(std::move(item));
    }
    out["items"] = std::move(items);
  }
  return out.dump();
}

std::optional<LogRecord> LogReader::Next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_number_;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    LogRecord record = ParseLogLine(line, line_number_);
    std::optional<double>& last =
        last_stamp_[static_cast<size_t>(record.stream())];
    if (last && !(record.stamp > *last)) {
      throw NonMonotonicStream(record.stream(), record.stamp, line_number_);
    }
    last = record.stamp;
    return record;
  }
  return std::nullopt;
}

std::vector<LogRecord> ReadLog(std::istream& in) {
  LogReader reader(in);
  std::vector<LogRecord> records;
  while (auto record = reader.Next()) records.push_back(std::move(*record));
  return records;
}

std::vector<LogRecord> ReadLogFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log '" + path + "'");
  return ReadLog(in);
}

void PoseBuffer::Add(double stamp, const Pose3& pose) {
  if (!poses_.empty() && !(stamp > poses_.back().stamp)) {
    throw std::invalid_argument("pose buffer: stamps must increase");
  }
  poses_.push_back(Entry{stamp, pose});
}

std::optional<Pose3> PoseBuffer::Interpolate(double t, double max_skew) const {
  if (poses_.empty()) return std::nullopt;
  const auto after = std::lower_bound(
      poses_.begin(), poses_.end(), t,
      [](const Entry& e, double stamp) { return e.stamp < stamp; });
  if (after == poses_.end()) {
    const Entry& newest = poses_.back();
    if (t - newest.stamp <= max_skew) return newest.pose;
    return std::nullopt;
  }
  if (after->stamp == t) return after->pose;
  if (after == poses_.begin()) return std::nullopt;
  const Entry& e0 = *(after - 1);
  const Entry& e1 = *after;
  if (e1.stamp - e0.stamp > 2.0 * max_skew) return std::nullopt;
  const double f = (t - e0.stamp) / (e1.stamp - e0.stamp);
  const Eigen::Vector3d translation =
      e0.pose.translation() +
      f * (e1.pose.translation() - e0.pose.translation());
  return Pose3(translation, e0.pose.rotation().slerp(f, e1.pose.rotation()));
}

void PoseBuffer::TrimBefore(double t) {
  while (poses_.size() > 1 && poses_[1].stamp <= t) poses_.pop_front();
}

}  // namespace semmap
