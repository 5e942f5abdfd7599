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

#ifndef SEMMAP_INGESTION_H_
#define SEMMAP_INGESTION_H_

#include <cstddef>
#include <deque>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "semmap/geometry.h"
#include "semmap/occupancy.h"

namespace semmap {

// Merge priority for records with equal stamps follows declaration order.
enum class Stream { kPose = 0, kScan = 1, kDetections = 2 };

const char* ToString(Stream stream);

struct LoggedDetection {
  Detection2D detection;
  // Depth readings of the central sub-box, meters. Zero marks an invalid
  // reading. Logs store whole millimeters.
  std::vector<double> depth_m;
};

struct DetectionFrame {
  std::vector<LoggedDetection> items;
};

struct LogRecord {
  double stamp = 0.0;
  std::variant<Pose3, LaserScan, DetectionFrame> payload;

  Stream stream() const { return static_cast<Stream>(payload.index()); }
};

class MalformedRecord : public std::runtime_error {
 public:
  MalformedRecord(size_t line, const std::string& reason);
  size_t line() const { return line_; }

 private:
  size_t line_;
};

class NonMonotonicStream : public std::runtime_error {
 public:
  NonMonotonicStream(Stream stream, double stamp, size_t line);
  Stream stream() const { return stream_; }
  double stamp() const { return stamp_; }

 private:
  Stream stream_;
  double stamp_;
};

// Parses one line of the run log. Throws MalformedRecord.
LogRecord ParseLogLine(std::string_view line, size_t line_number);

// Single-line JSON encoding of a record (no trailing newline). Depth is
// written as rounded millimeters.
std::string SerializeLogRecord(const LogRecord& record);

// Reads records in file order and checks that stamps increase strictly
// within each stream. Blank lines are skipped.
class LogReader {
 public:
  explicit LogReader(std::istream& in) : in_(in) {}

  // Empty at end of input. Throws MalformedRecord or NonMonotonicStream.
  std::optional<LogRecord> Next();

 private:
  std::istream& in_;
  size_t line_number_ = 0;
  std::optional<double> last_stamp_[3];
};

std::vector<LogRecord> ReadLog(std::istream& in);
std::vector<LogRecord> ReadLogFile(const std::string& path);

// Time-indexed poses with strictly increasing stamps.
class PoseBuffer {
 public:
  // Throws std::invalid_argument if `stamp` does not exceed the newest one.
  void Add(double stamp, const Pose3& pose);

  // Between buffered stamps t0 <= t <= t1 with t1 - t0 <= 2 * max_skew:
  // linear translation and shortest-arc slerp of the rotation. Past the
  // newest stamp by at most max_skew: the newest pose. Otherwise nullopt
  // (pose gap too large).
  std::optional<Pose3> Interpolate(double t, double max_skew) const;

  // Drops poses not needed to answer queries at stamps >= t.
  void TrimBefore(double t);

  bool empty() const { return poses_.empty(); }
  size_t size() const { return poses_.size(); }
  double newest_stamp() const { return poses_.back().stamp; }

 private:
  struct Entry {
    double stamp;
    Pose3 pose;
  };
  std::deque<Entry> poses_;
};

}  // namespace semmap

#endif  // SEMMAP_INGESTION_H_
