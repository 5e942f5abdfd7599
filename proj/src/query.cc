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

#include "semmap/query.h"

#include <charconv>
#include <cmath>
#include <vector>

#include "semmap/snapshot_io.h"

namespace semmap {
namespace {

std::vector<std::string_view> SplitWords(std::string_view line) {
  std::vector<std::string_view> words;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) words.push_back(line.substr(start, i - start));
  }
  return words;
}

bool ParseNumber(std::string_view text, double& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

std::variant<QueryRequest, QueryError> ParseQuery(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
    line.remove_suffix(1);
  }
  const std::vector<std::string_view> words = SplitWords(line);
  if (words.empty()) return QueryError{"unknown verb"};
  const std::string_view verb = words[0];
  QueryRequest request;
  if (verb == "LIST") {
    if (words.size() != 1) return QueryError{"bad arguments"};
    request.verb = QueryVerb::kList;
  } else if (verb == "NEAREST") {
    if (words.size() != 4) return QueryError{"bad arguments"};
    request.verb = QueryVerb::kNearest;
    request.class_label = std::string(words[1]);
    if (!ParseNumber(words[2], request.x) || !ParseNumber(words[3], request.y)) {
      return QueryError{"bad arguments"};
    }
  } else if (verb == "COUNT") {
    if (words.size() != 2) return QueryError{"bad arguments"};
    request.verb = QueryVerb::kCount;
    request.class_label = std::string(words[1]);
  } else {
    return QueryError{"unknown verb"};
  }
  return request;
}

const MapObject* FindNearest(const ObjectMapSnapshot& snapshot,
                             const std::string& class_label, double x,
                             double y) {
  const MapObject* best = nullptr;
  double best_d2 = 0.0;
  for (const MapObject& o : snapshot.objects) {
    if (o.class_label != class_label) continue;
    const double dx = o.pose.x - x;
    const double dy = o.pose.y - y;
    const double d2 = dx * dx + dy * dy;
    if (best == nullptr || d2 < best_d2 || (d2 == best_d2 && o.id < best->id)) {
      best = &o;
      best_d2 = d2;
    }
  }
  return best;
}

std::string AnswerQuery(const QueryRequest& request,
                        const ObjectMapSnapshot& snapshot) {
  switch (request.verb) {
    case QueryVerb::kList: {
      nlohmann::json out = nlohmann::json::array();
      for (const MapObject& o : snapshot.objects) out.push_back(ObjectToJson(o));
      return out.dump();
    }
    case QueryVerb::kNearest: {
      const MapObject* o =
          FindNearest(snapshot, request.class_label, request.x, request.y);
      return o == nullptr ? "null" : ObjectToJson(*o).dump();
    }
    case QueryVerb::kCount: {
      int64_t count = 0;
      for (const MapObject& o : snapshot.objects) {
        count += o.class_label == request.class_label ? 1 : 0;
      }
      return std::to_string(count);
    }
  }
  return R"({"error":"unknown verb"})";
}

std::string HandleQueryLine(std::string_view line,
                            const ObjectMapSnapshot& snapshot) {
  const auto parsed = ParseQuery(line);
  if (const auto* error = std::get_if<QueryError>(&parsed)) {
    return nlohmann::json{{"error", error->message}}.dump();
  }
  return AnswerQuery(std::get<QueryRequest>(parsed), snapshot);
}

}  // namespace semmap
