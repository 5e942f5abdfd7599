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

#include "semmap/snapshot_io.h"

#include <stdexcept>

namespace semmap {

using nlohmann::json;

json ObjectToJson(const MapObject& object) {
  return json{{"id", object.id},         {"class", object.class_label},
              {"x", object.pose.x},      {"y", object.pose.y},
              {"yaw", object.pose.yaw},  {"hits", object.hit_count},
              {"mean_score", object.mean_score}};
}

json SnapshotToJson(const ObjectMapSnapshot& snapshot) {
  json objects = json::array();
  for (const MapObject& object : snapshot.objects) {
    objects.push_back(ObjectToJson(object));
  }
  return json{{"version", kFormatVersion},
              {"t", snapshot.stamp},
              {"objects", std::move(objects)}};
}

ObjectMapSnapshot SnapshotFromJson(const json& document) {
  try {
    ObjectMapSnapshot snapshot;
    snapshot.stamp = document.at("t").get<double>();
    std::vector<MapObject> objects;
    for (const json& item : document.at("objects")) {
      MapObject o;
      o.id = item.at("id").get<uint64_t>();
      o.class_label = item.at("class").get<std::string>();
      o.pose = Pose2(item.at("x").get<double>(), item.at("y").get<double>(),
                     item.at("yaw").get<double>());
      o.hit_count = item.at("hits").get<int64_t>();
      o.mean_score = item.at("mean_score").get<double>();
      o.score_sum = o.mean_score * static_cast<double>(o.hit_count);
      objects.push_back(std::move(o));
    }
    snapshot.objects = ObjectList(std::move(objects));
    return snapshot;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("snapshot document: ") + e.what());
  }
}

json EventToJson(const AssociationEvent& event) {
  json out{{"t", event.stamp},
           {"class", event.class_label},
           {"kind", ToString(event.kind)}};
  if (event.kind == EventKind::kDropped) out["reason"] = ToString(event.reason);
  if (event.kind == EventKind::kMatchedLongTerm ||
      event.kind == EventKind::kPromoted) {
    out["object"] = event.object_id;
  }
  return out;
}

std::string EventsToJsonLines(std::span<const AssociationEvent> events) {
  std::string out;
  for (const AssociationEvent& event : events) {
    out += EventToJson(event).dump();
    out += '\n';
  }
  return out;
}

}  // namespace semmap
