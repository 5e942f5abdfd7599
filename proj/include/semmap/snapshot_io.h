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

#ifndef SEMMAP_SNAPSHOT_IO_H_
#define SEMMAP_SNAPSHOT_IO_H_

#include <span>
#include <string>

#include "json.hpp"
#include "semmap/semantic_layer.h"

namespace semmap {

inline constexpr int kFormatVersion = 1;

// {"id", "class", "x", "y", "yaw", "hits", "mean_score"}
nlohmann::json ObjectToJson(const MapObject& object);

// {"version", "t", "objects": [...]}
nlohmann::json SnapshotToJson(const ObjectMapSnapshot& snapshot);

// Throws std::runtime_error on schema violations. Fields absent from the
// document (score_sum, first/last seen) are reconstructed or left zero.
ObjectMapSnapshot SnapshotFromJson(const nlohmann::json& document);

nlohmann::json EventToJson(const AssociationEvent& event);

// One line per event, each terminated by '\n'.
std::string EventsToJsonLines(std::span<const AssociationEvent> events);

}  // namespace semmap

#endif  // SEMMAP_SNAPSHOT_IO_H_
