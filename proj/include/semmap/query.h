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

#ifndef SEMMAP_QUERY_H_
#define SEMMAP_QUERY_H_

#include <string>
#include <string_view>
#include <variant>

#include "semmap/semantic_layer.h"

namespace semmap {

enum class QueryVerb { kList, kNearest, kCount };

// LIST | NEAREST <class> <x> <y> | COUNT <class>
struct QueryRequest {
  QueryVerb verb = QueryVerb::kList;
  std::string class_label;
  double x = 0.0;
  double y = 0.0;
};

struct QueryError {
  std::string message;
};

std::variant<QueryRequest, QueryError> ParseQuery(std::string_view line);

// Closest object of the class, ties to the lower id; nullptr if none.
const MapObject* FindNearest(const ObjectMapSnapshot& snapshot,
                             const std::string& class_label, double x,
                             double y);

// Single-line JSON response without the trailing newline: an array of
// objects for LIST, an object or null for NEAREST, an integer for COUNT,
// {"error": ...} otherwise.
std::string AnswerQuery(const QueryRequest& request,
                        const ObjectMapSnapshot& snapshot);
std::string HandleQueryLine(std::string_view line,
                            const ObjectMapSnapshot& snapshot);

}  // namespace semmap

#endif  // SEMMAP_QUERY_H_
