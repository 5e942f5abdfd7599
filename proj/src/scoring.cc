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

#include <algorithm>
#include <tuple>

#include "semmap/simulator.h"

namespace semmap {

RunMetrics ScoreRun(const ObjectMapSnapshot& snapshot, const GroundTruth& truth,
                    double match_radius) {
  struct Pair {
    double distance;
    size_t object;
    size_t truth;
  };
  const ObjectList& objects = snapshot.objects;
  auto distance = [&](size_t i, size_t j) {
    const MapObject& o = objects[i];
    return (Eigen::Vector2d(o.pose.x, o.pose.y) - truth.objects[j].position)
        .norm();
  };

  std::vector<Pair> pairs;
  for (size_t i = 0; i < objects.size(); ++i) {
    for (size_t j = 0; j < truth.objects.size(); ++j) {
      if (objects[i].class_label != truth.objects[j].class_label) continue;
      const double d = distance(i, j);
      if (d <= match_radius) pairs.push_back({d, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
    return std::tie(a.distance, objects[a.object].id, a.truth) <
           std::tie(b.distance, objects[b.object].id, b.truth);
  });

  RunMetrics metrics;
  std::vector<bool> object_matched(objects.size(), false);
  std::vector<bool> truth_matched(truth.objects.size(), false);
  double error_sum = 0.0;
  for (const Pair& p : pairs) {
    if (object_matched[p.object] || truth_matched[p.truth]) continue;
    object_matched[p.object] = true;
    truth_matched[p.truth] = true;
    ++metrics.true_positives;
    error_sum += p.distance;
  }
  for (size_t i = 0; i < objects.size(); ++i) {
    if (object_matched[i]) continue;
    const bool near_truth = std::any_of(pairs.begin(), pairs.end(),
                                        [i](const Pair& p) { return p.object == i; });
    ++(near_truth ? metrics.duplicates : metrics.false_objects);
  }
  if (metrics.true_positives > 0) {
    metrics.mean_position_error = error_sum / metrics.true_positives;
  }
  return metrics;
}

nlohmann::json MetricsToJson(const RunMetrics& metrics) {
  nlohmann::json out{{"version", 1},
                     {"true_positives", metrics.true_positives},
                     {"duplicates", metrics.duplicates},
                     {"false_objects", metrics.false_objects}};
  out["mean_position_error"] =
      metrics.mean_position_error ? nlohmann::json(*metrics.mean_position_error)
                                  : nlohmann::json(nullptr);
  return out;
}

}  // namespace semmap
