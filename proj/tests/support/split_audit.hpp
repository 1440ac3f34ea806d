// Copyright 2026 The DACNet Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>

#include "dacnet/dataset.hpp"

namespace dacnet::testing {

// Independent recount of a manifest: nothing here reuses the split code.
struct SplitAudit {
  bool complete = true;           // every record has a split
  bool patient_disjoint = true;   // each patient's images share one split
  double max_ratio_gap = 0.0;     // |image fraction - target|, worst split
  double max_prevalence_gap = 0.0;  // |split positive rate - global rate|, worst (split, disease)
  std::array<std::size_t, 3> images{};
};

inline SplitAudit audit_split(std::span<const ImageRecord> records, const SplitManifest& m,
                              const SplitRatios& ratios) {
  SplitAudit a;
  std::map<std::string, std::set<Split>> per_patient;
  std::array<std::array<std::size_t, kNumDiseases>, 3> positives{};
  std::array<std::size_t, kNumDiseases> global{};
  for (const auto& r : records) {
    const auto it = m.split_of.find(r.image_id);
    if (it == m.split_of.end()) {
      a.complete = false;
      continue;
    }
    const auto s = static_cast<std::size_t>(it->second);
    per_patient[r.patient_id].insert(it->second);
    ++a.images[s];
    for (std::size_t k = 0; k < kNumDiseases; ++k) {
      if (r.labels[k]) {
        ++positives[s][k];
        ++global[k];
      }
    }
  }
  for (const auto& [p, splits] : per_patient) {
    if (splits.size() != 1) a.patient_disjoint = false;
  }
  const double n = static_cast<double>(records.size());
  const std::array<double, 3> target{ratios.train, ratios.val, ratios.test};
  for (std::size_t s = 0; s < 3; ++s) {
    a.max_ratio_gap = std::max(a.max_ratio_gap, std::abs(static_cast<double>(a.images[s]) / n - target[s]));
    if (a.images[s] == 0) continue;
    for (std::size_t k = 0; k < kNumDiseases; ++k) {
      const double split_rate = static_cast<double>(positives[s][k]) / static_cast<double>(a.images[s]);
      const double global_rate = static_cast<double>(global[k]) / n;
      a.max_prevalence_gap = std::max(a.max_prevalence_gap, std::abs(split_rate - global_rate));
    }
  }
  return a;
}

}  // namespace dacnet::testing
