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

#include "dacnet/diseases.hpp"

#include <algorithm>

#include "dacnet/errors.hpp"

namespace dacnet {

DiseaseLabel DiseaseLabel::from_index(std::size_t index) {
  if (index >= kNumDiseases) {
    throw Error("disease index out of range: " + std::to_string(index));
  }
  return DiseaseLabel(index);
}

std::optional<DiseaseLabel> DiseaseLabel::from_name(std::string_view name) {
  const auto it = std::find(kDiseaseNames.begin(), kDiseaseNames.end(), name);
  if (it == kDiseaseNames.end()) return std::nullopt;
  return DiseaseLabel(static_cast<std::size_t>(it - kDiseaseNames.begin()));
}

DiseaseLabel DiseaseLabel::parse(std::string_view name) {
  if (auto d = from_name(name)) return *d;
  std::string underscored(name);
  std::replace(underscored.begin(), underscored.end(), ' ', '_');
  if (auto d = from_name(underscored)) return *d;
  throw Error("unknown disease name '" + std::string(name) + "'");
}

std::vector<DiseaseLabel> LabelVector::present() const {
  std::vector<DiseaseLabel> out;
  for (std::size_t i = 0; i < kNumDiseases; ++i) {
    if (bits_.test(i)) out.push_back(DiseaseLabel::from_index(i));
  }
  return out;
}

std::string LabelVector::combination_key() const {
  if (bits_.none()) return std::string(kNoFinding);
  std::string key;
  for (std::size_t i = 0; i < kNumDiseases; ++i) {
    if (!bits_.test(i)) continue;
    if (!key.empty()) key += '|';
    key += kDiseaseNames[i];
  }
  return key;
}

std::string display_name(DiseaseLabel d) {
  std::string s(d.name());
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

}  // namespace dacnet
