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

#include <array>
#include <bitset>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dacnet {

inline constexpr std::size_t kNumDiseases = 14;

// Canonical ordering: alphabetical, spelled as in the public metadata file.
inline constexpr std::array<std::string_view, kNumDiseases> kDiseaseNames = {
    "Atelectasis", "Cardiomegaly", "Consolidation", "Edema",
    "Effusion",    "Emphysema",    "Fibrosis",      "Hernia",
    "Infiltration", "Mass",        "Nodule",        "Pleural_Thickening",
    "Pneumonia",   "Pneumothorax"};

inline constexpr std::string_view kNoFinding = "No Finding";

// Strongly typed index into kDiseaseNames.
class DiseaseLabel {
 public:
  constexpr DiseaseLabel() = default;

  // Throws dacnet::Error when index >= kNumDiseases.
  static DiseaseLabel from_index(std::size_t index);
  // Exact (case-sensitive) match against kDiseaseNames.
  static std::optional<DiseaseLabel> from_name(std::string_view name);
  // Accepts the canonical spelling plus the display form with a space
  // instead of an underscore ("Pleural Thickening"). Throws on failure.
  static DiseaseLabel parse(std::string_view name);

  constexpr std::size_t index() const { return index_; }
  constexpr std::string_view name() const { return kDiseaseNames[index_]; }

  friend constexpr bool operator==(DiseaseLabel, DiseaseLabel) = default;
  friend constexpr auto operator<=>(DiseaseLabel, DiseaseLabel) = default;

 private:
  explicit constexpr DiseaseLabel(std::size_t index) : index_(index) {}
  std::size_t index_ = 0;
};

// Multi-hot indicator over the 14 diseases. "No Finding" is all zeros.
class LabelVector {
 public:
  LabelVector() = default;

  void set(DiseaseLabel d, bool value = true) { bits_.set(d.index(), value); }
  bool test(DiseaseLabel d) const { return bits_.test(d.index()); }
  bool operator[](std::size_t i) const { return bits_.test(i); }

  bool none() const { return bits_.none(); }
  std::size_t count() const { return bits_.count(); }
  unsigned long to_ulong() const { return bits_.to_ulong(); }

  std::vector<DiseaseLabel> present() const;
  // Pipe-joined names in canonical order, or "No Finding".
  std::string combination_key() const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::bitset<kNumDiseases> bits_;
};

// Display form used in reports ("Pleural Thickening").
std::string display_name(DiseaseLabel d);

}  // namespace dacnet
