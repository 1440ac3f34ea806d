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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dacnet/diseases.hpp"

namespace dacnet {

enum class Gender { kMale, kFemale };

struct ImageRecord {
  std::string image_id;
  std::string patient_id;
  LabelVector labels;
  // Demographics are kept for provenance only; no model consumes them.
  std::optional<int> age;
  std::optional<Gender> gender;
};

struct CatalogWarnings {
  std::size_t rejected_ages = 0;
  std::size_t rejected_genders = 0;
};

struct Catalog {
  std::vector<ImageRecord> records;
  CatalogWarnings warnings;
};

// Reads the NIH ChestX-ray14 metadata table (comma separated, header row).
// Required columns: "Image Index", "Finding Labels", "Patient ID". Optional:
// "Patient Age", "Patient Gender". Unknown disease tokens, missing columns,
// duplicate image ids and empty patient ids raise ParseError naming the row.
Catalog parse_catalog(std::istream& in, std::string_view source = "<stream>");
Catalog parse_catalog(const std::filesystem::path& path);

struct CombinationStat {
  std::size_t count = 0;
  double fraction = 0.0;
};

// Keys are LabelVector::combination_key(). Throws on empty input.
std::map<std::string, CombinationStat> label_combination_stats(
    std::span<const ImageRecord> records);

// Same statistics ordered by count (descending), ties by key.
std::vector<std::pair<std::string, CombinationStat>> ranked_combinations(
    const std::map<std::string, CombinationStat>& stats);

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split s);
std::optional<Split> split_from_string(std::string_view s);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  double operator[](Split s) const;
  // Throws when a ratio is non-positive or the sum differs from 1 by > 1e-9.
  void validate() const;

  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

struct SplitManifest {
  std::map<std::string, Split> split_of;
  std::uint64_t seed = 0;
  SplitRatios ratios;

  std::optional<Split> find(std::string_view image_id) const;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

// Patient-wise split stratified by each patient's rarest present disease
// (global image prevalence; "No Finding" bucket when none). Buckets are
// visited rarest first and each patient joins the split where it least
// worsens the per-disease positive rates and image shares.
SplitManifest make_patient_split(std::span<const ImageRecord> records,
                                 const SplitRatios& ratios,
                                 std::uint64_t seed);

void write_manifest(const SplitManifest& manifest, std::ostream& out);
void write_manifest(const SplitManifest& manifest,
                    const std::filesystem::path& path);
SplitManifest read_manifest(std::istream& in,
                            std::string_view source = "<stream>");
SplitManifest read_manifest(const std::filesystem::path& path);

// Records of one split, in catalog order. Records absent from the manifest
// are skipped.
std::vector<ImageRecord> select_split(std::span<const ImageRecord> records,
                                      const SplitManifest& manifest,
                                      Split split);

// Throws LeakageError when a patient has images in more than one split.
void assert_patient_disjoint(std::span<const ImageRecord> records,
                             const SplitManifest& manifest);

}  // namespace dacnet
