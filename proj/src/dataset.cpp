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

#include "dacnet/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dacnet/errors.hpp"
#include "dacnet/random.hpp"
#include "dacnet/text.hpp"

namespace dacnet {
namespace {

std::optional<int> parse_age(std::string_view s) {
  s = trim(s);
  if (!s.empty() && (s.back() == 'Y' || s.back() == 'y')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value < 0) {
    return std::nullopt;
  }
  return value;
}

std::optional<Gender> parse_gender(std::string_view s) {
  s = trim(s);
  if (s == "M") return Gender::kMale;
  if (s == "F") return Gender::kFemale;
  return std::nullopt;
}

}  // namespace

Catalog parse_catalog(std::istream& in, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(std::string(source) + ": empty metadata file");
  }
  strip_cr(line);
  const std::vector<std::string> header = split_csv_line(line);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    return std::nullopt;
  };
  auto required = [&](std::string_view name) {
    if (auto c = column(name)) return *c;
    throw ParseError(std::string(source) + ": missing required column \"" +
                     std::string(name) + "\"");
  };
  const std::size_t image_col = required("Image Index");
  const std::size_t labels_col = required("Finding Labels");
  const std::size_t patient_col = required("Patient ID");
  const auto age_col = column("Patient Age");
  const auto gender_col = column("Patient Gender");

  Catalog catalog;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    auto where = [&] {
      return std::string(source) + ":" + std::to_string(line_no);
    };
    auto cell = [&](std::size_t col) -> std::string_view {
      if (col >= cells.size()) {
        throw ParseError(where() + ": row has " + std::to_string(cells.size()) +
                         " fields, expected at least " +
                         std::to_string(col + 1));
      }
      return trim(cells[col]);
    };

    ImageRecord rec;
    rec.image_id = std::string(cell(image_col));
    rec.patient_id = std::string(cell(patient_col));
    if (rec.image_id.empty()) throw ParseError(where() + ": empty Image Index");
    if (rec.patient_id.empty()) throw ParseError(where() + ": empty Patient ID");
    if (!seen.insert(rec.image_id).second) {
      throw ParseError(where() + ": duplicate image id " + rec.image_id);
    }

    for (std::string_view token : split(cell(labels_col), '|')) {
      token = trim(token);
      if (token == kNoFinding) continue;
      const auto d = DiseaseLabel::from_name(token);
      if (!d) {
        throw ParseError(where() + ": unknown disease token \"" +
                         std::string(token) + "\" in row for " + rec.image_id);
      }
      rec.labels.set(*d);
    }

    if (age_col) {
      rec.age = parse_age(*age_col < cells.size() ? cells[*age_col] : "");
      if (!rec.age) ++catalog.warnings.rejected_ages;
    }
    if (gender_col) {
      rec.gender =
          parse_gender(*gender_col < cells.size() ? cells[*gender_col] : "");
      if (!rec.gender) ++catalog.warnings.rejected_genders;
    }
    catalog.records.push_back(std::move(rec));
  }
  return catalog;
}

Catalog parse_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metadata file " + path.string());
  return parse_catalog(in, path.string());
}

std::map<std::string, CombinationStat> label_combination_stats(
    std::span<const ImageRecord> records) {
  if (records.empty()) {
    throw Error("label_combination_stats: no records");
  }
  std::map<std::string, CombinationStat> stats;
  for (const auto& r : records) ++stats[r.labels.combination_key()].count;
  const double n = static_cast<double>(records.size());
  for (auto& [key, s] : stats) s.fraction = static_cast<double>(s.count) / n;
  return stats;
}

std::vector<std::pair<std::string, CombinationStat>> ranked_combinations(
    const std::map<std::string, CombinationStat>& stats) {
  std::vector<std::pair<std::string, CombinationStat>> out(stats.begin(),
                                                           stats.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second.count > b.second.count;
  });
  return out;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::optional<Split> split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

double SplitRatios::operator[](Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    case Split::kTest: return test;
  }
  return 0.0;
}

void SplitRatios::validate() const {
  if (!(train > 0.0) || !(val > 0.0) || !(test > 0.0)) {
    throw Error("split ratios must be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw Error("split ratios must sum to 1");
  }
}

std::optional<Split> SplitManifest::find(std::string_view image_id) const {
  const auto it = split_of.find(std::string(image_id));
  if (it == split_of.end()) return std::nullopt;
  return it->second;
}

SplitManifest make_patient_split(std::span<const ImageRecord> records,
                                 const SplitRatios& ratios,
                                 std::uint64_t seed) {
  ratios.validate();
  constexpr std::size_t kSplits = 3;
  constexpr std::size_t kNoFindingBucket = kNumDiseases;

  struct Patient {
    std::string id;
    std::vector<std::size_t> images;
    LabelVector labels;  // union over the patient's images
  };
  std::vector<Patient> patients;
  std::unordered_map<std::string, std::size_t> patient_index;
  std::array<std::size_t, kNumDiseases> prevalence{};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto [it, inserted] = patient_index.try_emplace(r.patient_id, patients.size());
    if (inserted) patients.push_back({r.patient_id, {}, {}});
    Patient& p = patients[it->second];
    p.images.push_back(i);
    for (auto d : r.labels.present()) {
      p.labels.set(d);
      ++prevalence[d.index()];
    }
  }
  if (patients.size() < kSplits) {
    throw Error("make_patient_split: need at least 3 patients, got " +
                std::to_string(patients.size()));
  }

  // Patients enter in a canonical order so the result depends only on the
  // record contents and the seed.
  std::sort(patients.begin(), patients.end(),
            [](const Patient& a, const Patient& b) { return a.id < b.id; });

  auto rarest = [&](const LabelVector& labels) {
    std::size_t best = kNoFindingBucket;
    for (auto d : labels.present()) {
      if (best == kNoFindingBucket || prevalence[d.index()] < prevalence[best]) {
        best = d.index();
      }
    }
    return best;
  };
  std::array<std::vector<std::size_t>, kNumDiseases + 1> buckets;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    buckets[rarest(patients[i].labels)].push_back(i);
  }

  std::vector<std::size_t> bucket_order(buckets.size());
  for (std::size_t b = 0; b < buckets.size(); ++b) bucket_order[b] = b;
  std::stable_sort(bucket_order.begin(), bucket_order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const auto pa = a == kNoFindingBucket ? SIZE_MAX : prevalence[a];
                     const auto pb = b == kNoFindingBucket ? SIZE_MAX : prevalence[b];
                     return pa < pb;
                   });

  const std::array<double, kSplits> target = {ratios.train, ratios.val,
                                              ratios.test};
  const double total_images = static_cast<double>(records.size());
  std::array<double, kNumDiseases> rate{};
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    rate[d] = static_cast<double>(prevalence[d]) / total_images;
  }
  std::array<double, kSplits> images{};
  // Positives in each split beyond what the global rate predicts for its size.
  std::array<std::array<double, kNumDiseases>, kSplits> excess{};
  double seen = 0.0;
  Rng rng(seed);

  SplitManifest manifest;
  manifest.seed = seed;
  manifest.ratios = ratios;

  // Greedy: each patient goes where it least increases the squared
  // prevalence and image-share errors, scaled by the split's target size.
  auto cost_of = [&](const std::array<double, kNumDiseases>& pos, double k,
                     std::size_t s) {
    double cost = 0.0;
    for (std::size_t j = 0; j < kSplits; ++j) {
      const double size = target[j] * total_images;
      const double e = images[j] + (j == s ? k : 0.0) - target[j] * (seen + k);
      cost += e * e / (size * size);
    }
    const double size = target[s] * total_images;
    for (std::size_t d = 0; d < kNumDiseases; ++d) {
      const double before = excess[s][d];
      const double after = before + pos[d] - rate[d] * k;
      cost += (after * after - before * before) / (size * size);
    }
    return cost;
  };

  for (std::size_t b : bucket_order) {
    auto& members = buckets[b];
    rng.shuffle(std::span(members));
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t x, std::size_t y) {
                       return patients[x].labels.to_ulong() <
                              patients[y].labels.to_ulong();
                     });
    for (std::size_t idx : members) {
      const Patient& p = patients[idx];
      const double k = static_cast<double>(p.images.size());
      std::array<double, kNumDiseases> pos{};
      for (std::size_t img : p.images) {
        for (auto d : records[img].labels.present()) pos[d.index()] += 1.0;
      }
      std::size_t choice = 0;
      double best = cost_of(pos, k, 0);
      for (std::size_t s = 1; s < kSplits; ++s) {
        const double c = cost_of(pos, k, s);
        if (c < best - 1e-15) {
          best = c;
          choice = s;
        }
      }
      images[choice] += k;
      seen += k;
      for (std::size_t d = 0; d < kNumDiseases; ++d) {
        excess[choice][d] += pos[d] - rate[d] * k;
      }
      for (std::size_t img : p.images) {
        manifest.split_of[records[img].image_id] = static_cast<Split>(choice);
      }
    }
  }
  return manifest;
}

void write_manifest(const SplitManifest& manifest, std::ostream& out) {
  if (manifest.split_of.empty()) throw Error("refusing to write an empty manifest");
  out << "# dacnet-manifest v1 seed=" << manifest.seed
      << " ratios=" << format_double(manifest.ratios.train) << ','
      << format_double(manifest.ratios.val) << ','
      << format_double(manifest.ratios.test) << '\n';
  for (const auto& [id, split] : manifest.split_of) {
    out << id << '\t' << to_string(split) << '\n';
  }
}

void write_manifest(const SplitManifest& manifest,
                    const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_manifest(manifest, buffer);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << buffer.str();
}

SplitManifest read_manifest(std::istream& in, std::string_view source) {
  auto fail = [&](std::size_t line_no, const std::string& what) -> ParseError {
    return ParseError(std::string(source) + ":" + std::to_string(line_no) +
                      ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) throw fail(1, "empty manifest");
  strip_cr(line);
  constexpr std::string_view kMagic = "# dacnet-manifest v1 ";
  if (!line.starts_with(kMagic)) throw fail(1, "missing manifest header");

  SplitManifest m;
  bool have_seed = false;
  bool have_ratios = false;
  for (std::string_view field : split(std::string_view(line).substr(kMagic.size()), ' ')) {
    if (field.empty()) continue;
    if (field.starts_with("seed=")) {
      const auto v = parse_uint64(field.substr(5));
      if (!v) throw fail(1, "bad seed");
      m.seed = *v;
      have_seed = true;
    } else if (field.starts_with("ratios=")) {
      const auto parts = split(field.substr(7), ',');
      if (parts.size() != 3) throw fail(1, "ratios need three values");
      std::array<double, 3> r{};
      for (std::size_t i = 0; i < 3; ++i) {
        const auto v = parse_double(parts[i]);
        if (!v) throw fail(1, "bad ratio value");
        r[i] = *v;
      }
      m.ratios = {r[0], r[1], r[2]};
      have_ratios = true;
    } else {
      throw fail(1, "unknown header field '" + std::string(field) + "'");
    }
  }
  if (!have_seed || !have_ratios) throw fail(1, "header lacks seed or ratios");
  try {
    m.ratios.validate();
  } catch (const Error& e) {
    throw fail(1, e.what());
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw fail(line_no, "expected <image_id>\\t<split>");
    const std::string id = line.substr(0, tab);
    const std::string_view token = std::string_view(line).substr(tab + 1);
    const auto split_value = split_from_string(token);
    if (id.empty()) throw fail(line_no, "empty image id");
    if (!split_value) {
      throw fail(line_no, "unknown split token '" + std::string(token) + "'");
    }
    if (!m.split_of.emplace(id, *split_value).second) {
      throw fail(line_no, "duplicate image id " + id);
    }
  }
  if (m.split_of.empty()) throw fail(line_no, "manifest has no entries");
  return m;
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest " + path.string());
  return read_manifest(in, path.string());
}

std::vector<ImageRecord> select_split(std::span<const ImageRecord> records,
                                      const SplitManifest& manifest,
                                      Split split) {
  std::vector<ImageRecord> out;
  for (const auto& r : records) {
    if (manifest.find(r.image_id) == split) out.push_back(r);
  }
  return out;
}

void assert_patient_disjoint(std::span<const ImageRecord> records,
                             const SplitManifest& manifest) {
  std::unordered_map<std::string, Split> seen;
  for (const auto& r : records) {
    const auto s = manifest.find(r.image_id);
    if (!s) continue;
    auto [it, inserted] = seen.emplace(r.patient_id, *s);
    if (!inserted && it->second != *s) {
      throw LeakageError("patient " + r.patient_id + " appears in both " +
                         std::string(to_string(it->second)) + " and " +
                         std::string(to_string(*s)) + " splits");
    }
  }
}

}  // namespace dacnet
