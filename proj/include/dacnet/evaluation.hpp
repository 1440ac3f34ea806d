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

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dacnet/dataset.hpp"
#include "dacnet/diseases.hpp"
#include "dacnet/losses.hpp"
#include "dacnet/metrics.hpp"

namespace dacnet {

using ScoreArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic>;
using TargetArray = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Row-aligned model outputs and ground truth for one split.
struct PredictionSet {
  std::vector<std::string> image_ids;
  ScoreArray scores;   // N x 14 probabilities
  TargetArray targets; // N x 14 in {0, 1}
  std::optional<Split> split;
  // Raw logits when produced by inference in this process; used for the loss
  // so saturated probabilities do not lose precision.
  std::optional<ScoreArray> logits;

  Eigen::Index size() const { return scores.rows(); }
  void validate() const;
};

enum class ThresholdProvenance { kValidation, kTest, kTrain, kGlobal, kUnknown };

std::string_view to_string(ThresholdProvenance p);
ThresholdProvenance threshold_provenance_from_string(std::string_view s);

struct ThresholdSet {
  std::array<double, kNumDiseases> t{};
  ThresholdProvenance provenance = ThresholdProvenance::kUnknown;

  static ThresholdSet global(double value);
  double operator[](DiseaseLabel d) const { return t[d.index()]; }

  friend bool operator==(const ThresholdSet&, const ThresholdSet&) = default;
};

// i / steps for i = 0..steps; 101 points for the default step of 0.01.
std::vector<double> make_threshold_grid(int steps = 100);

// Index of the grid value maximizing F1 under the >= rule; ties go to the
// smallest threshold; if every point gives F1 = 0 the largest grid value.
template <typename DS, typename DT>
std::size_t best_grid_index(const Eigen::DenseBase<DS>& scores,
                            const Eigen::DenseBase<DT>& targets,
                            std::span<const double> grid);

// Per-disease thresholds fitted on one prediction set. The provenance tag
// follows the predictions' split.
ThresholdSet tune_thresholds(const PredictionSet& predictions, std::span<const double> grid);

struct DiseaseMetrics {
  std::optional<double> auc;
  double f1 = 0.0;
  double threshold = 0.5;
  std::size_t positives = 0;
};

struct EvalReport {
  std::string model_name;
  std::optional<Split> split;
  std::vector<std::string> diseases;  // canonical ordering
  std::array<DiseaseMetrics, kNumDiseases> per_disease{};
  std::optional<double> macro_auc;  // mean over diseases with defined AUC
  double macro_f1 = 0.0;            // mean over all 14
  double mean_loss = 0.0;
  std::size_t num_images = 0;
  ThresholdProvenance threshold_provenance = ThresholdProvenance::kUnknown;
  std::vector<std::string> warnings;
};

// Refuses thresholds tagged as fitted on the test split (LeakageError).
EvalReport evaluate(const PredictionSet& predictions, const ThresholdSet& thresholds,
                    const LossSpec& loss, std::string model_name = {});

// Predictions table: "image_id, 14 scores, 14 targets" with a header.
void write_predictions(const PredictionSet& p, std::ostream& out);
void write_predictions(const PredictionSet& p, const std::filesystem::path& path);
PredictionSet read_predictions(std::istream& in, std::string_view source = "<stream>");
PredictionSet read_predictions(const std::filesystem::path& path);

void write_thresholds(const ThresholdSet& t, const std::filesystem::path& path,
                      std::span<const double> grid = {});
ThresholdSet read_thresholds(const std::filesystem::path& path);
// "0.5"-style literal gives a global threshold; anything else is a file.
ThresholdSet thresholds_from_argument(const std::string& arg);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
// Per-disease table plus the loss / macro-AUC / macro-F1 summary rows.
std::string report_to_text(const EvalReport& report);

struct BaselineColumn {
  std::string name;
  std::array<std::optional<double>, kNumDiseases> auc{};
};

// CSV "disease,auc" with '#' comment lines.
BaselineColumn read_baseline(const std::filesystem::path& path, std::string name);
BaselineColumn read_baseline(std::istream& in, std::string name);

struct ComparisonTable {
  std::vector<std::string> columns;
  std::vector<std::string> row_names;  // display disease names
  std::vector<std::vector<std::optional<double>>> values;
  std::vector<std::vector<bool>> is_max;  // all false for a single column
};

// Per-disease AUC comparison; every column holding the row maximum is marked
// (ties included) once there are at least two columns.
ComparisonTable render_comparison(std::span<const EvalReport> reports,
                                  const std::optional<BaselineColumn>& baseline);
std::string comparison_to_text(const ComparisonTable& table);
std::string comparison_to_csv(const ComparisonTable& table);

// ---------------------------------------------------------------------------

template <typename DS, typename DT>
std::size_t best_grid_index(const Eigen::DenseBase<DS>& scores,
                            const Eigen::DenseBase<DT>& targets,
                            std::span<const double> grid) {
  if (scores.size() != targets.size()) throw Error("tune_thresholds: length mismatch");
  std::vector<double> pos;
  std::vector<double> neg;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    (targets(i) != 0 ? pos : neg).push_back(static_cast<double>(scores(i)));
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto at_least = [](const std::vector<double>& v, double t) {
    return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), t));
  };
  std::size_t best = grid.size() - 1;
  double best_f1 = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double tp = at_least(pos, grid[g]);
    const double fp = at_least(neg, grid[g]);
    const double fn = static_cast<double>(pos.size()) - tp;
    const double f1 = f1_from_counts(tp, fp, fn);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = g;
    }
  }
  return best;
}

}  // namespace dacnet
