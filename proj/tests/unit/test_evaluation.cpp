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

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dacnet/errors.hpp"
#include "dacnet/evaluation.hpp"
#include "dacnet/metrics.hpp"
#include "dacnet/random.hpp"
#include "../support/synthetic.hpp"

using namespace dacnet;

namespace {

using Vec = Eigen::ArrayXd;
using Bits = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Bits bits(std::initializer_list<int> v) {
  Bits out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (int x : v) out(i++) = static_cast<std::uint8_t>(x);
  return out;
}

// O(P*N) pair counting.
std::optional<double> brute_auc(const Vec& s, const Bits& y) {
  double good = 0.0;
  double pairs = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!y(i)) continue;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (y(j)) continue;
      pairs += 1.0;
      if (s(i) > s(j)) good += 1.0;
      else if (s(i) == s(j)) good += 0.5;
    }
  }
  if (pairs == 0.0) return std::nullopt;
  return good / pairs;
}

// Exhaustive sweep: F1 at every grid point from raw counts.
std::size_t sweep_best(const Vec& s, const Bits& y, const std::vector<double>& grid) {
  std::size_t best = grid.size() - 1;
  double best_f1 = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const bool pred = s(i) >= grid[g];
      if (pred && y(i)) tp += 1;
      if (pred && !y(i)) fp += 1;
      if (!pred && y(i)) fn += 1;
    }
    const double f1 = (2 * tp + fp + fn) == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = g;
    }
  }
  return best;
}

PredictionSet random_predictions(Rng& rng, Eigen::Index n, std::optional<Split> split) {
  PredictionSet p;
  p.scores.resize(n, kNumDiseases);
  p.targets.resize(n, kNumDiseases);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.image_ids.push_back("img" + std::to_string(i) + ".png");
    for (Eigen::Index k = 0; k < kNumDiseases; ++k) {
      const bool pos = rng.bernoulli(0.25);
      p.targets(i, k) = pos ? 1 : 0;
      p.scores(i, k) = std::clamp(rng.uniform() * 0.7 + (pos ? 0.3 : 0.0), 0.0, 1.0);
    }
  }
  p.split = split;
  return p;
}

}  // namespace

TEST_CASE("auc hand cases") {
  CHECK(*auc_roc(vec({0.9, 0.8, 0.2, 0.1}), bits({1, 1, 0, 0})) == 1.0);
  CHECK(*auc_roc(vec({0.4, 0.4, 0.4, 0.4}), bits({1, 0, 1, 0})) == 0.5);
  CHECK(*auc_roc(vec({0.8, 0.3, 0.5, 0.1}), bits({1, 1, 0, 0})) == 0.75);
  CHECK_FALSE(auc_roc(vec({0.1, 0.2}), bits({0, 0})).has_value());
  CHECK_FALSE(auc_roc(vec({0.1, 0.2}), bits({1, 1})).has_value());
  CHECK_THROWS_AS(auc_roc(vec({0.1, 0.2}), bits({1})), Error);
}

TEST_CASE("auc equals brute-force pair counting with ties") {
  Rng rng(99);
  for (int instance = 0; instance < 100; ++instance) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(199));
    Vec s(n);
    Bits y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      // Coarse quantization injects ties.
      s(i) = std::round(rng.uniform() * 20.0) / 20.0;
      y(i) = rng.bernoulli(0.4) ? 1 : 0;
    }
    const auto fast = auc_roc(s, y);
    const auto slow = brute_auc(s, y);
    REQUIRE(fast.has_value() == slow.has_value());
    if (fast) CHECK(std::abs(*fast - *slow) <= 1e-12);
  }
}

TEST_CASE("auc complement symmetry without ties") {
  Rng rng(5);
  Vec s(60);
  Bits y(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    s(i) = rng.uniform();
    y(i) = i % 3 == 0 ? 1 : 0;
  }
  CHECK(*auc_roc(1.0 - s, y) == doctest::Approx(1.0 - *auc_roc(s, y)).epsilon(1e-12));
}

TEST_CASE("f1 at a threshold") {
  CHECK(f1_at_threshold(vec({0.9, 0.9, 0.1, 0.9}), bits({1, 0, 1, 1}), 0.5) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_at_threshold(vec({0.9, 0.1}), bits({1, 0}), 0.3) == 1.0);
  CHECK(f1_at_threshold(vec({0.1, 0.2}), bits({0, 0}), 0.5) == 0.0);
  CHECK(f1_at_threshold(vec({0.5}), bits({1}), 0.5) == 1.0);  // >= rule
  CHECK_THROWS_AS(f1_at_threshold(vec({0.5}), bits({1}), 1.5), Error);
}

TEST_CASE("adding a correctly classified point never lowers F1") {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    Vec s(20);
    Bits y(20);
    for (Eigen::Index i = 0; i < 20; ++i) {
      s(i) = rng.uniform();
      y(i) = rng.bernoulli(0.5);
    }
    const double before = f1_at_threshold(s, y, 0.5);
    Vec s2(21);
    Bits y2(21);
    s2 << s, (t % 2 ? 0.9 : 0.1);
    y2 << y, static_cast<std::uint8_t>(t % 2);
    CHECK(f1_at_threshold(s2, y2, 0.5) >= before);
  }
}

TEST_CASE("threshold grid and the worked tuning example") {
  const auto grid = make_threshold_grid();
  REQUIRE(grid.size() == 101);
  CHECK(grid[50] == 0.5);
  const auto coarse = make_threshold_grid(20);
  const std::size_t idx = best_grid_index(vec({0.2, 0.6, 0.8}), bits({0, 1, 1}), coarse);
  CHECK(coarse[idx] == doctest::Approx(0.25));
  CHECK(coarse[best_grid_index(vec({0.2, 0.6}), bits({0, 0}), coarse)] == 1.0);
}

TEST_CASE("tuned thresholds reproduce an exhaustive sweep") {
  Rng rng(123);
  const auto grid = make_threshold_grid();
  for (int instance = 0; instance < 50; ++instance) {
    const auto n = static_cast<Eigen::Index>(5 + rng.below(120));
    PredictionSet p = random_predictions(rng, n, Split::kVal);
    // Quantized scores put many of them exactly on grid points.
    p.scores = (p.scores * 100.0).round() / 100.0;
    const ThresholdSet t = tune_thresholds(p, grid);
    CHECK(t.provenance == ThresholdProvenance::kValidation);
    for (Eigen::Index k = 0; k < kNumDiseases; ++k) {
      const Vec s = p.scores.col(k);
      const Bits y = p.targets.col(k);
      CHECK(t.t[static_cast<std::size_t>(k)] == grid[sweep_best(s, y, grid)]);
      CHECK(f1_at_threshold(s, y, t.t[static_cast<std::size_t>(k)]) >= f1_at_threshold(s, y, 0.5));
    }
  }
}

TEST_CASE("perfect predictions score 1 everywhere") {
  Rng rng(4);
  PredictionSet p = random_predictions(rng, 40, Split::kTest);
  p.targets(0, 0) = 1;
  p.targets(1, 0) = 0;
  for (Eigen::Index k = 0; k < kNumDiseases; ++k) {
    p.targets(0, k) = 1;
    p.targets(1, k) = 0;
  }
  p.scores = p.targets.cast<double>();
  const EvalReport r = evaluate(p, ThresholdSet::global(0.3), LossSpec{});
  REQUIRE(r.macro_auc.has_value());
  CHECK(*r.macro_auc == 1.0);
  CHECK(r.macro_f1 == 1.0);
}

TEST_CASE("evaluate: macro values, undefined AUC, leakage guard") {
  Rng rng(77);
  PredictionSet p = random_predictions(rng, 80, Split::kTest);
  p.targets.col(3).setZero();  // Edema: no positives
  const EvalReport r = evaluate(p, ThresholdSet::global(0.5), LossSpec{}, "m");
  CHECK_FALSE(r.per_disease[3].auc.has_value());
  CHECK(r.warnings.size() == 1);
  double auc_sum = 0.0;
  double f1_sum = 0.0;
  int defined = 0;
  for (const auto& d : r.per_disease) {
    if (d.auc) {
      auc_sum += *d.auc;
      ++defined;
    }
    f1_sum += d.f1;
  }
  CHECK(defined == 13);
  CHECK(*r.macro_auc == auc_sum / 13.0);
  CHECK(r.macro_f1 == f1_sum / 14.0);

  ThresholdSet leaked = ThresholdSet::global(0.5);
  leaked.provenance = ThresholdProvenance::kTest;
  CHECK_THROWS_AS(evaluate(p, leaked, LossSpec{}), LeakageError);
}

TEST_CASE("evaluate loss prefers logits and follows the recipe loss") {
  Rng rng(12);
  PredictionSet p = random_predictions(rng, 30, Split::kVal);
  ScoreArray logits(30, kNumDiseases);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = rng.uniform(-4.0, 4.0);
  p.scores = 1.0 / (1.0 + (-logits).exp());
  p.logits = logits;
  const double bce = evaluate(p, ThresholdSet::global(0.5), LossSpec{}).mean_loss;
  const double focal = evaluate(p, ThresholdSet::global(0.5), LossSpec{LossKind::kFocal, {}}).mean_loss;
  CHECK(bce == doctest::Approx(bce_loss(logits, p.targets)).epsilon(1e-12));
  CHECK(focal == doctest::Approx(focal_loss(logits, p.targets)).epsilon(1e-12));
  p.logits.reset();
  CHECK(evaluate(p, ThresholdSet::global(0.5), LossSpec{}).mean_loss == doctest::Approx(bce).epsilon(1e-9));
}

TEST_CASE("predictions, thresholds and reports round-trip through files") {
  testing::TempDir dir;
  Rng rng(31);
  const PredictionSet p = random_predictions(rng, 25, Split::kVal);
  write_predictions(p, dir / "val.csv");
  const PredictionSet back = read_predictions(dir / "val.csv");
  CHECK(back.image_ids == p.image_ids);
  CHECK((back.scores - p.scores).abs().maxCoeff() == 0.0);
  CHECK((back.targets == p.targets).all());
  CHECK(back.split == Split::kVal);

  const auto grid = make_threshold_grid();
  const ThresholdSet t = tune_thresholds(back, grid);
  write_thresholds(t, dir / "t.json", grid);
  CHECK(read_thresholds(dir / "t.json") == t);
  CHECK(thresholds_from_argument("0.35") == ThresholdSet::global(0.35));
  CHECK(thresholds_from_argument((dir / "t.json").string()) == t);

  const EvalReport r = evaluate(back, t, LossSpec{}, "dacnet");
  const EvalReport r2 = report_from_json(report_to_json(r));
  CHECK(r2.model_name == "dacnet");
  CHECK(r2.macro_f1 == r.macro_f1);
  CHECK(*r2.macro_auc == *r.macro_auc);
  CHECK(r2.per_disease[5].threshold == r.per_disease[5].threshold);
  CHECK(report_to_text(r).find("Pleural Thickening") != std::string::npos);
}

TEST_CASE("malformed prediction files are rejected") {
  std::istringstream bad_header("image,score\n");
  CHECK_THROWS_AS(read_predictions(bad_header), ParseError);
  std::ostringstream good;
  Rng rng(1);
  write_predictions(random_predictions(rng, 2, std::nullopt), good);
  std::string text = good.str();
  text += "x.png,0.1\n";
  std::istringstream truncated(text);
  CHECK_THROWS_AS(read_predictions(truncated), ParseError);
}

TEST_CASE("comparison table marks row maxima") {
  Rng rng(2);
  PredictionSet p = random_predictions(rng, 60, Split::kTest);
  EvalReport a = evaluate(p, ThresholdSet::global(0.5), LossSpec{}, "A");
  a.per_disease[kNumDiseases - 1].auc = 0.5;

  const ComparisonTable single = render_comparison(std::span<const EvalReport>(&a, 1), std::nullopt);
  CHECK(single.columns.size() == 1);
  for (const auto& row : single.is_max) CHECK_FALSE(row[0]);

  const std::vector<EvalReport> same{a, a};
  const ComparisonTable twin = render_comparison(same, std::nullopt);
  for (std::size_t r = 0; r < twin.is_max.size(); ++r) {
    if (twin.values[r][0]) CHECK((twin.is_max[r][0] && twin.is_max[r][1]));
  }

  std::istringstream partial("disease,auc\nHernia,0.916\nMass,0.868\n");
  CHECK_THROWS_AS(read_baseline(partial, "CheXNet"), Error);
  std::string full = "# published reference\ndisease,auc\n";
  for (const auto name : kDiseaseNames) full += std::string(name) + ",0.8\n";
  full += "Hernia,0.916\n";
  std::istringstream baseline_csv(full);
  const BaselineColumn baseline = read_baseline(baseline_csv, "CheXNet");
  EvalReport d = a;
  d.model_name = "DACNet";
  d.per_disease[DiseaseLabel::parse("Hernia").index()].auc = 0.997;
  const ComparisonTable table = render_comparison(std::span<const EvalReport>(&d, 1), baseline);
  REQUIRE(table.columns.size() == 2);
  CHECK(table.columns[0] == "CheXNet");
  const std::size_t hernia = DiseaseLabel::parse("Hernia").index();
  CHECK(*table.values[hernia][0] == 0.916);
  CHECK(*table.values[hernia][1] == 0.997);
  CHECK(table.is_max[hernia][1]);
  CHECK_FALSE(table.is_max[hernia][0]);
  CHECK(comparison_to_text(table).find("0.997") != std::string::npos);
  CHECK(comparison_to_csv(table).find("Hernia") != std::string::npos);

  EvalReport wrong = a;
  std::swap(wrong.diseases[0], wrong.diseases[1]);
  const std::vector<EvalReport> mixed{a, wrong};
  CHECK_THROWS_AS(render_comparison(mixed, std::nullopt), Error);
}

TEST_CASE("shipped reference baseline covers every disease") {
  const BaselineColumn col =
      read_baseline(std::filesystem::path(DACNET_SOURCE_DIR) / "data" / "chexnet_published_auc.csv", "CheXNet");
  CHECK(col.auc[DiseaseLabel::parse("Hernia").index()] == 0.916);
  CHECK(col.auc[DiseaseLabel::parse("Infiltration").index()] == 0.735);
}
