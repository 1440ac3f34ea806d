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
#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "dacnet/errors.hpp"

namespace dacnet {

// Area under the ROC curve as the normalized Mann-Whitney statistic:
// (concordant + 0.5 * tied) / (P * N) over positive/negative pairs, computed
// from tie-averaged ranks in O(n log n). nullopt when a class is absent.
template <typename DS, typename DT>
std::optional<double> auc_roc(const Eigen::DenseBase<DS>& scores,
                              const Eigen::DenseBase<DT>& targets) {
  if (scores.size() != targets.size()) throw Error("auc_roc: length mismatch");
  const Eigen::Index n = scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores(a) < scores(b);
  });
  double positives = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && scores(order[j]) == scores(order[i])) ++j;
    // Ranks i+1 .. j share their average.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (targets(order[k]) != 0) {
        positives += 1.0;
        rank_sum += avg_rank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) return std::nullopt;
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

struct ConfusionCounts {
  double tp = 0;
  double fp = 0;
  double fn = 0;
  double tn = 0;
};

// Decision rule: predict positive iff score >= t.
template <typename DS, typename DT>
ConfusionCounts confusion_at_threshold(const Eigen::DenseBase<DS>& scores,
                                       const Eigen::DenseBase<DT>& targets, double t) {
  if (scores.size() != targets.size()) throw Error("f1: length mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw Error("threshold must lie in [0, 1]");
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool predicted = static_cast<double>(scores(i)) >= t;
    const bool actual = targets(i) != 0;
    if (predicted && actual) c.tp += 1;
    else if (predicted) c.fp += 1;
    else if (actual) c.fn += 1;
    else c.tn += 1;
  }
  return c;
}

inline double f1_from_counts(double tp, double fp, double fn) {
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

// F1 = 2TP / (2TP + FP + FN); 0 when the denominator vanishes.
template <typename DS, typename DT>
double f1_at_threshold(const Eigen::DenseBase<DS>& scores, const Eigen::DenseBase<DT>& targets,
                       double t) {
  const auto c = confusion_at_threshold(scores, targets, t);
  return f1_from_counts(c.tp, c.fp, c.fn);
}

}  // namespace dacnet
