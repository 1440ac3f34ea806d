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
#include <cmath>
#include <string>
#include <string_view>
#include <utility>

#include "dacnet/errors.hpp"

namespace dacnet {

struct FocalParams {
  double gamma = 2.0;
  double alpha = 1.0;

  void validate() const {
    if (!(gamma >= 0.0)) throw Error("focal loss gamma must be >= 0");
    if (!(alpha > 0.0)) throw Error("focal loss alpha must be > 0");
  }
  friend bool operator==(const FocalParams&, const FocalParams&) = default;
};

enum class LossKind { kBce, kFocal };

struct LossSpec {
  LossKind kind = LossKind::kBce;
  FocalParams focal;

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

std::string to_string(const LossSpec& spec);

template <typename Derived>
using DynamicArrayOf =
    Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  using std::exp;
  using std::log1p;
  return x >= Scalar(0) ? -log1p(exp(-x)) : x - log1p(exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

// Inverse sigmoid with probabilities clamped away from {0, 1}.
template <typename Scalar>
Scalar probability_to_logit(Scalar p, Scalar eps = Scalar(1e-7)) {
  using std::log;
  using std::log1p;
  p = std::min(std::max(p, eps), Scalar(1) - eps);
  return log(p) - log1p(-p);
}

namespace detail {

template <typename DL, typename DT>
void check_loss_inputs(const Eigen::DenseBase<DL>& logits, const Eigen::DenseBase<DT>& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw Error("loss: logits are " + std::to_string(logits.rows()) + "x" +
                std::to_string(logits.cols()) + " but targets are " +
                std::to_string(targets.rows()) + "x" + std::to_string(targets.cols()));
  }
  if (logits.size() == 0) throw Error("loss: empty batch");
  for (Eigen::Index j = 0; j < targets.cols(); ++j) {
    for (Eigen::Index i = 0; i < targets.rows(); ++i) {
      const auto y = targets(i, j);
      if (y != 0 && y != 1) throw Error("loss: targets must be binary");
    }
  }
}

// Signed logit z with p_t = sigmoid(z): z = x for y = 1, z = -x for y = 0.
template <typename Scalar, typename T>
Scalar signed_logit(Scalar x, T y) {
  return y != 0 ? x : -x;
}

}  // namespace detail

// Per-element -log p_t, where p_t is the probability assigned to the true
// label. Computed through log-sigmoid; logits are never exponentiated raw.
template <typename DL, typename DT>
DynamicArrayOf<DL> bce_loss_elementwise(const Eigen::DenseBase<DL>& logits,
                                        const Eigen::DenseBase<DT>& targets) {
  using Scalar = typename DL::Scalar;
  detail::check_loss_inputs(logits, targets);
  DynamicArrayOf<DL> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      out(i, j) = -log_sigmoid<Scalar>(detail::signed_logit<Scalar>(logits(i, j), targets(i, j)));
    }
  }
  return out;
}

// Mean binary cross-entropy over all N x 14 elements.
template <typename DL, typename DT>
typename DL::Scalar bce_loss(const Eigen::DenseBase<DL>& logits,
                             const Eigen::DenseBase<DT>& targets) {
  return bce_loss_elementwise(logits, targets).mean();
}

// d(mean BCE)/d(logit) = (sigmoid(x) - y) / count.
template <typename DL, typename DT>
DynamicArrayOf<DL> bce_loss_grad(const Eigen::DenseBase<DL>& logits,
                                 const Eigen::DenseBase<DT>& targets) {
  using Scalar = typename DL::Scalar;
  detail::check_loss_inputs(logits, targets);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(logits.size());
  DynamicArrayOf<DL> g(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const Scalar y = targets(i, j) != 0 ? Scalar(1) : Scalar(0);
      g(i, j) = (sigmoid<Scalar>(logits(i, j)) - y) * inv_n;
    }
  }
  return g;
}

// Per-element focal loss -alpha * (1 - p_t)^gamma * log(p_t). Alpha scales
// positive and negative terms alike.
template <typename DL, typename DT>
DynamicArrayOf<DL> focal_loss_elementwise(const Eigen::DenseBase<DL>& logits,
                                          const Eigen::DenseBase<DT>& targets,
                                          const FocalParams& params) {
  using Scalar = typename DL::Scalar;
  using std::exp;
  params.validate();
  detail::check_loss_inputs(logits, targets);
  const auto gamma = static_cast<Scalar>(params.gamma);
  const auto alpha = static_cast<Scalar>(params.alpha);
  DynamicArrayOf<DL> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const Scalar z = detail::signed_logit<Scalar>(logits(i, j), targets(i, j));
      const Scalar log_pt = log_sigmoid<Scalar>(z);
      const Scalar modulating = gamma == Scalar(0) ? Scalar(1) : exp(gamma * log_sigmoid<Scalar>(-z));
      out(i, j) = -alpha * modulating * log_pt;
    }
  }
  return out;
}

template <typename DL, typename DT>
typename DL::Scalar focal_loss(const Eigen::DenseBase<DL>& logits,
                               const Eigen::DenseBase<DT>& targets,
                               const FocalParams& params = {}) {
  return focal_loss_elementwise(logits, targets, params).mean();
}

// With p = sigmoid(z), q = 1 - p:
//   dL/dz = alpha * q^gamma * (gamma * p * log p - q),  dL/dx = sign(y) * dL/dz,
// scaled by 1 / count for the mean reduction.
template <typename DL, typename DT>
DynamicArrayOf<DL> focal_loss_grad(const Eigen::DenseBase<DL>& logits,
                                   const Eigen::DenseBase<DT>& targets,
                                   const FocalParams& params = {}) {
  using Scalar = typename DL::Scalar;
  using std::exp;
  params.validate();
  detail::check_loss_inputs(logits, targets);
  const auto gamma = static_cast<Scalar>(params.gamma);
  const auto alpha = static_cast<Scalar>(params.alpha);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(logits.size());
  DynamicArrayOf<DL> g(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const bool positive = targets(i, j) != 0;
      const Scalar z = positive ? logits(i, j) : -logits(i, j);
      const Scalar log_p = log_sigmoid<Scalar>(z);
      const Scalar log_q = log_sigmoid<Scalar>(-z);
      const Scalar p = exp(log_p);
      const Scalar q = exp(log_q);
      const Scalar q_gamma = gamma == Scalar(0) ? Scalar(1) : exp(gamma * log_q);
      const Scalar dz = alpha * q_gamma * (gamma * p * log_p - q);
      g(i, j) = (positive ? dz : -dz) * inv_n;
    }
  }
  return g;
}

template <typename DL, typename DT>
typename DL::Scalar loss_value(const LossSpec& spec, const Eigen::DenseBase<DL>& logits,
                               const Eigen::DenseBase<DT>& targets) {
  return spec.kind == LossKind::kFocal ? focal_loss(logits, targets, spec.focal)
                                       : bce_loss(logits, targets);
}

template <typename DL, typename DT>
std::pair<typename DL::Scalar, DynamicArrayOf<DL>> loss_value_and_grad(
    const LossSpec& spec, const Eigen::DenseBase<DL>& logits,
    const Eigen::DenseBase<DT>& targets) {
  if (spec.kind == LossKind::kFocal) {
    return {focal_loss(logits, targets, spec.focal),
            focal_loss_grad(logits, targets, spec.focal)};
  }
  return {bce_loss(logits, targets), bce_loss_grad(logits, targets)};
}

}  // namespace dacnet
