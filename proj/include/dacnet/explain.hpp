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

#include "dacnet/diseases.hpp"
#include "dacnet/errors.hpp"
#include "dacnet/image.hpp"

namespace dacnet {

// Fixed rendering constants; golden overlays depend on them.
inline constexpr double kOverlayAlpha = 0.4;

struct HeatMap {
  GrayImaged values;     // h x w, min-max normalized
  DiseaseLabel target;
  GrayImaged upsampled;  // 224 x 224
};

// Min-max normalization to [0, 1]; a constant map becomes all zeros.
template <typename Derived>
GrayImage<typename Derived::Scalar> normalize_min_max(const Eigen::DenseBase<Derived>& raw) {
  using Scalar = typename Derived::Scalar;
  GrayImage<Scalar> out = raw.derived().array();
  const Scalar lo = out.minCoeff();
  const Scalar hi = out.maxCoeff();
  if (!(hi > lo)) return GrayImage<Scalar>::Zero(out.rows(), out.cols());
  return (out - lo) / (hi - lo);
}

// Grad-CAM from captured activations A and gradients dY/dA, both K x (h*w)
// with each row a row-major h x w plane:
//   w_k = mean over (i, j) of dY/dA_k(i, j);  map = ReLU(sum_k w_k A_k),
// then min-max normalized.
template <typename DA, typename DG>
GrayImage<typename DA::Scalar> grad_cam_map(const Eigen::DenseBase<DA>& activations,
                                            const Eigen::DenseBase<DG>& gradients,
                                            Eigen::Index height, Eigen::Index width) {
  using Scalar = typename DA::Scalar;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  if (activations.rows() != gradients.rows() || activations.cols() != gradients.cols()) {
    throw Error("grad_cam: activation and gradient shapes differ");
  }
  if (activations.cols() != height * width || activations.rows() == 0) {
    throw Error("grad_cam: activation planes do not match the stated spatial size");
  }
  const Row weights = gradients.derived().matrix().rowwise().mean().transpose();
  const Row raw = (weights * activations.derived().matrix()).cwiseMax(Scalar(0));
  const GrayImage<Scalar> plane =
      Eigen::Map<const GrayImage<Scalar>>(raw.data(), height, width);
  return normalize_min_max(plane);
}

// Normalized map plus its bilinear upsampling to the model input size.
template <typename DA, typename DG>
HeatMap make_heatmap(const Eigen::DenseBase<DA>& activations, const Eigen::DenseBase<DG>& gradients,
                     Eigen::Index height, Eigen::Index width, DiseaseLabel target) {
  HeatMap h;
  h.values = grad_cam_map(activations.derived().template cast<double>(),
                          gradients.derived().template cast<double>(), height, width);
  h.target = target;
  h.upsampled = resize(h.values, kInputSize, kInputSize);
  return h;
}

// Jet colormap, v in [0, 1] -> RGB in [0, 1].
std::array<double, 3> jet(double v);

// Alpha-blends the colormapped heat over the grayscale image with per-pixel
// weight kOverlayAlpha * heat, so zero heat leaves the image untouched.
RgbImage overlay(const GrayImaged& heat, const GrayImagef& image, double alpha = kOverlayAlpha);

}  // namespace dacnet
