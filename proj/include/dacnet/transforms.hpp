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
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "dacnet/image.hpp"
#include "dacnet/random.hpp"

namespace dacnet {

enum class ResizePolicy { kFixedResize224, kRandomResizedCrop224 };

std::string_view to_string(ResizePolicy p);
ResizePolicy resize_policy_from_string(std::string_view s);

struct ColorJitter {
  double brightness = 0.1;
  double contrast = 0.1;
  // Saturation and hue have no effect on grayscale radiographs; they are
  // carried for config completeness.
  double saturation = 0.0;
  double hue = 0.0;

  friend bool operator==(const ColorJitter&, const ColorJitter&) = default;
};

// ImageNet statistics by default, matching the pretrained backbones.
struct Normalization {
  std::array<double, 3> mean = {0.485, 0.456, 0.406};
  std::array<double, 3> std = {0.229, 0.224, 0.225};

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct TransformSpec {
  ResizePolicy resize = ResizePolicy::kFixedResize224;
  double hflip_prob = 0.5;
  std::optional<ColorJitter> jitter;
  Normalization normalization;
  std::array<double, 2> crop_scale = {0.7, 1.0};
  std::array<double, 2> crop_ratio = {3.0 / 4.0, 4.0 / 3.0};

  void validate() const;

  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

using Transform = std::function<ImageTensorf(const GrayImagef&)>;

// Replicates the gray channel and applies (x - mean_c) / std_c per channel.
template <typename Derived>
ImageTensor<typename Derived::Scalar> normalize(const Eigen::ArrayBase<Derived>& gray,
                                                const Normalization& n) {
  using Scalar = typename Derived::Scalar;
  ImageTensor<Scalar> out;
  out.height = gray.rows();
  out.width = gray.cols();
  out.data.resize(3, gray.size());
  const GrayImage<Scalar> plane = gray;
  const auto flat = Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>>(plane.data(), plane.size());
  for (Eigen::Index c = 0; c < 3; ++c) {
    out.data.row(c) = (flat - static_cast<Scalar>(n.mean[c])) / static_cast<Scalar>(n.std[c]);
  }
  return out;
}

// Inverse of normalize: per-channel planes back in intensity units.
template <typename Scalar>
typename ImageTensor<Scalar>::Planes denormalize(const ImageTensor<Scalar>& t,
                                                 const Normalization& n) {
  typename ImageTensor<Scalar>::Planes out(3, t.data.cols());
  for (Eigen::Index c = 0; c < 3; ++c) {
    out.row(c) = t.data.row(c) * static_cast<Scalar>(n.std[c]) + static_cast<Scalar>(n.mean[c]);
  }
  return out;
}

struct CropBox {
  Eigen::Index top = 0;
  Eigen::Index left = 0;
  Eigen::Index height = 0;
  Eigen::Index width = 0;
};

// Area/aspect sampling with up to 10 attempts, then a center crop fallback.
CropBox sample_resized_crop(Eigen::Index height, Eigen::Index width,
                            const std::array<double, 2>& scale,
                            const std::array<double, 2>& ratio, Rng& rng);

// Brightness scales intensities; contrast blends toward the image mean.
// Factors are drawn from [1 - m, 1 + m]. Result clamped to [0, 1].
GrayImagef apply_jitter(const GrayImagef& image, const ColorJitter& jitter, Rng& rng);

// Stochastic training pipeline. Each call advances the seeded stream; two
// transforms built with the same seed produce identical output sequences.
Transform build_train_transform(const TransformSpec& spec, std::uint64_t seed);

// Fixed resize to 224x224 and normalization only.
Transform build_eval_transform(const TransformSpec& spec);

}  // namespace dacnet
