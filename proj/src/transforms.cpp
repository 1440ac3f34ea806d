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

#include "dacnet/transforms.hpp"

#include <cmath>
#include <memory>

#include "dacnet/errors.hpp"

namespace dacnet {

std::string_view to_string(ResizePolicy p) {
  switch (p) {
    case ResizePolicy::kFixedResize224: return "fixed_resize_224";
    case ResizePolicy::kRandomResizedCrop224: return "random_resized_crop_224";
  }
  return "?";
}

ResizePolicy resize_policy_from_string(std::string_view s) {
  if (s == "fixed_resize_224") return ResizePolicy::kFixedResize224;
  if (s == "random_resized_crop_224") return ResizePolicy::kRandomResizedCrop224;
  throw Error("unknown resize policy '" + std::string(s) + "'");
}

void TransformSpec::validate() const {
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) {
    throw Error("horizontal flip probability must be in [0, 1]");
  }
  if (jitter) {
    const auto& j = *jitter;
    if (j.brightness < 0 || j.contrast < 0 || j.saturation < 0 || j.hue < 0) {
      throw Error("color jitter ranges must be non-negative");
    }
    if (j.brightness > 1 || j.contrast > 1) {
      throw Error("brightness/contrast jitter must not exceed 1");
    }
  }
  for (double s : normalization.std) {
    if (!(s > 0.0)) throw Error("normalization std must be positive");
  }
  if (!(crop_scale[0] > 0.0 && crop_scale[0] <= crop_scale[1] && crop_scale[1] <= 1.0)) {
    throw Error("crop scale must satisfy 0 < lo <= hi <= 1");
  }
  if (!(crop_ratio[0] > 0.0 && crop_ratio[0] <= crop_ratio[1])) {
    throw Error("crop aspect ratio range must satisfy 0 < lo <= hi");
  }
}

CropBox sample_resized_crop(Eigen::Index height, Eigen::Index width,
                            const std::array<double, 2>& scale,
                            const std::array<double, 2>& ratio, Rng& rng) {
  const double area = static_cast<double>(height) * static_cast<double>(width);
  const double log_lo = std::log(ratio[0]);
  const double log_hi = std::log(ratio[1]);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target_area = area * rng.uniform(scale[0], scale[1]);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto w = static_cast<Eigen::Index>(std::lround(std::sqrt(target_area * aspect)));
    const auto h = static_cast<Eigen::Index>(std::lround(std::sqrt(target_area / aspect)));
    if (w > 0 && h > 0 && w <= width && h <= height) {
      const auto top = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(height - h + 1)));
      const auto left = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(width - w + 1)));
      return {top, left, h, w};
    }
  }
  // Center crop clamped to the aspect range.
  const double in_ratio = static_cast<double>(width) / static_cast<double>(height);
  Eigen::Index w = width;
  Eigen::Index h = height;
  if (in_ratio < ratio[0]) {
    h = static_cast<Eigen::Index>(std::lround(static_cast<double>(w) / ratio[0]));
  } else if (in_ratio > ratio[1]) {
    w = static_cast<Eigen::Index>(std::lround(static_cast<double>(h) * ratio[1]));
  }
  return {(height - h) / 2, (width - w) / 2, h, w};
}

GrayImagef apply_jitter(const GrayImagef& image, const ColorJitter& jitter, Rng& rng) {
  const double b = rng.uniform(1.0 - jitter.brightness, 1.0 + jitter.brightness);
  const double c = rng.uniform(1.0 - jitter.contrast, 1.0 + jitter.contrast);
  GrayImagef out = (image * static_cast<float>(b)).cwiseMin(1.0f).cwiseMax(0.0f);
  const float mean = out.mean();
  out = ((out - mean) * static_cast<float>(c) + mean).cwiseMin(1.0f).cwiseMax(0.0f);
  return out;
}

Transform build_train_transform(const TransformSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = std::make_shared<Rng>(seed);
  return [spec, rng](const GrayImagef& image) {
    if (image.size() == 0) throw Error("empty image");
    GrayImagef geometry;
    if (spec.resize == ResizePolicy::kRandomResizedCrop224) {
      const CropBox box = sample_resized_crop(image.rows(), image.cols(), spec.crop_scale,
                                              spec.crop_ratio, *rng);
      geometry = resize(image.block(box.top, box.left, box.height, box.width), kInputSize,
                        kInputSize);
    } else {
      geometry = resize(image, kInputSize, kInputSize);
    }
    // The flip draw is always consumed so later draws do not depend on the
    // flip probability.
    if (rng->uniform() < spec.hflip_prob) geometry = horizontal_flip(geometry);
    if (spec.jitter) geometry = apply_jitter(geometry, *spec.jitter, *rng);
    return normalize(geometry, spec.normalization);
  };
}

Transform build_eval_transform(const TransformSpec& spec) {
  spec.validate();
  const Normalization n = spec.normalization;
  return [n](const GrayImagef& image) {
    if (image.size() == 0) throw Error("empty image");
    return normalize(resize(image, kInputSize, kInputSize), n);
  };
}

}  // namespace dacnet
