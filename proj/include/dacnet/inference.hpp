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

#include <torch/torch.h>

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>

#include "dacnet/dataset.hpp"
#include "dacnet/evaluation.hpp"
#include "dacnet/explain.hpp"
#include "dacnet/image_io.hpp"
#include "dacnet/models.hpp"
#include "dacnet/transforms.hpp"

namespace dacnet::nn {

// Records resolved through an image source.
struct LabeledImages {
  std::span<const ImageRecord> records;
  const ImageSource* images = nullptr;
};

// Loads and transforms the selected records on `workers` threads. The
// transform for each sample comes from transform_for(record index), so the
// result does not depend on the thread count.
torch::Tensor load_batch(const LabeledImages& data, std::span<const std::size_t> indices,
                         const std::function<Transform(std::size_t)>& transform_for, int workers);

TargetArray targets_of(std::span<const ImageRecord> records, std::span<const std::size_t> indices);

// Eval-mode batched inference over every record, with the eval transform.
PredictionSet predict_records(Classifier& model, const TransformSpec& spec, const LabeledImages& data,
                              std::optional<Split> split, int batch_size, int workers = 1);

using DiseaseScores = std::array<double, kNumDiseases>;

// Probabilities for one decoded image. The model must be in eval mode.
DiseaseScores predict_image(Classifier& model, const TransformSpec& spec, const GrayImagef& image);

// Index of the highest probability; ties go to the earlier disease.
DiseaseLabel top_disease(const DiseaseScores& probabilities);

struct Explanation {
  HeatMap heatmap;
  RgbImage overlay;  // heat over the 224 x 224 model input
  DiseaseScores probabilities{};
};

// Grad-CAM for `target`, or for the top-scoring disease when absent.
// Throws UnsupportedError for backbones without spatial feature maps.
Explanation explain_image(Classifier& model, const TransformSpec& spec, const GrayImagef& image,
                          std::optional<DiseaseLabel> target = std::nullopt);

}  // namespace dacnet::nn
