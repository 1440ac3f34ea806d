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

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>

#include "dacnet/backbones.hpp"
#include "dacnet/evaluation.hpp"
#include "dacnet/image.hpp"
#include "dacnet/recipe.hpp"

namespace dacnet::nn {

// Backbone plus a linear head producing 14 independent disease logits.
class ClassifierImpl : public torch::nn::Module {
 public:
  explicit ClassifierImpl(BackboneKind kind);

  // N x 3 x H x W -> N x 14 logits.
  torch::Tensor forward(const torch::Tensor& x);

  struct WithFeatures {
    torch::Tensor maps;
    torch::Tensor logits;
  };
  WithFeatures forward_with_features(const torch::Tensor& x);

  BackboneKind kind() const { return kind_; }
  BackboneImpl& backbone() { return *backbone_; }
  torch::nn::Linear& head() { return head_; }

 private:
  BackboneKind kind_;
  std::shared_ptr<BackboneImpl> backbone_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(Classifier);

// Directory holding exported pretrained backbones (<kind>.pt): the
// DACNET_WEIGHTS_DIR environment variable, else ~/.cache/dacnet/weights.
std::filesystem::path default_weights_dir();

// Builds a classifier with seeded initialization. When spec.pretrained is
// set the backbone weights come from the offline cache; a missing file is an
// error, never a silent fallback to random weights. The head is always
// freshly initialized: zero bias, weights uniform in [-0.01, 0.01].
Classifier build_classifier(const BackboneSpec& spec, std::uint64_t init_seed = 0,
                            const std::optional<std::filesystem::path>& weights_dir = std::nullopt);

// Copies a torchvision-layout state dict (python torch.save of a dict of
// tensors) into the backbone. Keys for torchvision's own heads are ignored.
void load_backbone_weights(BackboneImpl& backbone, const std::filesystem::path& file);

// Stacks 3 x 224 x 224 tensors into an N x 3 x 224 x 224 float batch.
torch::Tensor to_batch(std::span<const ImageTensorf> images);

struct InferenceOutput {
  ScoreArray logits;         // N x 14
  ScoreArray probabilities;  // sigmoid(logits), independent per disease
};

// Model must be in eval mode; the batch must be N x 3 x 224 x 224.
InferenceOutput predict_probabilities(Classifier& model, const torch::Tensor& batch);

// Activations and gradients of the last feature map for one disease logit.
class CamCapture {
 public:
  // Throws UnsupportedError for backbones without spatial feature maps.
  explicit CamCapture(Classifier model);

  // One forward pass plus a gradient of the chosen logit w.r.t. the maps.
  // Model parameters' gradients are not touched.
  void run(const ImageTensorf& image, DiseaseLabel disease);

  // K x (h*w); row k is the row-major h x w plane of channel k.
  const Eigen::MatrixXd& activations() const { return activations_; }
  const Eigen::MatrixXd& gradients() const { return gradients_; }
  Eigen::Index channels() const { return activations_.rows(); }
  Eigen::Index height() const { return height_; }
  Eigen::Index width() const { return width_; }
  double logit() const { return logit_; }

 private:
  Classifier model_;
  Eigen::MatrixXd activations_;
  Eigen::MatrixXd gradients_;
  Eigen::Index height_ = 0;
  Eigen::Index width_ = 0;
  double logit_ = 0.0;
};

}  // namespace dacnet::nn
