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

#include <memory>

#include "dacnet/recipe.hpp"

// Backbone networks. Parameter and buffer names follow torchvision's
// state_dict layout so exported torchvision weights load without renaming.
namespace dacnet::nn {

class BackboneImpl : public torch::nn::Module {
 public:
  // N x K x h x w feature maps for CNNs; N x T x D tokens for the ViT.
  virtual torch::Tensor feature_maps(const torch::Tensor& x) = 0;
  // N x feature_dim embedding computed from feature_maps().
  virtual torch::Tensor pool(const torch::Tensor& maps) = 0;
};

std::shared_ptr<BackboneImpl> make_backbone(BackboneKind kind);

}  // namespace dacnet::nn
