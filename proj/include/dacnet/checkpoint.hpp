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

#include <filesystem>
#include <string>
#include <vector>

#include "dacnet/models.hpp"
#include "dacnet/recipe.hpp"

namespace dacnet::nn {

struct CheckpointMeta {
  std::string fingerprint;            // recipe_fingerprint() at save time
  std::vector<std::string> diseases;  // output ordering of the head
  std::string recipe_config;          // to_config() text
  std::string state_json;             // training state; empty for exported models
  std::string version = DACNET_VERSION;
};

CheckpointMeta make_meta(const ModelRecipe& recipe, std::string state_json = {});

// Written to a temporary file and renamed, so readers never see a torn file.
void save_checkpoint(const std::filesystem::path& path, Classifier& model, const CheckpointMeta& meta,
                     torch::optim::Optimizer* optimizer = nullptr);

struct LoadedCheckpoint {
  Classifier model{nullptr};
  ModelRecipe recipe;
  CheckpointMeta meta;
};

// Rebuilds the network from the stored recipe and loads its weights.
// Throws FingerprintError if the stored disease ordering differs from the
// canonical one or the fingerprint does not match the stored recipe.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);
void load_optimizer_state(const std::filesystem::path& path, torch::optim::Optimizer& optimizer);

}  // namespace dacnet::nn
