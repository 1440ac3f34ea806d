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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "dacnet/losses.hpp"
#include "dacnet/transforms.hpp"

namespace dacnet {

enum class BackboneKind { kDenseNet121, kResNet50, kEfficientNetB3, kVitBasePatch16, kTinyTestCnn };

std::string_view to_string(BackboneKind k);
BackboneKind backbone_from_string(std::string_view s);
// Channels of the pooled feature vector feeding the classifier head.
int feature_dim(BackboneKind k);
// Whether the backbone exposes spatial feature maps (Grad-CAM capable).
bool has_feature_maps(BackboneKind k);

struct BackboneSpec {
  BackboneKind kind = BackboneKind::kDenseNet121;
  bool pretrained = true;
  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

enum class OptimizerKind { kAdam, kAdamW };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double weight_decay = 0.0;
  friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

enum class SchedulerKind { kNone, kReduceOnPlateau, kCosineAnnealing };

struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::kNone;
  double factor = 0.1;  // reduce_on_plateau
  int patience = 2;     // reduce_on_plateau, in epochs
  int t_max = 10;       // cosine_annealing period, in epochs
  double min_lr = 0.0;
  friend bool operator==(const SchedulerSpec&, const SchedulerSpec&) = default;
};

enum class ThresholdPolicy { kGlobal, kPerClassTuned };

struct ModelRecipe {
  std::string name = "custom";
  BackboneSpec backbone;
  LossSpec loss;
  OptimizerSpec optimizer;
  SchedulerSpec scheduler;
  TransformSpec transform;
  int batch_size = 32;
  int max_epochs = 20;
  int early_stop_patience = 5;
  std::uint64_t seed = 0;
  // How validation macro-F1 is scored during training.
  ThresholdPolicy threshold_policy = ThresholdPolicy::kGlobal;
  double global_threshold = 0.5;
  int workers = 1;

  void validate() const;
  friend bool operator==(const ModelRecipe&, const ModelRecipe&) = default;
};

// The three frozen experiment presets.
ModelRecipe replicate_chexnet_recipe();
ModelRecipe dacnet_recipe();
ModelRecipe vit_transformer_recipe();
ModelRecipe preset_recipe(std::string_view name);

// "key = value" text; '#' starts a comment. Unknown keys are rejected.
std::string to_config(const ModelRecipe& r);
ModelRecipe parse_recipe(std::istream& in, std::string_view source = "<stream>");
ModelRecipe parse_recipe(std::string_view text);
ModelRecipe load_recipe(const std::filesystem::path& path);
void save_recipe(const ModelRecipe& r, const std::filesystem::path& path);

// Hash of everything that defines a training trajectory (the config minus
// max_epochs and worker count) plus the canonical disease ordering.
std::string recipe_fingerprint(const ModelRecipe& r);
// Hash of the config text as written.
std::string config_hash(const ModelRecipe& r);

}  // namespace dacnet
