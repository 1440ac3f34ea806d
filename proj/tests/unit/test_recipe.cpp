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

#include <doctest.h>

#include "dacnet/errors.hpp"
#include "dacnet/recipe.hpp"

using namespace dacnet;

TEST_CASE("frozen presets") {
  const ModelRecipe r = replicate_chexnet_recipe();
  CHECK(r.backbone == BackboneSpec{BackboneKind::kDenseNet121, true});
  CHECK(r.loss.kind == LossKind::kBce);
  CHECK(r.optimizer.kind == OptimizerKind::kAdam);
  CHECK(r.optimizer.lr == 0.001);
  CHECK(r.transform.resize == ResizePolicy::kFixedResize224);
  CHECK(r.transform.hflip_prob == 0.5);
  CHECK_FALSE(r.transform.jitter.has_value());

  const ModelRecipe d = dacnet_recipe();
  CHECK(d.backbone == BackboneSpec{BackboneKind::kDenseNet121, true});
  CHECK(d.loss.kind == LossKind::kFocal);
  CHECK(d.loss.focal == FocalParams{2.0, 1.0});
  CHECK(d.optimizer.kind == OptimizerKind::kAdamW);
  CHECK(d.optimizer.lr == 0.00005);
  CHECK(d.optimizer.weight_decay > 0.0);
  CHECK(d.scheduler.kind == SchedulerKind::kReduceOnPlateau);
  CHECK(d.scheduler.factor == 0.1);
  CHECK(d.scheduler.patience == 2);
  CHECK(d.transform.resize == ResizePolicy::kRandomResizedCrop224);
  CHECK(d.transform.jitter.has_value());
  CHECK(d.early_stop_patience == 5);
  CHECK(d.batch_size == 32);
  CHECK(d.threshold_policy == ThresholdPolicy::kPerClassTuned);

  const ModelRecipe v = vit_transformer_recipe();
  CHECK(v.backbone == BackboneSpec{BackboneKind::kVitBasePatch16, true});
  CHECK(v.loss.kind == LossKind::kBce);
  CHECK(v.optimizer.kind == OptimizerKind::kAdamW);
  CHECK(v.transform.resize == ResizePolicy::kFixedResize224);

  CHECK(preset_recipe("dacnet") == d);
  CHECK_THROWS_AS(preset_recipe("chexnext"), Error);
}

TEST_CASE("config text round-trips every preset") {
  for (const char* name : {"replicate_chexnet", "dacnet", "vit_transformer"}) {
    const ModelRecipe r = preset_recipe(name);
    CHECK(parse_recipe(to_config(r)) == r);
  }
  ModelRecipe custom = dacnet_recipe();
  custom.name = "custom";
  custom.backbone = {BackboneKind::kTinyTestCnn, false};
  custom.scheduler = {SchedulerKind::kCosineAnnealing, 0.1, 2, 7, 1e-6};
  custom.transform.crop_scale = {0.5, 0.9};
  custom.seed = 123456789012345ULL;
  CHECK(parse_recipe(to_config(custom)) == custom);
}

TEST_CASE("recipe parsing rejects unknown keys and bad values") {
  CHECK_THROWS_AS(parse_recipe("name = x\nlearning_rate = 0.1\n"), Error);
  CHECK_THROWS_AS(parse_recipe("name = x\nbackbone = alexnet\n"), Error);
  CHECK_THROWS_AS(parse_recipe("name = x\noptimizer.lr = -1\n"), Error);
  CHECK_THROWS_AS(parse_recipe("name = x\nbatch_size = many\n"), Error);
  CHECK_NOTHROW(parse_recipe("# comment only\nname = x\n"));
}

TEST_CASE("fingerprint covers the trajectory, not the run length") {
  ModelRecipe a = dacnet_recipe();
  ModelRecipe b = a;
  b.max_epochs = 3;
  b.workers = 4;
  CHECK(recipe_fingerprint(a) == recipe_fingerprint(b));
  CHECK_FALSE(config_hash(a) == config_hash(b));
  b.optimizer.lr = 1e-4;
  CHECK_FALSE(recipe_fingerprint(a) == recipe_fingerprint(b));
  b = a;
  b.seed = 99;
  CHECK_FALSE(recipe_fingerprint(a) == recipe_fingerprint(b));
}

TEST_CASE("shipped preset files match the frozen presets") {
  const std::filesystem::path dir = std::filesystem::path(DACNET_SOURCE_DIR) / "configs";
  for (const char* name : {"replicate_chexnet", "dacnet", "vit_transformer"}) {
    CHECK(load_recipe(dir / (std::string(name) + ".cfg")) == preset_recipe(name));
  }
}

TEST_CASE("backbone metadata") {
  CHECK(feature_dim(BackboneKind::kDenseNet121) == 1024);
  CHECK(feature_dim(BackboneKind::kVitBasePatch16) == 768);
  CHECK_FALSE(has_feature_maps(BackboneKind::kVitBasePatch16));
  CHECK(has_feature_maps(BackboneKind::kTinyTestCnn));
  CHECK(backbone_from_string("efficientnet_b3") == BackboneKind::kEfficientNetB3);
}
