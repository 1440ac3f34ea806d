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

#include "dacnet/recipe.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "dacnet/diseases.hpp"
#include "dacnet/errors.hpp"
#include "dacnet/text.hpp"

namespace dacnet {

std::string_view to_string(BackboneKind k) {
  switch (k) {
    case BackboneKind::kDenseNet121: return "densenet121";
    case BackboneKind::kResNet50: return "resnet50";
    case BackboneKind::kEfficientNetB3: return "efficientnet_b3";
    case BackboneKind::kVitBasePatch16: return "vit_base_patch16";
    case BackboneKind::kTinyTestCnn: return "tiny_test_cnn";
  }
  return "?";
}

BackboneKind backbone_from_string(std::string_view s) {
  for (auto k : {BackboneKind::kDenseNet121, BackboneKind::kResNet50, BackboneKind::kEfficientNetB3,
                 BackboneKind::kVitBasePatch16, BackboneKind::kTinyTestCnn}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown backbone kind '" + std::string(s) + "'");
}

int feature_dim(BackboneKind k) {
  switch (k) {
    case BackboneKind::kDenseNet121: return 1024;
    case BackboneKind::kResNet50: return 2048;
    case BackboneKind::kEfficientNetB3: return 1536;
    case BackboneKind::kVitBasePatch16: return 768;
    case BackboneKind::kTinyTestCnn: return 32;
  }
  return 0;
}

bool has_feature_maps(BackboneKind k) { return k != BackboneKind::kVitBasePatch16; }

void ModelRecipe::validate() const {
  if (name.empty()) throw Error("recipe name is empty");
  if (loss.kind == LossKind::kFocal) loss.focal.validate();
  if (!(optimizer.lr > 0.0)) throw Error("learning rate must be positive");
  if (!(optimizer.weight_decay >= 0.0)) throw Error("weight decay must be non-negative");
  if (scheduler.kind == SchedulerKind::kReduceOnPlateau &&
      (!(scheduler.factor > 0.0 && scheduler.factor < 1.0) || scheduler.patience < 0)) {
    throw Error("reduce_on_plateau needs 0 < factor < 1 and patience >= 0");
  }
  if (scheduler.kind == SchedulerKind::kCosineAnnealing && scheduler.t_max < 1) {
    throw Error("cosine_annealing needs t_max >= 1");
  }
  transform.validate();
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (max_epochs < 0) throw Error("max_epochs must be >= 0");
  if (early_stop_patience < 1) throw Error("early_stop_patience must be >= 1");
  if (!(global_threshold >= 0.0 && global_threshold <= 1.0)) {
    throw Error("global threshold must lie in [0, 1]");
  }
  if (workers < 1) throw Error("workers must be >= 1");
}

ModelRecipe replicate_chexnet_recipe() {
  ModelRecipe r;
  r.name = "replicate_chexnet";
  r.backbone = {BackboneKind::kDenseNet121, true};
  r.loss = {LossKind::kBce, {}};
  r.optimizer = {OptimizerKind::kAdam, 1e-3, 0.0};
  r.scheduler = {};
  r.transform.resize = ResizePolicy::kFixedResize224;
  r.transform.hflip_prob = 0.5;
  r.transform.jitter.reset();
  r.threshold_policy = ThresholdPolicy::kGlobal;
  return r;
}

ModelRecipe dacnet_recipe() {
  ModelRecipe r;
  r.name = "dacnet";
  r.backbone = {BackboneKind::kDenseNet121, true};
  r.loss = {LossKind::kFocal, {2.0, 1.0}};
  r.optimizer = {OptimizerKind::kAdamW, 5e-5, 1e-2};
  r.scheduler.kind = SchedulerKind::kReduceOnPlateau;
  r.scheduler.factor = 0.1;
  r.scheduler.patience = 2;
  r.transform.resize = ResizePolicy::kRandomResizedCrop224;
  r.transform.hflip_prob = 0.5;
  r.transform.jitter = ColorJitter{};
  r.threshold_policy = ThresholdPolicy::kPerClassTuned;
  return r;
}

ModelRecipe vit_transformer_recipe() {
  ModelRecipe r;
  r.name = "vit_transformer";
  r.backbone = {BackboneKind::kVitBasePatch16, true};
  r.loss = {LossKind::kBce, {}};
  r.optimizer = {OptimizerKind::kAdamW, 1e-4, 1e-2};
  r.scheduler = {};
  r.transform.resize = ResizePolicy::kFixedResize224;
  r.transform.hflip_prob = 0.5;
  r.transform.jitter.reset();
  r.threshold_policy = ThresholdPolicy::kGlobal;
  return r;
}

ModelRecipe preset_recipe(std::string_view name) {
  if (name == "replicate_chexnet") return replicate_chexnet_recipe();
  if (name == "dacnet") return dacnet_recipe();
  if (name == "vit_transformer") return vit_transformer_recipe();
  throw Error("unknown preset '" + std::string(name) + "'");
}

namespace {

std::string join3(const std::array<double, 3>& v) {
  return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
}

std::string join2(const std::array<double, 2>& v) {
  return format_double(v[0]) + "," + format_double(v[1]);
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "adamw"; }

std::string_view to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::kNone: return "none";
    case SchedulerKind::kReduceOnPlateau: return "reduce_on_plateau";
    case SchedulerKind::kCosineAnnealing: return "cosine_annealing";
  }
  return "none";
}

std::string_view to_string(ThresholdPolicy p) {
  return p == ThresholdPolicy::kGlobal ? "global" : "per_class";
}

// Lines that do not influence the optimization trajectory.
bool is_run_control_key(std::string_view key) { return key == "max_epochs" || key == "workers"; }

}  // namespace

std::string to_config(const ModelRecipe& r) {
  std::ostringstream os;
  os << "name = " << r.name << '\n';
  os << "backbone = " << to_string(r.backbone.kind) << '\n';
  os << "pretrained = " << (r.backbone.pretrained ? "true" : "false") << '\n';
  os << "loss = " << (r.loss.kind == LossKind::kFocal ? "focal" : "bce") << '\n';
  if (r.loss.kind == LossKind::kFocal) {
    os << "focal.gamma = " << format_double(r.loss.focal.gamma) << '\n';
    os << "focal.alpha = " << format_double(r.loss.focal.alpha) << '\n';
  }
  os << "optimizer = " << to_string(r.optimizer.kind) << '\n';
  os << "optimizer.lr = " << format_double(r.optimizer.lr) << '\n';
  os << "optimizer.weight_decay = " << format_double(r.optimizer.weight_decay) << '\n';
  os << "scheduler = " << to_string(r.scheduler.kind) << '\n';
  if (r.scheduler.kind == SchedulerKind::kReduceOnPlateau) {
    os << "scheduler.factor = " << format_double(r.scheduler.factor) << '\n';
    os << "scheduler.patience = " << r.scheduler.patience << '\n';
  } else if (r.scheduler.kind == SchedulerKind::kCosineAnnealing) {
    os << "scheduler.t_max = " << r.scheduler.t_max << '\n';
    os << "scheduler.min_lr = " << format_double(r.scheduler.min_lr) << '\n';
  }
  const auto& t = r.transform;
  os << "transform.resize = " << to_string(t.resize) << '\n';
  os << "transform.hflip_prob = " << format_double(t.hflip_prob) << '\n';
  if (t.jitter) {
    os << "transform.jitter = " << format_double(t.jitter->brightness) << ','
       << format_double(t.jitter->contrast) << ',' << format_double(t.jitter->saturation) << ','
       << format_double(t.jitter->hue) << '\n';
  } else {
    os << "transform.jitter = none\n";
  }
  os << "transform.mean = " << join3(t.normalization.mean) << '\n';
  os << "transform.std = " << join3(t.normalization.std) << '\n';
  os << "transform.crop_scale = " << join2(t.crop_scale) << '\n';
  os << "transform.crop_ratio = " << join2(t.crop_ratio) << '\n';
  os << "batch_size = " << r.batch_size << '\n';
  os << "max_epochs = " << r.max_epochs << '\n';
  os << "early_stop_patience = " << r.early_stop_patience << '\n';
  os << "seed = " << r.seed << '\n';
  os << "thresholds = " << to_string(r.threshold_policy) << '\n';
  os << "thresholds.global = " << format_double(r.global_threshold) << '\n';
  os << "workers = " << r.workers << '\n';
  return os.str();
}

ModelRecipe parse_recipe(std::istream& in, std::string_view source) {
  ModelRecipe r;
  // Start from neutral values; the file states every field it cares about.
  r.transform.jitter.reset();
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    return ParseError(std::string(source) + ":" + std::to_string(line_no) + ": " + what);
  };
  auto number = [&](std::string_view v) {
    const auto d = parse_double(v);
    if (!d) throw fail("expected a number, got '" + std::string(v) + "'");
    return *d;
  };
  auto integer = [&](std::string_view v) {
    const auto i = parse_int64(v);
    if (!i) throw fail("expected an integer, got '" + std::string(v) + "'");
    return static_cast<int>(*i);
  };
  auto numbers = [&](std::string_view v, std::size_t n) {
    const auto parts = split(v, ',');
    if (parts.size() != n) throw fail("expected " + std::to_string(n) + " comma-separated numbers");
    std::vector<double> out;
    for (auto p : parts) out.push_back(number(p));
    return out;
  };
  auto boolean = [&](std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw fail("expected true/false");
  };

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    std::string_view content = line;
    if (const auto hash = content.find('#'); hash != std::string_view::npos) content = content.substr(0, hash);
    content = trim(content);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string_view::npos) throw fail("expected 'key = value'");
    const auto key = trim(content.substr(0, eq));
    const auto value = trim(content.substr(eq + 1));
    try {
      if (key == "name") r.name = std::string(value);
      else if (key == "backbone") r.backbone.kind = backbone_from_string(value);
      else if (key == "pretrained") r.backbone.pretrained = boolean(value);
      else if (key == "loss") {
        if (value == "bce") r.loss.kind = LossKind::kBce;
        else if (value == "focal") r.loss.kind = LossKind::kFocal;
        else throw fail("loss must be bce or focal");
      } else if (key == "focal.gamma") r.loss.focal.gamma = number(value);
      else if (key == "focal.alpha") r.loss.focal.alpha = number(value);
      else if (key == "optimizer") {
        if (value == "adam") r.optimizer.kind = OptimizerKind::kAdam;
        else if (value == "adamw") r.optimizer.kind = OptimizerKind::kAdamW;
        else throw fail("optimizer must be adam or adamw");
      } else if (key == "optimizer.lr") r.optimizer.lr = number(value);
      else if (key == "optimizer.weight_decay") r.optimizer.weight_decay = number(value);
      else if (key == "scheduler") {
        if (value == "none") r.scheduler.kind = SchedulerKind::kNone;
        else if (value == "reduce_on_plateau") r.scheduler.kind = SchedulerKind::kReduceOnPlateau;
        else if (value == "cosine_annealing") r.scheduler.kind = SchedulerKind::kCosineAnnealing;
        else throw fail("unknown scheduler");
      } else if (key == "scheduler.factor") r.scheduler.factor = number(value);
      else if (key == "scheduler.patience") r.scheduler.patience = integer(value);
      else if (key == "scheduler.t_max") r.scheduler.t_max = integer(value);
      else if (key == "scheduler.min_lr") r.scheduler.min_lr = number(value);
      else if (key == "transform.resize") r.transform.resize = resize_policy_from_string(value);
      else if (key == "transform.hflip_prob") r.transform.hflip_prob = number(value);
      else if (key == "transform.jitter") {
        if (value == "none") {
          r.transform.jitter.reset();
        } else {
          const auto v = numbers(value, 4);
          r.transform.jitter = ColorJitter{v[0], v[1], v[2], v[3]};
        }
      } else if (key == "transform.mean") {
        const auto v = numbers(value, 3);
        r.transform.normalization.mean = {v[0], v[1], v[2]};
      } else if (key == "transform.std") {
        const auto v = numbers(value, 3);
        r.transform.normalization.std = {v[0], v[1], v[2]};
      } else if (key == "transform.crop_scale") {
        const auto v = numbers(value, 2);
        r.transform.crop_scale = {v[0], v[1]};
      } else if (key == "transform.crop_ratio") {
        const auto v = numbers(value, 2);
        r.transform.crop_ratio = {v[0], v[1]};
      } else if (key == "batch_size") r.batch_size = integer(value);
      else if (key == "max_epochs") r.max_epochs = integer(value);
      else if (key == "early_stop_patience") r.early_stop_patience = integer(value);
      else if (key == "seed") {
        const auto s = parse_uint64(value);
        if (!s) throw fail("seed must be a non-negative integer");
        r.seed = *s;
      } else if (key == "thresholds") {
        if (value == "global") r.threshold_policy = ThresholdPolicy::kGlobal;
        else if (value == "per_class") r.threshold_policy = ThresholdPolicy::kPerClassTuned;
        else throw fail("thresholds must be global or per_class");
      } else if (key == "thresholds.global") r.global_threshold = number(value);
      else if (key == "workers") r.workers = integer(value);
      else throw fail("unknown key '" + std::string(key) + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw fail(e.what());
    }
  }
  try {
    r.validate();
  } catch (const Error& e) {
    throw ParseError(std::string(source) + ": " + e.what());
  }
  return r;
}

ModelRecipe parse_recipe(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_recipe(in);
}

ModelRecipe load_recipe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open recipe " + path.string());
  return parse_recipe(in, path.string());
}

void save_recipe(const ModelRecipe& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write recipe " + path.string());
  out << to_config(r);
}

std::string recipe_fingerprint(const ModelRecipe& r) {
  std::istringstream in(to_config(r));
  std::string canonical;
  std::string line;
  while (std::getline(in, line)) {
    const auto key = trim(std::string_view(line).substr(0, line.find('=')));
    if (!is_run_control_key(key)) canonical += line + '\n';
  }
  canonical += "diseases =";
  for (auto name : kDiseaseNames) canonical += " " + std::string(name);
  return hex64(fnv1a64(canonical));
}

std::string config_hash(const ModelRecipe& r) { return hex64(fnv1a64(to_config(r))); }

}  // namespace dacnet
