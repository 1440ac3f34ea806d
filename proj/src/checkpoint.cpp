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

#include "dacnet/checkpoint.hpp"

#include "dacnet/diseases.hpp"
#include "dacnet/errors.hpp"
#include "dacnet/text.hpp"

namespace dacnet::nn {
namespace {

std::string join_diseases(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += '|';
    out += n;
  }
  return out;
}

std::string read_string(torch::serialize::InputArchive& archive, const std::string& key,
                        const std::filesystem::path& path) {
  c10::IValue v;
  if (!archive.try_read(key, v) || !v.isString()) {
    throw Error("checkpoint " + path.string() + " lacks field " + key);
  }
  return v.toStringRef();
}

torch::serialize::InputArchive open_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw Error("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  return archive;
}

CheckpointMeta read_meta(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
  CheckpointMeta m;
  m.fingerprint = read_string(archive, "dacnet.fingerprint", path);
  const std::string diseases = read_string(archive, "dacnet.diseases", path);
  for (auto d : split(diseases, '|')) m.diseases.emplace_back(d);
  m.recipe_config = read_string(archive, "dacnet.recipe", path);
  m.state_json = read_string(archive, "dacnet.state", path);
  m.version = read_string(archive, "dacnet.version", path);
  return m;
}

}  // namespace

CheckpointMeta make_meta(const ModelRecipe& recipe, std::string state_json) {
  CheckpointMeta m;
  m.fingerprint = recipe_fingerprint(recipe);
  for (auto name : kDiseaseNames) m.diseases.emplace_back(name);
  m.recipe_config = to_config(recipe);
  m.state_json = std::move(state_json);
  return m;
}

void save_checkpoint(const std::filesystem::path& path, Classifier& model, const CheckpointMeta& meta,
                     torch::optim::Optimizer* optimizer) {
  torch::serialize::OutputArchive archive;
  archive.write("dacnet.fingerprint", c10::IValue(meta.fingerprint));
  archive.write("dacnet.diseases", c10::IValue(join_diseases(meta.diseases)));
  archive.write("dacnet.recipe", c10::IValue(meta.recipe_config));
  archive.write("dacnet.state", c10::IValue(meta.state_json));
  archive.write("dacnet.version", c10::IValue(meta.version));
  torch::serialize::OutputArchive weights;
  model->save(weights);
  archive.write("model", weights);
  if (optimizer) {
    torch::serialize::OutputArchive opt;
    optimizer->save(opt);
    archive.write("optimizer", opt);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  archive.save_to(tmp.string());
  std::filesystem::rename(tmp, path);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  auto archive = open_archive(path);
  return read_meta(archive, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto archive = open_archive(path);
  LoadedCheckpoint out;
  out.meta = read_meta(archive, path);
  std::vector<std::string> canonical(kDiseaseNames.begin(), kDiseaseNames.end());
  if (out.meta.diseases != canonical) {
    throw FingerprintError("checkpoint " + path.string() + " uses disease ordering [" +
                           join_diseases(out.meta.diseases) + "], expected the canonical 14-disease ordering");
  }
  out.recipe = parse_recipe(out.meta.recipe_config);
  if (recipe_fingerprint(out.recipe) != out.meta.fingerprint) {
    throw FingerprintError("checkpoint " + path.string() + " fingerprint " + out.meta.fingerprint +
                           " does not match its recipe (" + recipe_fingerprint(out.recipe) + ")");
  }
  BackboneSpec spec = out.recipe.backbone;
  spec.pretrained = false;  // weights come from the checkpoint itself
  out.model = build_classifier(spec, 0);
  torch::serialize::InputArchive weights;
  if (!archive.try_read("model", weights)) throw Error("checkpoint " + path.string() + " has no model weights");
  out.model->load(weights);
  out.model->eval();
  return out;
}

void load_optimizer_state(const std::filesystem::path& path, torch::optim::Optimizer& optimizer) {
  auto archive = open_archive(path);
  torch::serialize::InputArchive opt;
  if (!archive.try_read("optimizer", opt)) throw Error("checkpoint " + path.string() + " has no optimizer state");
  optimizer.load(opt);
}

}  // namespace dacnet::nn
