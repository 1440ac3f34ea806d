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

#include "dacnet/models.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <mutex>

#include "dacnet/errors.hpp"

namespace dacnet::nn {
namespace {

// Seeded construction touches torch's global generator.
std::mutex& init_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

ClassifierImpl::ClassifierImpl(BackboneKind kind) : kind_(kind), backbone_(make_backbone(kind)) {
  register_module("backbone", backbone_);
  head_ = register_module("head", torch::nn::Linear(feature_dim(kind), static_cast<int64_t>(kNumDiseases)));
  torch::NoGradGuard no_grad;
  head_->weight.uniform_(-0.01, 0.01);
  head_->bias.zero_();
}

torch::Tensor ClassifierImpl::forward(const torch::Tensor& x) {
  return head_(backbone_->pool(backbone_->feature_maps(x)));
}

ClassifierImpl::WithFeatures ClassifierImpl::forward_with_features(const torch::Tensor& x) {
  auto maps = backbone_->feature_maps(x);
  auto logits = head_(backbone_->pool(maps));
  return {maps, logits};
}

std::filesystem::path default_weights_dir() {
  if (const char* env = std::getenv("DACNET_WEIGHTS_DIR"); env && *env) return env;
  const char* home = std::getenv("HOME");
  return std::filesystem::path(home ? home : ".") / ".cache" / "dacnet" / "weights";
}

Classifier build_classifier(const BackboneSpec& spec, std::uint64_t init_seed,
                            const std::optional<std::filesystem::path>& weights_dir) {
  std::filesystem::path weights_file;
  if (spec.pretrained) {
    if (spec.kind == BackboneKind::kTinyTestCnn) {
      throw UnsupportedError("tiny_test_cnn has no pretrained weights; set pretrained = false");
    }
    weights_file = weights_dir.value_or(default_weights_dir()) / (std::string(to_string(spec.kind)) + ".pt");
    if (!std::filesystem::exists(weights_file)) {
      throw Error("pretrained weights for " + std::string(to_string(spec.kind)) + " not found at " +
                  weights_file.string() +
                  ". Export them on a machine with network access with "
                  "`python3 scripts/export_pretrained_weights.py --out <dir>`, copy <dir> here and point "
                  "DACNET_WEIGHTS_DIR at it (or set pretrained = false in the recipe).");
    }
  }
  Classifier model{nullptr};
  {
    std::lock_guard lock(init_mutex());
    torch::manual_seed(init_seed);
    model = Classifier(spec.kind);
  }
  if (spec.pretrained) load_backbone_weights(model->backbone(), weights_file);
  return model;
}

void load_backbone_weights(BackboneImpl& backbone, const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open weights file " + file.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::unordered_map<std::string, torch::Tensor> tensors;
  try {
    const auto dict = torch::pickle_load(bytes).toGenericDict();
    for (const auto& kv : dict) tensors.emplace(kv.key().toStringRef(), kv.value().toTensor());
  } catch (const c10::Error& e) {
    throw Error("weights file " + file.string() + " is not a tensor dictionary: " + e.what_without_backtrace());
  }

  torch::NoGradGuard no_grad;
  auto copy_into = [&](const std::string& name, torch::Tensor& target) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("weights file " + file.string() + " lacks " + name);
    if (it->second.sizes() != target.sizes()) {
      throw Error("weights file " + file.string() + ": shape mismatch for " + name);
    }
    target.copy_(it->second.to(target.dtype()));
  };
  for (auto& p : backbone.named_parameters(/*recurse=*/true)) copy_into(p.key(), p.value());
  for (auto& b : backbone.named_buffers(/*recurse=*/true)) copy_into(b.key(), b.value());
}

torch::Tensor to_batch(std::span<const ImageTensorf> images) {
  if (images.empty()) throw Error("empty image batch");
  const auto h = images.front().height;
  const auto w = images.front().width;
  auto batch = torch::empty({static_cast<int64_t>(images.size()), 3, h, w}, torch::kFloat32);
  float* dst = batch.data_ptr<float>();
  for (const auto& img : images) {
    if (img.height != h || img.width != w) throw Error("images in a batch must share one size");
    // Row-major 3 x (h*w) planes are exactly CHW.
    std::copy(img.data.data(), img.data.data() + img.data.size(), dst);
    dst += img.data.size();
  }
  return batch;
}

InferenceOutput predict_probabilities(Classifier& model, const torch::Tensor& batch) {
  if (model->is_training()) throw Error("predict_probabilities: model must be in eval mode");
  if (batch.dim() != 4 || batch.size(1) != 3 || batch.size(2) != kInputSize || batch.size(3) != kInputSize) {
    throw Error("predict_probabilities: expected an N x 3 x 224 x 224 batch");
  }
  torch::NoGradGuard no_grad;
  const auto logits = model->forward(batch).to(torch::kFloat64).contiguous();
  const auto n = logits.size(0);
  InferenceOutput out;
  out.logits = Eigen::Map<const Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      logits.data_ptr<double>(), n, static_cast<Eigen::Index>(kNumDiseases));
  out.probabilities = out.logits.unaryExpr([](double x) { return sigmoid(x); });
  return out;
}

CamCapture::CamCapture(Classifier model) : model_(std::move(model)) {
  if (!has_feature_maps(model_->kind())) {
    throw UnsupportedError("Grad-CAM is not supported for " + std::string(to_string(model_->kind())) +
                           " (no convolutional feature maps)");
  }
}

void CamCapture::run(const ImageTensorf& image, DiseaseLabel disease) {
  const ImageTensorf images[] = {image};
  const auto batch = to_batch(images);
  torch::AutoGradMode enable(true);
  auto out = model_->forward_with_features(batch);
  const auto logit = out.logits.index({0, static_cast<int64_t>(disease.index())});
  const auto grads = torch::autograd::grad({logit}, {out.maps}, /*grad_outputs=*/{}, /*retain_graph=*/false)[0];

  const auto k = out.maps.size(1);
  height_ = out.maps.size(2);
  width_ = out.maps.size(3);
  const auto a = out.maps.detach()[0].reshape({k, height_ * width_}).to(torch::kFloat64).contiguous();
  const auto g = grads[0].reshape({k, height_ * width_}).to(torch::kFloat64).contiguous();
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  activations_ = Eigen::Map<const RowMajor>(a.data_ptr<double>(), k, height_ * width_);
  gradients_ = Eigen::Map<const RowMajor>(g.data_ptr<double>(), k, height_ * width_);
  logit_ = logit.item<double>();
}

}  // namespace dacnet::nn
