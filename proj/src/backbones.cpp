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

#include "dacnet/backbones.hpp"

#include <cmath>
#include <string>

#include "dacnet/errors.hpp"

namespace dacnet::nn {
namespace {

namespace F = torch::nn::functional;
using torch::nn::BatchNorm2d;
using torch::nn::BatchNorm2dOptions;
using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;

// nn::Sequential with a concrete forward, so stages can nest inside each other.
class SequentialImpl : public torch::nn::SequentialImpl {
 public:
  using torch::nn::SequentialImpl::SequentialImpl;
  torch::Tensor forward(torch::Tensor x) { return torch::nn::SequentialImpl::forward(x); }
};
TORCH_MODULE(Sequential);

Conv2d conv(int64_t in, int64_t out, int64_t k, int64_t stride = 1, int64_t padding = 0,
            int64_t groups = 1, bool bias = false) {
  return Conv2d(Conv2dOptions(in, out, k).stride(stride).padding(padding).groups(groups).bias(bias));
}

// Kaiming-normal convolutions and unit batch norms.
void init_cnn(torch::nn::Module& root) {
  torch::NoGradGuard no_grad;
  for (auto& m : root.modules(/*include_self=*/false)) {
    if (auto* c = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
      if (c->bias.defined()) c->bias.zero_();
    } else if (auto* b = m->as<torch::nn::BatchNorm2d>()) {
      b->weight.fill_(1.0);
      b->bias.zero_();
    }
  }
}

// ---------------------------------------------------------------- DenseNet-121

class DenseLayerImpl : public torch::nn::Module {
 public:
  DenseLayerImpl(int64_t in, int64_t growth, int64_t bn_size)
      : norm1(register_module("norm1", BatchNorm2d(in))),
        conv1(register_module("conv1", conv(in, bn_size * growth, 1))),
        norm2(register_module("norm2", BatchNorm2d(bn_size * growth))),
        conv2(register_module("conv2", conv(bn_size * growth, growth, 3, 1, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = conv1(torch::relu(norm1(x)));
    y = conv2(torch::relu(norm2(y)));
    return torch::cat({x, y}, 1);
  }

  BatchNorm2d norm1;
  Conv2d conv1;
  BatchNorm2d norm2;
  Conv2d conv2;
};
TORCH_MODULE(DenseLayer);

class DenseBlockImpl : public torch::nn::Module {
 public:
  DenseBlockImpl(int64_t layers, int64_t in, int64_t growth, int64_t bn_size) {
    for (int64_t i = 0; i < layers; ++i) {
      layers_.push_back(register_module("denselayer" + std::to_string(i + 1),
                                        DenseLayer(in + i * growth, growth, bn_size)));
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    for (auto& l : layers_) x = l->forward(x);
    return x;
  }

 private:
  std::vector<DenseLayer> layers_;
};
TORCH_MODULE(DenseBlock);

class TransitionImpl : public torch::nn::Module {
 public:
  TransitionImpl(int64_t in, int64_t out)
      : norm(register_module("norm", BatchNorm2d(in))), conv(register_module("conv", nn::conv(in, out, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    return F::avg_pool2d(conv(torch::relu(norm(x))), F::AvgPool2dFuncOptions(2).stride(2));
  }

  BatchNorm2d norm;
  Conv2d conv;
};
TORCH_MODULE(Transition);

class DenseNet121Impl : public BackboneImpl {
 public:
  DenseNet121Impl() {
    constexpr int64_t growth = 32;
    constexpr int64_t bn_size = 4;
    const int64_t block_layers[] = {6, 12, 24, 16};
    Sequential f;
    f->push_back("conv0", conv(3, 64, 7, 2, 3));
    f->push_back("norm0", BatchNorm2d(64));
    f->push_back("relu0", torch::nn::ReLU());
    f->push_back("pool0", torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1)));
    int64_t channels = 64;
    for (int i = 0; i < 4; ++i) {
      f->push_back("denseblock" + std::to_string(i + 1),
                   DenseBlock(block_layers[i], channels, growth, bn_size));
      channels += block_layers[i] * growth;
      if (i != 3) {
        f->push_back("transition" + std::to_string(i + 1), Transition(channels, channels / 2));
        channels /= 2;
      }
    }
    f->push_back("norm5", BatchNorm2d(channels));
    features = register_module("features", f);
    init_cnn(*this);
  }

  // Final dense features after the closing ReLU: 1024 x 7 x 7 at 224 input.
  torch::Tensor feature_maps(const torch::Tensor& x) override { return torch::relu(features->forward(x)); }
  torch::Tensor pool(const torch::Tensor& maps) override {
    return F::adaptive_avg_pool2d(maps, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
  }

  Sequential features{nullptr};
};

// ---------------------------------------------------------------- ResNet-50

class BottleneckImpl : public torch::nn::Module {
 public:
  static constexpr int64_t kExpansion = 4;

  BottleneckImpl(int64_t in, int64_t planes, int64_t stride)
      : conv1(register_module("conv1", conv(in, planes, 1))),
        bn1(register_module("bn1", BatchNorm2d(planes))),
        conv2(register_module("conv2", conv(planes, planes, 3, stride, 1))),
        bn2(register_module("bn2", BatchNorm2d(planes))),
        conv3(register_module("conv3", conv(planes, planes * kExpansion, 1))),
        bn3(register_module("bn3", BatchNorm2d(planes * kExpansion))) {
    if (stride != 1 || in != planes * kExpansion) {
      Sequential d;
      d->push_back(conv(in, planes * kExpansion, 1, stride));
      d->push_back(BatchNorm2d(planes * kExpansion));
      downsample = register_module("downsample", d);
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1(conv1(x)));
    y = torch::relu(bn2(conv2(y)));
    y = bn3(conv3(y));
    return torch::relu(y + (downsample ? downsample->forward(x) : x));
  }

  Conv2d conv1;
  BatchNorm2d bn1;
  Conv2d conv2;
  BatchNorm2d bn2;
  Conv2d conv3;
  BatchNorm2d bn3;
  Sequential downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

class ResNet50Impl : public BackboneImpl {
 public:
  ResNet50Impl()
      : conv1(register_module("conv1", conv(3, 64, 7, 2, 3))), bn1(register_module("bn1", BatchNorm2d(64))) {
    const int64_t blocks[] = {3, 4, 6, 3};
    const int64_t planes[] = {64, 128, 256, 512};
    int64_t in = 64;
    for (int i = 0; i < 4; ++i) {
      Sequential layer;
      for (int64_t b = 0; b < blocks[i]; ++b) {
        const int64_t stride = (b == 0 && i > 0) ? 2 : 1;
        layer->push_back(Bottleneck(in, planes[i], stride));
        in = planes[i] * BottleneckImpl::kExpansion;
      }
      layers.push_back(register_module("layer" + std::to_string(i + 1), layer));
    }
    init_cnn(*this);
  }

  torch::Tensor feature_maps(const torch::Tensor& x) override {
    auto y = torch::relu(bn1(conv1(x)));
    y = F::max_pool2d(y, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
    for (auto& l : layers) y = l->forward(y);
    return y;
  }
  torch::Tensor pool(const torch::Tensor& maps) override {
    return F::adaptive_avg_pool2d(maps, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
  }

  Conv2d conv1;
  BatchNorm2d bn1;
  std::vector<Sequential> layers;
};

// ---------------------------------------------------------------- EfficientNet-B3

int64_t make_divisible(double v, int64_t divisor = 8) {
  int64_t nv = std::max<int64_t>(divisor, static_cast<int64_t>(v + divisor / 2.0) / divisor * divisor);
  if (static_cast<double>(nv) < 0.9 * v) nv += divisor;
  return nv;
}

// Conv -> BN -> optional SiLU, indexed "0", "1", "2" as in torchvision.
Sequential conv_norm_act(int64_t in, int64_t out, int64_t k, int64_t stride, int64_t groups, bool act) {
  Sequential s;
  s->push_back(conv(in, out, k, stride, (k - 1) / 2, groups));
  s->push_back(BatchNorm2d(out));
  if (act) s->push_back(torch::nn::SiLU());
  return s;
}

class SqueezeExcitationImpl : public torch::nn::Module {
 public:
  SqueezeExcitationImpl(int64_t channels, int64_t squeeze)
      : fc1(register_module("fc1", conv(channels, squeeze, 1, 1, 0, 1, true))),
        fc2(register_module("fc2", conv(squeeze, channels, 1, 1, 0, 1, true))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto s = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions(1));
    s = torch::sigmoid(fc2(torch::silu(fc1(s))));
    return x * s;
  }

  Conv2d fc1;
  Conv2d fc2;
};
TORCH_MODULE(SqueezeExcitation);

class MBConvImpl : public torch::nn::Module {
 public:
  MBConvImpl(int64_t expand, int64_t k, int64_t stride, int64_t in, int64_t out, double drop_prob)
      : residual_(stride == 1 && in == out), drop_prob_(drop_prob) {
    const int64_t expanded = make_divisible(static_cast<double>(in * expand));
    Sequential b;
    if (expanded != in) b->push_back(conv_norm_act(in, expanded, 1, 1, 1, true));
    b->push_back(conv_norm_act(expanded, expanded, k, stride, expanded, true));
    b->push_back(SqueezeExcitation(expanded, std::max<int64_t>(1, in / 4)));
    b->push_back(conv_norm_act(expanded, out, 1, 1, 1, false));
    block = register_module("block", b);
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = block->forward(x);
    if (!residual_) return y;
    if (is_training() && drop_prob_ > 0.0) {
      // Stochastic depth, one keep decision per sample.
      const double keep = 1.0 - drop_prob_;
      auto mask = torch::empty({y.size(0), 1, 1, 1}, y.options()).bernoulli_(keep);
      y = y * mask / keep;
    }
    return y + x;
  }

  Sequential block{nullptr};

 private:
  bool residual_;
  double drop_prob_;
};
TORCH_MODULE(MBConv);

class EfficientNetB3Impl : public BackboneImpl {
 public:
  EfficientNetB3Impl() {
    constexpr double width = 1.2;
    constexpr double depth = 1.4;
    constexpr double stochastic_depth = 0.2;
    struct Stage {
      int64_t expand, kernel, stride, in, out, layers;
    };
    const Stage base[] = {{1, 3, 1, 32, 16, 1},  {6, 3, 2, 16, 24, 2},  {6, 5, 2, 24, 40, 2},
                          {6, 3, 2, 40, 80, 3},  {6, 5, 1, 80, 112, 3}, {6, 5, 2, 112, 192, 4},
                          {6, 3, 1, 192, 320, 1}};
    auto ch = [&](int64_t c) { return make_divisible(static_cast<double>(c) * width); };
    auto reps = [&](int64_t n) { return static_cast<int64_t>(std::ceil(static_cast<double>(n) * depth)); };

    int64_t total_blocks = 0;
    for (const auto& s : base) total_blocks += reps(s.layers);

    Sequential f;
    f->push_back(conv_norm_act(3, ch(32), 3, 2, 1, true));
    int64_t block_id = 0;
    for (const auto& s : base) {
      Sequential stage;
      for (int64_t i = 0; i < reps(s.layers); ++i) {
        const double p = stochastic_depth * static_cast<double>(block_id) / static_cast<double>(total_blocks);
        stage->push_back(MBConv(s.expand, s.kernel, i == 0 ? s.stride : 1, i == 0 ? ch(s.in) : ch(s.out),
                                ch(s.out), p));
        ++block_id;
      }
      f->push_back(stage);
    }
    const int64_t last_in = ch(320);
    f->push_back(conv_norm_act(last_in, 4 * last_in, 1, 1, 1, true));
    features = register_module("features", f);
    init_cnn(*this);
  }

  torch::Tensor feature_maps(const torch::Tensor& x) override { return features->forward(x); }
  torch::Tensor pool(const torch::Tensor& maps) override {
    return F::adaptive_avg_pool2d(maps, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
  }

  Sequential features{nullptr};
};

// ---------------------------------------------------------------- ViT-B/16

class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(int64_t dim, int64_t heads, int64_t mlp_dim)
      : ln_1(register_module("ln_1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(1e-6)))),
        self_attention(register_module("self_attention",
                                       torch::nn::MultiheadAttention(torch::nn::MultiheadAttentionOptions(dim, heads)))),
        ln_2(register_module("ln_2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(1e-6)))) {
    Sequential m;
    m->push_back(torch::nn::Linear(dim, mlp_dim));
    m->push_back(torch::nn::GELU());
    m->push_back(torch::nn::Dropout(0.0));
    m->push_back(torch::nn::Linear(mlp_dim, dim));
    m->push_back(torch::nn::Dropout(0.0));
    mlp = register_module("mlp", m);
  }

  // x: N x T x D.
  torch::Tensor forward(const torch::Tensor& x) {
    auto h = ln_1(x).transpose(0, 1);  // T x N x D for the attention module
    auto attn = std::get<0>(self_attention->forward(h, h, h, torch::Tensor(), /*need_weights=*/false)).transpose(0, 1);
    auto y = x + attn;
    return y + mlp->forward(ln_2(y));
  }

  torch::nn::LayerNorm ln_1;
  torch::nn::MultiheadAttention self_attention;
  torch::nn::LayerNorm ln_2;
  Sequential mlp{nullptr};
};
TORCH_MODULE(EncoderBlock);

class EncoderImpl : public torch::nn::Module {
 public:
  EncoderImpl(int64_t seq_len, int64_t layers_count, int64_t dim, int64_t heads, int64_t mlp_dim) {
    pos_embedding = register_parameter("pos_embedding", torch::empty({1, seq_len, dim}).normal_(0.0, 0.02));
    Sequential l;
    for (int64_t i = 0; i < layers_count; ++i) {
      l->push_back("encoder_layer_" + std::to_string(i), EncoderBlock(dim, heads, mlp_dim));
    }
    layers = register_module("layers", l);
    ln = register_module("ln", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(1e-6)));
  }

  torch::Tensor forward(const torch::Tensor& x) { return ln(layers->forward(x + pos_embedding)); }

  torch::Tensor pos_embedding;
  Sequential layers{nullptr};
  torch::nn::LayerNorm ln{nullptr};
};
TORCH_MODULE(Encoder);

class VitBase16Impl : public BackboneImpl {
 public:
  static constexpr int64_t kPatch = 16;
  static constexpr int64_t kDim = 768;

  VitBase16Impl()
      : conv_proj(register_module("conv_proj", conv(3, kDim, kPatch, kPatch, 0, 1, true))),
        encoder(register_module("encoder", Encoder((224 / kPatch) * (224 / kPatch) + 1, 12, kDim, 12, 3072))) {
    class_token = register_parameter("class_token", torch::zeros({1, 1, kDim}));
    torch::NoGradGuard no_grad;
    const double fan_in = 3.0 * kPatch * kPatch;
    const double sd = std::sqrt(1.0 / fan_in);
    conv_proj->weight.normal_(0.0, sd).clamp_(-2.0 * sd, 2.0 * sd);
    conv_proj->bias.zero_();
  }

  torch::Tensor feature_maps(const torch::Tensor& x) override {
    if (x.size(2) != 224 || x.size(3) != 224) throw Error("vit_base_patch16 expects 224x224 inputs");
    auto tokens = conv_proj(x).flatten(2).transpose(1, 2);  // N x 196 x D
    auto cls = class_token.expand({x.size(0), -1, -1});
    return encoder(torch::cat({cls, tokens}, 1));
  }
  torch::Tensor pool(const torch::Tensor& tokens) override {
    return tokens.select(1, 0);
  }

  Conv2d conv_proj;
  Encoder encoder;
  torch::Tensor class_token;
};

// ---------------------------------------------------------------- tiny test CNN

// Three conv blocks, ~6k parameters; 32 x 14 x 14 maps at 224 input.
class TinyTestCnnImpl : public BackboneImpl {
 public:
  TinyTestCnnImpl()
      : conv1(register_module("conv1", conv(3, 8, 4, 4))),
        bn1(register_module("bn1", BatchNorm2d(8))),
        conv2(register_module("conv2", conv(8, 16, 3, 1, 1))),
        bn2(register_module("bn2", BatchNorm2d(16))),
        conv3(register_module("conv3", conv(16, 32, 3, 1, 1))),
        bn3(register_module("bn3", BatchNorm2d(32))) {
    init_cnn(*this);
  }

  torch::Tensor feature_maps(const torch::Tensor& x) override {
    auto y = F::max_pool2d(torch::relu(bn1(conv1(x))), F::MaxPool2dFuncOptions(2));
    y = F::max_pool2d(torch::relu(bn2(conv2(y))), F::MaxPool2dFuncOptions(2));
    return torch::relu(bn3(conv3(y)));
  }
  torch::Tensor pool(const torch::Tensor& maps) override {
    return F::adaptive_avg_pool2d(maps, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
  }

  Conv2d conv1;
  BatchNorm2d bn1;
  Conv2d conv2;
  BatchNorm2d bn2;
  Conv2d conv3;
  BatchNorm2d bn3;
};

}  // namespace

std::shared_ptr<BackboneImpl> make_backbone(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::kDenseNet121: return std::make_shared<DenseNet121Impl>();
    case BackboneKind::kResNet50: return std::make_shared<ResNet50Impl>();
    case BackboneKind::kEfficientNetB3: return std::make_shared<EfficientNetB3Impl>();
    case BackboneKind::kVitBasePatch16: return std::make_shared<VitBase16Impl>();
    case BackboneKind::kTinyTestCnn: return std::make_shared<TinyTestCnnImpl>();
  }
  throw Error("unsupported backbone kind");
}

}  // namespace dacnet::nn
