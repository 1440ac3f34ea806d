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

#include "dacnet/inference.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

#include "dacnet/errors.hpp"

namespace dacnet::nn {


torch::Tensor load_batch(const LabeledImages& data, std::span<const std::size_t> indices,
                         const std::function<Transform(std::size_t)>& transform_for, int workers) {
  if (!data.images) throw Error("no image source");
  std::vector<ImageTensorf> tensors(indices.size());
  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < indices.size(); i += stride) {
      const auto& rec = data.records[indices[i]];
      tensors[i] = transform_for(indices[i])(data.images->load(rec.image_id));
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp<int>(workers, 1, 64));
  if (n_threads == 1 || indices.size() < 2) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(n_threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, n_threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return to_batch(tensors);
}

TargetArray targets_of(std::span<const ImageRecord> records, std::span<const std::size_t> indices) {
  TargetArray t(static_cast<Eigen::Index>(indices.size()), kNumDiseases);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t k = 0; k < kNumDiseases; ++k) {
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          records[indices[i]].labels.test(DiseaseLabel::from_index(k)) ? 1 : 0;
    }
  }
  return t;
}

PredictionSet predict_records(Classifier& model, const TransformSpec& spec, const LabeledImages& data,
                              std::optional<Split> split, int batch_size, int workers) {
  if (batch_size < 1) throw Error("batch size must be >= 1");
  const Transform eval = build_eval_transform(spec);
  const auto transform_for = [&](std::size_t) { return eval; };
  const std::size_t n = data.records.size();
  PredictionSet out;
  out.split = split;
  out.scores.resize(static_cast<Eigen::Index>(n), kNumDiseases);
  ScoreArray logits(static_cast<Eigen::Index>(n), kNumDiseases);
  model->eval();
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(n, start + static_cast<std::size_t>(batch_size)); ++i) {
      idx.push_back(i);
    }
    const InferenceOutput o = predict_probabilities(model, load_batch(data, idx, transform_for, workers));
    const auto s = static_cast<Eigen::Index>(start);
    const auto m = static_cast<Eigen::Index>(idx.size());
    out.scores.middleRows(s, m) = o.probabilities;
    logits.middleRows(s, m) = o.logits;
  }
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  out.targets = targets_of(data.records, all);
  for (const auto& r : data.records) out.image_ids.push_back(r.image_id);
  out.logits = std::move(logits);
  return out;
}

DiseaseScores predict_image(Classifier& model, const TransformSpec& spec, const GrayImagef& image) {
  const ImageTensorf input = build_eval_transform(spec)(image);
  const InferenceOutput o = predict_probabilities(model, to_batch(std::span<const ImageTensorf>(&input, 1)));
  DiseaseScores p{};
  for (std::size_t k = 0; k < kNumDiseases; ++k) p[k] = o.probabilities(0, static_cast<Eigen::Index>(k));
  return p;
}

DiseaseLabel top_disease(const DiseaseScores& probabilities) {
  const auto it = std::max_element(probabilities.begin(), probabilities.end());
  return DiseaseLabel::from_index(static_cast<int>(it - probabilities.begin()));
}

Explanation explain_image(Classifier& model, const TransformSpec& spec, const GrayImagef& image,
                          std::optional<DiseaseLabel> target) {
  Explanation e;
  e.probabilities = predict_image(model, spec, image);
  const DiseaseLabel disease = target.value_or(top_disease(e.probabilities));
  CamCapture cam(model);
  cam.run(build_eval_transform(spec)(image), disease);
  e.heatmap = make_heatmap(cam.activations(), cam.gradients(), cam.height(), cam.width(), disease);
  e.overlay = overlay(e.heatmap.upsampled, resize(image, kInputSize, kInputSize));
  return e;
}

}  // namespace dacnet::nn
