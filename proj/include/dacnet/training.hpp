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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dacnet/checkpoint.hpp"
#include "dacnet/dataset.hpp"
#include "dacnet/evaluation.hpp"
#include "dacnet/image_io.hpp"
#include "dacnet/inference.hpp"
#include "dacnet/models.hpp"
#include "dacnet/recipe.hpp"

namespace dacnet::nn {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_macro_auc;
  double val_macro_f1 = 0.0;
  double lr = 0.0;
};

class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void on_epoch(const EpochRecord& record) = 0;
};

class ConsoleSink : public MetricsSink {
 public:
  explicit ConsoleSink(std::ostream& out) : out_(out) {}
  void on_epoch(const EpochRecord& record) override;

 private:
  std::ostream& out_;
};

// Appends one CSV row per epoch, writing the header when the file is new.
class CsvSink : public MetricsSink {
 public:
  explicit CsvSink(std::filesystem::path path);
  void on_epoch(const EpochRecord& record) override;

 private:
  std::filesystem::path path_;
};

class FanOutSink : public MetricsSink {
 public:
  void add(std::shared_ptr<MetricsSink> sink) { sinks_.push_back(std::move(sink)); }
  void on_epoch(const EpochRecord& record) override;

 private:
  std::vector<std::shared_ptr<MetricsSink>> sinks_;
};

std::string history_csv_header();
std::string history_csv_row(const EpochRecord& r);

// Monitors a metric that should increase. A value counts as an improvement
// only when strictly above the best so far; after more than `patience`
// non-improving epochs the rate is multiplied by `factor` and the counter
// restarts.
class ReduceOnPlateau {
 public:
  ReduceOnPlateau(double factor, int patience, double min_lr = 0.0);

  // Returns the learning rate to use for the next epoch.
  double step(std::optional<double> metric, double lr);

  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  int reductions() const { return reductions_; }
  void restore(double best, int bad_epochs, int reductions);

 private:
  double factor_;
  int patience_;
  double min_lr_;
  double best_ = -std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
  int reductions_ = 0;
};

// Learning rate for epoch index t (0-based) of a cosine schedule with period t_max.
double cosine_annealing_lr(double base_lr, double min_lr, int t, int t_max);

struct TrainState {
  int epoch = 0;  // epochs completed
  std::optional<double> best_val_macro_auc;
  int best_epoch = 0;
  std::filesystem::path best_checkpoint;
  std::vector<EpochRecord> history;
  int epochs_since_improvement = 0;
  double lr = 0.0;
  double plateau_best = -std::numeric_limits<double>::infinity();
  int plateau_bad_epochs = 0;
  int plateau_reductions = 0;
  bool early_stopped = false;
};

std::string state_to_json(const TrainState& s);
TrainState state_from_json(const std::string& text);

// Model, optimizer and loss for one recipe; single writer of model state.
class Trainer {
 public:
  // load_pretrained = false skips the pretrained backbone file, for callers
  // that overwrite every weight afterwards.
  explicit Trainer(const ModelRecipe& recipe,
                   const std::optional<std::filesystem::path>& weights_dir = std::nullopt,
                   bool load_pretrained = true);

  // One optimizer step; returns the batch loss before the update.
  double train_step(const torch::Tensor& batch, const TargetArray& targets);

  // Eval-mode inference with the eval transform, batched.
  PredictionSet predict(const LabeledImages& data, std::optional<Split> split = std::nullopt);

  double lr() const;
  void set_lr(double lr);

  const ModelRecipe& recipe() const { return recipe_; }
  Classifier& model() { return model_; }
  torch::optim::Optimizer& optimizer() { return *optimizer_; }

 private:
  ModelRecipe recipe_;
  Classifier model_{nullptr};
  std::unique_ptr<torch::optim::Optimizer> optimizer_;
};

struct TrainOptions {
  // Receives config, best.ckpt, last.ckpt, history.csv; nothing is written
  // when empty.
  std::optional<std::filesystem::path> run_dir;
  std::optional<std::filesystem::path> weights_dir;
  MetricsSink* sink = nullptr;
};

struct TrainResult {
  TrainState state;
  std::optional<std::filesystem::path> last_checkpoint;
};

// runs/<name>/<UTC timestamp>, created; a numeric suffix avoids collisions.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& name);

// Full training run over the train and val splits of the manifest. Throws
// LeakageError when patients cross splits and Error on an empty train or
// val split or a non-finite loss (after writing nan_snapshot.json).
TrainResult train(const ModelRecipe& recipe, std::span<const ImageRecord> records,
                  const SplitManifest& manifest, const ImageSource& images,
                  const TrainOptions& options = {});

// Continues from a last.ckpt written by train(). The recipe must carry the
// checkpoint's fingerprint; its max_epochs may differ and bounds the run.
TrainResult resume(const ModelRecipe& recipe, const std::filesystem::path& checkpoint,
                   std::span<const ImageRecord> records, const SplitManifest& manifest,
                   const ImageSource& images, const TrainOptions& options = {});

}  // namespace dacnet::nn
