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

#include "dacnet/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "dacnet/errors.hpp"
#include "dacnet/random.hpp"
#include "dacnet/text.hpp"

namespace dacnet::nn {

using nlohmann::json;

namespace {

// Stream tags for derive_seed so that independent random streams never collide.
constexpr std::uint64_t kInitStream = 0x1;
constexpr std::uint64_t kShuffleStream = 0x2;
constexpr std::uint64_t kAugmentStream = 0x3;
constexpr std::uint64_t kTorchStream = 0x4;

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

json record_to_json(const EpochRecord& r) {
  json j{{"epoch", r.epoch},
         {"train_loss", r.train_loss},
         {"val_loss", r.val_loss},
         {"val_macro_f1", r.val_macro_f1},
         {"lr", r.lr}};
  j["val_macro_auc"] = r.val_macro_auc ? json(*r.val_macro_auc) : json(nullptr);
  return j;
}

EpochRecord record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.train_loss = j.at("train_loss").get<double>();
  r.val_loss = j.at("val_loss").get<double>();
  r.val_macro_f1 = j.at("val_macro_f1").get<double>();
  r.lr = j.at("lr").get<double>();
  if (!j.at("val_macro_auc").is_null()) r.val_macro_auc = j.at("val_macro_auc").get<double>();
  return r;
}

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const OptimizerSpec& spec,
                                                        std::vector<torch::Tensor> params) {
  if (spec.kind == OptimizerKind::kAdamW) {
    return std::make_unique<torch::optim::AdamW>(
        std::move(params), torch::optim::AdamWOptions(spec.lr).weight_decay(spec.weight_decay));
  }
  return std::make_unique<torch::optim::Adam>(
      std::move(params), torch::optim::AdamOptions(spec.lr).weight_decay(spec.weight_decay));
}

ThresholdSet validation_thresholds(const ModelRecipe& recipe, const PredictionSet& val) {
  if (recipe.threshold_policy == ThresholdPolicy::kPerClassTuned) {
    const auto grid = make_threshold_grid();
    return tune_thresholds(val, grid);
  }
  return ThresholdSet::global(recipe.global_threshold);
}

bool improves(const std::optional<double>& metric, const std::optional<double>& best) {
  if (!metric || std::isnan(*metric)) return false;
  return !best || *metric > *best;
}

void write_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << history_csv_header() << '\n';
  for (const auto& r : history) out << history_csv_row(r) << '\n';
}

void write_nan_snapshot(const std::filesystem::path& dir, int epoch, std::size_t step, double lr,
                        const std::vector<std::string>& ids, const TargetArray& targets,
                        const ScoreArray& logits) {
  json j;
  j["epoch"] = epoch;
  j["step"] = step;
  j["lr"] = lr;
  j["image_ids"] = ids;
  json rows = json::array();
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double v = logits(i, k);
      row.push_back(std::isfinite(v) ? json(v) : json(format_double(v)));
    }
    rows.push_back(row);
  }
  j["logits"] = rows;
  json t = json::array();
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < targets.cols(); ++k) row.push_back(int(targets(i, k)));
    t.push_back(row);
  }
  j["targets"] = t;
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "nan_snapshot.json") << j.dump(2) << '\n';
}

ScoreArray to_eigen(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kDouble).contiguous();
  ScoreArray out(c.size(0), c.size(1));
  auto acc = c.accessor<double, 2>();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index k = 0; k < out.cols(); ++k) out(i, k) = acc[i][k];
  }
  return out;
}

torch::Tensor to_tensor(const ScoreArray& a) {
  auto t = torch::empty({a.rows(), a.cols()}, torch::kDouble);
  auto acc = t.accessor<double, 2>();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) acc[i][k] = a(i, k);
  }
  return t;
}

// Shared epoch loop for train() and resume().
TrainResult run_epochs(Trainer& trainer, TrainState state, std::span<const ImageRecord> train_set,
                       std::span<const ImageRecord> val_set, const ImageSource& images,
                       const TrainOptions& options) {
  const ModelRecipe& recipe = trainer.recipe();
  const LabeledImages train_data{train_set, &images};
  const LabeledImages val_data{val_set, &images};
  const auto batch_size = static_cast<std::size_t>(recipe.batch_size);
  const double base_lr = recipe.optimizer.lr;

  ReduceOnPlateau plateau(recipe.scheduler.factor, recipe.scheduler.patience, recipe.scheduler.min_lr);
  plateau.restore(state.plateau_best, state.plateau_bad_epochs, state.plateau_reductions);

  std::optional<std::filesystem::path> last;
  if (options.run_dir) {
    std::filesystem::create_directories(*options.run_dir);
    save_recipe(recipe, *options.run_dir / "config");
    last = *options.run_dir / "last.ckpt";
  }

  while (state.epoch < recipe.max_epochs && !state.early_stopped) {
    const int epoch = state.epoch;  // 0-based index of the epoch being run
    if (recipe.scheduler.kind == SchedulerKind::kCosineAnnealing) {
      state.lr = cosine_annealing_lr(base_lr, recipe.scheduler.min_lr, epoch, recipe.scheduler.t_max);
    }
    trainer.set_lr(state.lr);
    torch::manual_seed(derive_seed(recipe.seed, kTorchStream, static_cast<std::uint64_t>(epoch)));

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(recipe.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    const auto transform_for = [&](std::size_t index) {
      return build_train_transform(
          recipe.transform,
          derive_seed(recipe.seed, kAugmentStream, (static_cast<std::uint64_t>(epoch) << 32) ^ index));
    };

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, step = 0; start < order.size(); start += batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      auto batch = load_batch(train_data, idx, transform_for, recipe.workers);
      TargetArray targets = targets_of(train_set, idx);
      double loss = 0.0;
      try {
        loss = trainer.train_step(batch, targets);
      } catch (const Error&) {
        if (options.run_dir) {
          std::vector<std::string> ids;
          for (auto i : idx) ids.push_back(train_set[i].image_id);
          torch::NoGradGuard guard;
          trainer.model()->eval();
          ScoreArray logits = to_eigen(trainer.model()->forward(batch));
          write_nan_snapshot(*options.run_dir, epoch + 1, step, state.lr, ids, targets, logits);
        }
        throw;
      }
      loss_sum += loss * static_cast<double>(idx.size());
      seen += idx.size();
    }

    PredictionSet val = trainer.predict(val_data, Split::kVal);
    const ThresholdSet thresholds = validation_thresholds(recipe, val);
    const EvalReport report = evaluate(val, thresholds, recipe.loss, recipe.name);

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.val_loss = report.mean_loss;
    rec.val_macro_auc = report.macro_auc;
    rec.val_macro_f1 = report.macro_f1;
    rec.lr = state.lr;
    state.history.push_back(rec);
    state.epoch = epoch + 1;

    const bool first = state.best_epoch == 0;
    const bool better = improves(rec.val_macro_auc, state.best_val_macro_auc);
    if (better) {
      state.best_val_macro_auc = rec.val_macro_auc;
      state.epochs_since_improvement = 0;
    } else {
      ++state.epochs_since_improvement;
    }
    if (better || first) {
      state.best_epoch = rec.epoch;
      if (options.run_dir) state.best_checkpoint = *options.run_dir / "best.ckpt";
    }
    if (state.epochs_since_improvement >= recipe.early_stop_patience) state.early_stopped = true;

    if (recipe.scheduler.kind == SchedulerKind::kReduceOnPlateau) {
      state.lr = plateau.step(rec.val_macro_auc, state.lr);
      state.plateau_best = plateau.best();
      state.plateau_bad_epochs = plateau.bad_epochs();
      state.plateau_reductions = plateau.reductions();
    }

    if (options.run_dir) {
      const std::string state_json = state_to_json(state);
      if (better || first) {
        save_checkpoint(state.best_checkpoint, trainer.model(), make_meta(recipe, state_json));
      }
      save_checkpoint(*last, trainer.model(), make_meta(recipe, state_json), &trainer.optimizer());
      write_history(*options.run_dir / "history.csv", state.history);
    }
    if (options.sink) options.sink->on_epoch(rec);
  }
  return TrainResult{std::move(state), last};
}

struct SplitData {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> val;
};

SplitData prepare_splits(std::span<const ImageRecord> records, const SplitManifest& manifest) {
  assert_patient_disjoint(records, manifest);
  SplitData d{select_split(records, manifest, Split::kTrain), select_split(records, manifest, Split::kVal)};
  if (d.train.empty()) throw Error("the train split is empty");
  if (d.val.empty()) throw Error("the validation split is empty");
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// Metrics sinks

std::string history_csv_header() { return "epoch,train_loss,val_loss,val_macro_auc,val_macro_f1,lr"; }

std::string history_csv_row(const EpochRecord& r) {
  std::ostringstream os;
  os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
     << format_optional(r.val_macro_auc) << ',' << format_double(r.val_macro_f1) << ','
     << format_double(r.lr);
  return os.str();
}

void ConsoleSink::on_epoch(const EpochRecord& r) {
  out_ << "epoch " << r.epoch << std::fixed << std::setprecision(4) << "  train_loss " << r.train_loss
       << "  val_loss " << r.val_loss << "  val_macro_auc ";
  if (r.val_macro_auc) {
    out_ << *r.val_macro_auc;
  } else {
    out_ << "n/a";
  }
  out_ << "  val_macro_f1 " << r.val_macro_f1 << std::defaultfloat << "  lr " << r.lr << std::endl;
}

CsvSink::CsvSink(std::filesystem::path path) : path_(std::move(path)) {}

void CsvSink::on_epoch(const EpochRecord& r) {
  const bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error("cannot append to " + path_.string());
  if (fresh) out << history_csv_header() << '\n';
  out << history_csv_row(r) << '\n';
}

void FanOutSink::on_epoch(const EpochRecord& r) {
  for (auto& s : sinks_) s->on_epoch(r);
}

// ---------------------------------------------------------------------------
// Schedulers

ReduceOnPlateau::ReduceOnPlateau(double factor, int patience, double min_lr)
    : factor_(factor), patience_(patience), min_lr_(min_lr) {
  if (!(factor > 0.0 && factor < 1.0)) throw Error("reduce_on_plateau factor must be in (0, 1)");
  if (patience < 0) throw Error("reduce_on_plateau patience must be >= 0");
}

double ReduceOnPlateau::step(std::optional<double> metric, double lr) {
  if (metric && !std::isnan(*metric) && *metric > best_) {
    best_ = *metric;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ > patience_) {
    bad_epochs_ = 0;
    const double reduced = std::max(lr * factor_, min_lr_);
    if (reduced < lr) ++reductions_;
    return reduced;
  }
  return lr;
}

void ReduceOnPlateau::restore(double best, int bad_epochs, int reductions) {
  best_ = best;
  bad_epochs_ = bad_epochs;
  reductions_ = reductions;
}

double cosine_annealing_lr(double base_lr, double min_lr, int t, int t_max) {
  if (t_max <= 0) throw Error("cosine_annealing t_max must be positive");
  const double phase = static_cast<double>(t % (2 * t_max)) / t_max;
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(M_PI * phase));
}

// ---------------------------------------------------------------------------
// State

std::string state_to_json(const TrainState& s) {
  json j;
  j["epoch"] = s.epoch;
  j["best_val_macro_auc"] = s.best_val_macro_auc ? json(*s.best_val_macro_auc) : json(nullptr);
  j["best_epoch"] = s.best_epoch;
  j["best_checkpoint"] = s.best_checkpoint.string();
  j["epochs_since_improvement"] = s.epochs_since_improvement;
  j["lr"] = s.lr;
  j["plateau_best"] = std::isfinite(s.plateau_best) ? json(s.plateau_best) : json(nullptr);
  j["plateau_bad_epochs"] = s.plateau_bad_epochs;
  j["plateau_reductions"] = s.plateau_reductions;
  j["early_stopped"] = s.early_stopped;
  json h = json::array();
  for (const auto& r : s.history) h.push_back(record_to_json(r));
  j["history"] = h;
  return j.dump();
}

TrainState state_from_json(const std::string& text) {
  TrainState s;
  try {
    const json j = json::parse(text);
    s.epoch = j.at("epoch").get<int>();
    if (!j.at("best_val_macro_auc").is_null()) s.best_val_macro_auc = j.at("best_val_macro_auc").get<double>();
    s.best_epoch = j.at("best_epoch").get<int>();
    s.best_checkpoint = j.at("best_checkpoint").get<std::string>();
    s.epochs_since_improvement = j.at("epochs_since_improvement").get<int>();
    s.lr = j.at("lr").get<double>();
    if (!j.at("plateau_best").is_null()) s.plateau_best = j.at("plateau_best").get<double>();
    s.plateau_bad_epochs = j.at("plateau_bad_epochs").get<int>();
    s.plateau_reductions = j.at("plateau_reductions").get<int>();
    s.early_stopped = j.at("early_stopped").get<bool>();
    for (const auto& r : j.at("history")) s.history.push_back(record_from_json(r));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed training state: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(const ModelRecipe& recipe, const std::optional<std::filesystem::path>& weights_dir,
                 bool load_pretrained)
    : recipe_(recipe) {
  recipe_.validate();
  BackboneSpec spec = recipe_.backbone;
  spec.pretrained = spec.pretrained && load_pretrained;
  model_ = build_classifier(spec, derive_seed(recipe_.seed, kInitStream), weights_dir);
  optimizer_ = make_optimizer(recipe_.optimizer, model_->parameters());
}

double Trainer::train_step(const torch::Tensor& batch, const TargetArray& targets) {
  if (batch.size(0) != targets.rows()) throw Error("train_step: batch and target sizes differ");
  model_->train();
  optimizer_->zero_grad();
  torch::Tensor logits = model_->forward(batch);
  const ScoreArray z = to_eigen(logits);
  if (!z.allFinite()) throw Error("non-finite logits during training");
  const auto [loss, grad] = loss_value_and_grad(recipe_.loss, z, targets);
  if (!std::isfinite(loss)) throw Error("non-finite training loss");
  logits.backward(to_tensor(grad).to(logits.dtype()));
  optimizer_->step();
  return loss;
}

PredictionSet Trainer::predict(const LabeledImages& data, std::optional<Split> split) {
  return predict_records(model_, recipe_.transform, data, split, recipe_.batch_size, recipe_.workers);
}

double Trainer::lr() const {
  const auto& group = optimizer_->param_groups().front();
  return group.options().get_lr();
}

void Trainer::set_lr(double lr) {
  for (auto& group : optimizer_->param_groups()) group.options().set_lr(lr);
}

// ---------------------------------------------------------------------------
// Entry points

std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& name) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  const auto base = root / name;
  auto dir = base / stamp.str();
  for (int i = 1; std::filesystem::exists(dir); ++i) dir = base / (stamp.str() + "-" + std::to_string(i));
  std::filesystem::create_directories(dir);
  return dir;
}

TrainResult train(const ModelRecipe& recipe, std::span<const ImageRecord> records,
                  const SplitManifest& manifest, const ImageSource& images, const TrainOptions& options) {
  recipe.validate();
  SplitData d = prepare_splits(records, manifest);
  TrainState state;
  state.lr = recipe.optimizer.lr;
  if (recipe.max_epochs == 0) return TrainResult{std::move(state), std::nullopt};
  Trainer trainer(recipe, options.weights_dir);
  return run_epochs(trainer, std::move(state), d.train, d.val, images, options);
}

TrainResult resume(const ModelRecipe& recipe, const std::filesystem::path& checkpoint,
                   std::span<const ImageRecord> records, const SplitManifest& manifest,
                   const ImageSource& images, const TrainOptions& options) {
  recipe.validate();
  LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  if (loaded.meta.fingerprint != recipe_fingerprint(recipe)) {
    throw FingerprintError("checkpoint fingerprint " + loaded.meta.fingerprint +
                           " does not match the recipe fingerprint " + recipe_fingerprint(recipe));
  }
  if (loaded.meta.state_json.empty()) throw Error("checkpoint " + checkpoint.string() + " carries no training state");
  TrainState state = state_from_json(loaded.meta.state_json);
  if (state.epoch >= recipe.max_epochs || state.early_stopped) {
    return TrainResult{std::move(state), checkpoint};
  }
  SplitData d = prepare_splits(records, manifest);

  Trainer trainer(recipe, options.weights_dir, /*load_pretrained=*/false);
  {
    torch::NoGradGuard guard;
    auto src = loaded.model->named_parameters();
    for (auto& p : trainer.model()->named_parameters()) p.value().copy_(src[p.key()]);
    auto src_buffers = loaded.model->named_buffers();
    for (auto& b : trainer.model()->named_buffers()) b.value().copy_(src_buffers[b.key()]);
  }
  load_optimizer_state(checkpoint, trainer.optimizer());
  TrainOptions opts = options;
  if (!opts.run_dir) opts.run_dir = checkpoint.parent_path();
  return run_epochs(trainer, std::move(state), d.train, d.val, images, opts);
}

}  // namespace dacnet::nn
