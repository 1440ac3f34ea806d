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

#include "dacnet/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "dacnet/dataset.hpp"
#include "dacnet/errors.hpp"
#include "dacnet/evaluation.hpp"
#include "dacnet/image_io.hpp"
#include "dacnet/inference.hpp"
#include "dacnet/recipe.hpp"
#include "dacnet/service.hpp"
#include "dacnet/text.hpp"
#include "dacnet/training.hpp"

namespace dacnet::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kDefaultMetadata = "Data_Entry_2017.csv";
constexpr const char* kDefaultManifest = "splits.tsv";

struct Common {
  std::string data_dir = ".";
  std::string run_dir = ".";
};

// Existing relative paths are taken as given; others are looked up below --data-dir.
fs::path input_path(const Common& c, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  return fs::path(c.data_dir) / path;
}

fs::path output_path(const Common& c, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute()) return path;
  return fs::path(c.run_dir) / path;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct Stamp {
  std::string command;
  std::vector<std::string> args;
  std::optional<std::uint64_t> seed;
  std::string config_hash;
  std::vector<fs::path> artifacts;
};

// <dir>/<command>.stamp.json beside the first artifact, else in --run-dir.
void write_stamp(const Common& c, const Stamp& s) {
  const fs::path dir = s.artifacts.empty() || !s.artifacts.front().has_parent_path()
                           ? fs::path(c.run_dir)
                           : s.artifacts.front().parent_path();
  fs::create_directories(dir);
  json j;
  j["command"] = s.command;
  j["args"] = s.args;
  j["seed"] = s.seed ? json(*s.seed) : json(nullptr);
  j["config_hash"] = s.config_hash.empty() ? json(nullptr) : json(s.config_hash);
  j["version"] = DACNET_VERSION;
  j["created"] = utc_now();
  json artifacts = json::array();
  for (const auto& a : s.artifacts) artifacts.push_back(a.string());
  j["artifacts"] = artifacts;
  std::ofstream(dir / (s.command + ".stamp.json")) << j.dump(2) << '\n';
}

ModelRecipe recipe_from_argument(const Common& c, const std::string& arg) {
  for (const char* preset : {"replicate_chexnet", "dacnet", "vit_transformer"}) {
    if (arg == preset) return preset_recipe(arg);
  }
  return load_recipe(input_path(c, arg));
}

Split split_argument(const std::string& s) {
  const auto split = split_from_string(s);
  if (!split) throw Error("unknown split '" + s + "' (expected train, val or test)");
  return *split;
}

struct DataArgs {
  std::string metadata = kDefaultMetadata;
  std::string manifest = kDefaultManifest;
  std::string images;  // defaults to --data-dir
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--metadata", d.metadata, "Metadata CSV (relative to --data-dir)")->capture_default_str();
  cmd->add_option("--manifest", d.manifest, "Split manifest (relative to --data-dir)")->capture_default_str();
  cmd->add_option("--images", d.images, "Image root searched recursively (default: --data-dir)");
}

struct LoadedData {
  Catalog catalog;
  SplitManifest manifest;
  std::unique_ptr<DirectoryImageSource> images;
};

LoadedData load_data(const Common& c, const DataArgs& d) {
  LoadedData out;
  out.catalog = parse_catalog(input_path(c, d.metadata));
  out.manifest = read_manifest(input_path(c, d.manifest));
  out.images = std::make_unique<DirectoryImageSource>(d.images.empty() ? fs::path(c.data_dir) : input_path(c, d.images));
  return out;
}

PredictionSet predict_split(const nn::LoadedCheckpoint& ckpt, const LoadedData& data, Split split) {
  assert_patient_disjoint(data.catalog.records, data.manifest);
  const auto records = select_split(data.catalog.records, data.manifest, split);
  if (records.empty()) throw Error("split " + std::string(to_string(split)) + " has no images");
  nn::Classifier model = ckpt.model;
  return nn::predict_records(model, ckpt.recipe.transform, nn::LabeledImages{records, data.images.get()}, split,
                             ckpt.recipe.batch_size, ckpt.recipe.workers);
}

std::atomic<service::Server*> g_server{nullptr};

extern "C" void handle_stop_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

// SIGINT/SIGTERM stop the server for as long as this object lives.
class StopOnSignal {
 public:
  explicit StopOnSignal(service::Server& server) {
    g_server = &server;
    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);
  }
  ~StopOnSignal() {
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);
    g_server = nullptr;
  }
  StopOnSignal(const StopOnSignal&) = delete;
  StopOnSignal& operator=(const StopOnSignal&) = delete;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-label chest X-ray classification toolkit", "dacnet"};
  app.set_version_flag("--version", std::string(DACNET_VERSION));
  app.require_subcommand(1);
  Common common;
  app.add_option("--data-dir", common.data_dir, "Base directory for relative input paths")->capture_default_str();
  app.add_option("--run-dir", common.run_dir, "Base directory for relative output paths")->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "Print the label-combination table of a metadata file");
  std::string stats_metadata = kDefaultMetadata;
  std::size_t stats_top = 14;
  std::string stats_out;
  stats->add_option("--metadata", stats_metadata, "Metadata CSV")->capture_default_str();
  stats->add_option("--top", stats_top, "Rows to print (0 = all)")->capture_default_str();
  stats->add_option("--out", stats_out, "Also write every combination as CSV");

  // prepare-splits
  auto* prep = app.add_subcommand("prepare-splits", "Write a patient-wise train/val/test manifest");
  std::string prep_metadata = kDefaultMetadata;
  std::string prep_out = kDefaultManifest;
  std::uint64_t prep_seed = 17;
  std::vector<double> prep_ratios{0.7, 0.1, 0.2};
  prep->add_option("--metadata", prep_metadata, "Metadata CSV")->capture_default_str();
  prep->add_option("--out", prep_out, "Manifest output path (relative to --run-dir)")->capture_default_str();
  prep->add_option("--seed", prep_seed, "Split seed")->capture_default_str();
  prep->add_option("--ratios", prep_ratios, "train,val,test fractions")->delimiter(',')->expected(3);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a recipe; writes runs/<name>/<timestamp>/");
  std::string train_recipe;
  DataArgs train_data;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs;
  std::optional<int> train_workers;
  std::string train_resume;
  std::string train_weights;
  std::string train_runs = "runs";
  train_cmd->add_option("--recipe", train_recipe, "Recipe file or preset name")->required();
  add_data_options(train_cmd, train_data);
  train_cmd->add_option("--seed", train_seed, "Override the recipe seed");
  train_cmd->add_option("--max-epochs", train_epochs, "Override max_epochs");
  train_cmd->add_option("--workers", train_workers, "Override data-loading threads");
  train_cmd->add_option("--resume", train_resume, "Continue from a last.ckpt");
  train_cmd->add_option("--weights-dir", train_weights, "Pretrained backbone cache");
  train_cmd->add_option("--runs-root", train_runs, "Root of run directories (relative to --run-dir)")
      ->capture_default_str();

  // tune-thresholds
  auto* tune = app.add_subcommand("tune-thresholds", "Fit per-disease F1 thresholds on the validation split");
  std::string tune_ckpt;
  std::string tune_predictions;
  std::string tune_out = "thresholds.json";
  DataArgs tune_data;
  tune->add_option("--checkpoint", tune_ckpt, "Model checkpoint (scores the val split)");
  tune->add_option("--predictions", tune_predictions, "Saved validation predictions instead of a checkpoint");
  tune->add_option("--out", tune_out, "Thresholds output path")->capture_default_str();
  add_data_options(tune, tune_data);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Per-disease AUC/F1 report for one split");
  std::string eval_ckpt;
  std::string eval_predictions;
  std::string eval_split = "test";
  std::string eval_thresholds = "0.5";
  std::string eval_out;
  std::string eval_loss;
  std::string eval_name;
  DataArgs eval_data;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint");
  eval_cmd->add_option("--predictions", eval_predictions, "Saved predictions instead of a checkpoint");
  eval_cmd->add_option("--split", eval_split, "Split to score with a checkpoint")->capture_default_str();
  eval_cmd->add_option("--thresholds", eval_thresholds, "Thresholds file or a global value")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Report path (default report_<split>.json)");
  eval_cmd->add_option("--loss", eval_loss, "bce or focal for saved predictions (default: checkpoint recipe or bce)");
  eval_cmd->add_option("--name", eval_name, "Model name in the report");
  add_data_options(eval_cmd, eval_data);

  // compare
  auto* compare = app.add_subcommand("compare", "Per-disease AUC comparison of several reports");
  std::vector<std::string> compare_reports;
  std::string compare_baseline;
  std::string compare_baseline_name = "CheXNet";
  std::string compare_out = "comparison.csv";
  compare->add_option("reports", compare_reports, "Report JSON files")->required();
  compare->add_option("--baseline", compare_baseline, "CSV disease,auc reference column");
  compare->add_option("--baseline-name", compare_baseline_name, "Baseline column title")->capture_default_str();
  compare->add_option("--out", compare_out, "CSV output path")->capture_default_str();

  // explain
  auto* explain = app.add_subcommand("explain", "Grad-CAM overlay for one image");
  std::string explain_ckpt;
  std::string explain_image;
  std::string explain_disease = "top1";
  std::string explain_out = "explain.png";
  explain->add_option("--checkpoint", explain_ckpt, "Model checkpoint")->required();
  explain->add_option("--image", explain_image, "Input image")->required();
  explain->add_option("--disease", explain_disease, "Disease name or top1")->capture_default_str();
  explain->add_option("--out", explain_out, "Overlay PNG path")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP inference service");
  std::string serve_ckpt;
  std::string serve_thresholds;
  int serve_port = 8080;
  std::string serve_host = "0.0.0.0";
  std::string serve_cors = "*";
  serve->add_option("--checkpoint", serve_ckpt, "Model checkpoint (env DACNET_CHECKPOINT overrides)");
  serve->add_option("--thresholds", serve_thresholds, "Fitted thresholds file");
  serve->add_option("--port", serve_port, "Port (env DACNET_PORT overrides)")->capture_default_str();
  serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
  serve->add_option("--cors-origin", serve_cors, "Allowed CORS origin")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << DACNET_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  Stamp stamp;
  stamp.args = args;
  try {
    if (*stats) {
      stamp.command = "stats";
      const Catalog catalog = parse_catalog(input_path(common, stats_metadata));
      const auto ranked = ranked_combinations(label_combination_stats(catalog.records));
      const std::size_t rows = stats_top == 0 ? ranked.size() : std::min(stats_top, ranked.size());
      out << std::fixed << std::setprecision(2);
      for (std::size_t i = 0; i < rows; ++i) {
        out << ranked[i].first << ' ' << ranked[i].second.count << ' ' << ranked[i].second.fraction * 100.0
            << "%\n";
      }
      out << std::defaultfloat;
      out << ranked.size() << " unique combinations over " << catalog.records.size() << " images\n";
      if (catalog.warnings.rejected_ages + catalog.warnings.rejected_genders > 0) {
        err << "warning: " << catalog.warnings.rejected_ages << " invalid ages and "
            << catalog.warnings.rejected_genders << " invalid genders were ignored\n";
      }
      if (!stats_out.empty()) {
        const fs::path path = output_path(common, stats_out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream csv(path);
        csv << "combination,count,percent\n";
        for (const auto& [key, stat] : ranked) {
          csv << '"' << key << "\"," << stat.count << ',' << format_double(stat.fraction * 100.0) << '\n';
        }
        stamp.artifacts.push_back(path);
      }
    } else if (*prep) {
      stamp.command = "prepare-splits";
      stamp.seed = prep_seed;
      const Catalog catalog = parse_catalog(input_path(common, prep_metadata));
      SplitRatios ratios{prep_ratios.at(0), prep_ratios.at(1), prep_ratios.at(2)};
      const SplitManifest manifest = make_patient_split(catalog.records, ratios, prep_seed);
      const fs::path path = output_path(common, prep_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_manifest(manifest, path);
      std::array<std::size_t, 3> counts{};
      for (const auto& [id, s] : manifest.split_of) ++counts[static_cast<std::size_t>(s)];
      out << "wrote " << path.string() << ": train " << counts[0] << ", val " << counts[1] << ", test "
          << counts[2] << " images\n";
      stamp.artifacts.push_back(path);
    } else if (*train_cmd) {
      stamp.command = "train";
      ModelRecipe recipe = recipe_from_argument(common, train_recipe);
      if (train_seed) recipe.seed = *train_seed;
      if (train_epochs) recipe.max_epochs = *train_epochs;
      if (train_workers) recipe.workers = *train_workers;
      recipe.validate();
      stamp.seed = recipe.seed;
      stamp.config_hash = config_hash(recipe);
      const LoadedData data = load_data(common, train_data);

      nn::ConsoleSink console(out);
      nn::TrainOptions options;
      options.sink = &console;
      if (!train_weights.empty()) options.weights_dir = input_path(common, train_weights);
      nn::TrainResult result;
      if (!train_resume.empty()) {
        const fs::path ckpt = input_path(common, train_resume);
        options.run_dir = ckpt.parent_path();
        result = nn::resume(recipe, ckpt, data.catalog.records, data.manifest, *data.images, options);
      } else {
        if (recipe.max_epochs > 0) options.run_dir = nn::make_run_dir(output_path(common, train_runs), recipe.name);
        result = nn::train(recipe, data.catalog.records, data.manifest, *data.images, options);
      }
      const auto& st = result.state;
      out << "epochs completed: " << st.epoch << (st.early_stopped ? " (early stop)" : "") << '\n';
      if (st.best_val_macro_auc) out << "best val macro-AUC " << *st.best_val_macro_auc << " at epoch " << st.best_epoch << '\n';
      if (options.run_dir) {
        out << "run directory: " << options.run_dir->string() << '\n';
        stamp.artifacts.push_back(*options.run_dir / "last.ckpt");
      } else {
        out << "max_epochs is 0; nothing trained, no checkpoint written\n";
      }
    } else if (*tune) {
      stamp.command = "tune-thresholds";
      PredictionSet preds;
      if (!tune_ckpt.empty() == !tune_predictions.empty()) {
        throw Error("tune-thresholds needs exactly one of --checkpoint or --predictions");
      }
      const fs::path path = output_path(common, tune_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      if (!tune_ckpt.empty()) {
        const auto ckpt = nn::load_checkpoint(input_path(common, tune_ckpt));
        stamp.seed = ckpt.recipe.seed;
        stamp.config_hash = config_hash(ckpt.recipe);
        preds = predict_split(ckpt, load_data(common, tune_data), Split::kVal);
        fs::path pred_path = path;
        pred_path.replace_extension(".val_predictions.csv");
        write_predictions(preds, pred_path);
        stamp.artifacts.push_back(pred_path);
      } else {
        preds = read_predictions(input_path(common, tune_predictions));
        if (!preds.split) err << "warning: predictions carry no split tag; thresholds are tagged unknown\n";
      }
      const auto grid = make_threshold_grid();
      const ThresholdSet t = tune_thresholds(preds, grid);
      write_thresholds(t, path, grid);
      stamp.artifacts.insert(stamp.artifacts.begin(), path);
      out << "fitted on " << to_string(t.provenance) << " (" << preds.size() << " images); wrote " << path.string()
          << '\n';
      for (std::size_t k = 0; k < kNumDiseases; ++k) {
        out << "  " << kDiseaseNames[k] << ' ' << format_double(t.t[k]) << '\n';
      }
      if (t.provenance == ThresholdProvenance::kTest) {
        err << "warning: thresholds fitted on the test split will be refused by evaluate\n";
      }
    } else if (*eval_cmd) {
      stamp.command = "evaluate";
      if (!eval_ckpt.empty() == !eval_predictions.empty()) {
        throw Error("evaluate needs exactly one of --checkpoint or --predictions");
      }
      // The leakage guard runs before any inference.
      const ThresholdSet thresholds = thresholds_from_argument(
          parse_double(eval_thresholds) ? eval_thresholds : input_path(common, eval_thresholds).string());
      if (thresholds.provenance == ThresholdProvenance::kTest) {
        throw LeakageError("thresholds were fitted on the test split; refit them on the validation split");
      }
      PredictionSet preds;
      LossSpec loss;
      std::string name = eval_name;
      const Split split = split_argument(eval_split);
      fs::path report_path = output_path(common, eval_out.empty() ? "report_" + std::string(to_string(split)) + ".json" : eval_out);
      if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
      if (!eval_ckpt.empty()) {
        const auto ckpt = nn::load_checkpoint(input_path(common, eval_ckpt));
        stamp.seed = ckpt.recipe.seed;
        stamp.config_hash = config_hash(ckpt.recipe);
        loss = ckpt.recipe.loss;
        if (name.empty()) name = ckpt.recipe.name;
        preds = predict_split(ckpt, load_data(common, eval_data), split);
        fs::path pred_path = report_path;
        pred_path.replace_extension(".predictions.csv");
        write_predictions(preds, pred_path);
        stamp.artifacts.push_back(pred_path);
      } else {
        preds = read_predictions(input_path(common, eval_predictions));
      }
      if (eval_loss == "focal") {
        loss = LossSpec{LossKind::kFocal, {}};
      } else if (eval_loss == "bce") {
        loss = LossSpec{};
      } else if (!eval_loss.empty()) {
        throw Error("--loss must be bce or focal");
      }
      const EvalReport report = evaluate(preds, thresholds, loss, name.empty() ? "model" : name);
      {
        std::ofstream(report_path) << report_to_json(report) << '\n';
        fs::path text_path = report_path;
        text_path.replace_extension(".txt");
        std::ofstream(text_path) << report_to_text(report);
        stamp.artifacts.insert(stamp.artifacts.begin(), {report_path, text_path});
      }
      out << report_to_text(report);
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    } else if (*compare) {
      stamp.command = "compare";
      std::vector<EvalReport> reports;
      for (const auto& r : compare_reports) {
        std::ifstream in(input_path(common, r));
        if (!in) throw Error("cannot open report " + r);
        std::stringstream buf;
        buf << in.rdbuf();
        reports.push_back(report_from_json(buf.str()));
      }
      std::optional<BaselineColumn> baseline;
      if (!compare_baseline.empty()) baseline = read_baseline(input_path(common, compare_baseline), compare_baseline_name);
      const ComparisonTable table = render_comparison(reports, baseline);
      out << comparison_to_text(table);
      const fs::path path = output_path(common, compare_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      std::ofstream(path) << comparison_to_csv(table);
      stamp.artifacts.push_back(path);
    } else if (*explain) {
      stamp.command = "explain";
      auto ckpt = nn::load_checkpoint(input_path(common, explain_ckpt));
      stamp.seed = ckpt.recipe.seed;
      stamp.config_hash = config_hash(ckpt.recipe);
      std::optional<DiseaseLabel> target;
      if (explain_disease != "top1") target = DiseaseLabel::parse(explain_disease);
      const GrayImagef image = read_image(input_path(common, explain_image));
      const nn::Explanation e = nn::explain_image(ckpt.model, ckpt.recipe.transform, image, target);
      const fs::path path = output_path(common, explain_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_png(e.overlay, path);
      fs::path heat_path = path;
      heat_path.replace_extension(".heatmap.png");
      write_png(GrayImagef(e.heatmap.upsampled.cast<float>()), heat_path);
      stamp.artifacts = {path, heat_path};
      out << "Grad-CAM for " << e.heatmap.target.name() << " (p = "
          << format_double(e.probabilities[e.heatmap.target.index()]) << "); wrote " << path.string() << '\n';
    } else if (*serve) {
      stamp.command = "serve";
      if (const char* env = std::getenv("DACNET_CHECKPOINT"); env && *env) serve_ckpt = env;
      if (const char* env = std::getenv("DACNET_PORT"); env && *env) {
        const auto v = parse_int64(env);
        if (!v || *v < 0 || *v > 65535) throw Error(std::string("DACNET_PORT is not a port number: ") + env);
        serve_port = static_cast<int>(*v);
      }
      if (serve_ckpt.empty()) throw Error("serve needs --checkpoint or DACNET_CHECKPOINT");
      service::ServerOptions opts;
      opts.host = serve_host;
      opts.port = serve_port;
      opts.cors_origin = serve_cors;
      service::Server server(opts);
      const int port = server.start();
      const StopOnSignal stop_on_signal(server);
      out << "listening on " << serve_host << ':' << port << " (loading model)" << std::endl;
      std::optional<fs::path> thresholds;
      if (serve_thresholds.empty()) {
        err << "warning: no --thresholds given; flags use the global 0.5 threshold\n";
      } else {
        thresholds = input_path(common, serve_thresholds);
      }
      auto predictor = service::load_predictor(input_path(common, serve_ckpt), thresholds);
      stamp.seed = std::nullopt;
      stamp.config_hash = predictor->fingerprint();
      write_stamp(common, stamp);
      server.attach(predictor);
      out << "model " << predictor->fingerprint() << " ready" << std::endl;
      server.wait();
      return kExitOk;
    }
    write_stamp(common, stamp);
  } catch (const LeakageError& e) {
    err << "error: leakage: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace dacnet::cli
