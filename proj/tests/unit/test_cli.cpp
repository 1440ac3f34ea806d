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

#include "../support/torch_doctest.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "dacnet/cli.hpp"
#include "dacnet/evaluation.hpp"
#include "dacnet/recipe.hpp"
#include "../support/synthetic.hpp"

#include <json.hpp>

using namespace dacnet;
using nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome dacnet_cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

// Small on-disk dataset in the public layout: metadata CSV plus PNGs.
struct DiskCorpus {
  testing::TempDir dir;
  std::vector<ImageRecord> records;

  explicit DiskCorpus(std::size_t patients) {
    records = testing::synthetic_records(patients, 21);
    testing::write_text(dir / "Data_Entry_2017.csv", testing::metadata_csv(records));
    testing::write_motif_images(records, dir / "images_001" / "images", 21, 48);
  }
  std::string data_dir() const { return dir.path().string(); }
};

}  // namespace

TEST_CASE("usage errors exit 2, help exits 0") {
  CHECK(dacnet_cli({}).code == cli::kExitUsage);
  const Outcome unknown = dacnet_cli({"frobnicate"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  CHECK(dacnet_cli({"stats", "--no-such-flag"}).code == cli::kExitUsage);
  CHECK(dacnet_cli({"train"}).code == cli::kExitUsage);
  CHECK(dacnet_cli({"prepare-splits", "--ratios", "0.5,0.5"}).code == cli::kExitUsage);
  for (const char* sub : {"stats", "prepare-splits", "train", "tune-thresholds", "evaluate", "compare", "explain",
                          "serve"}) {
    const Outcome help = dacnet_cli({sub, "--help"});
    CAPTURE(sub);
    CHECK(help.code == cli::kExitOk);
    CHECK(help.out.find(sub) != std::string::npos);
  }
  CHECK(dacnet_cli({"--version"}).out.find(DACNET_VERSION) != std::string::npos);
}

TEST_CASE("module errors exit 1 with a message") {
  testing::TempDir dir;
  const Outcome missing = dacnet_cli({"--data-dir", dir.path().string(), "stats"});
  CHECK(missing.code == cli::kExitFailure);
  CHECK(missing.err.find("error:") == 0);
  testing::write_text(dir / "bad.csv", "Image Index,Finding Labels,Patient ID\na.png,Covid,1\n");
  const Outcome bad = dacnet_cli({"stats", "--metadata", (dir / "bad.csv").string()});
  CHECK(bad.code == cli::kExitFailure);
  CHECK(bad.err.find("Covid") != std::string::npos);
}

TEST_CASE("stats prints the ranked combination table") {
  testing::TempDir dir;
  std::string csv = "Image Index,Finding Labels,Follow-up #,Patient ID,Patient Age,Patient Gender,View Position\n";
  for (int i = 0; i < 6; ++i) csv += "n" + std::to_string(i) + ".png,No Finding,0,1,40,M,PA\n";
  for (int i = 0; i < 3; ++i) csv += "h" + std::to_string(i) + ".png,Hernia,0,2,50,F,PA\n";
  csv += "m.png,Hernia|Mass,0,3,60,F,AP\n";
  testing::write_text(dir / "meta.csv", csv);
  const Outcome r = dacnet_cli({"--run-dir", dir.path().string(), "stats", "--metadata",
                                (dir / "meta.csv").string(), "--out", "combos.csv"});
  REQUIRE(r.code == cli::kExitOk);
  std::istringstream lines(r.out);
  std::string first;
  std::getline(lines, first);
  CHECK(first == "No Finding 6 60.00%");
  CHECK(r.out.find("Hernia 3 30.00%") != std::string::npos);
  CHECK(r.out.find("3 unique combinations over 10 images") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "combos.csv"));
  const json stamp = json::parse(slurp(dir / "stats.stamp.json"));
  CHECK(stamp["command"] == "stats");
  CHECK(stamp["version"] == DACNET_VERSION);
}

TEST_CASE("prepare-splits is deterministic and stamped") {
  DiskCorpus corpus(40);
  const std::string data = corpus.data_dir();
  const Outcome a = dacnet_cli({"--data-dir", data, "--run-dir", data, "prepare-splits", "--seed", "17", "--out", "a.tsv"});
  const Outcome b = dacnet_cli({"--data-dir", data, "--run-dir", data, "prepare-splits", "--seed", "17", "--out", "b.tsv"});
  REQUIRE(a.code == cli::kExitOk);
  REQUIRE(b.code == cli::kExitOk);
  CHECK(slurp(corpus.dir / "a.tsv") == slurp(corpus.dir / "b.tsv"));
  CHECK(slurp(corpus.dir / "a.tsv").rfind("# dacnet-manifest v1 seed=17", 0) == 0);
  const json stamp = json::parse(slurp(corpus.dir / "prepare-splits.stamp.json"));
  CHECK(stamp["seed"] == 17);
  CHECK(stamp["artifacts"].size() == 1);

  const Outcome c = dacnet_cli({"--data-dir", data, "--run-dir", data, "prepare-splits", "--seed", "18", "--out", "c.tsv"});
  REQUIRE(c.code == cli::kExitOk);
  CHECK(slurp(corpus.dir / "a.tsv") != slurp(corpus.dir / "c.tsv"));
}

TEST_CASE("train, tune, evaluate, compare and explain end to end") {
  DiskCorpus corpus(24);
  const std::string data = corpus.data_dir();
  REQUIRE(dacnet_cli({"--data-dir", data, "--run-dir", data, "prepare-splits", "--ratios", "0.6,0.2,0.2"}).code == 0);

  ModelRecipe recipe;
  recipe.name = "tiny";
  recipe.backbone = {BackboneKind::kTinyTestCnn, false};
  recipe.batch_size = 8;
  recipe.max_epochs = 1;
  recipe.seed = 3;
  save_recipe(recipe, corpus.dir / "tiny.cfg");

  const Outcome zero = dacnet_cli({"--data-dir", data, "--run-dir", data, "train", "--recipe", "dacnet", "--max-epochs", "0"});
  CHECK(zero.code == cli::kExitOk);
  CHECK(zero.out.find("no checkpoint written") != std::string::npos);

  const Outcome trained = dacnet_cli({"--data-dir", data, "--run-dir", data, "train", "--recipe", "tiny.cfg"});
  REQUIRE(trained.code == cli::kExitOk);
  CHECK(trained.out.find("epoch 1") != std::string::npos);
  std::filesystem::path run_dir;
  for (const auto& e : std::filesystem::recursive_directory_iterator(corpus.dir / "runs")) {
    if (e.path().filename() == "last.ckpt") run_dir = e.path().parent_path();
  }
  REQUIRE_FALSE(run_dir.empty());
  CHECK(std::filesystem::exists(run_dir / "best.ckpt"));
  CHECK(std::filesystem::exists(run_dir / "history.csv"));
  const json train_stamp = json::parse(slurp(run_dir / "train.stamp.json"));
  CHECK(train_stamp["seed"] == 3);
  CHECK(train_stamp["config_hash"] == config_hash(recipe));

  const std::string best = (run_dir / "best.ckpt").string();
  const Outcome tuned = dacnet_cli({"--data-dir", data, "--run-dir", data, "tune-thresholds", "--checkpoint", best});
  REQUIRE(tuned.code == cli::kExitOk);
  CHECK(read_thresholds(corpus.dir / "thresholds.json").provenance == ThresholdProvenance::kValidation);
  CHECK(std::filesystem::exists(corpus.dir / "thresholds.val_predictions.csv"));

  const Outcome evaluated = dacnet_cli({"--data-dir", data, "--run-dir", data, "evaluate", "--checkpoint", best,
                                        "--thresholds", "thresholds.json", "--name", "Tiny"});
  REQUIRE(evaluated.code == cli::kExitOk);
  CHECK(evaluated.out.find("AUC") != std::string::npos);
  const EvalReport report = report_from_json(slurp(corpus.dir / "report_test.json"));
  CHECK(report.model_name == "Tiny");
  CHECK(report.split == Split::kTest);
  CHECK(report.threshold_provenance == ThresholdProvenance::kValidation);
  CHECK(std::filesystem::exists(corpus.dir / "report_test.txt"));
  CHECK(std::filesystem::exists(corpus.dir / "evaluate.stamp.json"));

  // Re-scoring saved predictions reproduces the report.
  const Outcome offline = dacnet_cli({"--data-dir", data, "--run-dir", data, "evaluate", "--predictions",
                                      "report_test.predictions.csv", "--thresholds", "thresholds.json", "--out",
                                      "offline.json", "--loss", "bce"});
  REQUIRE(offline.code == cli::kExitOk);
  const EvalReport again = report_from_json(slurp(corpus.dir / "offline.json"));
  CHECK(again.macro_auc == report.macro_auc);
  CHECK(again.macro_f1 == report.macro_f1);

  const std::string baseline = (std::filesystem::path(DACNET_SOURCE_DIR) / "data" / "chexnet_published_auc.csv").string();
  const Outcome compared = dacnet_cli({"--data-dir", data, "--run-dir", data, "compare", "report_test.json",
                                       "--baseline", baseline});
  REQUIRE(compared.code == cli::kExitOk);
  CHECK(compared.out.find("CheXNet") != std::string::npos);
  CHECK(slurp(corpus.dir / "comparison.csv").find("Hernia") != std::string::npos);

  const std::string image = (corpus.dir / "images_001" / "images" / corpus.records.front().image_id).string();
  const Outcome explained = dacnet_cli({"--data-dir", data, "--run-dir", data, "explain", "--checkpoint", best,
                                        "--image", image, "--disease", "Hernia"});
  REQUIRE(explained.code == cli::kExitOk);
  CHECK(explained.out.find("Grad-CAM for Hernia") != std::string::npos);
  CHECK(read_image(corpus.dir / "explain.png").rows() == 224);
  CHECK(std::filesystem::exists(corpus.dir / "explain.heatmap.png"));

  SUBCASE("thresholds fitted on the test split are refused before inference") {
    ThresholdSet leaked = ThresholdSet::global(0.3);
    leaked.provenance = ThresholdProvenance::kTest;
    write_thresholds(leaked, corpus.dir / "leaked.json");
    const Outcome refused = dacnet_cli({"--data-dir", data, "--run-dir", data, "evaluate", "--checkpoint", best,
                                        "--thresholds", "leaked.json", "--out", "leaked_report.json"});
    CHECK(refused.code == cli::kExitFailure);
    CHECK(refused.err.find("leakage") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(corpus.dir / "leaked_report.json"));
    CHECK_FALSE(std::filesystem::exists(corpus.dir / "leaked_report.predictions.csv"));
  }
  SUBCASE("resume from the final checkpoint is an immediate clean exit") {
    const Outcome resumed = dacnet_cli({"--data-dir", data, "--run-dir", data, "train", "--recipe", "tiny.cfg",
                                        "--resume", (run_dir / "last.ckpt").string()});
    CHECK(resumed.code == cli::kExitOk);
    CHECK(resumed.out.find("epochs completed: 1") != std::string::npos);
  }
  SUBCASE("serve honours DACNET_CHECKPOINT and DACNET_PORT and stops on SIGINT") {
    const int port = free_port();
    ::setenv("DACNET_CHECKPOINT", best.c_str(), 1);
    ::setenv("DACNET_PORT", std::to_string(port).c_str(), 1);
    Outcome served;
    std::thread server([&] {
      served = dacnet_cli({"--run-dir", data, "serve", "--checkpoint", "ignored.ckpt", "--port", "1",
                           "--host", "127.0.0.1", "--thresholds", (corpus.dir / "thresholds.json").string()});
    });
    bool up = false;
    for (int i = 0; i < 200 && !up; ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      up = std::filesystem::exists(corpus.dir / "serve.stamp.json");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    std::raise(SIGINT);
    server.join();
    ::unsetenv("DACNET_CHECKPOINT");
    ::unsetenv("DACNET_PORT");
    CHECK(up);
    CHECK(served.code == cli::kExitOk);
    CHECK(served.out.find(":" + std::to_string(port)) != std::string::npos);
    CHECK(served.out.find("ready") != std::string::npos);
  }
}

TEST_CASE("serve rejects a malformed DACNET_PORT") {
  ::setenv("DACNET_PORT", "eighty", 1);
  const Outcome r = dacnet_cli({"serve", "--checkpoint", "x.ckpt"});
  ::unsetenv("DACNET_PORT");
  CHECK(r.code == cli::kExitFailure);
  CHECK(r.err.find("DACNET_PORT") != std::string::npos);
}
