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

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>

#include "dacnet/checkpoint.hpp"
#include "dacnet/evaluation.hpp"
#include "dacnet/inference.hpp"

namespace dacnet::service {

inline constexpr std::size_t kMaxPayloadBytes = 20u * 1024u * 1024u;

// Thrown for requests the service refuses; carries the HTTP status.
class RequestError : public Error {
 public:
  RequestError(int status, const std::string& reason) : Error(reason), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

enum class ExplainMode { kNone, kTop1, kDisease };

struct ExplainRequest {
  ExplainMode mode = ExplainMode::kNone;
  DiseaseLabel disease;  // kDisease only
};

// "none" (or empty), "top1", or a disease name. Unknown values are a 400.
ExplainRequest parse_explain(std::string_view value);

// Model plus thresholds; answers requests without any HTTP concerns.
// predict() runs concurrently on the shared read-only model; explanations
// are queued to one worker thread because gradient capture is stateful.
class Predictor {
 public:
  Predictor(nn::LoadedCheckpoint checkpoint, std::optional<ThresholdSet> thresholds);
  ~Predictor();
  Predictor(const Predictor&) = delete;
  Predictor& operator=(const Predictor&) = delete;

  // PredictionResponse document as JSON text.
  std::string predict(std::span<const std::uint8_t> image_bytes, const ExplainRequest& explain) const;
  std::string health(double uptime_seconds) const;

  const std::string& fingerprint() const { return checkpoint_.meta.fingerprint; }
  const ThresholdSet& thresholds() const { return thresholds_; }
  bool thresholds_defaulted() const { return thresholds_defaulted_; }

 private:
  struct ExplainWorker;

  mutable nn::LoadedCheckpoint checkpoint_;
  ThresholdSet thresholds_;
  bool thresholds_defaulted_ = false;
  std::unique_ptr<ExplainWorker> worker_;
};

struct ServerOptions {
  std::string host = "0.0.0.0";
  int port = 8080;  // 0 picks a free port
  std::string cors_origin = "*";
  std::size_t max_payload_bytes = kMaxPayloadBytes;
};

// HTTP front end: POST /predict, GET /health. Listening starts before the
// model is attached, and both endpoints answer 503 until then.
class Server {
 public:
  explicit Server(ServerOptions options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  void attach(std::shared_ptr<const Predictor> predictor);
  // Blocks until stop() or a fatal listener error.
  void wait();
  void stop();

  int port() const { return port_; }
  bool ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

// Loads the checkpoint and optional thresholds file into a predictor.
std::shared_ptr<const Predictor> load_predictor(const std::filesystem::path& checkpoint,
                                                const std::optional<std::filesystem::path>& thresholds);

}  // namespace dacnet::service
