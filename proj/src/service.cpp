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

#include "dacnet/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <numeric>

#include "dacnet/image_io.hpp"

namespace dacnet::service {

using nlohmann::json;

ExplainRequest parse_explain(std::string_view value) {
  if (value.empty() || value == "none") return {};
  if (value == "top1") return {ExplainMode::kTop1, {}};
  try {
    return {ExplainMode::kDisease, DiseaseLabel::parse(value)};
  } catch (const Error&) {
    throw RequestError(400, "explain must be none, top1 or a disease name; got '" + std::string(value) + "'");
  }
}

// ---------------------------------------------------------------------------

struct Predictor::ExplainWorker {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::function<void()>> queue;
  bool stopping = false;
  std::thread thread;

  ExplainWorker() : thread([this] { loop(); }) {}

  ~ExplainWorker() {
    {
      std::lock_guard lock(mutex);
      stopping = true;
    }
    cv.notify_all();
    thread.join();
  }

  void loop() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [this] { return stopping || !queue.empty(); });
        if (queue.empty()) return;
        job = std::move(queue.front());
        queue.pop_front();
      }
      job();
    }
  }

  template <typename F>
  auto submit(F&& f) {
    using R = std::invoke_result_t<F>;
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(f));
    auto future = task->get_future();
    {
      std::lock_guard lock(mutex);
      queue.emplace_back([task] { (*task)(); });
    }
    cv.notify_one();
    return future;
  }
};

Predictor::Predictor(nn::LoadedCheckpoint checkpoint, std::optional<ThresholdSet> thresholds)
    : checkpoint_(std::move(checkpoint)), worker_(std::make_unique<ExplainWorker>()) {
  checkpoint_.model->eval();
  if (thresholds) {
    thresholds_ = *thresholds;
  } else {
    thresholds_ = ThresholdSet::global(0.5);
    thresholds_defaulted_ = true;
  }
}

Predictor::~Predictor() = default;

std::string Predictor::predict(std::span<const std::uint8_t> image_bytes, const ExplainRequest& explain) const {
  if (image_bytes.empty()) throw RequestError(400, "empty image payload");
  GrayImagef image;
  try {
    image = decode_image(image_bytes, "upload");
  } catch (const ImageDecodeError& e) {
    throw RequestError(400, e.what());
  }

  const TransformSpec& spec = checkpoint_.recipe.transform;
  nn::DiseaseScores probs{};
  std::optional<nn::Explanation> explanation;
  if (explain.mode == ExplainMode::kNone) {
    probs = nn::predict_image(checkpoint_.model, spec, image);
  } else {
    if (!has_feature_maps(checkpoint_.recipe.backbone.kind)) {
      throw RequestError(422, "backbone " + std::string(to_string(checkpoint_.recipe.backbone.kind)) +
                                  " has no spatial feature maps for Grad-CAM");
    }
    std::optional<DiseaseLabel> target;
    if (explain.mode == ExplainMode::kDisease) target = explain.disease;
    auto future = worker_->submit([this, &image, &spec, target] {
      return nn::explain_image(checkpoint_.model, spec, image, target);
    });
    explanation = future.get();
    probs = explanation->probabilities;
  }

  json doc;
  json p = json::object();
  for (std::size_t k = 0; k < kNumDiseases; ++k) p[std::string(kDiseaseNames[k])] = probs[k];
  doc["probabilities"] = p;

  std::vector<std::size_t> order(kNumDiseases);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  json top = json::array();
  for (std::size_t i = 0; i < 5; ++i) {
    top.push_back({{"disease", std::string(kDiseaseNames[order[i]])}, {"probability", probs[order[i]]}});
  }
  doc["top5"] = top;

  json flagged = json::array();
  json thresholds = json::object();
  for (std::size_t k = 0; k < kNumDiseases; ++k) {
    const std::string name(kDiseaseNames[k]);
    thresholds[name] = thresholds_.t[k];
    if (probs[k] >= thresholds_.t[k]) flagged.push_back(name);
  }
  doc["flagged"] = flagged;
  doc["thresholds"] = thresholds;
  doc["threshold_provenance"] = std::string(to_string(thresholds_.provenance));

  if (explanation) {
    const auto png = encode_png(explanation->overlay);
    doc["heatmap"] = {{"disease", std::string(explanation->heatmap.target.name())},
                      {"format", "png"},
                      {"encoding", "base64"},
                      {"width", explanation->overlay.width},
                      {"height", explanation->overlay.height},
                      {"data", httplib::detail::base64_encode(std::string(png.begin(), png.end()))}};
  } else {
    doc["heatmap"] = nullptr;
  }
  doc["model_fingerprint"] = fingerprint();

  json warnings = json::array();
  if (thresholds_defaulted_) {
    warnings.push_back("no fitted thresholds loaded; flags use the global 0.5 threshold");
  } else if (thresholds_.provenance == ThresholdProvenance::kTest) {
    warnings.push_back("thresholds were fitted on the test split");
  }
  doc["warnings"] = warnings;
  return doc.dump();
}

std::string Predictor::health(double uptime_seconds) const {
  json doc;
  doc["status"] = "ok";
  doc["model_fingerprint"] = fingerprint();
  doc["diseases"] = checkpoint_.meta.diseases;
  doc["recipe"] = checkpoint_.recipe.name;
  doc["backbone"] = std::string(to_string(checkpoint_.recipe.backbone.kind));
  doc["threshold_provenance"] = std::string(to_string(thresholds_.provenance));
  doc["thresholds_defaulted"] = thresholds_defaulted_;
  doc["uptime_seconds"] = uptime_seconds;
  doc["version"] = DACNET_VERSION;
  return doc.dump();
}

std::shared_ptr<const Predictor> load_predictor(const std::filesystem::path& checkpoint,
                                                const std::optional<std::filesystem::path>& thresholds) {
  std::optional<ThresholdSet> t;
  if (thresholds) t = read_thresholds(*thresholds);
  return std::make_shared<const Predictor>(nn::load_checkpoint(checkpoint), t);
}

// ---------------------------------------------------------------------------

struct Server::Impl {
  ServerOptions options;
  httplib::Server http;
  std::thread listener;
  mutable std::mutex mutex;
  std::shared_ptr<const Predictor> predictor;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  std::shared_ptr<const Predictor> current() const {
    std::lock_guard lock(mutex);
    return predictor;
  }

  static void send_error(httplib::Response& res, int status, const std::string& reason) {
    res.status = status;
    res.set_content(json{{"error", reason}, {"status", status}}.dump(), "application/json");
  }

  void routes() {
    http.set_payload_max_length(options.max_payload_bytes);
    http.set_read_timeout(60, 0);
    http.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
    http.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      const auto p = current();
      if (!p) {
        res.status = 503;
        res.set_content(R"({"status":"loading"})", "application/json");
        return;
      }
      const double uptime =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      res.set_content(p->health(uptime), "application/json");
    });

    http.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
      const auto p = current();
      if (!p) return send_error(res, 503, "model not loaded");
      try {
        const ExplainRequest explain = parse_explain(req.has_param("explain") ? req.get_param_value("explain") : "");
        if (!req.is_multipart_form_data() || !req.has_file("image")) {
          throw RequestError(400, "expected a multipart form with an 'image' field");
        }
        const auto& body = req.get_file_value("image").content;
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(body.data());
        res.set_content(p->predict(std::span<const std::uint8_t>(bytes, body.size()), explain),
                        "application/json");
      } catch (const RequestError& e) {
        send_error(res, e.status(), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    });

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string reason =
          res.status == 413 ? "payload exceeds the upload limit" : httplib::status_message(res.status);
      res.set_content(json{{"error", reason}, {"status", res.status}}.dump(), "application/json");
    });
  }
};

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->routes();
}

Server::~Server() { stop(); }

int Server::start() {
  if (impl_->options.port == 0) {
    port_ = impl_->http.bind_to_any_port(impl_->options.host);
    if (port_ <= 0) throw Error("cannot bind to " + impl_->options.host);
  } else {
    if (!impl_->http.bind_to_port(impl_->options.host, impl_->options.port)) {
      throw Error("cannot bind to " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    }
    port_ = impl_->options.port;
  }
  impl_->started = std::chrono::steady_clock::now();
  impl_->listener = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port_;
}

void Server::attach(std::shared_ptr<const Predictor> predictor) {
  std::lock_guard lock(impl_->mutex);
  impl_->predictor = std::move(predictor);
}

bool Server::ready() const { return impl_->current() != nullptr; }

void Server::wait() {
  if (impl_->listener.joinable()) impl_->listener.join();
}

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

}  // namespace dacnet::service
