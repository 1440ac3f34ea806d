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

#include "dacnet/image_io.hpp"

#include <fstream>
#include <iterator>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace dacnet {
namespace {

cv::Mat to_mat(const RgbImage& image) {
  if (image.pixels.size() != 3u * image.height * image.width) {
    throw Error("RgbImage pixel buffer does not match its dimensions");
  }
  cv::Mat rgb(image.height, image.width, CV_8UC3,
              const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

std::vector<std::uint8_t> encode(const cv::Mat& mat) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", mat, out)) throw Error("PNG encoding failed");
  return out;
}

void write_bytes(const std::vector<std::uint8_t>& bytes,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

GrayImagef decode_image(std::span<const std::uint8_t> bytes, std::string_view image_id) {
  if (bytes.empty()) throw ImageDecodeError(std::string(image_id), "empty payload");
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8U,
              const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat decoded;
  try {
    decoded = cv::imdecode(raw, cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  } catch (const cv::Exception& e) {
    throw ImageDecodeError(std::string(image_id), e.what());
  }
  if (decoded.empty() || decoded.rows == 0 || decoded.cols == 0) {
    throw ImageDecodeError(std::string(image_id), "unrecognized or corrupt image data");
  }
  double scale = 1.0 / 255.0;
  if (decoded.depth() == CV_16U) scale = 1.0 / 65535.0;
  cv::Mat f;
  decoded.convertTo(f, CV_32F, scale);
  GrayImagef out(f.rows, f.cols);
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    std::copy(row, row + f.cols, out.row(y).data());
  }
  return out;
}

GrayImagef read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageDecodeError(path.filename().string(), "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes, path.filename().string());
}

RgbImage to_rgb(const GrayImagef& image) {
  RgbImage out{static_cast<int>(image.rows()), static_cast<int>(image.cols()), {}};
  out.pixels.resize(3u * out.height * out.width);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double v = std::clamp(static_cast<double>(image(y, x)), 0.0, 1.0);
      const auto b = static_cast<std::uint8_t>(std::lround(v * 255.0));
      std::uint8_t* p = out.at(y, x);
      p[0] = p[1] = p[2] = b;
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) { return encode(to_mat(image)); }

std::vector<std::uint8_t> encode_png(const GrayImagef& image) {
  cv::Mat gray(static_cast<int>(image.rows()), static_cast<int>(image.cols()), CV_8U);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) {
      gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
          std::lround(std::clamp(static_cast<double>(image(y, x)), 0.0, 1.0) * 255.0));
    }
  }
  return encode(gray);
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  write_bytes(encode_png(image), path);
}

void write_png(const GrayImagef& image, const std::filesystem::path& path) {
  write_bytes(encode_png(image), path);
}

DirectoryImageSource::DirectoryImageSource(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw Error("image directory does not exist: " + root.string());
  }
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    paths_.emplace(entry.path().filename().string(), entry.path());
  }
}

GrayImagef DirectoryImageSource::load(std::string_view image_id) const {
  const auto it = paths_.find(std::string(image_id));
  if (it == paths_.end()) {
    throw ImageDecodeError(std::string(image_id), "not found under the data directory");
  }
  std::ifstream in(it->second, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes, image_id);
}

void InMemoryImageSource::add(std::string image_id, GrayImagef image) {
  images_.insert_or_assign(std::move(image_id), std::move(image));
}

GrayImagef InMemoryImageSource::load(std::string_view image_id) const {
  const auto it = images_.find(image_id);
  if (it == images_.end()) throw ImageDecodeError(std::string(image_id), "unknown image id");
  return it->second;
}

}  // namespace dacnet
