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

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dacnet/errors.hpp"
#include "dacnet/image.hpp"

namespace dacnet {

class ImageDecodeError : public Error {
 public:
  ImageDecodeError(std::string image_id, const std::string& reason)
      : Error("cannot decode image '" + image_id + "': " + reason),
        image_id_(std::move(image_id)) {}
  const std::string& image_id() const { return image_id_; }

 private:
  std::string image_id_;
};

// PNG/JPEG/etc. bytes to grayscale in [0, 1]; 16-bit inputs keep their depth.
GrayImagef decode_image(std::span<const std::uint8_t> bytes, std::string_view image_id);
GrayImagef read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_png(const GrayImagef& image);
void write_png(const RgbImage& image, const std::filesystem::path& path);
void write_png(const GrayImagef& image, const std::filesystem::path& path);

// Gray [0,1] to 8-bit RGB with the channel replicated.
RgbImage to_rgb(const GrayImagef& image);

class ImageSource {
 public:
  virtual ~ImageSource() = default;
  // Throws ImageDecodeError (carrying the id) on unknown or corrupt images.
  virtual GrayImagef load(std::string_view image_id) const = 0;
};

// Resolves image ids by file name anywhere below a root directory; the NIH
// release spreads images over images_001/images ... images_012/images.
class DirectoryImageSource : public ImageSource {
 public:
  explicit DirectoryImageSource(const std::filesystem::path& root);
  GrayImagef load(std::string_view image_id) const override;
  std::size_t size() const { return paths_.size(); }

 private:
  std::unordered_map<std::string, std::filesystem::path> paths_;
};

class InMemoryImageSource : public ImageSource {
 public:
  void add(std::string image_id, GrayImagef image);
  GrayImagef load(std::string_view image_id) const override;

 private:
  std::map<std::string, GrayImagef, std::less<>> images_;
};

}  // namespace dacnet
