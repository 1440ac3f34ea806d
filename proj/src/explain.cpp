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

#include "dacnet/explain.hpp"

#include <algorithm>
#include <cmath>

namespace dacnet {

std::array<double, 3> jet(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto channel = [v](double center) {
    return std::clamp(1.5 - std::abs(4.0 * v - center), 0.0, 1.0);
  };
  return {channel(3.0), channel(2.0), channel(1.0)};
}

RgbImage overlay(const GrayImaged& heat, const GrayImagef& image, double alpha) {
  if (heat.rows() != image.rows() || heat.cols() != image.cols()) {
    throw Error("overlay: heatmap is " + std::to_string(heat.rows()) + "x" +
                std::to_string(heat.cols()) + " but image is " + std::to_string(image.rows()) +
                "x" + std::to_string(image.cols()));
  }
  RgbImage out{static_cast<int>(image.rows()), static_cast<int>(image.cols()), {}};
  out.pixels.resize(3u * out.height * out.width);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double h = std::clamp(heat(y, x), 0.0, 1.0);
      const double g = std::clamp(static_cast<double>(image(y, x)), 0.0, 1.0);
      const double a = alpha * h;
      const auto color = jet(h);
      std::uint8_t* p = out.at(y, x);
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - a) * g + a * color[c];
        p[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return out;
}

}  // namespace dacnet
