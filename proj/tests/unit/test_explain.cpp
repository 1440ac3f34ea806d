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

#include <doctest.h>

#include "dacnet/errors.hpp"
#include "dacnet/explain.hpp"
#include "dacnet/image_io.hpp"
#include "dacnet/random.hpp"

using namespace dacnet;

TEST_CASE("grad-cam on stubbed activations [[1,2],[3,4]] with unit gradients") {
  Eigen::MatrixXd a(1, 4);
  a << 1, 2, 3, 4;
  const Eigen::MatrixXd g = Eigen::MatrixXd::Ones(1, 4);
  const GrayImaged map = grad_cam_map(a, g, 2, 2);
  GrayImaged expected(2, 2);
  expected << 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0;
  CHECK((map - expected).abs().maxCoeff() < 1e-9);

  const HeatMap h = make_heatmap(a, g, 2, 2, DiseaseLabel::parse("Hernia"));
  CHECK(h.upsampled.rows() == 224);
  CHECK(h.upsampled.cols() == 224);
  CHECK(h.upsampled.minCoeff() >= 0.0);
  CHECK(h.upsampled.maxCoeff() <= 1.0);
  CHECK(h.target.name() == "Hernia");
}

TEST_CASE("channel weights are spatial means of the gradients") {
  // Two channels; gradient means 0.5 and -1 give raw = 0.5*A0 - A1.
  Eigen::MatrixXd a(2, 4);
  a << 4, 0, 2, 6,
       1, 0, 0, 1;
  Eigen::MatrixXd g(2, 4);
  g << 1, 0, 1, 0,
       -2, 0, -2, 0;
  const GrayImaged map = grad_cam_map(a, g, 2, 2);
  // raw = [1, 0, 1, 2] -> normalized [0.5, 0, 0.5, 1].
  GrayImaged expected(2, 2);
  expected << 0.5, 0.0, 0.5, 1.0;
  CHECK((map - expected).abs().maxCoeff() < 1e-12);
}

TEST_CASE("negative or flat evidence yields an all-zero map") {
  Eigen::MatrixXd a(1, 4);
  a << 1, 2, 3, 4;
  const Eigen::MatrixXd g = -Eigen::MatrixXd::Ones(1, 4);
  CHECK(grad_cam_map(a, g, 2, 2).maxCoeff() == 0.0);
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(1, 4, 3.0);
  CHECK(grad_cam_map(flat, Eigen::MatrixXd::Ones(1, 4), 2, 2).maxCoeff() == 0.0);
}

TEST_CASE("random activations produce 224x224 maps in [0,1]") {
  Rng rng(17);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(64));
    Eigen::MatrixXd a(k, 49);
    Eigen::MatrixXd g(k, 49);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a(i) = std::max(0.0, rng.uniform(-1.0, 3.0));
      g(i) = rng.uniform(-1.0, 1.0);
    }
    const HeatMap h = make_heatmap(a, g, 7, 7, DiseaseLabel::from_index(0));
    CHECK(h.values.rows() == 7);
    CHECK(h.upsampled.rows() == 224);
    CHECK(h.upsampled.cols() == 224);
    CHECK(h.upsampled.minCoeff() >= 0.0);
    CHECK(h.upsampled.maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("grad-cam shape checks") {
  CHECK_THROWS_AS(grad_cam_map(Eigen::MatrixXd::Ones(2, 4), Eigen::MatrixXd::Ones(1, 4), 2, 2), Error);
  CHECK_THROWS_AS(grad_cam_map(Eigen::MatrixXd::Ones(1, 4), Eigen::MatrixXd::Ones(1, 4), 3, 2), Error);
}

TEST_CASE("jet colormap endpoints") {
  const auto lo = jet(0.0);
  const auto mid = jet(0.5);
  const auto hi = jet(1.0);
  CHECK(lo[0] == 0.0);
  CHECK(lo[2] == 0.5);
  CHECK(mid[1] == 1.0);
  CHECK(hi[0] == 0.5);
  CHECK(hi[2] == 0.0);
}

TEST_CASE("overlay blends with per-pixel alpha 0.4 * heat") {
  GrayImaged heat = GrayImaged::Zero(2, 2);
  heat(0, 1) = 1.0;
  heat(1, 0) = 0.5;
  GrayImagef img(2, 2);
  img << 0.2f, 0.0f, 0.6f, 0.6f;
  const RgbImage out = overlay(heat, img);

  const RgbImage plain = to_rgb(img);
  // Zero heat leaves the image byte-identical.
  for (int c = 0; c < 3; ++c) {
    CHECK(out.at(0, 0)[c] == plain.at(0, 0)[c]);
    CHECK(out.at(1, 1)[c] == plain.at(1, 1)[c]);
  }
  // heat 1 over black: alpha 0.4, jet(1) = (0.5, 0, 0) -> R = 0.2 * 255 = 51.
  CHECK(out.at(0, 1)[0] == 51);
  CHECK(out.at(0, 1)[1] == 0);
  CHECK(out.at(0, 1)[2] == 0);
  // heat 0.5 over 0.6 gray: alpha 0.2, jet(0.5) = (0.5, 1, 0.5)
  // -> R = B = 0.48 + 0.1 = 0.58 (148), G = 0.48 + 0.2 = 0.68 (173).
  CHECK(out.at(1, 0)[0] == 148);
  CHECK(out.at(1, 0)[1] == 173);
  CHECK(out.at(1, 0)[2] == 148);

  CHECK_THROWS_AS(overlay(GrayImaged::Zero(3, 3), img), Error);
}
