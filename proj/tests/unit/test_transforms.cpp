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
#include "dacnet/image_io.hpp"
#include "dacnet/transforms.hpp"
#include "../support/synthetic.hpp"

using namespace dacnet;

namespace {

GrayImagef ramp(Eigen::Index h, Eigen::Index w) {
  GrayImagef img(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) img(y, x) = static_cast<float>((x + 2 * y) % 97) / 96.0f;
  }
  return img;
}

bool same(const ImageTensorf& a, const ImageTensorf& b) {
  return a.height == b.height && a.width == b.width && (a.data == b.data).all();
}

}  // namespace

TEST_CASE("eval transform emits 3 x 224 x 224 ImageNet-normalized planes") {
  const Transform t = build_eval_transform(TransformSpec{});
  const GrayImagef img = GrayImagef::Constant(300, 250, 0.5f);
  const ImageTensorf out = t(img);
  CHECK(out.height == 224);
  CHECK(out.width == 224);
  const Normalization n;
  for (int c = 0; c < 3; ++c) {
    CHECK(out.data.row(c).maxCoeff() == doctest::Approx((0.5 - n.mean[c]) / n.std[c]).epsilon(1e-5));
    CHECK(out.data.row(c).minCoeff() == doctest::Approx((0.5 - n.mean[c]) / n.std[c]).epsilon(1e-5));
  }
  const auto back = denormalize(out, n);
  CHECK((back - 0.5f).abs().maxCoeff() < 1e-5f);
}

TEST_CASE("resize keeps identity at equal size and preserves constants") {
  const GrayImagef img = ramp(224, 224);
  CHECK((resize(img, 224, 224) == img).all());
  const GrayImaged c = GrayImaged::Constant(7, 5, 0.25);
  CHECK((resize(c, 224, 224) - 0.25).abs().maxCoeff() < 1e-12);
  CHECK((resize(GrayImaged::Constant(1024, 1024, 0.75), 224, 224) - 0.75).abs().maxCoeff() < 1e-12);
}

TEST_CASE("resample operator rows sum to one") {
  for (auto [in, out] : {std::pair{7, 224}, std::pair{1024, 224}, std::pair{224, 224}, std::pair{2, 3}}) {
    const auto op = resample_operator<double>(in, out);
    const Eigen::VectorXd sums = op * Eigen::VectorXd::Ones(in);
    CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("train transform is deterministic per seed and varies across seeds") {
  TransformSpec spec;
  spec.resize = ResizePolicy::kRandomResizedCrop224;
  spec.jitter = ColorJitter{};
  const GrayImagef img = ramp(256, 256);
  Transform a = build_train_transform(spec, 5);
  Transform b = build_train_transform(spec, 5);
  Transform c = build_train_transform(spec, 6);
  bool any_difference = false;
  for (int i = 0; i < 5; ++i) {
    const auto x = a(img);
    const auto y = b(img);
    const auto z = c(img);
    CHECK(same(x, y));
    any_difference = any_difference || !same(x, z);
  }
  CHECK(any_difference);
}

TEST_CASE("flip probability extremes") {
  TransformSpec spec;
  const GrayImagef img = ramp(224, 224);
  spec.hflip_prob = 0.0;
  const Transform eval = build_eval_transform(spec);
  CHECK(same(build_train_transform(spec, 1)(img), eval(img)));
  spec.hflip_prob = 1.0;
  const ImageTensorf flipped = build_train_transform(spec, 1)(img);
  CHECK(same(flipped, eval(horizontal_flip(img))));
}

TEST_CASE("random resized crop stays inside the image and the scale range") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Index h = 50 + static_cast<Eigen::Index>(rng.below(400));
    const Eigen::Index w = 50 + static_cast<Eigen::Index>(rng.below(400));
    const CropBox box = sample_resized_crop(h, w, {0.7, 1.0}, {3.0 / 4.0, 4.0 / 3.0}, rng);
    CHECK(box.top >= 0);
    CHECK(box.left >= 0);
    CHECK(box.top + box.height <= h);
    CHECK(box.left + box.width <= w);
    CHECK(box.height > 0);
    CHECK(box.width > 0);
  }
}

TEST_CASE("jitter keeps intensities in range") {
  Rng rng(9);
  const GrayImagef img = ramp(64, 64);
  for (int i = 0; i < 20; ++i) {
    const GrayImagef j = apply_jitter(img, ColorJitter{0.5, 0.5, 0, 0}, rng);
    CHECK(j.minCoeff() >= 0.0f);
    CHECK(j.maxCoeff() <= 1.0f);
  }
}

TEST_CASE("transform settings validation") {
  TransformSpec spec;
  spec.hflip_prob = 1.5;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.crop_scale = {0.9, 0.5};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.normalization.std[1] = 0.0;
  CHECK_THROWS_AS(spec.validate(), Error);
  CHECK(resize_policy_from_string(to_string(ResizePolicy::kRandomResizedCrop224)) ==
        ResizePolicy::kRandomResizedCrop224);
  CHECK_THROWS_AS(resize_policy_from_string("center_crop"), Error);
}

TEST_CASE("decoding: PNG round trip, 16-bit depth, garbage rejected") {
  testing::TempDir dir;
  GrayImagef img = ramp(32, 40);
  write_png(img, dir / "a.png");
  const GrayImagef back = read_image(dir / "a.png");
  REQUIRE(back.rows() == 32);
  REQUIRE(back.cols() == 40);
  CHECK((back - img).abs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);

  const std::string text = "definitely not an image";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  try {
    decode_image(bytes, "notes.txt");
    FAIL("expected a decode error");
  } catch (const ImageDecodeError& e) {
    CHECK(e.image_id() == "notes.txt");
  }

  testing::write_text(dir / "Data.csv", "x");
  std::filesystem::create_directories(dir / "images_001" / "images");
  write_png(img, dir / "images_001" / "images" / "00000001_000.png");
  DirectoryImageSource source(dir.path());
  CHECK(source.load("00000001_000.png").rows() == 32);
  CHECK_THROWS_AS(source.load("missing.png"), ImageDecodeError);
}
