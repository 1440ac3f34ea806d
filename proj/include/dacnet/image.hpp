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

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace dacnet {

inline constexpr Eigen::Index kInputSize = 224;

// Single-channel image, rows = height. Intensities live in [0, 1].
template <typename Scalar>
using GrayImage = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GrayImagef = GrayImage<float>;
using GrayImaged = GrayImage<double>;

// Planar CHW tensor: one row per channel, each row is a row-major H*W plane.
template <typename Scalar>
struct ImageTensor {
  using Planes = Eigen::Array<Scalar, 3, Eigen::Dynamic, Eigen::RowMajor>;

  Planes data;
  Eigen::Index height = 0;
  Eigen::Index width = 0;

  auto channel(Eigen::Index c) const {
    return Eigen::Map<const GrayImage<Scalar>>(data.row(c).data(), height, width);
  }
};
using ImageTensorf = ImageTensor<float>;

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major

  std::uint8_t* at(int y, int x) { return &pixels[3 * (static_cast<std::size_t>(y) * width + x)]; }
  const std::uint8_t* at(int y, int x) const {
    return &pixels[3 * (static_cast<std::size_t>(y) * width + x)];
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Linear resampling operator (out_size x in_size) for one axis: a triangle
// filter whose support widens with the downscale factor, so downsampling is
// antialiased and upsampling reduces to half-pixel bilinear interpolation.
// Equal sizes give the identity.
template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> resample_operator(Eigen::Index in_size,
                                                               Eigen::Index out_size) {
  using Triplet = Eigen::Triplet<Scalar>;
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double support = std::max(scale, 1.0);
  std::vector<Triplet> triplets;
  std::vector<double> w;
  for (Eigen::Index o = 0; o < out_size; ++o) {
    const double center = (static_cast<double>(o) + 0.5) * scale;
    const auto lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(center - support)));
    const auto hi = std::min<Eigen::Index>(in_size - 1, static_cast<Eigen::Index>(std::ceil(center + support)));
    w.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
    double total = 0.0;
    for (Eigen::Index j = lo; j <= hi; ++j) {
      const double t = std::abs(static_cast<double>(j) + 0.5 - center) / support;
      const double v = t < 1.0 ? 1.0 - t : 0.0;
      w[static_cast<std::size_t>(j - lo)] = v;
      total += v;
    }
    for (Eigen::Index j = lo; j <= hi; ++j) {
      const double v = w[static_cast<std::size_t>(j - lo)];
      if (v > 0.0) triplets.emplace_back(o, j, static_cast<Scalar>(v / total));
    }
  }
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> op(out_size, in_size);
  op.setFromTriplets(triplets.begin(), triplets.end());
  return op;
}

// Separable resize of any 2-D Eigen array expression.
template <typename Derived>
GrayImage<typename Derived::Scalar> resize(const Eigen::ArrayBase<Derived>& src,
                                           Eigen::Index out_rows, Eigen::Index out_cols) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (src.rows() == out_rows && src.cols() == out_cols) return src;
  const auto rows_op = resample_operator<Scalar>(src.rows(), out_rows);
  const auto cols_op = resample_operator<Scalar>(src.cols(), out_cols);
  const Dense tmp = rows_op * src.matrix();
  const Dense out = (cols_op * tmp.transpose()).transpose();
  return out.array();
}

template <typename Derived>
GrayImage<typename Derived::Scalar> horizontal_flip(const Eigen::ArrayBase<Derived>& src) {
  return src.rowwise().reverse();
}

}  // namespace dacnet
