#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

#include "mars/error.hpp"

namespace mars {

/// Dense channels x height x width array, row-major within each channel.
template <typename Scalar>
struct Tensor3 {
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  int channels = 0;
  int height = 0;
  int width = 0;
  Storage data;

  Tensor3() = default;
  Tensor3(int c, int h, int w) : channels(c), height(h), width(w), data(Storage::Zero(Eigen::Index(c) * h * w)) {
    require(c > 0 && h > 0 && w > 0, "tensor: dimensions must be positive");
  }

  Eigen::Index index(int c, int i, int j) const {
    return (Eigen::Index(c) * height + i) * width + j;
  }
  Scalar& operator()(int c, int i, int j) { return data[index(c, i, j)]; }
  const Scalar& operator()(int c, int i, int j) const { return data[index(c, i, j)]; }

  Eigen::Index size() const { return data.size(); }
  std::array<int, 3> shape() const { return {channels, height, width}; }

  /// One channel viewed as a height x width row-major matrix.
  auto channel(int c) {
    return Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data() + Eigen::Index(c) * height * width, height, width);
  }
  auto channel(int c) const {
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data() + Eigen::Index(c) * height * width, height, width);
  }

  template <typename Other>
  Tensor3<Other> cast() const {
    Tensor3<Other> out;
    out.channels = channels;
    out.height = height;
    out.width = width;
    out.data = data.template cast<Other>();
    return out;
  }

  bool operator==(const Tensor3& o) const {
    return shape() == o.shape() && (data == o.data).all();
  }
};

}  // namespace mars
