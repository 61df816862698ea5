#pragma once

#include <cstdint>
#include <string>

#include "mars/error.hpp"
#include "mars/tensor3.hpp"

/// Channel multiplexing: a lossless reshaping that trades spatial
/// resolution for channels.
///
/// For factors (fh, fw), input channel c and sub-position (a, b) with
/// 0 <= a < fh, 0 <= b < fw land in output channel k = c*fh*fw + a*fw + b:
///
///   interleave: out[k][i][j] = x[c][i*fh + a][j*fw + b]
///   block:      out[k][i][j] = x[c][a*(H/fh) + i][b*(W/fw) + j]
namespace mars::cmx {

enum class Mode : std::uint8_t { kInterleave = 0, kBlock = 1 };

struct Descriptor {
  int channels = 1;
  int height = 1;
  int width = 1;
  int factor_h = 1;
  int factor_w = 1;
  Mode mode = Mode::kInterleave;

  int out_channels() const { return channels * factor_h * factor_w; }
  int out_height() const { return height / factor_h; }
  int out_width() const { return width / factor_w; }
  bool identity() const { return factor_h == 1 && factor_w == 1; }

  bool operator==(const Descriptor&) const = default;
};

void validate(const Descriptor& d);

/// Factors that take a (freq_bins x frames) single-channel spectrogram to
/// a (target_h x target_w) spatial grid.
Descriptor plan(int freq_bins, int frames, int target_h, int target_w, Mode mode = Mode::kInterleave,
                int channels = 1);

template <typename Scalar>
struct PackedTensor {
  Tensor3<Scalar> values;
  Descriptor descriptor;
};

namespace detail {

template <typename Fn>
void for_each_mapping(const Descriptor& d, Fn&& fn) {
  const int oh = d.out_height(), ow = d.out_width();
  for (int c = 0; c < d.channels; ++c)
    for (int a = 0; a < d.factor_h; ++a)
      for (int b = 0; b < d.factor_w; ++b) {
        const int k = (c * d.factor_h + a) * d.factor_w + b;
        for (int i = 0; i < oh; ++i) {
          const int row = d.mode == Mode::kInterleave ? i * d.factor_h + a : a * oh + i;
          for (int j = 0; j < ow; ++j) {
            const int col = d.mode == Mode::kInterleave ? j * d.factor_w + b : b * ow + j;
            fn(k, i, j, c, row, col);
          }
        }
      }
}

}  // namespace detail

template <typename Scalar>
PackedTensor<Scalar> pack(const Tensor3<Scalar>& x, const Descriptor& d) {
  validate(d);
  require(x.channels == d.channels && x.height == d.height && x.width == d.width,
          "cmx_pack: tensor shape does not match descriptor");
  PackedTensor<Scalar> p{Tensor3<Scalar>(d.out_channels(), d.out_height(), d.out_width()), d};
  detail::for_each_mapping(d, [&](int k, int i, int j, int c, int r, int col) { p.values(k, i, j) = x(c, r, col); });
  return p;
}

template <typename Scalar>
Tensor3<Scalar> unpack(const PackedTensor<Scalar>& p) {
  const Descriptor& d = p.descriptor;
  validate(d);
  require(p.values.channels == d.out_channels() && p.values.height == d.out_height() &&
              p.values.width == d.out_width(),
          "cmx_unpack: packed shape does not match descriptor");
  Tensor3<Scalar> x(d.channels, d.height, d.width);
  detail::for_each_mapping(d, [&](int k, int i, int j, int c, int r, int col) { x(c, r, col) = p.values(k, i, j); });
  return x;
}

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

}  // namespace mars::cmx
