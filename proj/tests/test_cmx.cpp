#include "doctest.h"
#include "mars/cmx.hpp"
#include "mars/random.hpp"

using namespace mars;
using namespace mars::cmx;

namespace {

Tensor3<float> random_tensor(int c, int h, int w, Rng& rng) {
  Tensor3<float> t(c, h, w);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = static_cast<float>(rng.normal());
  return t;
}

}  // namespace

TEST_CASE("plan") {
  const Descriptor a = plan(512, 256, 256, 256);
  CHECK(a.factor_h == 2);
  CHECK(a.factor_w == 1);
  CHECK(a.out_channels() == 2);

  const Descriptor b = plan(512, 512, 256, 256);
  CHECK(b.factor_h == 2);
  CHECK(b.factor_w == 2);
  CHECK(b.out_channels() == 4);

  // 256x256 truncated input into 128x128 gives the 4-channel ablation layout.
  CHECK(plan(256, 256, 128, 128).out_channels() == 4);
  CHECK(plan(512, 512, 128, 128).out_channels() == 16);

  const Descriptor id = plan(256, 256, 256, 256);
  CHECK(id.identity());

  CHECK_THROWS_AS(plan(512, 256, 200, 256), Error);
  CHECK_THROWS_AS(plan(384, 256, 128, 256), Error);  // factor 3 is not a power of two
}

TEST_CASE("interleave packing of the 4x4 hand example") {
  Tensor3<int> x(1, 4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) x(0, r, c) = 10 * r + c;
  const auto p = pack(x, plan(4, 4, 2, 2));
  REQUIRE(p.values.shape() == std::array<int, 3>{4, 2, 2});
  // channel k = a*fw + b holds x[i*2 + a][j*2 + b]
  CHECK(p.values(0, 0, 0) == 0);
  CHECK(p.values(0, 0, 1) == 2);
  CHECK(p.values(0, 1, 0) == 20);
  CHECK(p.values(0, 1, 1) == 22);
  CHECK(p.values(1, 0, 0) == 1);
  CHECK(p.values(2, 0, 0) == 10);
  CHECK(p.values(3, 1, 1) == 33);
  CHECK(unpack(p) == x);
}

TEST_CASE("block packing splits frequency halves") {
  Tensor3<float> x(1, 512, 256);
  for (int r = 0; r < 512; ++r)
    for (int c = 0; c < 256; ++c) x(0, r, c) = static_cast<float>(r);
  const auto p = pack(x, plan(512, 256, 256, 256, Mode::kBlock));
  REQUIRE(p.values.channels == 2);
  for (int i = 0; i < 256; ++i) {
    CHECK(p.values(0, i, 7) == static_cast<float>(i));
    CHECK(p.values(1, i, 7) == static_cast<float>(256 + i));
  }
}

TEST_CASE("identity descriptor is a no-op") {
  Rng rng(1);
  const auto x = random_tensor(3, 8, 4, rng);
  const auto p = pack(x, Descriptor{3, 8, 4, 1, 1, Mode::kInterleave});
  CHECK(p.values == x);
}

TEST_CASE("pack/unpack is a bijection over random shapes, factors and modes") {
  Rng rng(2024);
  const int factors[] = {1, 2, 4};
  for (int trial = 0; trial < 200; ++trial) {
    const int fh = factors[rng.below(3)], fw = factors[rng.below(3)];
    const int c = 1 + static_cast<int>(rng.below(3));
    const int h = fh * (1 + static_cast<int>(rng.below(6)));
    const int w = fw * (1 + static_cast<int>(rng.below(6)));
    const Mode mode = rng.below(2) ? Mode::kBlock : Mode::kInterleave;
    const Descriptor d{c, h, w, fh, fw, mode};
    const auto x = random_tensor(c, h, w, rng);
    const auto p = pack(x, d);
    CHECK(p.values.size() == x.size());
    CHECK(unpack(p) == x);
    // The other direction: any packed-shape tensor unpacks and re-packs to itself.
    const PackedTensor<float> q{random_tensor(d.out_channels(), d.out_height(), d.out_width(), rng), d};
    CHECK(pack(unpack(q), d).values == q.values);
  }
}

TEST_CASE("interleave keeps each 2x2 block at one output coordinate") {
  Tensor3<int> x(1, 8, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) x(0, r, c) = 100 * r + c;
  const auto p = pack(x, plan(8, 8, 4, 4));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) CHECK(p.values(a * 2 + b, i, j) == x(0, 2 * i + a, 2 * j + b));
}

TEST_CASE("packing shrinks the patch sequence") {
  // 512x512 with patch 16: 32*32 = 1024 patches; after (2,2) packing 16*16 = 256.
  const Descriptor d = plan(512, 512, 256, 256);
  const int L = 16;
  CHECK((d.height / L) * (d.width / L) == 1024);
  CHECK((d.out_height() / L) * (d.out_width() / L) == 256);
  CHECK(d.height / (d.factor_h * L) * (d.width / (d.factor_w * L)) == 256);
}

TEST_CASE("shape validation") {
  Rng rng(3);
  const auto x = random_tensor(1, 4, 4, rng);
  CHECK_THROWS_AS(pack(x, Descriptor{1, 8, 4, 2, 2, Mode::kInterleave}), Error);
  auto p = pack(x, plan(4, 4, 2, 2));
  p.descriptor.height = 8;
  CHECK_THROWS_AS(unpack(p), Error);
}
