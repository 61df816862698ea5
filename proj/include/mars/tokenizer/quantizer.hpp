#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "mars/ad/ops.hpp"
#include "mars/tokenizer/token_map.hpp"

namespace mars::tokenizer {

using ad::Matrix;

/// Area-average downsampling from a K x K grid to k x k, as a (k^2 x K^2)
/// matrix acting on row-major grid rows. Requires k | K.
template <typename T>
Matrix<T> area_downsample(int from, int to) {
  require(to > 0 && from % to == 0, "area_downsample: target side must divide source side");
  const int f = from / to;
  Matrix<T> D = Matrix<T>::Zero(to * to, from * from);
  const T w = T(1) / static_cast<T>(f * f);
  for (int i = 0; i < to; ++i)
    for (int j = 0; j < to; ++j)
      for (int a = 0; a < f; ++a)
        for (int b = 0; b < f; ++b) D(i * to + j, (i * f + a) * from + j * f + b) = w;
  return D;
}

/// Bilinear (half-pixel centres, edge clamp) upsampling from k x k to K x K
/// as a (K^2 x k^2) matrix.
template <typename T>
Matrix<T> bilinear_upsample(int from, int to) {
  require(from > 0 && to >= from, "bilinear_upsample: target must not be smaller");
  std::vector<std::array<double, 2>> w(static_cast<std::size_t>(to));
  std::vector<std::array<int, 2>> src(static_cast<std::size_t>(to));
  for (int i = 0; i < to; ++i) {
    double x = (i + 0.5) * from / to - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(from - 1));
    const int i0 = static_cast<int>(std::floor(x));
    const int i1 = std::min(i0 + 1, from - 1);
    const double t = x - i0;
    src[static_cast<std::size_t>(i)] = {i0, i1};
    w[static_cast<std::size_t>(i)] = {1.0 - t, t};
  }
  Matrix<T> U = Matrix<T>::Zero(to * to, from * from);
  for (int i = 0; i < to; ++i)
    for (int j = 0; j < to; ++j)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
          U(i * to + j, src[si][a] * from + src[sj][b]) += static_cast<T>(w[si][a] * w[sj][b]);
        }
  return U;
}

/// Per-scale resampling operators for a schedule ending at K.
template <typename T>
struct ScalePyramid {
  Schedule schedule;
  std::vector<Matrix<T>> down;  // k^2 x K^2
  std::vector<Matrix<T>> up;    // K^2 x k^2

  ScalePyramid() = default;
  explicit ScalePyramid(const Schedule& s) : schedule(s) {
    const int K = s.back();
    validate_schedule(s, K);
    for (int k : s) {
      down.push_back(area_downsample<T>(K, k));
      up.push_back(bilinear_upsample<T>(k, K));
    }
  }
  int full_side() const { return schedule.back(); }
};

/// Index of the row of `codebook` nearest to `v` in squared Euclidean
/// distance; ties resolve to the lowest index.
template <typename T, typename Row>
int nearest_code(const Row& v, const Matrix<T>& codebook, T* distance = nullptr) {
  int best = 0;
  T best_d = std::numeric_limits<T>::infinity();
  for (Eigen::Index c = 0; c < codebook.rows(); ++c) {
    const T d = (codebook.row(c) - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (distance) *distance = best_d;
  return best;
}

template <typename T>
struct NearestResult {
  std::vector<int> indices;
  Matrix<T> quantized;
};

template <typename T>
NearestResult<T> quantize_nearest(const Matrix<T>& vectors, const Matrix<T>& codebook) {
  require(codebook.rows() >= 1, "quantize_nearest: empty codebook");
  require(vectors.cols() == codebook.cols(), "quantize_nearest: code dimension mismatch");
  NearestResult<T> r{std::vector<int>(static_cast<std::size_t>(vectors.rows())), Matrix<T>(vectors.rows(), vectors.cols())};
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const int idx = nearest_code<T>(vectors.row(i), codebook);
    r.indices[static_cast<std::size_t>(i)] = idx;
    r.quantized.row(i) = codebook.row(idx);
  }
  return r;
}

/// Maps a batch of vectors to (indices, quantized vectors). The shared
/// codebook quantizer is the default; tests substitute others.
template <typename T>
using VectorQuantizer = std::function<NearestResult<T>(const Matrix<T>&)>;

template <typename T>
struct QuantizeResult {
  MultiScaleTokenMap tokens;
  Matrix<T> z_hat;                       // K^2 x code_dim, sum of upsampled scale codes
  std::vector<T> residual_norms;         // ||z - z_hat|| after each scale
  std::vector<const void*> codebook_used;  // identity of the codebook at each scale
  std::vector<Matrix<T>> scale_inputs;     // downsampled residual quantised at each scale
  T codebook_loss = 0;                   // mean ||sg(z) - z_hat||^2
  T commitment_loss = 0;                 // mean ||z - sg(z_hat)||^2 (same value)
};

/// Residual multi-scale quantisation of a K x K latent (rows row-major):
/// at each scale the residual is area-downsampled, quantised, bilinearly
/// upsampled and accumulated.
template <typename T>
QuantizeResult<T> multiscale_quantize(const Matrix<T>& z, const ScalePyramid<T>& pyr, const VectorQuantizer<T>& quantizer,
                                      const void* codebook_identity = nullptr) {
  const int K = pyr.full_side();
  require(z.rows() == static_cast<Eigen::Index>(K) * K, "multiscale_quantize: latent must have K^2 rows");
  QuantizeResult<T> r;
  r.tokens.schedule = pyr.schedule;
  r.z_hat = Matrix<T>::Zero(z.rows(), z.cols());
  Matrix<T> residual = z;
  for (std::size_t s = 0; s < pyr.schedule.size(); ++s) {
    const Matrix<T> coarse = pyr.down[s] * residual;
    NearestResult<T> q = quantizer(coarse);
    r.scale_inputs.push_back(coarse);
    require(q.quantized.rows() == coarse.rows() && q.quantized.cols() == coarse.cols(),
            "multiscale_quantize: quantizer returned the wrong shape");
    r.z_hat.noalias() += pyr.up[s] * q.quantized;
    residual = z - r.z_hat;
    r.residual_norms.push_back(residual.norm());
    r.tokens.grids.push_back(std::move(q.indices));
    r.codebook_used.push_back(codebook_identity);
  }
  r.codebook_loss = (z - r.z_hat).squaredNorm() / static_cast<T>(z.size());
  r.commitment_loss = r.codebook_loss;
  return r;
}

template <typename T>
QuantizeResult<T> multiscale_quantize(const Matrix<T>& z, const ScalePyramid<T>& pyr, const Matrix<T>& codebook) {
  require(z.cols() == codebook.cols(), "multiscale_quantize: code dimension mismatch with codebook");
  return multiscale_quantize<T>(
      z, pyr, [&codebook](const Matrix<T>& v) { return quantize_nearest<T>(v, codebook); }, &codebook);
}

/// Sum over scales of upsampled code vectors for a token map.
template <typename T>
Matrix<T> reconstruct_latent(const MultiScaleTokenMap& t, const ScalePyramid<T>& pyr, const Matrix<T>& codebook,
                             std::size_t scales = std::numeric_limits<std::size_t>::max()) {
  require(t.schedule == pyr.schedule, "reconstruct_latent: schedule mismatch");
  validate(t, static_cast<int>(codebook.rows()));
  const int K = pyr.full_side();
  Matrix<T> z = Matrix<T>::Zero(static_cast<Eigen::Index>(K) * K, codebook.cols());
  for (std::size_t s = 0; s < std::min(scales, t.grids.size()); ++s) {
    Matrix<T> q(static_cast<Eigen::Index>(t.grids[s].size()), codebook.cols());
    for (std::size_t i = 0; i < t.grids[s].size(); ++i) q.row(static_cast<Eigen::Index>(i)) = codebook.row(t.grids[s][i]);
    z.noalias() += pyr.up[s] * q;
  }
  return z;
}

/// Differentiable z_hat as a function of the codebook, for the given token map.
template <typename T>
ad::Var<T> latent_from_codes(const MultiScaleTokenMap& t, const ScalePyramid<T>& pyr, const ad::Var<T>& codebook) {
  ad::Var<T> acc;
  for (std::size_t s = 0; s < t.grids.size(); ++s) {
    ad::Var<T> term = ad::left_apply(pyr.up[s], ad::embedding_lookup(codebook, std::span<const int>(t.grids[s])));
    acc = acc.defined() ? ad::add(acc, term) : term;
  }
  return acc;
}

}  // namespace mars::tokenizer
