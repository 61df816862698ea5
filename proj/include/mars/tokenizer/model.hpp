#pragma once

#include <memory>
#include <optional>
#include <type_traits>
#include <vector>

#include "mars/ad/layers.hpp"
#include "mars/tensor3.hpp"
#include "mars/tokenizer/config.hpp"
#include "mars/tokenizer/quantizer.hpp"

namespace mars::tokenizer {

using ad::Parameter;
using ad::ParameterList;
using ad::Var;

/// For each element of a (channels x size*size) image, the flat index of
/// the same value in the (K^2 x channels*L*L) patch matrix.
std::vector<int> patch_source_indices(int channels, int size, int patch);

/// K x K grid of patch vectors as a (K^2 x C*L*L) matrix; patch row
/// pi*K + pj holds x[c][pi*L + a][pj*L + b] at column (c*L + a)*L + b.
template <typename T>
Matrix<T> patchify(const Tensor3<T>& x, int patch) {
  require(patch > 0 && x.height % patch == 0 && x.width % patch == 0,
          "patchify: spatial dims " + std::to_string(x.height) + "x" + std::to_string(x.width) +
              " not divisible by patch size " + std::to_string(patch));
  const int kh = x.height / patch, kw = x.width / patch;
  Matrix<T> p(Eigen::Index(kh) * kw, Eigen::Index(x.channels) * patch * patch);
  for (int pi = 0; pi < kh; ++pi)
    for (int pj = 0; pj < kw; ++pj)
      for (int c = 0; c < x.channels; ++c)
        for (int a = 0; a < patch; ++a)
          for (int b = 0; b < patch; ++b)
            p(Eigen::Index(pi) * kw + pj, (Eigen::Index(c) * patch + a) * patch + b) = x(c, pi * patch + a, pj * patch + b);
  return p;
}

template <typename T>
Tensor3<T> unpatchify(const Matrix<T>& p, int channels, int size, int patch) {
  require(patch > 0 && size % patch == 0, "unpatchify: size not divisible by patch");
  const int k = size / patch;
  require(p.rows() == Eigen::Index(k) * k && p.cols() == Eigen::Index(channels) * patch * patch,
          "unpatchify: patch matrix shape does not match");
  Tensor3<T> x(channels, size, size);
  for (int pi = 0; pi < k; ++pi)
    for (int pj = 0; pj < k; ++pj)
      for (int c = 0; c < channels; ++c)
        for (int a = 0; a < patch; ++a)
          for (int b = 0; b < patch; ++b)
            x(c, pi * patch + a, pj * patch + b) = p(Eigen::Index(pi) * k + pj, (Eigen::Index(c) * patch + a) * patch + b);
  return x;
}

/// Quantised latent with the pieces needed for training.
template <typename T>
struct QuantizedLatent {
  QuantizeResult<T> result;
  Var<T> z_prime;          // straight-through: value z_hat, gradient passes to z
  Var<T> codebook_term;    // mse(sg(z), z_hat), flows into the codebook only
  Var<T> commitment_term;  // mse(z, sg(z_hat)), flows into the encoder only
};

template <typename T>
QuantizedLatent<T> quantize_with_gradients(const Var<T>& z, const Var<T>& codebook, const ScalePyramid<T>& pyr) {
  QuantizedLatent<T> q;
  q.result = multiscale_quantize<T>(z.value(), pyr, codebook.value());
  q.result.codebook_used.assign(q.result.codebook_used.size(), codebook.node());
  const Var<T> z_hat = latent_from_codes(q.result.tokens, pyr, codebook);
  q.codebook_term = ad::mse(ad::detach(z), z_hat);
  q.commitment_term = ad::mse(z, ad::detach(z_hat));
  q.z_prime = ad::add(z, ad::constant<T>(z_hat.value() - z.value()));
  return q;
}

template <typename T>
struct TokenizerModel {
  TokenizerConfig config;
  ad::Linear<T> patch_embed;
  Parameter<T> encoder_position;
  Parameter<T> encoder_tokens;  // S learnable tokens
  std::vector<ad::TransformerBlock<T>> encoder_blocks;
  ad::LayerNorm<T> encoder_norm;
  ad::Linear<T> to_code;

  Parameter<T> codebook;  // V x code_dim, shared by every scale

  ad::Linear<T> from_code;
  Parameter<T> decoder_position;
  Parameter<T> decoder_queries;  // K^2 learnable tokens read out as patches
  std::vector<ad::TransformerBlock<T>> decoder_blocks;
  ad::LayerNorm<T> decoder_norm;
  ad::Linear<T> to_patch;

  ScalePyramid<T> pyramid;

  TokenizerModel(const TokenizerConfig& cfg, Rng& rng) : config(cfg) {
    validate(cfg);
    const int n = cfg.grid() * cfg.grid();
    patch_embed = ad::Linear<T>("tok.patch_embed", cfg.patch_dim(), cfg.width, rng);
    encoder_position = Parameter<T>("tok.encoder_position", ad::normal_init<T>(n, cfg.width, 0.02, rng));
    encoder_tokens = Parameter<T>("tok.encoder_tokens", ad::normal_init<T>(cfg.learnable_tokens, cfg.width, 0.02, rng));
    for (int i = 0; i < cfg.encoder_depth; ++i)
      encoder_blocks.emplace_back("tok.encoder." + std::to_string(i), cfg.width, cfg.heads, cfg.mlp_hidden, rng);
    encoder_norm = ad::LayerNorm<T>("tok.encoder_norm", cfg.width);
    to_code = ad::Linear<T>("tok.to_code", cfg.width, cfg.code_dim, rng);
    codebook = Parameter<T>("tok.codebook", ad::normal_init<T>(cfg.codebook_size, cfg.code_dim, 1.0, rng));
    from_code = ad::Linear<T>("tok.from_code", cfg.code_dim, cfg.width, rng);
    decoder_position = Parameter<T>("tok.decoder_position", ad::normal_init<T>(n, cfg.width, 0.02, rng));
    decoder_queries = Parameter<T>("tok.decoder_queries", ad::normal_init<T>(n, cfg.width, 0.02, rng));
    for (int i = 0; i < cfg.decoder_depth; ++i)
      decoder_blocks.emplace_back("tok.decoder." + std::to_string(i), cfg.width, cfg.heads, cfg.mlp_hidden, rng);
    decoder_norm = ad::LayerNorm<T>("tok.decoder_norm", cfg.width);
    to_patch = ad::Linear<T>("tok.to_patch", cfg.width, cfg.patch_dim(), rng);
    pyramid = ScalePyramid<T>(cfg.schedule);
  }
  TokenizerModel(const TokenizerModel&) = delete;
  TokenizerModel& operator=(const TokenizerModel&) = delete;

  ParameterList<T> parameters() {
    ParameterList<T> out;
    patch_embed.collect(out);
    out.push_back(&encoder_position);
    if (config.learnable_tokens > 0) out.push_back(&encoder_tokens);
    for (auto& b : encoder_blocks) b.collect(out);
    encoder_norm.collect(out);
    to_code.collect(out);
    out.push_back(&codebook);
    from_code.collect(out);
    out.push_back(&decoder_position);
    out.push_back(&decoder_queries);
    for (auto& b : decoder_blocks) b.collect(out);
    decoder_norm.collect(out);
    to_patch.collect(out);
    return out;
  }

  /// (K^2 x C*L*L) patches -> (K^2 x code_dim) latent z.
  Var<T> encode(const Var<T>& patches) const {
    const Eigen::Index n = encoder_position.value().rows();
    require(patches.rows() == n && patches.cols() == config.patch_dim(),
            "encode: patch grid shape does not match the tokenizer config", ErrorCategory::kConfigMismatch);
    Var<T> h = ad::add(patch_embed(patches), encoder_position.var);
    if (config.learnable_tokens > 0) h = ad::concat_rows<T>({h, encoder_tokens.var});
    for (const auto& b : encoder_blocks) h = b(h);
    h = ad::slice_rows(h, 0, n);
    return to_code(encoder_norm(h));
  }

  /// (K^2 x code_dim) latent -> (K^2 x C*L*L) patches.
  Var<T> decode(const Var<T>& z) const {
    const Eigen::Index n = decoder_position.value().rows();
    require(z.rows() == n && z.cols() == config.code_dim, "decode: latent shape does not match the tokenizer config",
            ErrorCategory::kConfigMismatch);
    Var<T> h = ad::concat_rows<T>({ad::add(from_code(z), decoder_position.var), decoder_queries.var});
    for (const auto& b : decoder_blocks) h = b(h);
    return to_patch(decoder_norm(ad::slice_rows(h, n, n)));
  }

  QuantizeResult<T> quantize(const Matrix<T>& z) const {
    return multiscale_quantize<T>(z, pyramid, codebook.value());
  }

  /// Token map for one (C x M x M) input, no gradient recording.
  MultiScaleTokenMap tokenize(const Tensor3<T>& x) const {
    require(x.channels == config.channels && x.height == config.size && x.width == config.size,
            "tokenize: input shape does not match the tokenizer config", ErrorCategory::kConfigMismatch);
    const Matrix<T> z = encode(ad::constant<T>(patchify(x, config.patch))).value();
    return quantize(z).tokens;
  }

  Tensor3<T> detokenize(const MultiScaleTokenMap& t) const {
    const Matrix<T> z = reconstruct_latent<T>(t, pyramid, codebook.value());
    return unpatchify<T>(decode(ad::constant<T>(z)).value(), config.channels, config.size, config.patch);
  }
};

/// Simplified PatchGAN: conv(4, s2) -> leaky -> conv(4, s2) -> leaky ->
/// conv(3, s1), giving an (M/4 x M/4) score map.
template <typename T>
struct PatchDiscriminator {
  int channels = 0, size = 0, width = 0;
  Parameter<T> k1, b1, k2, b2, k3, b3;

  PatchDiscriminator(int c, int m, int w, Rng& rng) : channels(c), size(m), width(w) {
    require(c > 0 && w > 0 && m % 4 == 0 && m >= 4, "discriminator: size must be a positive multiple of 4");
    k1 = Parameter<T>("disc.conv1.weight", ad::xavier_uniform<T>(w, Eigen::Index(c) * 16, rng));
    b1 = Parameter<T>("disc.conv1.bias", Matrix<T>::Zero(w, 1));
    k2 = Parameter<T>("disc.conv2.weight", ad::xavier_uniform<T>(2 * w, Eigen::Index(w) * 16, rng));
    b2 = Parameter<T>("disc.conv2.bias", Matrix<T>::Zero(2 * w, 1));
    k3 = Parameter<T>("disc.conv3.weight", ad::xavier_uniform<T>(1, Eigen::Index(2 * w) * 9, rng));
    b3 = Parameter<T>("disc.conv3.bias", Matrix<T>::Zero(1, 1));
  }
  PatchDiscriminator(const PatchDiscriminator&) = delete;
  PatchDiscriminator& operator=(const PatchDiscriminator&) = delete;

  int score_side() const { return size / 4; }

  ParameterList<T> parameters() { return {&k1, &b1, &k2, &b2, &k3, &b3}; }

  /// image: (C x M*M) -> (1 x (M/4)^2) realism scores.
  Var<T> operator()(const Var<T>& image) const {
    Var<T> h = ad::leaky_relu(ad::conv2d(image, k1.var, b1.var, {channels, size, size, 4, 2, 1}));
    h = ad::leaky_relu(ad::conv2d(h, k2.var, b2.var, {width, size / 2, size / 2, 4, 2, 1}));
    return ad::conv2d(h, k3.var, b3.var, {2 * width, size / 4, size / 4, 3, 1, 1});
  }
};

template <typename T>
Var<T> hinge_discriminator_loss(const Var<T>& real_scores, const Var<T>& fake_scores) {
  return ad::add(ad::mean(ad::relu(ad::add_scalar(ad::scale(real_scores, T(-1)), T(1)))),
                 ad::mean(ad::relu(ad::add_scalar(fake_scores, T(1)))));
}

/// Non-saturating generator loss: mean softplus(-D(x_hat)).
template <typename T>
Var<T> generator_adversarial_loss(const Var<T>& fake_scores) {
  return ad::mean(ad::softplus(ad::scale(fake_scores, T(-1))));
}

struct LossWeights {
  double lambda_recon = 1.0;
  double lambda_vq = 1.0;
  double lambda_ad = 0.0;
  double beta = 0.25;

  static LossWeights from(const TokenizerConfig& c) { return {c.lambda_recon, c.lambda_vq, c.lambda_ad, c.beta}; }
};

struct LossBreakdown {
  double total = 0, recon = 0, vq = 0, codebook = 0, commitment = 0, adversarial = 0;
};

template <typename T>
struct TokenizerLoss {
  Var<T> total;
  LossBreakdown parts;
};

/// total = lr*recon + lvq*(codebook + beta*commitment) + lad*adversarial.
template <typename T>
TokenizerLoss<T> tokenizer_loss(const Var<T>& x, const Var<T>& x_hat, const QuantizedLatent<T>& q,
                                const std::type_identity_t<Var<T>>* disc_scores, const LossWeights& w) {
  require(w.lambda_recon >= 0 && w.lambda_vq >= 0 && w.lambda_ad >= 0 && w.beta >= 0,
          "tokenizer_loss: loss weights must be non-negative");
  TokenizerLoss<T> out;
  const Var<T> recon = ad::mse(x, x_hat);
  const Var<T> vq = ad::add(q.codebook_term, ad::scale(q.commitment_term, static_cast<T>(w.beta)));
  Var<T> total = ad::add(ad::scale(recon, static_cast<T>(w.lambda_recon)), ad::scale(vq, static_cast<T>(w.lambda_vq)));
  if (disc_scores && w.lambda_ad > 0) {
    const Var<T> adv = generator_adversarial_loss(*disc_scores);
    total = ad::add(total, ad::scale(adv, static_cast<T>(w.lambda_ad)));
    out.parts.adversarial = adv.scalar();
  }
  out.parts.recon = recon.scalar();
  out.parts.codebook = q.codebook_term.scalar();
  out.parts.commitment = q.commitment_term.scalar();
  out.parts.vq = vq.scalar();
  out.parts.total = total.scalar();
  out.total = total;
  return out;
}

}  // namespace mars::tokenizer
