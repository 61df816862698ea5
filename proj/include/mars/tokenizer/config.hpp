#pragma once

#include <cstdint>
#include <string>

#include "mars/tokenizer/token_map.hpp"

namespace mars::tokenizer {

struct TokenizerConfig {
  int channels = 2;
  int size = 256;  // M; input is channels x M x M
  int patch = 16;  // L
  int learnable_tokens = 4;  // S
  int width = 64;
  int encoder_depth = 2;
  int decoder_depth = 2;
  int heads = 4;
  int mlp_hidden = 128;
  int codebook_size = 1024;
  int code_dim = 16;
  Schedule schedule{1, 2, 4, 8, 16};
  double lambda_recon = 1.0;
  double lambda_vq = 1.0;
  double lambda_ad = 0.0;
  double beta = 0.25;
  int dead_code_steps = 256;
  double learning_rate = 1e-3;
  int disc_width = 16;
  double disc_learning_rate = 2e-4;

  int grid() const { return size / patch; }  // K
  int patch_dim() const { return channels * patch * patch; }
};

void validate(const TokenizerConfig& c);

/// Canonical text of every field that affects parameter shapes or training.
std::string describe(const TokenizerConfig& c);
std::uint64_t config_hash(const TokenizerConfig& c);

}  // namespace mars::tokenizer
