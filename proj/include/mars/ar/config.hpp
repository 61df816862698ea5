#pragma once

#include <cstdint>
#include <string>

#include "mars/tokenizer/token_map.hpp"

namespace mars::ar {

struct SamplingOptions {
  double temperature = 1.0;  // 0 selects the argmax
  int top_k = 64;
  double top_p = 1.0;
};

void validate(const SamplingOptions& s);

struct ArConfig {
  int vocab = 1024;
  int code_dim = 16;
  tokenizer::Schedule schedule{1, 2, 4, 8, 16};
  int width = 64;
  int depth = 2;
  int heads = 4;
  int mlp_hidden = 128;
  int classes = 4;  // condition ids 0..classes-1; kUnconditional is extra
  double learning_rate = 1e-3;
  SamplingOptions sampling;

  int context_length() const;  // sum of k^2; the start token is the scale-1 input
};

/// Condition id meaning "no class".
inline constexpr int kUnconditional = -1;

void validate(const ArConfig& c);
void validate_condition(const ArConfig& c, int condition);
std::string describe(const ArConfig& c);
std::uint64_t config_hash(const ArConfig& c);

}  // namespace mars::ar
