#include "mars/tokenizer/config.hpp"

#include <sstream>

#include "mars/io.hpp"

namespace mars::tokenizer {

void validate(const TokenizerConfig& c) {
  require(c.channels > 0 && c.size > 0 && c.patch > 0, "tokenizer config: shape fields must be positive");
  require(c.size % c.patch == 0, "tokenizer config: patch size " + std::to_string(c.patch) +
                                     " does not divide input size " + std::to_string(c.size));
  require(c.learnable_tokens >= 0, "tokenizer config: learnable token count must be non-negative");
  require(c.width > 0 && c.heads > 0 && c.width % c.heads == 0, "tokenizer config: width must be divisible by heads");
  require(c.encoder_depth >= 0 && c.decoder_depth >= 0 && c.mlp_hidden > 0, "tokenizer config: invalid depth or hidden size");
  require(c.codebook_size >= 2, "tokenizer config: codebook needs at least two entries");
  require(c.code_dim > 0, "tokenizer config: code_dim must be positive");
  validate_schedule(c.schedule, c.grid());
  for (int k : c.schedule) require(c.grid() % k == 0, "tokenizer config: schedule sides must divide the grid side");
  require(c.lambda_recon >= 0 && c.lambda_vq >= 0 && c.lambda_ad >= 0 && c.beta >= 0,
          "tokenizer config: loss weights must be non-negative");
  require(c.dead_code_steps > 0, "tokenizer config: dead_code_steps must be positive");
  require(c.learning_rate > 0 && c.disc_learning_rate > 0, "tokenizer config: learning rates must be positive");
  require(c.disc_width > 0 && c.size % 4 == 0, "tokenizer config: discriminator needs size divisible by 4");
}

std::string describe(const TokenizerConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "tokenizer channels=" << c.channels << " size=" << c.size << " patch=" << c.patch
    << " learnable_tokens=" << c.learnable_tokens << " width=" << c.width << " encoder_depth=" << c.encoder_depth
    << " decoder_depth=" << c.decoder_depth << " heads=" << c.heads << " mlp_hidden=" << c.mlp_hidden
    << " codebook_size=" << c.codebook_size << " code_dim=" << c.code_dim << " schedule=";
  for (std::size_t i = 0; i < c.schedule.size(); ++i) s << (i ? "," : "") << c.schedule[i];
  s << " lambda_recon=" << c.lambda_recon << " lambda_vq=" << c.lambda_vq << " lambda_ad=" << c.lambda_ad
    << " beta=" << c.beta << " dead_code_steps=" << c.dead_code_steps << " learning_rate=" << c.learning_rate
    << " disc_width=" << c.disc_width << " disc_learning_rate=" << c.disc_learning_rate;
  return s.str();
}

std::uint64_t config_hash(const TokenizerConfig& c) { return io::fnv1a(describe(c)); }

}  // namespace mars::tokenizer
