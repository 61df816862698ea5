#include "mars/ar/config.hpp"

#include <cmath>
#include <sstream>

#include "mars/error.hpp"
#include "mars/io.hpp"

namespace mars::ar {

void validate(const SamplingOptions& s) {
  require(s.temperature >= 0 && std::isfinite(s.temperature), "sampling: temperature must be finite and >= 0");
  require(s.top_k >= 1, "sampling: top_k must be >= 1");
  require(s.top_p > 0 && s.top_p <= 1, "sampling: top_p must lie in (0, 1]");
}

int ArConfig::context_length() const { return tokenizer::sequence_length(schedule); }

void validate(const ArConfig& c) {
  require(c.vocab >= 2 && c.code_dim > 0, "ar config: vocab must be >= 2 and code_dim positive");
  tokenizer::validate_schedule(c.schedule, c.schedule.empty() ? 0 : c.schedule.back());
  for (int k : c.schedule) require(c.schedule.back() % k == 0, "ar config: schedule sides must divide the final side");
  require(c.width > 0 && c.heads > 0 && c.width % c.heads == 0, "ar config: width must be divisible by heads");
  require(c.depth >= 0 && c.mlp_hidden > 0, "ar config: invalid depth or hidden size");
  require(c.classes >= 0, "ar config: classes must be non-negative");
  require(c.learning_rate > 0, "ar config: learning rate must be positive");
  validate(c.sampling);
}

void validate_condition(const ArConfig& c, int condition) {
  require(condition == kUnconditional || (condition >= 0 && condition < c.classes),
          "unknown class id " + std::to_string(condition) + " (model has " + std::to_string(c.classes) + " classes)");
}

std::string describe(const ArConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "ar vocab=" << c.vocab << " code_dim=" << c.code_dim << " schedule=";
  for (std::size_t i = 0; i < c.schedule.size(); ++i) s << (i ? "," : "") << c.schedule[i];
  s << " width=" << c.width << " depth=" << c.depth << " heads=" << c.heads << " mlp_hidden=" << c.mlp_hidden
    << " classes=" << c.classes << " learning_rate=" << c.learning_rate;
  return s.str();
}

std::uint64_t config_hash(const ArConfig& c) { return io::fnv1a(describe(c)); }

}  // namespace mars::ar
