#include "mars/cmx.hpp"

namespace mars::cmx {

namespace {
bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

void validate(const Descriptor& d) {
  require(d.channels > 0 && d.height > 0 && d.width > 0, "cmx: dimensions must be positive");
  require(is_pow2(d.factor_h) && is_pow2(d.factor_w), "cmx: factors must be powers of two");
  require(d.height % d.factor_h == 0, "cmx: factor_h does not divide height");
  require(d.width % d.factor_w == 0, "cmx: factor_w does not divide width");
  require(d.mode == Mode::kInterleave || d.mode == Mode::kBlock, "cmx: unknown mode");
}

Descriptor plan(int freq_bins, int frames, int target_h, int target_w, Mode mode, int channels) {
  require(target_h > 0 && target_w > 0, "cmx_plan: targets must be positive");
  require(freq_bins % target_h == 0, "cmx_plan: target height does not divide frequency bins");
  require(frames % target_w == 0, "cmx_plan: target width does not divide frame count");
  Descriptor d{channels, freq_bins, frames, freq_bins / target_h, frames / target_w, mode};
  validate(d);
  return d;
}

std::string to_string(Mode m) { return m == Mode::kInterleave ? "interleave" : "block"; }

Mode parse_mode(const std::string& s) {
  if (s == "interleave") return Mode::kInterleave;
  if (s == "block") return Mode::kBlock;
  fail(ErrorCategory::kInvalidInput, "unknown cmx mode '" + s + "'");
}

}  // namespace mars::cmx
