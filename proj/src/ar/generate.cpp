#include "mars/ar/generate.hpp"

namespace mars::ar {

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.category(), std::string(name) + ": " + e.what());
  }
}

}  // namespace

GeneratedClip generate(int condition, std::uint64_t seed, const ArModel<float>& ar,
                       const tokenizer::TokenizerModel<float>& tok, const tokenizer::CodecConfig& codec,
                       const SamplingOptions& sampling) {
  GeneratedClip clip;
  stage("generate", [&] {
    tokenizer::validate(codec);
    require(ar.config.schedule == tok.config.schedule && ar.config.vocab == tok.config.codebook_size &&
                ar.config.code_dim == tok.config.code_dim,
            "AR model and tokenizer disagree on schedule, vocabulary or code_dim", ErrorCategory::kConfigMismatch);
    return 0;
  });
  clip.tokens = stage("sample", [&] { return ar_sample(ar, condition, seed, sampling); });
  clip.spectrogram = stage("decode", [&] { return tokenizer::from_model_output(tok.detokenize(clip.tokens), codec); });
  clip.waveform = stage("griffin-lim", [&] { return tokenizer::synthesise(clip.spectrogram, codec, seed); });
  return clip;
}

}  // namespace mars::ar
