#pragma once

#include "mars/ar/model.hpp"
#include "mars/tokenizer/codec.hpp"

namespace mars::ar {

struct GeneratedClip {
  dsp::Waveform waveform;
  MultiScaleTokenMap tokens;
  dsp::Spectrogram spectrogram;  // log1p amplitude fed to Griffin-Lim
};

/// ar_sample followed by detokenisation. Stage failures are re-thrown with
/// the stage name prefixed.
GeneratedClip generate(int condition, std::uint64_t seed, const ArModel<float>& ar,
                       const tokenizer::TokenizerModel<float>& tok, const tokenizer::CodecConfig& codec,
                       const SamplingOptions& sampling);

}  // namespace mars::ar
