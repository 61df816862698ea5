#pragma once

#include <cstdint>

#include "mars/cmx.hpp"
#include "mars/dsp/griffin_lim.hpp"
#include "mars/dsp/stft.hpp"
#include "mars/tokenizer/model.hpp"

namespace mars::tokenizer {

/// How a (bins x frames) spectrogram becomes the square tokenizer input:
/// CMX packing keeps every row; truncation keeps the lowest `size` rows.
enum class Layout : std::uint8_t { kCmx = 0, kTruncate = 1 };

std::string to_string(Layout l);
Layout parse_layout(const std::string& s);

/// Global affine normalisation applied to log1p amplitudes.
struct Normalization {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Every stage between a waveform and a token map.
struct CodecConfig {
  dsp::StftConfig stft{.target_frames = 256};
  int sample_rate = 16000;
  Layout layout = Layout::kCmx;
  cmx::Mode cmx_mode = cmx::Mode::kInterleave;
  TokenizerConfig tokenizer;
  Normalization normalization;
  int griffin_lim_iterations = 64;
};

/// Descriptor taking the spectrogram to the tokenizer input (CMX layout).
cmx::Descriptor packing(const CodecConfig& c);

/// Throws config-mismatch unless the spectrogram, layout and tokenizer
/// shapes agree.
void validate(const CodecConfig& c);

/// log1p spectrogram -> normalised single-channel plane (the rows the
/// layout keeps), before any packing.
Tensor3<float> normalised_plane(const dsp::Spectrogram& s, const CodecConfig& c);
/// log1p spectrogram -> normalised tokenizer input.
Tensor3<float> to_model_input(const dsp::Spectrogram& s, const CodecConfig& c);
/// Tokenizer-shaped tensor -> log1p spectrogram (truncated rows restored as zero).
dsp::Spectrogram from_model_output(const Tensor3<float>& x, const CodecConfig& c);

dsp::Spectrogram analyse(const dsp::Waveform& w, const CodecConfig& c);  // log1p amplitude
dsp::Waveform synthesise(const dsp::Spectrogram& log_amplitude, const CodecConfig& c, std::uint64_t seed);

MultiScaleTokenMap tokenize(const dsp::Waveform& w, const CodecConfig& c, const TokenizerModel<float>& model);
dsp::Waveform detokenize(const MultiScaleTokenMap& t, const CodecConfig& c, const TokenizerModel<float>& model,
                         std::uint64_t seed);

}  // namespace mars::tokenizer
