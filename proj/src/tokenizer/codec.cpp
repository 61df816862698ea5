#include "mars/tokenizer/codec.hpp"

namespace mars::tokenizer {

std::string to_string(Layout l) { return l == Layout::kCmx ? "cmx" : "truncate"; }

Layout parse_layout(const std::string& s) {
  if (s == "cmx") return Layout::kCmx;
  if (s == "truncate") return Layout::kTruncate;
  fail(ErrorCategory::kInvalidInput, "unknown layout '" + s + "' (expected cmx or truncate)");
}

cmx::Descriptor packing(const CodecConfig& c) {
  const int m = c.tokenizer.size;
  if (c.layout == Layout::kTruncate) return cmx::Descriptor{1, m, m, 1, 1, c.cmx_mode};
  return cmx::plan(c.stft.trimmed_bins(), c.stft.target_frames, m, m, c.cmx_mode);
}

void validate(const CodecConfig& c) {
  dsp::validate(c.stft);
  validate(c.tokenizer);
  require(c.stft.target_frames > 0, "codec: target_frames must be set so every clip has the same width",
          ErrorCategory::kConfigMismatch);
  require(c.normalization.stddev > 0, "codec: normalisation stddev must be positive", ErrorCategory::kConfigMismatch);
  require(c.griffin_lim_iterations >= 1, "codec: griffin_lim_iterations must be >= 1");
  const int m = c.tokenizer.size;
  if (c.layout == Layout::kTruncate) {
    require(c.tokenizer.channels == 1, "codec: truncated layout needs a single-channel tokenizer", ErrorCategory::kConfigMismatch);
    require(c.stft.trimmed_bins() >= m && c.stft.target_frames == m,
            "codec: truncation needs at least " + std::to_string(m) + " rows and exactly " + std::to_string(m) + " frames",
            ErrorCategory::kConfigMismatch);
    return;
  }
  const cmx::Descriptor d = packing(c);
  require(d.out_channels() == c.tokenizer.channels,
          "codec: CMX yields " + std::to_string(d.out_channels()) + " channels but the tokenizer expects " +
              std::to_string(c.tokenizer.channels),
          ErrorCategory::kConfigMismatch);
}

Tensor3<float> normalised_plane(const dsp::Spectrogram& s, const CodecConfig& c) {
  require(s.scale == dsp::AmplitudeScale::kLog1p, "to_model_input: expects a log1p spectrogram");
  require(s.bins() == c.stft.trimmed_bins() && s.frames() == c.stft.target_frames,
          "to_model_input: spectrogram is " + std::to_string(s.bins()) + "x" + std::to_string(s.frames()) +
              ", config expects " + std::to_string(c.stft.trimmed_bins()) + "x" + std::to_string(c.stft.target_frames),
          ErrorCategory::kConfigMismatch);
  const double mu = c.normalization.mean, inv = 1.0 / c.normalization.stddev;
  const int rows = c.layout == Layout::kTruncate ? c.tokenizer.size : static_cast<int>(s.bins());
  Tensor3<float> x(1, rows, static_cast<int>(s.frames()));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < x.width; ++j) x(0, i, j) = static_cast<float>((s.values(i, j) - mu) * inv);
  return x;
}

Tensor3<float> to_model_input(const dsp::Spectrogram& s, const CodecConfig& c) {
  Tensor3<float> x = normalised_plane(s, c);
  if (c.layout == Layout::kTruncate) return x;
  return cmx::pack(x, packing(c)).values;
}

dsp::Spectrogram from_model_output(const Tensor3<float>& x, const CodecConfig& c) {
  const int m = c.tokenizer.size;
  require(x.channels == c.tokenizer.channels && x.height == m && x.width == m,
          "from_model_output: tensor does not match the tokenizer shape", ErrorCategory::kConfigMismatch);
  const Tensor3<float> plane = c.layout == Layout::kTruncate ? x : cmx::unpack(cmx::PackedTensor<float>{x, packing(c)});
  dsp::Spectrogram s;
  s.config = c.stft;
  s.scale = dsp::AmplitudeScale::kLog1p;
  s.sample_rate = c.sample_rate;
  s.values = Eigen::MatrixXd::Zero(c.stft.trimmed_bins(), c.stft.target_frames);
  const double mu = c.normalization.mean, sd = c.normalization.stddev;
  for (int i = 0; i < plane.height; ++i)
    for (int j = 0; j < plane.width; ++j) s.values(i, j) = std::max(0.0, plane(0, i, j) * sd + mu);
  return s;
}

dsp::Spectrogram analyse(const dsp::Waveform& w, const CodecConfig& c) {
  require(w.sample_rate == c.sample_rate,
          "analyse: waveform is " + std::to_string(w.sample_rate) + " Hz, config expects " + std::to_string(c.sample_rate),
          ErrorCategory::kConfigMismatch);
  return dsp::magnitude(dsp::stft(w, c.stft), c.stft, c.sample_rate, dsp::AmplitudeScale::kLog1p);
}

dsp::Waveform synthesise(const dsp::Spectrogram& log_amplitude, const CodecConfig& c, std::uint64_t seed) {
  return dsp::griffin_lim(dsp::to_linear(log_amplitude), {c.griffin_lim_iterations, seed});
}

MultiScaleTokenMap tokenize(const dsp::Waveform& w, const CodecConfig& c, const TokenizerModel<float>& model) {
  validate(c);
  require(describe(model.config) == describe(c.tokenizer), "tokenize: model was built for a different tokenizer config",
          ErrorCategory::kConfigMismatch);
  return model.tokenize(to_model_input(analyse(w, c), c));
}

dsp::Waveform detokenize(const MultiScaleTokenMap& t, const CodecConfig& c, const TokenizerModel<float>& model,
                         std::uint64_t seed) {
  validate(c);
  require(describe(model.config) == describe(c.tokenizer), "detokenize: model was built for a different tokenizer config",
          ErrorCategory::kConfigMismatch);
  require(t.schedule == c.tokenizer.schedule, "detokenize: token map schedule does not match the config",
          ErrorCategory::kConfigMismatch);
  return synthesise(from_model_output(model.detokenize(t), c), c, seed);
}

}  // namespace mars::tokenizer
