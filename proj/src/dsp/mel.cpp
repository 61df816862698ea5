#include "mars/dsp/mel.hpp"

#include <cmath>
#include <string>

#include "mars/error.hpp"

namespace mars::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::VectorXd row_frequencies(const StftConfig& cfg, int sample_rate) {
  const int first = cfg.bin_trim == BinTrim::kDropDc ? 1 : 0;
  Eigen::VectorXd f(cfg.trimmed_bins());
  for (Eigen::Index r = 0; r < f.size(); ++r)
    f[r] = static_cast<double>(r + first) * sample_rate / cfg.n_fft;
  return f;
}

Eigen::MatrixXd mel_filterbank(const MelConfig& mel, const StftConfig& cfg, int sample_rate) {
  require(mel.n_mels > 0, "mel: n_mels must be positive");
  require(mel.f_min >= 0.0 && mel.f_min < mel.f_max && mel.f_max <= sample_rate / 2.0,
          "mel: require 0 <= f_min < f_max <= sample_rate/2");
  require(mel.n_mels <= cfg.trimmed_bins(), "mel: n_mels exceeds frequency bins");

  const Eigen::VectorXd freqs = row_frequencies(cfg, sample_rate);
  const double lo = hz_to_mel(mel.f_min);
  const double hi = hz_to_mel(mel.f_max);
  Eigen::VectorXd edges(mel.n_mels + 2);
  for (Eigen::Index i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (mel.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(mel.n_mels, freqs.size());
  for (int m = 0; m < mel.n_mels; ++m) {
    const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
    for (Eigen::Index b = 0; b < freqs.size(); ++b) {
      const double up = (freqs[b] - l) / (c - l);
      const double down = (r - freqs[b]) / (r - c);
      fb(m, b) = std::max(0.0, std::min(up, down));
    }
    require(fb.row(m).sum() > 0.0,
            "mel: filter " + std::to_string(m) + " covers no frequency bin; reduce n_mels or raise f_min");
  }
  return fb;
}

Eigen::MatrixXd mel_spectrogram(const Spectrogram& s, const Eigen::MatrixXd& filterbank) {
  require(s.scale == AmplitudeScale::kLinear, "mel_spectrogram: expects a linear-scale spectrogram");
  require(filterbank.cols() == s.bins(), "mel_spectrogram: filterbank width does not match bins");
  require(filterbank.rows() <= s.bins(), "mel_spectrogram: n_mels exceeds frequency bins");
  return filterbank * s.values;
}

Eigen::MatrixXd mel_spectrogram(const Spectrogram& s, const MelConfig& mel) {
  return mel_spectrogram(s, mel_filterbank(mel, s.config, s.sample_rate));
}

}  // namespace mars::dsp
