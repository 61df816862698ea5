#pragma once

#include <Eigen/Core>

#include "mars/dsp/stft.hpp"

namespace mars::dsp {

struct MelConfig {
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centre frequency (Hz) of each row of a spectrogram produced with `cfg`.
Eigen::VectorXd row_frequencies(const StftConfig& cfg, int sample_rate);

/// Triangular filters (peak 1) on HTK-mel-spaced centres: n_mels x freq_rows.
Eigen::MatrixXd mel_filterbank(const MelConfig& mel, const StftConfig& cfg, int sample_rate);

/// filterbank * s for a linear-scale spectrogram.
Eigen::MatrixXd mel_spectrogram(const Spectrogram& s, const Eigen::MatrixXd& filterbank);
Eigen::MatrixXd mel_spectrogram(const Spectrogram& s, const MelConfig& mel);

}  // namespace mars::dsp
