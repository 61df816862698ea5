#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mars/dsp/waveform.hpp"

namespace mars::dsp {

enum class WindowKind { kHann, kHamming, kRectangular };
enum class PadMode { kReflect, kZero };
enum class BinTrim { kDropDc, kDropNyquist, kKeepAll };
enum class AmplitudeScale { kLinear, kLog1p };

struct StftConfig {
  int n_fft = 1024;
  int hop = 256;
  WindowKind window = WindowKind::kHann;
  PadMode pad_mode = PadMode::kZero;
  BinTrim bin_trim = BinTrim::kDropDc;
  /// When positive, the waveform tail is zero-padded or cropped to exactly
  /// `target_frames * hop` samples before analysis.
  int target_frames = 0;

  int full_bins() const { return n_fft / 2 + 1; }
  int trimmed_bins() const { return bin_trim == BinTrim::kKeepAll ? full_bins() : full_bins() - 1; }
};

/// Checks power-of-two size, hop divisibility and the constant-overlap-add
/// property of the window at this hop.
void validate(const StftConfig& cfg);

/// Periodic window of length n.
Eigen::VectorXd make_window(WindowKind kind, int n);

struct ComplexSpectrogram {
  Eigen::MatrixXd real;  // (n_fft/2 + 1) x frames
  Eigen::MatrixXd imag;

  Eigen::Index bins() const { return real.rows(); }
  Eigen::Index frames() const { return real.cols(); }
};

struct Spectrogram {
  Eigen::MatrixXd values;  // freq_bins x frames
  StftConfig config;
  AmplitudeScale scale = AmplitudeScale::kLinear;
  int sample_rate = 16000;

  Eigen::Index bins() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
};

/// Pads or crops the waveform tail to `cfg.target_frames * cfg.hop` samples.
Waveform fit_to_frames(const Waveform& w, const StftConfig& cfg);

/// Center-padded STFT; frames = ceil(len / hop) after `fit_to_frames`.
ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

/// Least-squares overlap-add inverse; returns frames * hop samples.
Waveform istft(const ComplexSpectrogram& c, const StftConfig& cfg, int sample_rate);

Spectrogram magnitude(const ComplexSpectrogram& c, const StftConfig& cfg, int sample_rate,
                      AmplitudeScale scale = AmplitudeScale::kLinear);

/// Re-inserts the trimmed row as zeros, yielding n_fft/2 + 1 rows.
Eigen::MatrixXd restore_trimmed(const Eigen::MatrixXd& values, const StftConfig& cfg);

Spectrogram to_linear(const Spectrogram& s);
Spectrogram to_log1p(const Spectrogram& s);

std::string to_string(WindowKind k);
std::string to_string(PadMode m);
std::string to_string(BinTrim t);
WindowKind parse_window(const std::string& s);
PadMode parse_pad_mode(const std::string& s);
BinTrim parse_bin_trim(const std::string& s);

}  // namespace mars::dsp
