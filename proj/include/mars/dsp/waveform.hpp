#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mars::dsp {

/// Mono audio, samples nominally in [-1, 1].
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = 16000;

  Eigen::Index size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Throws unless the waveform is non-empty, finite and has a positive rate.
void validate(const Waveform& w);

enum class WavEncoding { kPcm16, kFloat32 };

/// Parses a RIFF/WAVE container (PCM16 or IEEE float32, any channel count)
/// into mono by averaging channels.
Waveform decode_wav(std::span<const std::uint8_t> bytes);

/// Serialises to a mono RIFF/WAVE container. Samples outside [-1, 1] are clamped.
std::vector<std::uint8_t> encode_wav(const Waveform& w, WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace mars::dsp
