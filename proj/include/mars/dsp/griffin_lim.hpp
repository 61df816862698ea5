#pragma once

#include <cstdint>
#include <vector>

#include "mars/dsp/stft.hpp"

namespace mars::dsp {

struct GriffinLimOptions {
  int iterations = 64;
  std::uint64_t seed = 0;
  // Extrapolation weight of the accelerated update; 0 gives the classic iteration.
  double momentum = 0.99;
};

/// Phase retrieval from a linear, non-negative magnitude spectrogram.
/// Starts from uniform-random phase drawn from `seed`. When `residuals` is
/// given it receives || |STFT(x_t)| - s ||_2 after every iteration, measured
/// over the two-sided spectrum on the untrimmed grid; the sequence never
/// increases. An accelerated step that would raise the residual is replaced
/// by a plain projection from the previous iterate.
Waveform griffin_lim(const Spectrogram& s, const GriffinLimOptions& opts,
                     std::vector<double>* residuals = nullptr);

}  // namespace mars::dsp
