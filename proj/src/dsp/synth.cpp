#include "mars/dsp/synth.hpp"

#include <cmath>
#include <numbers>

#include "mars/error.hpp"
#include "mars/random.hpp"

namespace mars::dsp {

Waveform synth_note(const NoteSpec& spec) {
  require(spec.family >= 0 && spec.family < kSynthFamilies, "synth: unknown family");
  require(spec.seconds > 0.0 && spec.sample_rate > 0, "synth: invalid duration or rate");
  Rng rng(spec.seed);
  const double f0 = 440.0 * std::pow(2.0, (spec.midi_pitch - 69) / 12.0);
  const double nyquist = spec.sample_rate / 2.0;
  const auto n = static_cast<Eigen::Index>(std::lround(spec.seconds * spec.sample_rate));

  // Harmonic amplitudes and envelope shape per family.
  int harmonics = 1;
  double rolloff = 1.0, attack = 0.01, decay = 1.0, sustain = 1.0, release = 0.2;
  bool odd_only = false;
  switch (spec.family) {
    case 0: harmonics = 6; rolloff = 2.0; attack = 0.005; decay = 0.6; sustain = 0.0; break;
    case 1: harmonics = 8; rolloff = 1.0; odd_only = true; attack = 0.03; sustain = 0.9; break;
    case 2: harmonics = 12; rolloff = 1.0; attack = 0.25; sustain = 0.8; decay = 2.0; break;
    case 3: harmonics = 10; rolloff = 1.4; attack = 0.06; sustain = 0.7; decay = 0.8; break;
  }
  const double note_off = spec.seconds * 0.75;
  std::vector<double> phase0(static_cast<std::size_t>(harmonics));
  for (auto& p : phase0) p = rng.uniform(0.0, 2.0 * std::numbers::pi);

  Waveform w{Eigen::VectorXd::Zero(n), spec.sample_rate};
  double norm = 0.0;
  for (int h = 1; h <= harmonics; ++h) norm += 1.0 / std::pow(h, rolloff);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    double env;
    if (t < attack) {
      env = t / attack;
    } else {
      env = sustain + (1.0 - sustain) * std::exp(-(t - attack) / (0.25 * decay));
    }
    if (t > note_off) env *= std::exp(-(t - note_off) / (0.25 * release));
    double acc = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
      if (odd_only && h % 2 == 0) continue;
      const double f = f0 * h;
      if (f >= nyquist * 0.95) break;
      acc += std::sin(2.0 * std::numbers::pi * f * t + phase0[static_cast<std::size_t>(h - 1)]) / std::pow(h, rolloff);
    }
    w.samples[i] = spec.velocity * env * acc / norm;
  }
  return w;
}

}  // namespace mars::dsp
