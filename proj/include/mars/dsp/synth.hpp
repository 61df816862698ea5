#pragma once

#include <cstdint>

#include "mars/dsp/waveform.hpp"

namespace mars::dsp {

/// Number of instrument families the note synthesiser knows.
inline constexpr int kSynthFamilies = 4;

struct NoteSpec {
  int midi_pitch = 60;
  int family = 0;  // 0 mallet, 1 organ, 2 bowed, 3 reed
  double seconds = 4.0;
  int sample_rate = 16000;
  double velocity = 0.6;
  std::uint64_t seed = 0;
};

/// Deterministic harmonic note with a family-specific spectrum and envelope,
/// shaped like a single-note dataset clip (mono, fixed length).
Waveform synth_note(const NoteSpec& spec);

}  // namespace mars::dsp
