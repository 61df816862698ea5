#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mars/dsp/waveform.hpp"
#include "mars/pipeline/config.hpp"

namespace mars::pipeline {

enum class Split { kTrain, kValid, kTest };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestRecord {
  std::string id;
  std::filesystem::path audio;  // resolved against the manifest directory
  int pitch = 0;
  std::string family;
  int family_index = 0;
  Split split = Split::kTrain;
  int sample_rate = 0;  // as found in the file
  double seconds = 0;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;  // usable records in file order
  std::vector<std::string> skipped;     // ids left out (wrong rate, resampling off)
  std::vector<std::string> warnings;

  std::vector<const ManifestRecord*> split(Split s) const;
  std::size_t count(Split s) const;
};

/// Reads a JSON-lines manifest: one object per line with "id", "audio",
/// "pitch", "instrument_family" and "split". Blank lines are ignored.
/// Malformed lines, duplicate ids, missing files and labels outside the
/// configured vocabularies are errors naming the line.
DatasetManifest ingest(const std::filesystem::path& manifest, const RunConfig& cfg);

/// Decodes a record's audio and brings it to the configured rate when
/// resampling is enabled.
dsp::Waveform load_audio(const ManifestRecord& r, const RunConfig& cfg);

/// Linear-interpolation resampling.
dsp::Waveform resample(const dsp::Waveform& w, int sample_rate);

/// Pitch label collapsed to a pitch class (0..11) for the pitch classifier.
inline int pitch_bucket(int midi_pitch) { return midi_pitch % 12; }
inline constexpr int kPitchBuckets = 12;

struct SyntheticDatasetOptions {
  int count = 16;
  double seconds = 4.0;
  int sample_rate = 16000;
  int test_every = 4;  // every n-th clip goes to the test split
  std::uint64_t seed = 0;
};

/// Writes synthetic single-note clips plus "manifest.jsonl" into `dir`.
/// Families cycle through the configured names; pitches spread over
/// [pitch_min, pitch_max]. Returns the manifest path.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDatasetOptions& opt,
                                              const DataConfig& data);

}  // namespace mars::pipeline
