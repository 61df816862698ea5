#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mars/ar/config.hpp"
#include "mars/dsp/mel.hpp"
#include "mars/metrics/embedding.hpp"
#include "mars/tokenizer/codec.hpp"

namespace mars::pipeline {

struct DataConfig {
  std::string manifest;
  bool resample = false;  // otherwise clips at another rate are skipped
  std::vector<std::string> families{"mallet", "organ", "bowed", "reed"};
  int pitch_min = 21;
  int pitch_max = 108;
};

struct TrainConfig {
  int tokenizer_steps = 1000;
  int tokenizer_batch = 8;
  int ar_steps = 1000;
  int ar_batch = 8;
  int checkpoint_every = 250;
};

struct GenerateConfig {
  int count = 4;
  std::string condition = "cycle";  // "cycle", "none" or a family name
};

struct MetricConfig {
  int ndb_k = 10;
  double ndb_alpha = 0.05;
  int min_samples = 2;
  metrics::ClassifierConfig classifier;
};

/// Everything one run needs. `codec.normalization` is not part of the file;
/// it is filled in from the preprocessing cache.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "run";
  int threads = 1;
  DataConfig data;
  tokenizer::CodecConfig codec;
  dsp::MelConfig mel;
  ar::ArConfig ar;  // vocab, code_dim, schedule and classes follow the rest
  TrainConfig train;
  GenerateConfig generate;
  MetricConfig metrics;

  std::filesystem::path out_dir() const { return out; }
  std::filesystem::path cache_dir() const { return out_dir() / "cache"; }
  std::filesystem::path tokenizer_dir() const { return out_dir() / "tokenizer"; }
  std::filesystem::path ar_dir() const { return out_dir() / "ar"; }
  std::filesystem::path generated_dir() const { return out_dir() / "generated"; }
  std::filesystem::path eval_dir() const { return out_dir() / "eval"; }
};

/// Copies the fields the AR model shares with the tokenizer and dataset.
void sync_derived(RunConfig& c);

/// Cross-module consistency checks; throws config-mismatch on failure.
void validate(const RunConfig& c);

/// Parses "[section]" headers and "key = value" lines ('#' and ';' start
/// comments). Unknown sections or keys are rejected. Relative manifest paths
/// resolve against `base`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical file text; parse_config(to_text(c)) == c.
std::string to_text(const RunConfig& c);

/// Hash of every field that can change an artifact (output location and
/// thread count excluded).
std::uint64_t config_hash(const RunConfig& c);

/// Hash of the fields that determine cache contents.
std::uint64_t cache_hash(const RunConfig& c);

}  // namespace mars::pipeline
