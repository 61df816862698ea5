#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mars/cmx.hpp"
#include "mars/pipeline/dataset.hpp"

namespace mars::pipeline {

/// Cached tensor file:
///   "MARSCMX0" | u32 channels, height, width, factor_h, factor_w | u8 mode
///   | u32 C, H, W | f32 values (C*H*W, row-major per channel)
///   | u64 FNV-1a of every preceding byte.
std::vector<std::uint8_t> encode_tensor(const cmx::PackedTensor<float>& t);
/// Throws on bad magic, inconsistent dims or a digest mismatch.
cmx::PackedTensor<float> decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const std::filesystem::path& path, const cmx::PackedTensor<float>& t);
cmx::PackedTensor<float> load_tensor(const std::filesystem::path& path);

/// Global log1p-domain statistics plus what they were computed from.
struct CacheStats {
  std::uint64_t cache_hash = 0;
  std::uint64_t fingerprint = 0;  // ids, splits and audio bytes of every record
  tokenizer::Normalization normalization;
  std::int64_t train_items = 0;
  std::vector<std::string> ids;  // entries present, manifest order
};

std::filesystem::path stats_path(const RunConfig& cfg);
std::filesystem::path entry_path(const RunConfig& cfg, const std::string& id);

/// Reads "stats.json"; missing-prerequisite when absent, config-mismatch
/// when written under a different cache configuration.
CacheStats load_stats(const RunConfig& cfg);

struct PreprocessReport {
  int written = 0;
  int reused = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // id, message
  CacheStats stats;
};

/// decode -> STFT -> log1p magnitude -> normalise -> CMX pack, one entry per
/// record. Entries that already decode with a valid digest under unchanged
/// statistics are kept; anything else is rewritten and each new entry is
/// checked by unpacking against the freshly computed plane. Per-file
/// failures are reported and skipped.
PreprocessReport preprocess_cache(const DatasetManifest& manifest, const RunConfig& cfg);

/// RunConfig with the cache's normalisation filled in.
RunConfig with_normalization(const RunConfig& cfg, const CacheStats& stats);

struct CachedItem {
  const ManifestRecord* record = nullptr;
  Tensor3<float> tensor;
};

/// Cache entries for the records of one split, in manifest order. Records
/// whose entry is missing (failed preprocessing) are left out.
std::vector<CachedItem> load_split(const DatasetManifest& manifest, const RunConfig& cfg, Split split);

}  // namespace mars::pipeline
