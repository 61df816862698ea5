#include "mars/pipeline/cache.hpp"

#include <cmath>
#include <optional>

#include "json.hpp"
#include "mars/io.hpp"
#include "mars/pipeline/parallel.hpp"

namespace mars::pipeline {

namespace {

constexpr std::string_view kTensorMagic = "MARSCMX0";

std::uint64_t parse_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

cmx::PackedTensor<float> pack_plane(const Tensor3<float>& plane, const tokenizer::CodecConfig& codec) {
  return cmx::pack(plane, tokenizer::packing(codec));
}

std::uint64_t dataset_fingerprint(const DatasetManifest& m) {
  std::uint64_t h = io::fnv1a("dataset");
  for (const auto& r : m.records) {
    h = io::fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(r.id.data()), r.id.size()), h);
    const std::string split = "|" + to_string(r.split) + "|";
    h = io::fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(split.data()), split.size()), h);
    const auto bytes = io::read_file(r.audio);
    h = io::fnv1a(bytes, h);
  }
  return h;
}

void save_stats(const RunConfig& cfg, const CacheStats& s) {
  nlohmann::ordered_json j;
  j["cache_hash"] = io::hex64(s.cache_hash);
  j["fingerprint"] = io::hex64(s.fingerprint);
  j["mean"] = s.normalization.mean;
  j["stddev"] = s.normalization.stddev;
  j["train_items"] = s.train_items;
  j["ids"] = s.ids;
  io::write_text(stats_path(cfg), j.dump(2) + "\n");
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const cmx::PackedTensor<float>& t) {
  const cmx::Descriptor& d = t.descriptor;
  cmx::validate(d);
  require(t.values.channels == d.out_channels() && t.values.height == d.out_height() && t.values.width == d.out_width(),
          "tensor file: values do not match the descriptor");
  io::ByteWriter w;
  w.put_bytes(kTensorMagic);
  for (int v : {d.channels, d.height, d.width, d.factor_h, d.factor_w}) w.put(static_cast<std::uint32_t>(v));
  w.put(static_cast<std::uint8_t>(d.mode));
  for (int v : {t.values.channels, t.values.height, t.values.width}) w.put(static_cast<std::uint32_t>(v));
  w.put_array(std::span<const float>(t.values.data.data(), static_cast<std::size_t>(t.values.size())));
  w.put(io::fnv1a(w.bytes()));
  return w.take();
}

cmx::PackedTensor<float> decode_tensor(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "tensor file");
  r.expect_magic(kTensorMagic);
  cmx::Descriptor d;
  d.channels = static_cast<int>(r.get<std::uint32_t>());
  d.height = static_cast<int>(r.get<std::uint32_t>());
  d.width = static_cast<int>(r.get<std::uint32_t>());
  d.factor_h = static_cast<int>(r.get<std::uint32_t>());
  d.factor_w = static_cast<int>(r.get<std::uint32_t>());
  const auto mode = r.get<std::uint8_t>();
  require(mode <= 1, "tensor file: unknown CMX mode byte " + std::to_string(mode));
  d.mode = static_cast<cmx::Mode>(mode);
  cmx::validate(d);
  const int c = static_cast<int>(r.get<std::uint32_t>());
  const int h = static_cast<int>(r.get<std::uint32_t>());
  const int w = static_cast<int>(r.get<std::uint32_t>());
  require(c == d.out_channels() && h == d.out_height() && w == d.out_width(),
          "tensor file: dims " + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w) +
              " disagree with the descriptor");
  cmx::PackedTensor<float> t{Tensor3<float>(c, h, w), d};
  r.get_array(std::span<float>(t.values.data.data(), static_cast<std::size_t>(t.values.size())));
  const std::size_t body = r.position();
  const auto digest = r.get<std::uint64_t>();
  require(r.done(), "tensor file: trailing bytes");
  require(digest == io::fnv1a(bytes.first(body)), "tensor file: content digest mismatch (corrupt entry)");
  return t;
}

void save_tensor(const std::filesystem::path& path, const cmx::PackedTensor<float>& t) {
  const auto bytes = encode_tensor(t);
  io::write_file(path, bytes);
}

cmx::PackedTensor<float> load_tensor(const std::filesystem::path& path) {
  try {
    return decode_tensor(io::read_file(path));
  } catch (const Error& e) {
    fail(e.category(), path.filename().string() + ": " + e.what());
  }
}

std::filesystem::path stats_path(const RunConfig& cfg) { return cfg.cache_dir() / "stats.json"; }

std::filesystem::path entry_path(const RunConfig& cfg, const std::string& id) { return cfg.cache_dir() / (id + ".cmx"); }

CacheStats load_stats(const RunConfig& cfg) {
  const auto path = stats_path(cfg);
  if (!std::filesystem::exists(path))
    fail(ErrorCategory::kMissingPrerequisite, "preprocessing cache not found in " + cfg.cache_dir().string() +
                                                  " (run preprocess first)");
  CacheStats s;
  try {
    const auto j = nlohmann::json::parse(io::read_text(path));
    s.cache_hash = parse_hex(j.at("cache_hash").get<std::string>());
    s.fingerprint = parse_hex(j.at("fingerprint").get<std::string>());
    s.normalization.mean = j.at("mean").get<double>();
    s.normalization.stddev = j.at("stddev").get<double>();
    s.train_items = j.at("train_items").get<std::int64_t>();
    s.ids = j.at("ids").get<std::vector<std::string>>();
  } catch (const std::exception& e) {
    fail(ErrorCategory::kInvalidInput, path.string() + ": " + e.what());
  }
  require(s.cache_hash == cache_hash(cfg),
          "preprocessing cache was built with a different STFT/layout configuration (hash " + io::hex64(s.cache_hash) +
              ", current " + io::hex64(cache_hash(cfg)) + ")",
          ErrorCategory::kConfigMismatch);
  return s;
}

RunConfig with_normalization(const RunConfig& cfg, const CacheStats& stats) {
  RunConfig c = cfg;
  c.codec.normalization = stats.normalization;
  return c;
}

PreprocessReport preprocess_cache(const DatasetManifest& manifest, const RunConfig& cfg) {
  validate(cfg);
  PreprocessReport rep;
  const std::size_t n = manifest.records.size();
  std::vector<std::string> errors(n);

  std::optional<CacheStats> previous;
  if (std::filesystem::exists(stats_path(cfg))) {
    try {
      previous = load_stats(cfg);
    } catch (const Error&) {
      previous.reset();
    }
  }
  const std::uint64_t fingerprint = dataset_fingerprint(manifest);

  CacheStats stats;
  stats.cache_hash = cache_hash(cfg);
  stats.fingerprint = fingerprint;
  if (previous && previous->fingerprint == fingerprint) {
    stats.normalization = previous->normalization;
  } else {
    // Per-record sums first, combined in manifest order.
    std::vector<long double> sum(n, 0), sumsq(n, 0);
    std::vector<std::int64_t> count(n, 0);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      const ManifestRecord& r = manifest.records[i];
      if (r.split != Split::kTrain) return;
      try {
        const dsp::Spectrogram s = tokenizer::analyse(load_audio(r, cfg), cfg.codec);
        for (Eigen::Index k = 0; k < s.values.size(); ++k) {
          const long double v = s.values.data()[k];
          sum[i] += v;
          sumsq[i] += v * v;
        }
        count[i] = s.values.size();
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    });
    long double total = 0, total_sq = 0;
    std::int64_t elements = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += sum[i];
      total_sq += sumsq[i];
      elements += count[i];
    }
    require(elements > 0, "preprocess: no usable training audio", ErrorCategory::kMissingPrerequisite);
    const long double mean = total / elements;
    const long double var = std::max<long double>(total_sq / elements - mean * mean, 0);
    stats.normalization.mean = static_cast<double>(mean);
    stats.normalization.stddev = std::max(static_cast<double>(std::sqrt(var)), 1e-8);
  }
  const bool keep_entries = previous && previous->normalization.mean == stats.normalization.mean &&
                            previous->normalization.stddev == stats.normalization.stddev;
  const RunConfig run = with_normalization(cfg, stats);
  const cmx::Descriptor expected = tokenizer::packing(run.codec);

  std::filesystem::create_directories(cfg.cache_dir());
  std::vector<char> wrote(n, 0), present(n, 0);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    if (!errors[i].empty()) return;
    const ManifestRecord& r = manifest.records[i];
    const auto path = entry_path(cfg, r.id);
    if (keep_entries && std::filesystem::exists(path)) {
      try {
        if (load_tensor(path).descriptor == expected) {
          present[i] = 1;
          return;
        }
      } catch (const Error&) {
        // corrupt or stale: regenerate below
      }
    }
    try {
      const Tensor3<float> plane = tokenizer::normalised_plane(tokenizer::analyse(load_audio(r, cfg), run.codec), run.codec);
      const cmx::PackedTensor<float> packed = pack_plane(plane, run.codec);
      require(cmx::unpack(packed) == plane, "cache entry failed the unpack check", ErrorCategory::kNumeric);
      save_tensor(path, packed);
      wrote[i] = 1;
      present[i] = 1;
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    const ManifestRecord& r = manifest.records[i];
    if (!errors[i].empty()) {
      rep.failures.emplace_back(r.id, errors[i]);
      continue;
    }
    if (!present[i]) continue;
    stats.ids.push_back(r.id);
    if (r.split == Split::kTrain) ++stats.train_items;
    if (wrote[i]) ++rep.written;
    else ++rep.reused;
  }
  require(stats.train_items > 0, "preprocess: every training item failed", ErrorCategory::kMissingPrerequisite);
  if (!previous || rep.written > 0 || previous->ids != stats.ids || previous->fingerprint != stats.fingerprint ||
      previous->train_items != stats.train_items)
    save_stats(cfg, stats);
  rep.stats = stats;
  return rep;
}

std::vector<CachedItem> load_split(const DatasetManifest& manifest, const RunConfig& cfg, Split split) {
  const CacheStats stats = load_stats(cfg);
  const cmx::Descriptor expected = tokenizer::packing(with_normalization(cfg, stats).codec);
  std::vector<CachedItem> out;
  for (const auto* r : manifest.split(split)) {
    if (std::find(stats.ids.begin(), stats.ids.end(), r->id) == stats.ids.end()) continue;
    const auto path = entry_path(cfg, r->id);
    if (!std::filesystem::exists(path))
      fail(ErrorCategory::kMissingPrerequisite, "cache entry missing for '" + r->id + "' (re-run preprocess)");
    cmx::PackedTensor<float> t = load_tensor(path);
    require(t.descriptor == expected, "cache entry '" + r->id + "' has an unexpected CMX descriptor",
            ErrorCategory::kConfigMismatch);
    out.push_back({r, std::move(t.values)});
  }
  return out;
}

}  // namespace mars::pipeline
