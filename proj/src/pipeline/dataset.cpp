#include "mars/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mars/dsp/synth.hpp"
#include "mars/io.hpp"

namespace mars::pipeline {

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  fail(ErrorCategory::kInvalidInput, "unknown split '" + s + "' (expected train, valid or test)");
}

std::vector<const ManifestRecord*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

std::size_t DatasetManifest::count(Split s) const { return split(s).size(); }

namespace {

std::string expected_labels(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) s += (i ? ", " : "") + names[i];
  return s;
}

}  // namespace

DatasetManifest ingest(const std::filesystem::path& manifest, const RunConfig& cfg) {
  if (manifest.empty()) fail(ErrorCategory::kMissingPrerequisite, "ingest: no manifest configured (data.manifest)");
  if (!std::filesystem::exists(manifest))
    fail(ErrorCategory::kMissingPrerequisite, "ingest: manifest not found: " + manifest.string());
  std::istringstream in(io::read_text(manifest));
  const auto base = manifest.parent_path();
  const double expected_seconds =
      static_cast<double>(cfg.codec.stft.target_frames) * cfg.codec.stft.hop / cfg.codec.sample_rate;
  DatasetManifest out;
  std::set<std::string> ids;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string at = manifest.filename().string() + ":" + std::to_string(number) + ": ";
    ManifestRecord r;
    std::string split;
    try {
      const auto j = nlohmann::json::parse(line);
      r.id = j.at("id").get<std::string>();
      r.audio = j.at("audio").get<std::string>();
      r.pitch = j.at("pitch").get<int>();
      r.family = j.at("instrument_family").get<std::string>();
      split = j.at("split").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::kInvalidInput, at + "malformed record: " + e.what());
    }
    require(!r.id.empty(), at + "empty id");
    require(ids.insert(r.id).second, at + "duplicate id '" + r.id + "'");
    try {
      r.split = parse_split(split);
    } catch (const Error& e) {
      fail(ErrorCategory::kInvalidInput, at + e.what());
    }
    require(r.pitch >= cfg.data.pitch_min && r.pitch <= cfg.data.pitch_max,
            at + "pitch " + std::to_string(r.pitch) + " outside [" + std::to_string(cfg.data.pitch_min) + ", " +
                std::to_string(cfg.data.pitch_max) + "]");
    const auto fam = std::find(cfg.data.families.begin(), cfg.data.families.end(), r.family);
    require(fam != cfg.data.families.end(),
            at + "unknown instrument family '" + r.family + "' (valid: " + expected_labels(cfg.data.families) + ")");
    r.family_index = static_cast<int>(fam - cfg.data.families.begin());
    if (r.audio.is_relative()) r.audio = (base / r.audio).lexically_normal();
    if (!std::filesystem::exists(r.audio))
      fail(ErrorCategory::kMissingPrerequisite, at + "audio file not found: " + r.audio.string());
    dsp::Waveform w;
    try {
      w = dsp::decode_wav(io::read_file(r.audio));
    } catch (const Error& e) {
      fail(e.category(), at + r.audio.filename().string() + ": " + e.what());
    }
    r.sample_rate = w.sample_rate;
    r.seconds = w.duration();
    if (r.sample_rate != cfg.codec.sample_rate) {
      const std::string msg = r.id + ": " + std::to_string(r.sample_rate) + " Hz, run expects " +
                              std::to_string(cfg.codec.sample_rate) + " Hz";
      if (!cfg.data.resample) {
        out.warnings.push_back(msg + "; skipped (enable data.resample to convert)");
        out.skipped.push_back(r.id);
        continue;
      }
      out.warnings.push_back(msg + "; will be resampled");
    }
    if (std::abs(r.seconds - expected_seconds) > 0.1 * expected_seconds)
      out.warnings.push_back(r.id + ": duration " + std::to_string(r.seconds) + " s, frames are fitted to " +
                             std::to_string(expected_seconds) + " s");
    out.records.push_back(std::move(r));
  }
  return out;
}

dsp::Waveform resample(const dsp::Waveform& w, int sample_rate) {
  dsp::validate(w);
  require(sample_rate > 0, "resample: target rate must be positive");
  if (w.sample_rate == sample_rate) return w;
  const double ratio = static_cast<double>(w.sample_rate) / sample_rate;
  const auto n = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(w.size() / ratio)));
  dsp::Waveform out{Eigen::VectorXd(n), sample_rate};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) * ratio;
    const auto k = static_cast<Eigen::Index>(x);
    const double t = x - static_cast<double>(k);
    const double a = w.samples[std::min(k, w.size() - 1)];
    const double b = w.samples[std::min(k + 1, w.size() - 1)];
    out.samples[i] = a + t * (b - a);
  }
  return out;
}

dsp::Waveform load_audio(const ManifestRecord& r, const RunConfig& cfg) {
  dsp::Waveform w = dsp::decode_wav(io::read_file(r.audio));
  if (w.sample_rate != cfg.codec.sample_rate) {
    require(cfg.data.resample, r.id + ": sample rate " + std::to_string(w.sample_rate) + " Hz and resampling is off",
            ErrorCategory::kConfigMismatch);
    w = resample(w, cfg.codec.sample_rate);
  }
  return w;
}

std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDatasetOptions& opt,
                                              const DataConfig& data) {
  require(opt.count > 0 && opt.test_every > 0, "synthetic dataset: count and test_every must be positive");
  require(!data.families.empty(), "synthetic dataset: no families configured");
  std::filesystem::create_directories(dir / "audio");
  std::string manifest;
  const int span = data.pitch_max - data.pitch_min + 1;
  for (int i = 0; i < opt.count; ++i) {
    // Rotating the cycle each round keeps every family present in both splits.
    const int f = static_cast<int>(data.families.size());
    const int family = (i + i / f) % f;
    dsp::NoteSpec spec;
    spec.family = family % dsp::kSynthFamilies;
    spec.midi_pitch = data.pitch_min + static_cast<int>((static_cast<long long>(i) * 7 + 12) % span);
    spec.seconds = opt.seconds;
    spec.sample_rate = opt.sample_rate;
    spec.velocity = 0.5 + 0.1 * (i % 3);
    spec.seed = opt.seed * 1000003ULL + static_cast<std::uint64_t>(i);
    char name[64];
    std::snprintf(name, sizeof name, "note_%04d", i);
    const std::string file = std::string("audio/") + name + ".wav";
    io::write_file(dir / file, dsp::encode_wav(dsp::synth_note(spec), dsp::WavEncoding::kPcm16));
    nlohmann::ordered_json j;
    j["id"] = name;
    j["audio"] = file;
    j["pitch"] = spec.midi_pitch;
    j["instrument_family"] = data.families[static_cast<std::size_t>(family)];
    j["split"] = (i % opt.test_every == opt.test_every - 1) ? "test" : "train";
    manifest += j.dump() + "\n";
  }
  io::write_text(dir / "manifest.jsonl", manifest);
  return dir / "manifest.jsonl";
}

}  // namespace mars::pipeline
