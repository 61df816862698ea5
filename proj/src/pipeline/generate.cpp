#include <cstdio>

#include "json.hpp"
#include "mars/ar/generate.hpp"
#include "mars/io.hpp"
#include "mars/pipeline/parallel.hpp"
#include "mars/pipeline/runs.hpp"

namespace mars::pipeline {

int resolve_condition(const RunConfig& cfg, const std::string& spec, int index) {
  const auto& fam = cfg.data.families;
  if (spec == "none") return ar::kUnconditional;
  if (spec == "cycle") return index % static_cast<int>(fam.size());
  for (std::size_t i = 0; i < fam.size(); ++i)
    if (fam[i] == spec) return static_cast<int>(i);
  std::string valid = "cycle, none";
  for (const auto& f : fam) valid += ", " + f;
  fail(ErrorCategory::kInvalidInput, "unknown condition '" + spec + "' (valid: " + valid + ")");
}

std::vector<GeneratedFile> run_generate(const RunConfig& cfg, int count, const std::string& condition,
                                        std::uint64_t seed, const Logger& log) {
  validate(cfg);
  require(count >= 0, "generate: count must be non-negative");
  for (int i = 0; i < count; ++i) resolve_condition(cfg, condition, i);
  const RunConfig run = with_normalization(cfg, load_stats(cfg));
  const auto tok = load_tokenizer(run);
  const auto model = load_ar(run);
  const std::string tok_digest = io::hex64(io::fnv1a(io::read_file(tokenizer_checkpoint(cfg))));
  const std::string ar_digest = io::hex64(io::fnv1a(io::read_file(ar_checkpoint(cfg))));
  const auto dir = cfg.generated_dir();
  std::filesystem::create_directories(dir);

  std::vector<GeneratedFile> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), run.threads, [&](std::size_t i) {
    const int index = static_cast<int>(i);
    GeneratedFile& f = out[i];
    f.condition = resolve_condition(run, condition, index);
    f.clip_seed = Rng::derive(seed, i, 0x6e).next();
    const ar::GeneratedClip clip = ar::generate(f.condition, f.clip_seed, *model, *tok, run.codec, run.ar.sampling);
    char stem[64];
    std::snprintf(stem, sizeof stem, "seed%llu_%03d", static_cast<unsigned long long>(seed), index);
    f.wav = dir / (std::string(stem) + ".wav");
    f.sidecar = dir / (std::string(stem) + ".json");
    io::write_file(f.wav, dsp::encode_wav(clip.waveform, dsp::WavEncoding::kFloat32));
    nlohmann::ordered_json j;
    j["file"] = f.wav.filename().string();
    j["seed"] = seed;
    j["index"] = index;
    j["clip_seed"] = f.clip_seed;
    j["condition"] = f.condition;
    j["condition_label"] = f.condition == ar::kUnconditional ? "none" : run.data.families[static_cast<std::size_t>(f.condition)];
    j["sample_rate"] = clip.waveform.sample_rate;
    j["samples"] = clip.waveform.size();
    j["seconds"] = clip.waveform.duration();
    j["config_hash"] = io::hex64(config_hash(run));
    j["tokenizer_checkpoint"] = tok_digest;
    j["ar_checkpoint"] = ar_digest;
    io::write_text(f.sidecar, j.dump(2) + "\n");
  });
  if (log)
    for (const auto& f : out) log("wrote " + f.wav.string());
  return out;
}

}  // namespace mars::pipeline
