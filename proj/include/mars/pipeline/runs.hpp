#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mars/ar/model.hpp"
#include "mars/metrics/report.hpp"
#include "mars/pipeline/cache.hpp"
#include "mars/tokenizer/model.hpp"

namespace mars::pipeline {

/// Optional progress sink; receives one line per event.
using Logger = std::function<void(const std::string&)>;

struct TrainSummary {
  std::int64_t start_step = 0;  // non-zero when resumed
  std::int64_t final_step = 0;
  double first_loss = 0;        // first step run in this invocation
  double last_loss = 0;
  int skipped = 0;
  std::filesystem::path checkpoint;
};

std::filesystem::path tokenizer_checkpoint(const RunConfig& cfg);
std::filesystem::path ar_checkpoint(const RunConfig& cfg);

/// Latest "step-NNNNNNNN.ckpt" in `dir`, or empty.
std::filesystem::path latest_checkpoint(const std::filesystem::path& dir);

/// Trains the tokenizer on the cached train split up to train.tokenizer_steps,
/// resuming from the newest checkpoint in the tokenizer directory. Writes a
/// checkpoint every train.checkpoint_every steps and at the end, appends one
/// line per step to "train_log.tsv" and leaves the final weights in
/// "tokenizer.ckpt".
TrainSummary run_train_tokenizer(const DatasetManifest& manifest, const RunConfig& cfg, const Logger& log = {});

/// Trains the AR model on token maps of the train split produced by the
/// frozen tokenizer; the condition is the instrument family.
TrainSummary run_train_ar(const DatasetManifest& manifest, const RunConfig& cfg, const Logger& log = {});

/// Frozen tokenizer restored from "tokenizer.ckpt".
std::unique_ptr<tokenizer::TokenizerModel<float>> load_tokenizer(const RunConfig& cfg);
std::unique_ptr<ar::ArModel<float>> load_ar(const RunConfig& cfg);

/// Maps a condition spec for clip `index`: "cycle" walks the families,
/// "none" is unconditional, otherwise a family name.
int resolve_condition(const RunConfig& cfg, const std::string& spec, int index);

struct GeneratedFile {
  std::filesystem::path wav;
  std::filesystem::path sidecar;
  int condition = 0;
  std::uint64_t clip_seed = 0;
};

/// Writes `count` clips named "seed<seed>_<index>.wav", each with a JSON
/// sidecar recording seeds, condition and artifact hashes.
std::vector<GeneratedFile> run_generate(const RunConfig& cfg, int count, const std::string& condition,
                                        std::uint64_t seed, const Logger& log = {});

enum class EvalMode { kReconstruction, kGeneration };
std::string to_string(EvalMode m);
EvalMode parse_eval_mode(const std::string& s);

/// Audio-level inputs for the metric suite.
struct EvalSets {
  std::vector<dsp::Waveform> reference;   // test split
  std::vector<dsp::Waveform> candidate;   // reconstructions or generations
  std::vector<dsp::Waveform> train;       // classifier training material
  std::vector<int> train_pitch;           // pitch buckets
  std::vector<int> train_family;
  bool paired = true;                     // reconstruction pairs item i with item i
};

/// log1p mel matrix of a waveform under the run's STFT and mel settings.
Eigen::MatrixXd log_mel(const dsp::Waveform& w, const RunConfig& cfg);

/// All eight scores. FAD and NDB use mel-statistics embeddings; PKID/PIS and
/// IKID/IIS use small classifiers fitted to the train material.
metrics::MetricReport evaluate_sets(const EvalSets& sets, const RunConfig& cfg);

/// Builds the sets for `mode` from the cache, checkpoints and generated
/// files, evaluates, and writes "<mode>.txt" and "<mode>.json" to the eval
/// directory.
metrics::MetricReport run_evaluate(const DatasetManifest& manifest, const RunConfig& cfg, EvalMode mode,
                                   const Logger& log = {});

}  // namespace mars::pipeline
