#include <algorithm>

#include "mars/io.hpp"
#include "mars/metrics/embedding.hpp"
#include "mars/pipeline/parallel.hpp"
#include "mars/pipeline/runs.hpp"

namespace mars::pipeline {

std::string to_string(EvalMode m) { return m == EvalMode::kReconstruction ? "reconstruction" : "generation"; }

EvalMode parse_eval_mode(const std::string& s) {
  if (s == "reconstruction") return EvalMode::kReconstruction;
  if (s == "generation") return EvalMode::kGeneration;
  fail(ErrorCategory::kInvalidInput, "unknown evaluation mode '" + s + "' (expected reconstruction or generation)");
}

Eigen::MatrixXd log_mel(const dsp::Waveform& w, const RunConfig& cfg) {
  const dsp::StftConfig& stft = cfg.codec.stft;
  const dsp::Spectrogram s = dsp::magnitude(dsp::stft(w, stft), stft, w.sample_rate);
  return dsp::mel_spectrogram(s, cfg.mel).array().log1p().matrix();
}

namespace {

std::vector<Eigen::MatrixXd> mels(const std::vector<dsp::Waveform>& ws, const RunConfig& cfg) {
  std::vector<Eigen::MatrixXd> out(ws.size());
  parallel_for(ws.size(), cfg.threads, [&](std::size_t i) { out[i] = log_mel(ws[i], cfg); });
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

metrics::MetricReport evaluate_sets(const EvalSets& sets, const RunConfig& cfg) {
  const auto n_ref = static_cast<int>(sets.reference.size());
  const auto n_cand = static_cast<int>(sets.candidate.size());
  const int need = std::max(cfg.metrics.min_samples, 2);
  require(n_ref >= need && n_cand >= need,
          "evaluate: insufficient samples (" + std::to_string(n_ref) + " reference, " + std::to_string(n_cand) +
              " candidate; need at least " + std::to_string(need) + " each)");
  require(n_ref >= cfg.metrics.ndb_k, "evaluate: NDB with k = " + std::to_string(cfg.metrics.ndb_k) + " needs at least " +
                                          std::to_string(cfg.metrics.ndb_k) + " reference samples, got " +
                                          std::to_string(n_ref));
  require(!sets.paired || n_ref == n_cand, "evaluate: paired evaluation needs equally many reference and candidate clips");
  require(sets.train.size() >= 2 && sets.train_pitch.size() == sets.train.size() &&
              sets.train_family.size() == sets.train.size(),
          "evaluate: classifier training material needs at least two labelled clips");
  require(cfg.data.families.size() >= 2, "evaluate: instrument metrics need at least two families",
          ErrorCategory::kConfigMismatch);

  const auto ref_mels = mels(sets.reference, cfg);
  const auto cand_mels = mels(sets.candidate, cfg);
  const auto train_mels = mels(sets.train, cfg);
  const metrics::EmbeddingSet ref = metrics::mel_stats_embedding(ref_mels);
  const metrics::EmbeddingSet cand = metrics::mel_stats_embedding(cand_mels);
  const metrics::EmbeddingSet train = metrics::mel_stats_embedding(train_mels);

  metrics::MetricReport r;
  r.fad = metrics::frechet_distance(metrics::gaussian_stats(ref.values), metrics::gaussian_stats(cand.values));
  const auto ndb = metrics::ndb(ref.values, cand.values, cfg.metrics.ndb_k, cfg.metrics.ndb_alpha,
                                Rng::derive(cfg.seed, 0xdb).next());
  r.ndb_over_k = ndb.ndb_over_k;
  if (sets.paired) {
    const auto e = metrics::spectro_error(ref_mels, cand_mels);
    r.mse = e.mse;
    r.mae = e.mae;
  } else {
    const auto e = metrics::nearest_neighbor_error(cand_mels, ref_mels);
    r.mse = e.mse;
    r.mae = e.mae;
  }

  const int dim = static_cast<int>(train.dim());
  metrics::MiniClassifier pitch(dim, kPitchBuckets, cfg.metrics.classifier, Rng::derive(cfg.seed, 0x9c).next());
  pitch.fit(train.values, sets.train_pitch);
  metrics::MiniClassifier family(dim, static_cast<int>(cfg.data.families.size()), cfg.metrics.classifier,
                                 Rng::derive(cfg.seed, 0x1c).next());
  family.fit(train.values, sets.train_family);
  r.pkid = metrics::kid(pitch.embed(ref.values).values, pitch.embed(cand.values).values);
  r.ikid = metrics::kid(family.embed(ref.values).values, family.embed(cand.values).values);
  r.pis = metrics::inception_score(pitch.probabilities(cand.values));
  r.iis = metrics::inception_score(family.probabilities(cand.values));

  r.provenance["reference_count"] = std::to_string(n_ref);
  r.provenance["candidate_count"] = std::to_string(n_cand);
  r.provenance["classifier_train_count"] = std::to_string(sets.train.size());
  r.provenance["fad_provider"] = ref.provider;
  r.provenance["ndb_provider"] = ref.provider;
  r.provenance["pitch_provider"] = "mini_classifier/pitch_class";
  r.provenance["instrument_provider"] = "mini_classifier/family";
  r.provenance["pitch_classifier_train_accuracy"] = num(pitch.accuracy(train.values, sets.train_pitch));
  r.provenance["instrument_classifier_train_accuracy"] = num(family.accuracy(train.values, sets.train_family));
  r.provenance["ndb_k"] = std::to_string(cfg.metrics.ndb_k);
  r.provenance["ndb_alpha"] = num(cfg.metrics.ndb_alpha);
  r.provenance["error_matching"] = sets.paired ? "paired" : "nearest_neighbor";
  r.provenance["seed"] = std::to_string(cfg.seed);
  r.provenance["config_hash"] = io::hex64(config_hash(cfg));
  metrics::validate(r);
  return r;
}

metrics::MetricReport run_evaluate(const DatasetManifest& manifest, const RunConfig& cfg, EvalMode mode,
                                   const Logger& log) {
  validate(cfg);
  const CacheStats stats = load_stats(cfg);
  const RunConfig run = with_normalization(cfg, stats);
  auto cached = [&](const ManifestRecord* r) { return std::find(stats.ids.begin(), stats.ids.end(), r->id) != stats.ids.end(); };

  EvalSets sets;
  std::vector<const ManifestRecord*> train_records, test_records;
  for (const auto* r : manifest.split(Split::kTrain))
    if (cached(r)) train_records.push_back(r);
  for (const auto* r : manifest.split(Split::kTest))
    if (cached(r)) test_records.push_back(r);
  require(!test_records.empty(), "evaluate: the cache holds no test-split items", ErrorCategory::kMissingPrerequisite);
  sets.train.resize(train_records.size());
  sets.reference.resize(test_records.size());
  parallel_for(train_records.size(), run.threads, [&](std::size_t i) { sets.train[i] = load_audio(*train_records[i], run); });
  parallel_for(test_records.size(), run.threads, [&](std::size_t i) { sets.reference[i] = load_audio(*test_records[i], run); });
  for (const auto* r : train_records) {
    sets.train_pitch.push_back(pitch_bucket(r->pitch));
    sets.train_family.push_back(r->family_index);
  }

  if (mode == EvalMode::kReconstruction) {
    const auto tok = load_tokenizer(run);
    const std::vector<CachedItem> items = load_split(manifest, run, Split::kTest);
    sets.candidate.resize(items.size());
    parallel_for(items.size(), run.threads, [&](std::size_t i) {
      const tokenizer::MultiScaleTokenMap t = tok->tokenize(items[i].tensor);
      const dsp::Spectrogram s = tokenizer::from_model_output(tok->detokenize(t), run.codec);
      sets.candidate[i] = tokenizer::synthesise(s, run.codec, Rng::derive(run.seed, i, 0xe7).next());
    });
    sets.paired = true;
  } else {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::exists(cfg.generated_dir()))
      for (const auto& e : std::filesystem::directory_iterator(cfg.generated_dir()))
        if (e.path().extension() == ".wav") files.push_back(e.path());
    require(!files.empty(), "evaluate: no generated clips in " + cfg.generated_dir().string() + " (run generate first)",
            ErrorCategory::kMissingPrerequisite);
    std::sort(files.begin(), files.end());
    sets.candidate.resize(files.size());
    parallel_for(files.size(), run.threads, [&](std::size_t i) { sets.candidate[i] = dsp::decode_wav(io::read_file(files[i])); });
    sets.paired = false;
  }

  metrics::MetricReport report = evaluate_sets(sets, run);
  report.provenance["mode"] = to_string(mode);
  std::filesystem::create_directories(cfg.eval_dir());
  io::write_text(cfg.eval_dir() / (to_string(mode) + ".txt"), report.to_text());
  io::write_text(cfg.eval_dir() / (to_string(mode) + ".json"), report.to_json());
  if (log) log("wrote " + (cfg.eval_dir() / (to_string(mode) + ".txt")).string());
  return report;
}

}  // namespace mars::pipeline
