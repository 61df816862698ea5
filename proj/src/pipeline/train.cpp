#include <cstdio>
#include <numeric>
#include <sstream>

#include "mars/io.hpp"
#include "mars/pipeline/parallel.hpp"
#include "mars/pipeline/runs.hpp"
#include "mars/tokenizer/trainer.hpp"

namespace mars::pipeline {

namespace {

std::vector<std::size_t> pick_batch(std::size_t n, int batch, std::uint64_t seed, std::int64_t step,
                                    std::uint64_t stream) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (static_cast<std::size_t>(batch) >= n) return idx;
  Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(step), stream);
  for (std::size_t i = 0; i < static_cast<std::size_t>(batch); ++i)
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(static_cast<std::size_t>(batch));
  return idx;
}

std::filesystem::path step_checkpoint(const std::filesystem::path& dir, std::int64_t step) {
  char name[48];
  std::snprintf(name, sizeof name, "step-%08lld.ckpt", static_cast<long long>(step));
  return dir / name;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Rewrites the log keeping the header and the lines of steps before `step`,
/// so a resumed run appends exactly what an uninterrupted one would have.
std::string log_prefix(const std::filesystem::path& path, const std::string& header, std::int64_t step) {
  std::string out = header + "\n";
  if (!std::filesystem::exists(path)) return out;
  std::istringstream in(io::read_text(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find('\t'))) >= step) break;
    out += line + "\n";
  }
  return out;
}

std::uint64_t cache_identity(const CacheStats& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a|%a", s.normalization.mean, s.normalization.stddev);
  return io::fnv1a(io::hex64(s.cache_hash) + io::hex64(s.fingerprint) + buf);
}

std::uint64_t tokenizer_run_identity(const RunConfig& c) {
  return io::fnv1a(tokenizer::describe(c.codec.tokenizer) + " seed=" + std::to_string(c.seed) +
                   " batch=" + std::to_string(c.train.tokenizer_batch));
}

std::uint64_t ar_run_identity(const RunConfig& c) {
  return io::fnv1a(ar::describe(c.ar) + " seed=" + std::to_string(c.seed) + " batch=" + std::to_string(c.train.ar_batch));
}

std::uint64_t file_digest(const std::filesystem::path& p) { return io::fnv1a(io::read_file(p)); }

void pin(ad::Checkpoint& ck, const std::string& name, std::uint64_t v) { ck.add_integer(name, static_cast<std::int64_t>(v)); }

void check_pin(const ad::Checkpoint& ck, const std::string& name, std::uint64_t expected, const std::string& what) {
  const auto* r = ck.find(name);
  require(r != nullptr && static_cast<std::uint64_t>(ck.integer(name)) == expected, what, ErrorCategory::kConfigMismatch);
}

void emit(const Logger& log, const std::string& line) {
  if (log) log(line);
}

}  // namespace

std::filesystem::path tokenizer_checkpoint(const RunConfig& cfg) { return cfg.tokenizer_dir() / "tokenizer.ckpt"; }
std::filesystem::path ar_checkpoint(const RunConfig& cfg) { return cfg.ar_dir() / "ar.ckpt"; }

std::filesystem::path latest_checkpoint(const std::filesystem::path& dir) {
  std::filesystem::path best;
  if (!std::filesystem::exists(dir)) return best;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() == 18 && name.starts_with("step-") && name.ends_with(".ckpt") && (best.empty() || e.path() > best))
      best = e.path();
  }
  return best;
}

TrainSummary run_train_tokenizer(const DatasetManifest& manifest, const RunConfig& cfg, const Logger& log) {
  validate(cfg);
  const CacheStats stats = load_stats(cfg);
  const RunConfig run = with_normalization(cfg, stats);
  const std::vector<CachedItem> items = load_split(manifest, run, Split::kTrain);
  require(!items.empty(), "train-tokenizer: the cache holds no training items", ErrorCategory::kMissingPrerequisite);

  const auto dir = cfg.tokenizer_dir();
  std::filesystem::create_directories(dir);
  tokenizer::TokenizerTrainer<float> trainer(run.codec.tokenizer, run.seed);
  TrainSummary sum;
  if (const auto latest = latest_checkpoint(dir); !latest.empty()) {
    const ad::Checkpoint ck = ad::Checkpoint::load(latest);
    check_pin(ck, "pipeline.cache", cache_identity(stats),
              latest.string() + " was trained on a different preprocessing cache; remove " + dir.string() + " to restart");
    check_pin(ck, "pipeline.run", tokenizer_run_identity(run),
              latest.string() + " was written with a different tokenizer, seed or batch size");
    trainer.restore(ck);
    sum.start_step = trainer.steps();
    emit(log, "resuming tokenizer training from step " + std::to_string(sum.start_step));
  }

  const std::string header = "step\tloss\trecon\tvq\tcommitment\tcodes_used\treseeded\tskipped";
  std::string log_text = log_prefix(dir / "train_log.tsv", header, trainer.steps());
  auto save = [&] {
    ad::Checkpoint ck = trainer.checkpoint();
    pin(ck, "pipeline.cache", cache_identity(stats));
    pin(ck, "pipeline.run", tokenizer_run_identity(run));
    ck.save(step_checkpoint(dir, trainer.steps()));
    io::write_text(dir / "train_log.tsv", log_text);
    return ck;
  };

  bool first = true;
  while (trainer.steps() < run.train.tokenizer_steps) {
    const std::int64_t step = trainer.steps();
    std::vector<Tensor3<float>> batch;
    for (std::size_t i : pick_batch(items.size(), run.train.tokenizer_batch, run.seed, step, 0xb7))
      batch.push_back(items[i].tensor);
    const tokenizer::TokenizerStepReport rep = trainer.step(batch);
    if (rep.skipped) ++sum.skipped;
    if (first && !rep.skipped) {
      sum.first_loss = rep.loss.total;
      first = false;
    }
    if (!rep.skipped) sum.last_loss = rep.loss.total;
    log_text += std::to_string(step) + "\t" + fmt(rep.loss.total) + "\t" + fmt(rep.loss.recon) + "\t" + fmt(rep.loss.vq) +
                "\t" + fmt(rep.loss.commitment) + "\t" + std::to_string(rep.codes_used) + "\t" +
                std::to_string(rep.reseeded) + "\t" + (rep.skipped ? "1" : "0") + "\n";
    if (trainer.steps() % run.train.checkpoint_every == 0 && trainer.steps() < run.train.tokenizer_steps) {
      save();
      emit(log, "tokenizer step " + std::to_string(trainer.steps()) + " loss " + fmt(rep.loss.total));
    }
  }
  const ad::Checkpoint final_ck = save();
  final_ck.save(tokenizer_checkpoint(cfg));
  sum.final_step = trainer.steps();
  sum.checkpoint = tokenizer_checkpoint(cfg);
  emit(log, "tokenizer training done at step " + std::to_string(sum.final_step) + ", loss " + fmt(sum.last_loss));
  return sum;
}

std::unique_ptr<tokenizer::TokenizerModel<float>> load_tokenizer(const RunConfig& cfg) {
  const auto path = tokenizer_checkpoint(cfg);
  if (!std::filesystem::exists(path))
    fail(ErrorCategory::kMissingPrerequisite, "tokenizer checkpoint required: " + path.string() + " (run train-tokenizer)");
  const ad::Checkpoint ck = ad::Checkpoint::load(path);
  require(ck.config_hash == tokenizer::config_hash(cfg.codec.tokenizer),
          path.string() + " was written for a different tokenizer configuration", ErrorCategory::kConfigMismatch);
  check_pin(ck, "pipeline.cache", cache_identity(load_stats(cfg)),
            path.string() + " was trained on a different preprocessing cache");
  Rng rng(0);
  auto model = std::make_unique<tokenizer::TokenizerModel<float>>(cfg.codec.tokenizer, rng);
  ck.load_parameters(model->parameters());
  return model;
}

std::unique_ptr<ar::ArModel<float>> load_ar(const RunConfig& cfg) {
  const auto path = ar_checkpoint(cfg);
  if (!std::filesystem::exists(path))
    fail(ErrorCategory::kMissingPrerequisite, "AR checkpoint required: " + path.string() + " (run train-ar)");
  const ad::Checkpoint ck = ad::Checkpoint::load(path);
  require(ck.config_hash == ar::config_hash(cfg.ar), path.string() + " was written for a different AR configuration",
          ErrorCategory::kConfigMismatch);
  const auto tok = tokenizer_checkpoint(cfg);
  require(std::filesystem::exists(tok), "tokenizer checkpoint required: " + tok.string(),
          ErrorCategory::kMissingPrerequisite);
  check_pin(ck, "pipeline.tokenizer", file_digest(tok),
            path.string() + " was trained against a different tokenizer checkpoint");
  Rng rng(0);
  auto model = std::make_unique<ar::ArModel<float>>(cfg.ar, ck.matrix<float>("ar.codebook"), rng);
  ck.load_parameters(model->parameters());
  return model;
}

TrainSummary run_train_ar(const DatasetManifest& manifest, const RunConfig& cfg, const Logger& log) {
  validate(cfg);
  const RunConfig run = with_normalization(cfg, load_stats(cfg));
  const std::vector<CachedItem> items = load_split(manifest, run, Split::kTrain);
  require(!items.empty(), "train-ar: the cache holds no training items", ErrorCategory::kMissingPrerequisite);
  const auto tokenizer_model = load_tokenizer(run);
  const std::uint64_t tok_digest = file_digest(tokenizer_checkpoint(cfg));

  std::vector<ar::ArExample> examples(items.size());
  parallel_for(items.size(), run.threads, [&](std::size_t i) {
    examples[i] = {tokenizer_model->tokenize(items[i].tensor), items[i].record->family_index};
  });
  emit(log, "tokenised " + std::to_string(examples.size()) + " training items");

  const auto dir = cfg.ar_dir();
  std::filesystem::create_directories(dir);
  ar::ArTrainer<float> trainer(run.ar, tokenizer_model->codebook.value(), run.seed);
  TrainSummary sum;
  if (const auto latest = latest_checkpoint(dir); !latest.empty()) {
    const ad::Checkpoint ck = ad::Checkpoint::load(latest);
    check_pin(ck, "pipeline.tokenizer", tok_digest,
              latest.string() + " was trained against a different tokenizer; remove " + dir.string() + " to restart");
    check_pin(ck, "pipeline.run", ar_run_identity(run), latest.string() + " was written with a different AR setup");
    trainer.restore(ck);
    sum.start_step = trainer.steps();
    emit(log, "resuming AR training from step " + std::to_string(sum.start_step));
  }

  const std::string header = "step\tloss\taccuracy\tskipped";
  std::string log_text = log_prefix(dir / "train_log.tsv", header, trainer.steps());
  auto save = [&] {
    ad::Checkpoint ck = trainer.checkpoint();
    pin(ck, "pipeline.tokenizer", tok_digest);
    pin(ck, "pipeline.run", ar_run_identity(run));
    ck.save(step_checkpoint(dir, trainer.steps()));
    io::write_text(dir / "train_log.tsv", log_text);
    return ck;
  };

  bool first = true;
  while (trainer.steps() < run.train.ar_steps) {
    const std::int64_t step = trainer.steps();
    std::vector<ar::ArExample> batch;
    for (std::size_t i : pick_batch(examples.size(), run.train.ar_batch, run.seed, step, 0xa2)) batch.push_back(examples[i]);
    const ar::ArStepReport rep = trainer.step(batch);
    if (rep.skipped) ++sum.skipped;
    if (first && !rep.skipped) {
      sum.first_loss = rep.loss;
      first = false;
    }
    if (!rep.skipped) sum.last_loss = rep.loss;
    log_text += std::to_string(step) + "\t" + fmt(rep.loss) + "\t" + fmt(rep.accuracy) + "\t" + (rep.skipped ? "1" : "0") + "\n";
    if (trainer.steps() % run.train.checkpoint_every == 0 && trainer.steps() < run.train.ar_steps) {
      save();
      emit(log, "AR step " + std::to_string(trainer.steps()) + " loss " + fmt(rep.loss) + " accuracy " + fmt(rep.accuracy));
    }
  }
  const ad::Checkpoint final_ck = save();
  final_ck.save(ar_checkpoint(cfg));
  sum.final_step = trainer.steps();
  sum.checkpoint = ar_checkpoint(cfg);
  emit(log, "AR training done at step " + std::to_string(sum.final_step) + ", loss " + fmt(sum.last_loss));
  return sum;
}

}  // namespace mars::pipeline
