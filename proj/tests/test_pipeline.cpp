#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "mars/dsp/synth.hpp"
#include "mars/io.hpp"
#include "mars/pipeline/cache.hpp"
#include "mars/pipeline/parallel.hpp"
#include "mars/pipeline/runs.hpp"

using namespace mars;
using namespace mars::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mars_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Small but complete run: real STFT/CMX shapes, tiny networks.
RunConfig tiny_config(const fs::path& root) {
  RunConfig c;
  c.seed = 5;
  c.out = (root / "out").string();
  c.data.manifest = (root / "data" / "manifest.jsonl").string();
  auto& t = c.codec.tokenizer;
  t.width = 16;
  t.heads = 2;
  t.mlp_hidden = 32;
  t.encoder_depth = 1;
  t.decoder_depth = 1;
  t.codebook_size = 32;
  t.code_dim = 8;
  t.learning_rate = 3e-3;
  c.ar.width = 16;
  c.ar.heads = 2;
  c.ar.depth = 1;
  c.ar.mlp_hidden = 32;
  c.train.tokenizer_batch = 4;
  c.train.ar_batch = 4;
  c.train.tokenizer_steps = 8;
  c.train.ar_steps = 8;
  c.train.checkpoint_every = 4;
  c.codec.griffin_lim_iterations = 4;
  c.metrics.ndb_k = 2;
  c.metrics.classifier.steps = 40;
  sync_derived(c);
  validate(c);
  return c;
}

DatasetManifest make_dataset(const RunConfig& c, int count = 8) {
  SyntheticDatasetOptions opt;
  opt.count = count;
  write_synthetic_dataset(fs::path(c.data.manifest).parent_path(), opt, c.data);
  return ingest(c.data.manifest, c);
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  io::write_text(p, s);
}

std::string record(const std::string& id, const std::string& audio, const std::string& split, int pitch = 60,
                   const std::string& family = "organ") {
  return R"({"id":")" + id + R"(","audio":")" + audio + R"(","pitch":)" + std::to_string(pitch) +
         R"(,"instrument_family":")" + family + R"(","split":")" + split + "\"}";
}

std::string error_of(const std::function<void()>& fn, ErrorCategory* cat = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (cat) *cat = e.category();
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config text roundtrips and hashes only artifact fields") {
  RunConfig c;
  sync_derived(c);
  c.codec.tokenizer.width = 48;
  c.codec.tokenizer.heads = 4;
  c.data.families = {"a", "b", "c"};
  sync_derived(c);
  const RunConfig back = parse_config(to_text(c));
  CHECK(to_text(back) == to_text(c));
  CHECK(config_hash(back) == config_hash(c));

  RunConfig moved = c;
  moved.out = "elsewhere";
  moved.threads = 4;
  CHECK(config_hash(moved) == config_hash(c));
  RunConfig reseeded = c;
  reseeded.seed = 99;
  CHECK(config_hash(reseeded) != config_hash(c));
  CHECK(cache_hash(reseeded) == cache_hash(c));
  RunConfig wider = c;
  wider.codec.tokenizer.width = 64;
  CHECK(cache_hash(wider) == cache_hash(c));
  RunConfig hop = c;
  hop.codec.stft.hop = 512;
  CHECK(cache_hash(hop) != cache_hash(c));
}

TEST_CASE("config parser rejects unknown keys, bad values and inconsistent shapes") {
  ErrorCategory cat{};
  CHECK(error_of([] { parse_config("[tokenizer]\nwidht = 3\n"); }).find("tokenizer.widht") != std::string::npos);
  CHECK(error_of([] { parse_config("[train]\nar_steps = ten\n"); }).find("not a valid number") != std::string::npos);
  CHECK(error_of([] { parse_config("[data]\nresample = yes\n"); }).find("true or false") != std::string::npos);
  CHECK(!error_of([] { parse_config("[tokenizer]\nchannels = 4\n"); }, &cat).empty());
  CHECK(cat == ErrorCategory::kConfigMismatch);
  const RunConfig c = parse_config("# comment\n[ar]\nwidth = 32\n[data]\nfamilies = x, y\nmanifest = m.jsonl\n", "/base");
  CHECK(c.ar.width == 32);
  CHECK(c.ar.classes == 2);
  CHECK(c.data.manifest == "/base/m.jsonl");
}

TEST_CASE("ingest validates records and reports split counts") {
  const fs::path root = scratch("ingest");
  RunConfig c;
  sync_derived(c);
  dsp::Waveform w = dsp::synth_note({});
  io::write_file(root / "a.wav", dsp::encode_wav(w));
  write_lines(root / "ok.jsonl", {record("x1", "a.wav", "train"), "", record("x2", "a.wav", "valid"),
                                  record("x3", "a.wav", "test", 40, "reed")});
  const DatasetManifest m = ingest(root / "ok.jsonl", c);
  CHECK(m.records.size() == 3);
  CHECK(m.count(Split::kTrain) == 1);
  CHECK(m.count(Split::kValid) == 1);
  CHECK(m.count(Split::kTest) == 1);
  CHECK(m.records[2].family_index == 3);
  CHECK(m.records[0].audio == (root / "a.wav").lexically_normal());

  write_lines(root / "dup.jsonl", {record("x1", "a.wav", "train"), record("x1", "a.wav", "test")});
  const std::string dup = error_of([&] { ingest(root / "dup.jsonl", c); });
  CHECK(dup.find("duplicate id 'x1'") != std::string::npos);
  CHECK(dup.find(":2:") != std::string::npos);

  write_lines(root / "bad.jsonl", {record("x1", "a.wav", "train"), "{\"id\": \"x2\","});
  CHECK(error_of([&] { ingest(root / "bad.jsonl", c); }).find("bad.jsonl:2: malformed") != std::string::npos);

  write_lines(root / "fam.jsonl", {record("x1", "a.wav", "train", 60, "banjo")});
  CHECK(error_of([&] { ingest(root / "fam.jsonl", c); }).find("valid: mallet, organ, bowed, reed") != std::string::npos);

  ErrorCategory cat{};
  write_lines(root / "missing.jsonl", {record("x1", "nope.wav", "train")});
  CHECK(error_of([&] { ingest(root / "missing.jsonl", c); }, &cat).find("not found") != std::string::npos);
  CHECK(cat == ErrorCategory::kMissingPrerequisite);
  CHECK(error_of([&] { ingest(root / "absent.jsonl", c); }, &cat).find("manifest not found") != std::string::npos);
}

TEST_CASE("clips at another sample rate are skipped or resampled per config") {
  const fs::path root = scratch("rate");
  RunConfig c;
  sync_derived(c);
  dsp::NoteSpec spec;
  spec.sample_rate = 44100;
  io::write_file(root / "hi.wav", dsp::encode_wav(dsp::synth_note(spec)));
  io::write_file(root / "ok.wav", dsp::encode_wav(dsp::synth_note({})));
  write_lines(root / "m.jsonl", {record("hi", "hi.wav", "train"), record("ok", "ok.wav", "train")});

  const DatasetManifest skipped = ingest(root / "m.jsonl", c);
  CHECK(skipped.records.size() == 1);
  REQUIRE(skipped.skipped.size() == 1);
  CHECK(skipped.skipped[0] == "hi");
  REQUIRE(skipped.warnings.size() == 1);
  CHECK(skipped.warnings[0].find("44100 Hz") != std::string::npos);

  c.data.resample = true;
  const DatasetManifest kept = ingest(root / "m.jsonl", c);
  CHECK(kept.records.size() == 2);
  CHECK(kept.warnings[0].find("resampled") != std::string::npos);
  const dsp::Waveform w = load_audio(kept.records[0], c);
  CHECK(w.sample_rate == 16000);
  CHECK(w.size() == 64000);
}

TEST_CASE("linear resampling reproduces a slow sinusoid") {
  dsp::Waveform w{Eigen::VectorXd(44100), 44100};
  for (Eigen::Index i = 0; i < w.size(); ++i) w.samples[i] = std::sin(2 * M_PI * 100.0 * i / 44100.0);
  const dsp::Waveform r = resample(w, 16000);
  REQUIRE(r.size() == 16000);
  double err = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) err = std::max(err, std::abs(r.samples[i] - std::sin(2 * M_PI * 100.0 * i / 16000.0)));
  CHECK(err < 1e-3);
}

TEST_CASE("tensor file layout, roundtrip and corruption detection") {
  cmx::Descriptor d{1, 4, 8, 2, 4, cmx::Mode::kBlock};
  Tensor3<float> x(1, 4, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data[i] = static_cast<float>(i) * 0.5f - 3.0f;
  const auto packed = cmx::pack(x, d);
  auto bytes = encode_tensor(packed);
  CHECK(bytes.size() == 8 + 5 * 4 + 1 + 3 * 4 + 4 * 32 + 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "MARSCMX0");
  io::ByteReader r(bytes);
  r.expect_magic("MARSCMX0");
  CHECK(r.get<std::uint32_t>() == 1);
  CHECK(r.get<std::uint32_t>() == 4);
  CHECK(r.get<std::uint32_t>() == 8);
  CHECK(r.get<std::uint32_t>() == 2);
  CHECK(r.get<std::uint32_t>() == 4);
  CHECK(r.get<std::uint8_t>() == 1);
  CHECK(r.get<std::uint32_t>() == 8);
  CHECK(r.get<std::uint32_t>() == 2);
  CHECK(r.get<std::uint32_t>() == 2);

  const auto back = decode_tensor(bytes);
  CHECK(back.descriptor == d);
  CHECK(back.values == packed.values);
  CHECK(cmx::unpack(back) == x);

  bytes[60] ^= 0x01;
  CHECK(error_of([&] { decode_tensor(bytes); }).find("digest mismatch") != std::string::npos);
  bytes.pop_back();
  CHECK(!error_of([&] { decode_tensor(bytes); }).empty());
}

TEST_CASE("preprocess builds verified 2x256x256 entries and is idempotent") {
  const fs::path root = scratch("preprocess");
  RunConfig c = tiny_config(root);
  const DatasetManifest m = make_dataset(c);
  const PreprocessReport first = preprocess_cache(m, c);
  CHECK(first.written == 8);
  CHECK(first.reused == 0);
  CHECK(first.failures.empty());
  CHECK(first.stats.train_items == 6);

  const auto entry = load_tensor(entry_path(c, m.records[0].id));
  CHECK(entry.values.channels == 2);
  CHECK(entry.values.height == 256);
  CHECK(entry.values.width == 256);

  // Global statistics come from the train split only.
  long double sum = 0, sq = 0;
  std::int64_t n = 0;
  for (const auto* r : m.split(Split::kTrain)) {
    const auto s = tokenizer::analyse(load_audio(*r, c), c.codec);
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
      sum += s.values.data()[i];
      sq += static_cast<long double>(s.values.data()[i]) * s.values.data()[i];
    }
    n += s.values.size();
  }
  const double mean = static_cast<double>(sum / n);
  CHECK(first.stats.normalization.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(first.stats.normalization.stddev ==
        doctest::Approx(std::sqrt(static_cast<double>(sq / n - (sum / n) * (sum / n)))).epsilon(1e-9));

  // Unpacking a cached entry equals a fresh recomputation bit for bit.
  const RunConfig run = with_normalization(c, first.stats);
  for (const auto& r : m.records) {
    const Tensor3<float> fresh = tokenizer::normalised_plane(tokenizer::analyse(load_audio(r, run), run.codec), run.codec);
    CHECK(cmx::unpack(load_tensor(entry_path(c, r.id))) == fresh);
  }

  const auto stats_before = io::read_file(stats_path(c));
  const PreprocessReport again = preprocess_cache(m, c);
  CHECK(again.written == 0);
  CHECK(again.reused == 8);
  CHECK(io::read_file(stats_path(c)) == stats_before);

  auto bytes = io::read_file(entry_path(c, m.records[3].id));
  bytes[100] ^= 0x40;
  io::write_file(entry_path(c, m.records[3].id), bytes);
  const PreprocessReport repaired = preprocess_cache(m, c);
  CHECK(repaired.written == 1);
  CHECK(repaired.reused == 7);
  CHECK(cmx::unpack(load_tensor(entry_path(c, m.records[3].id))) ==
        tokenizer::normalised_plane(tokenizer::analyse(load_audio(m.records[3], run), run.codec), run.codec));
}

TEST_CASE("preprocess output does not depend on the thread count") {
  const fs::path a = scratch("threads_a"), b = scratch("threads_b");
  RunConfig ca = tiny_config(a), cb = tiny_config(b);
  cb.threads = 3;
  const DatasetManifest ma = make_dataset(ca), mb = make_dataset(cb);
  preprocess_cache(ma, ca);
  preprocess_cache(mb, cb);
  CHECK(io::read_file(stats_path(ca)) == io::read_file(stats_path(cb)));
  for (const auto& r : ma.records) CHECK(io::read_file(entry_path(ca, r.id)) == io::read_file(entry_path(cb, r.id)));
}

TEST_CASE("per-file preprocessing failures are reported and skipped") {
  const fs::path root = scratch("failures");
  RunConfig c = tiny_config(root);
  DatasetManifest m = make_dataset(c);
  io::write_text(m.records[1].audio, "not a wav file");
  const PreprocessReport r = preprocess_cache(m, c);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].first == m.records[1].id);
  CHECK(r.written == 7);
  CHECK(load_split(m, c, Split::kTrain).size() == 5);
}

TEST_CASE("parallel_for visits every index once and rethrows the lowest failure") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  const std::string msg = error_of([] {
    parallel_for(20, 3, [](std::size_t i) {
      if (i == 7 || i == 13) fail(ErrorCategory::kNumeric, "failed at " + std::to_string(i));
    });
  });
  CHECK(msg == "failed at 7");
}

TEST_CASE("training stages name missing prerequisites") {
  const fs::path root = scratch("prereq");
  RunConfig c = tiny_config(root);
  const DatasetManifest m = make_dataset(c);
  ErrorCategory cat{};
  CHECK(error_of([&] { run_train_tokenizer(m, c); }, &cat).find("run preprocess first") != std::string::npos);
  CHECK(cat == ErrorCategory::kMissingPrerequisite);
  preprocess_cache(m, c);
  CHECK(error_of([&] { run_train_ar(m, c); }, &cat).find("tokenizer checkpoint required") != std::string::npos);
  CHECK(cat == ErrorCategory::kMissingPrerequisite);
  CHECK(error_of([&] { run_generate(c, 1, "cycle", 0); }, &cat).find("checkpoint required") != std::string::npos);
  CHECK(cat == ErrorCategory::kMissingPrerequisite);
  CHECK(error_of([&] { run_evaluate(m, c, EvalMode::kGeneration); }, &cat).find("run generate first") != std::string::npos);
  CHECK(cat == ErrorCategory::kMissingPrerequisite);
}

TEST_CASE("resumed training continues bit-identically") {
  const fs::path a = scratch("resume_a"), b = scratch("resume_b");
  RunConfig straight = tiny_config(a), split = tiny_config(b);
  straight.train.tokenizer_steps = split.train.tokenizer_steps = 10;
  straight.train.ar_steps = split.train.ar_steps = 10;
  const DatasetManifest ma = make_dataset(straight), mb = make_dataset(split);
  preprocess_cache(ma, straight);
  preprocess_cache(mb, split);

  run_train_tokenizer(ma, straight);
  split.train.tokenizer_steps = 6;
  run_train_tokenizer(mb, split);
  split.train.tokenizer_steps = 10;
  const TrainSummary resumed = run_train_tokenizer(mb, split);
  CHECK(resumed.start_step == 6);
  CHECK(resumed.final_step == 10);
  CHECK(io::read_file(tokenizer_checkpoint(straight)) == io::read_file(tokenizer_checkpoint(split)));
  CHECK(io::read_text(straight.tokenizer_dir() / "train_log.tsv") == io::read_text(split.tokenizer_dir() / "train_log.tsv"));

  run_train_ar(ma, straight);
  split.train.ar_steps = 3;
  run_train_ar(mb, split);
  split.train.ar_steps = 10;
  CHECK(run_train_ar(mb, split).start_step == 3);
  CHECK(io::read_file(ar_checkpoint(straight)) == io::read_file(ar_checkpoint(split)));

  RunConfig other = split;
  other.seed = 6;
  ErrorCategory cat{};
  CHECK(error_of([&] { run_train_tokenizer(mb, other); }, &cat).find("different tokenizer, seed or batch") !=
        std::string::npos);
  CHECK(cat == ErrorCategory::kConfigMismatch);
}

TEST_CASE("desk-scale training lowers both losses") {
  const fs::path root = scratch("loss");
  RunConfig c = tiny_config(root);
  c.train.tokenizer_steps = 40;
  c.train.ar_steps = 40;
  c.train.checkpoint_every = 100;
  const DatasetManifest m = make_dataset(c);
  preprocess_cache(m, c);
  const TrainSummary tok = run_train_tokenizer(m, c);
  CHECK(tok.last_loss < tok.first_loss);
  const TrainSummary ar = run_train_ar(m, c);
  CHECK(ar.last_loss < ar.first_loss);
}

TEST_CASE("generation is deterministic, sized by the config and documented") {
  const fs::path root = scratch("generate");
  RunConfig c = tiny_config(root);
  const DatasetManifest m = make_dataset(c);
  preprocess_cache(m, c);
  run_train_tokenizer(m, c);
  run_train_ar(m, c);

  const auto first = run_generate(c, 4, "cycle", 7);
  REQUIRE(first.size() == 4);
  std::vector<std::vector<std::uint8_t>> bytes;
  for (const auto& f : first) bytes.push_back(io::read_file(f.wav));
  const auto second = run_generate(c, 4, "cycle", 7);
  for (std::size_t i = 0; i < 4; ++i) CHECK(io::read_file(second[i].wav) == bytes[i]);

  const dsp::Waveform w = dsp::decode_wav(bytes[0]);
  CHECK(w.size() == 256 * 256);
  CHECK(w.duration() == doctest::Approx(4.096));
  CHECK(first[1].wav.filename() == "seed7_001.wav");
  const auto meta = nlohmann::json::parse(io::read_text(first[2].sidecar));
  CHECK(meta.at("seed").get<std::uint64_t>() == 7);
  CHECK(meta.at("condition").get<int>() == 2);
  CHECK(meta.at("condition_label").get<std::string>() == "bowed");
  CHECK(meta.at("config_hash").get<std::string>() == io::hex64(config_hash(c)));
  CHECK(meta.at("tokenizer_checkpoint").get<std::string>() == io::hex64(io::fnv1a(io::read_file(tokenizer_checkpoint(c)))));

  const std::string err = error_of([&] { run_generate(c, 1, "kazoo", 7); });
  CHECK(err.find("unknown condition 'kazoo'") != std::string::npos);
  CHECK(err.find("cycle, none, mallet, organ, bowed, reed") != std::string::npos);
  CHECK(resolve_condition(c, "none", 3) == ar::kUnconditional);

  // An AR checkpoint is pinned to the tokenizer it was trained against.
  c.train.tokenizer_steps = 9;
  run_train_tokenizer(m, c);
  ErrorCategory cat{};
  CHECK(error_of([&] { run_generate(c, 1, "cycle", 7); }, &cat).find("different tokenizer checkpoint") != std::string::npos);
  CHECK(cat == ErrorCategory::kConfigMismatch);
}

TEST_CASE("evaluating a set against itself scores zero distance") {
  RunConfig c;
  sync_derived(c);
  c.metrics.ndb_k = 3;
  c.metrics.classifier.steps = 30;
  EvalSets sets;
  for (int i = 0; i < 6; ++i) {
    dsp::NoteSpec spec;
    spec.family = i % 4;
    spec.midi_pitch = 48 + 3 * i;
    spec.seed = static_cast<std::uint64_t>(i);
    const dsp::Waveform w = dsp::synth_note(spec);
    sets.reference.push_back(w);
    sets.train.push_back(w);
    sets.train_pitch.push_back(pitch_bucket(spec.midi_pitch));
    sets.train_family.push_back(spec.family);
  }
  sets.candidate = sets.reference;
  const metrics::MetricReport r = evaluate_sets(sets, c);
  CHECK(r.mse == 0.0);
  CHECK(r.mae == 0.0);
  CHECK(r.fad == 0.0);
  CHECK(r.pkid == 0.0);
  CHECK(r.ikid == 0.0);
  CHECK(r.ndb_over_k == 0.0);
  CHECK(r.provenance.at("reference_count") == "6");
  CHECK(r.provenance.at("candidate_count") == "6");
  CHECK(r.provenance.at("fad_provider") == "mel_stats");
  CHECK(r.provenance.at("pitch_provider") == "mini_classifier/pitch_class");

  sets.paired = false;
  const metrics::MetricReport nn = evaluate_sets(sets, c);
  CHECK(nn.mse == 0.0);
  CHECK(nn.provenance.at("error_matching") == "nearest_neighbor");

  sets.candidate.resize(1);
  CHECK(error_of([&] { evaluate_sets(sets, c); }).find("insufficient samples") != std::string::npos);
}

TEST_CASE("reconstruction evaluation writes text and JSON reports") {
  const fs::path root = scratch("evaluate");
  RunConfig c = tiny_config(root);
  const DatasetManifest m = make_dataset(c);
  ErrorCategory cat{};
  CHECK(error_of([&] { run_evaluate(m, c, EvalMode::kReconstruction); }, &cat).find("preprocess") != std::string::npos);
  CHECK(cat == ErrorCategory::kMissingPrerequisite);
  preprocess_cache(m, c);
  run_train_tokenizer(m, c);
  const metrics::MetricReport r = run_evaluate(m, c, EvalMode::kReconstruction);
  CHECK(r.provenance.at("mode") == "reconstruction");
  CHECK(r.provenance.at("error_matching") == "paired");
  CHECK(r.mse > 0);
  const auto back = metrics::MetricReport::from_json(io::read_text(c.eval_dir() / "reconstruction.json"));
  CHECK(back.mse == r.mse);
  CHECK(back.fad == r.fad);
  CHECK(io::read_text(c.eval_dir() / "reconstruction.txt") == r.to_text());
}

#ifdef MARS_CLI
namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MARS_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("command line: cmx roundtrip, usage errors and error categories") {
  const fs::path root = scratch("cli");
  Tensor3<float> x(2, 8, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data[i] = std::sin(static_cast<float>(i));
  save_tensor(root / "in.tensor", cmx::PackedTensor<float>{x, cmx::Descriptor{2, 8, 6, 1, 1}});
  CHECK(run_cli("cmx pack " + (root / "in.tensor").string() + " " + (root / "packed.tensor").string() + " --fh 2 --fw 2",
                root / "log") == 0);
  const auto packed = load_tensor(root / "packed.tensor");
  CHECK(packed.values.channels == 8);
  CHECK(run_cli("cmx unpack " + (root / "packed.tensor").string() + " " + (root / "out.tensor").string(), root / "log") == 0);
  CHECK(io::read_file(root / "out.tensor") == io::read_file(root / "in.tensor"));

  CHECK(run_cli("frobnicate", root / "log") == 2);
  CHECK(run_cli("generate --bogus-flag", root / "log") == 2);

  io::write_text(root / "c.ini", "[run]\nout = " + (root / "out").string() + "\n");
  CHECK(run_cli("--config " + (root / "c.ini").string() + " evaluate", root / "log") != 0);
  const std::string err = io::read_text(root / "log");
  CHECK(err.rfind("error missing-prerequisite: ", 0) == 0);
  CHECK(std::count(err.begin(), err.end(), '\n') == 1);

  CHECK(run_cli("inspect " + (root / "packed.tensor").string(), root / "log") == 0);
  CHECK(io::read_text(root / "log").find("descriptor  source=2x8x6 factors=2x2") != std::string::npos);
}
#endif
