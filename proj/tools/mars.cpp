// Command-line front end for the MARS pipeline.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mars/ad/checkpoint.hpp"
#include "mars/io.hpp"
#include "mars/metrics/embedding.hpp"
#include "mars/pipeline/cache.hpp"
#include "mars/pipeline/runs.hpp"

namespace {

using namespace mars;
using namespace mars::pipeline;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kUsage: return 2;
    case ErrorCategory::kInvalidInput: return 3;
    case ErrorCategory::kIo: return 4;
    case ErrorCategory::kMissingPrerequisite: return 5;
    case ErrorCategory::kConfigMismatch: return 6;
    case ErrorCategory::kNumeric: return 7;
  }
  return 1;
}

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.config.empty()) sync_derived(c);
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.out = *g.out;
  if (g.threads) c.threads = *g.threads;
  validate(c);
  return c;
}

void say(const std::string& line) { std::cout << line << "\n"; }

DatasetManifest manifest_for(const RunConfig& c, const std::string& override_path = {}) {
  const DatasetManifest m = ingest(override_path.empty() ? c.data.manifest : override_path, c);
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  return m;
}

std::string shape(const std::vector<std::uint32_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s;
}

void inspect(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCategory::kIo, "no such file: " + path.string());
  const auto bytes = io::read_file(path);
  const std::string head(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(8, bytes.size())));
  if (head == "MARSCKPT") {
    const ad::Checkpoint ck = ad::Checkpoint::decode(bytes);
    say("checkpoint  config_hash=" + io::hex64(ck.config_hash) + " records=" + std::to_string(ck.records.size()));
    for (const auto& r : ck.records) say("  " + r.name + "  " + shape(r.dims));
  } else if (head == "MARSCMX0") {
    const auto t = decode_tensor(bytes);
    const auto& d = t.descriptor;
    say("tensor  " + std::to_string(t.values.channels) + "x" + std::to_string(t.values.height) + "x" +
        std::to_string(t.values.width) + "  digest ok");
    say("  descriptor  source=" + std::to_string(d.channels) + "x" + std::to_string(d.height) + "x" +
        std::to_string(d.width) + " factors=" + std::to_string(d.factor_h) + "x" + std::to_string(d.factor_w) +
        " mode=" + cmx::to_string(d.mode));
  } else if (head == "MARSTOKS") {
    const auto t = tokenizer::MultiScaleTokenMap::decode(bytes);
    std::string sides;
    for (int k : t.schedule) sides += (sides.empty() ? "" : ",") + std::to_string(k);
    say("token map  schedule=" + sides + " tokens=" + std::to_string(tokenizer::sequence_length(t.schedule)));
  } else if (head == "MARSEMBD") {
    const auto e = metrics::load_embeddings(path);
    say("embeddings  n=" + std::to_string(e.count()) + " d=" + std::to_string(e.dim()));
  } else if (head.starts_with("RIFF")) {
    const auto w = dsp::decode_wav(bytes);
    say("wav  rate=" + std::to_string(w.sample_rate) + " samples=" + std::to_string(w.size()) +
        " seconds=" + std::to_string(w.duration()) + " peak=" + std::to_string(w.samples.cwiseAbs().maxCoeff()));
  } else if (path.extension() == ".json") {
    say(nlohmann::json::parse(std::string(bytes.begin(), bytes.end())).dump(2));
  } else {
    const RunConfig c = parse_config(std::string(bytes.begin(), bytes.end()), path.parent_path());
    say("# config_hash " + io::hex64(config_hash(c)) + "  cache_hash " + io::hex64(cache_hash(c)));
    std::cout << to_text(c);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MARS: spectrogram tokenizer, next-scale generator and metric suite"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override run.seed");
  app.add_option("--out", g.out, "Override run.out (output directory)");
  app.add_option("--threads", g.threads, "Worker threads (1 = bit-reproducible)")->check(CLI::PositiveNumber);

  std::string manifest_override;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a JSON-lines manifest");
  ingest_cmd->add_option("--manifest", manifest_override, "Manifest path (default data.manifest)");

  auto* preprocess_cmd = app.add_subcommand("preprocess", "Build or refresh the spectrogram cache");

  std::optional<int> steps;
  auto* train_tok_cmd = app.add_subcommand("train-tokenizer", "Train (or resume) the tokenizer");
  train_tok_cmd->add_option("--steps", steps, "Override train.tokenizer_steps");
  auto* train_ar_cmd = app.add_subcommand("train-ar", "Train (or resume) the AR model on frozen tokens");
  train_ar_cmd->add_option("--steps", steps, "Override train.ar_steps");

  std::optional<int> count;
  std::optional<std::string> condition;
  auto* generate_cmd = app.add_subcommand("generate", "Sample clips to WAV with JSON sidecars");
  generate_cmd->add_option("-n,--count", count, "Number of clips (default generate.count)");
  generate_cmd->add_option("--condition", condition, "cycle, none or a family name");

  std::string mode = "reconstruction";
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compute the metric report");
  evaluate_cmd->add_option("--mode", mode, "reconstruction or generation")
      ->check(CLI::IsMember({"reconstruction", "generation"}));

  auto* cmx_cmd = app.add_subcommand("cmx", "Channel-multiplex tensor files");
  cmx_cmd->require_subcommand(1);
  std::string cmx_in, cmx_out, cmx_mode = "interleave";
  int fh = 1, fw = 1;
  auto* pack_cmd = cmx_cmd->add_subcommand("pack", "Pack a plain tensor file");
  pack_cmd->add_option("input", cmx_in)->required()->check(CLI::ExistingFile);
  pack_cmd->add_option("output", cmx_out)->required();
  pack_cmd->add_option("--fh", fh, "Height factor")->required()->check(CLI::PositiveNumber);
  pack_cmd->add_option("--fw", fw, "Width factor")->required()->check(CLI::PositiveNumber);
  pack_cmd->add_option("--mode", cmx_mode, "interleave or block")->check(CLI::IsMember({"interleave", "block"}));
  auto* unpack_cmd = cmx_cmd->add_subcommand("unpack", "Restore the plain tensor");
  unpack_cmd->add_option("input", cmx_in)->required()->check(CLI::ExistingFile);
  unpack_cmd->add_option("output", cmx_out)->required();

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Describe any artifact (checkpoint, tensor, tokens, wav, config)");
  inspect_cmd->add_option("path", inspect_path)->required();

  std::string synth_dir;
  SyntheticDatasetOptions synth;
  auto* synth_cmd = app.add_subcommand("synth-dataset", "Write a synthetic single-note dataset with a manifest");
  synth_cmd->add_option("dir", synth_dir)->required();
  synth_cmd->add_option("--count", synth.count, "Number of clips")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seconds", synth.seconds, "Clip length in seconds")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--test-every", synth.test_every, "Every n-th clip goes to the test split")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const Logger log = [](const std::string& line) { std::cerr << line << "\n"; };
    if (*cmx_cmd) {
      if (*pack_cmd) {
        const auto in = load_tensor(cmx_in);
        require(in.descriptor.identity(), "cmx pack: input is already packed (unpack it first)");
        const auto& v = in.values;
        save_tensor(cmx_out, cmx::pack(v, cmx::Descriptor{v.channels, v.height, v.width, fh, fw, cmx::parse_mode(cmx_mode)}));
      } else {
        const auto in = load_tensor(cmx_in);
        const Tensor3<float> x = cmx::unpack(in);
        save_tensor(cmx_out, cmx::PackedTensor<float>{x, cmx::Descriptor{x.channels, x.height, x.width, 1, 1}});
      }
      return 0;
    }
    if (*inspect_cmd) {
      inspect(inspect_path);
      return 0;
    }
    if (*synth_cmd) {
      const RunConfig c = resolve(g);
      synth.sample_rate = c.codec.sample_rate;
      synth.seed = c.seed;
      say(write_synthetic_dataset(synth_dir, synth, c.data).string());
      return 0;
    }

    RunConfig c = resolve(g);
    if (*ingest_cmd) {
      const DatasetManifest m = manifest_for(c, manifest_override);
      say("records " + std::to_string(m.records.size()) + "  train " + std::to_string(m.count(Split::kTrain)) +
          "  valid " + std::to_string(m.count(Split::kValid)) + "  test " + std::to_string(m.count(Split::kTest)) +
          "  skipped " + std::to_string(m.skipped.size()));
    } else if (*preprocess_cmd) {
      const PreprocessReport r = preprocess_cache(manifest_for(c), c);
      for (const auto& [id, msg] : r.failures) std::cerr << "warning: " << id << ": " << msg << "\n";
      say("written " + std::to_string(r.written) + "  reused " + std::to_string(r.reused) + "  failed " +
          std::to_string(r.failures.size()) + "  mean " + std::to_string(r.stats.normalization.mean) + "  stddev " +
          std::to_string(r.stats.normalization.stddev));
    } else if (*train_tok_cmd) {
      if (steps) c.train.tokenizer_steps = *steps;
      const TrainSummary s = run_train_tokenizer(manifest_for(c), c, log);
      say(s.checkpoint.string());
    } else if (*train_ar_cmd) {
      if (steps) c.train.ar_steps = *steps;
      const TrainSummary s = run_train_ar(manifest_for(c), c, log);
      say(s.checkpoint.string());
    } else if (*generate_cmd) {
      for (const auto& f : run_generate(c, count.value_or(c.generate.count), condition.value_or(c.generate.condition), c.seed))
        say(f.wav.string());
    } else if (*evaluate_cmd) {
      const auto report = run_evaluate(manifest_for(c), c, parse_eval_mode(mode), log);
      std::cout << report.to_text();
    }
    return 0;
  } catch (const Error& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "error " << category_name(e.category()) << ": " << msg << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error io: " << e.what() << "\n";
    return exit_code(ErrorCategory::kIo);
  }
}
