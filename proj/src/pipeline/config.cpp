#include "mars/pipeline/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mars/io.hpp"

namespace mars::pipeline {

namespace {

enum Scope : unsigned { kOutput = 0, kArtifact = 1, kCache = 2 };

struct Field {
  const char* section;
  const char* key;
  unsigned scope;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(const std::string& s, const std::string& name) {
  T v{};
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  require(ec == std::errc() && ptr == end, "config: " + name + " = '" + s + "' is not a valid number");
  return v;
}

std::string show(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

template <typename Proj>
Field integer(const char* sec, const char* key, unsigned scope, Proj proj) {
  return {sec, key, scope,
          [=](RunConfig& c, const std::string& v) { proj(c) = parse_number<std::remove_reference_t<decltype(proj(c))>>(v, std::string(sec) + "." + key); },
          [=](const RunConfig& c) { return std::to_string(proj(const_cast<RunConfig&>(c))); }};
}

template <typename Proj>
Field real(const char* sec, const char* key, unsigned scope, Proj proj) {
  return {sec, key, scope,
          [=](RunConfig& c, const std::string& v) { proj(c) = parse_number<double>(v, std::string(sec) + "." + key); },
          [=](const RunConfig& c) { return show(proj(const_cast<RunConfig&>(c))); }};
}

template <typename Proj>
Field text(const char* sec, const char* key, unsigned scope, Proj proj) {
  return {sec, key, scope, [=](RunConfig& c, const std::string& v) { proj(c) = v; },
          [=](const RunConfig& c) { return proj(const_cast<RunConfig&>(c)); }};
}

template <typename Proj>
Field flag(const char* sec, const char* key, unsigned scope, Proj proj) {
  return {sec, key, scope,
          [=](RunConfig& c, const std::string& v) {
            require(v == "true" || v == "false", "config: " + std::string(sec) + "." + key + " must be true or false");
            proj(c) = v == "true";
          },
          [=](const RunConfig& c) { return std::string(proj(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <typename Parse, typename Show>
Field choice(const char* sec, const char* key, unsigned scope, Parse parse, Show show_fn) {
  return {sec, key, scope, parse, show_fn};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    const unsigned A = kArtifact, C = kArtifact | kCache;
    std::vector<Field> f;
    f.push_back(integer("run", "seed", A, [](RunConfig& c) -> std::uint64_t& { return c.seed; }));
    f.push_back(text("run", "out", kOutput, [](RunConfig& c) -> std::string& { return c.out; }));
    f.push_back(integer("run", "threads", kOutput, [](RunConfig& c) -> int& { return c.threads; }));

    f.push_back(text("data", "manifest", kOutput, [](RunConfig& c) -> std::string& { return c.data.manifest; }));
    f.push_back(integer("data", "sample_rate", C, [](RunConfig& c) -> int& { return c.codec.sample_rate; }));
    f.push_back(flag("data", "resample", C, [](RunConfig& c) -> bool& { return c.data.resample; }));
    f.push_back(choice(
        "data", "families", A,
        [](RunConfig& c, const std::string& v) { c.data.families = split_list(v); },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.data.families.size(); ++i) s += (i ? "," : "") + c.data.families[i];
          return s;
        }));
    f.push_back(integer("data", "pitch_min", A, [](RunConfig& c) -> int& { return c.data.pitch_min; }));
    f.push_back(integer("data", "pitch_max", A, [](RunConfig& c) -> int& { return c.data.pitch_max; }));

    f.push_back(integer("stft", "n_fft", C, [](RunConfig& c) -> int& { return c.codec.stft.n_fft; }));
    f.push_back(integer("stft", "hop", C, [](RunConfig& c) -> int& { return c.codec.stft.hop; }));
    f.push_back(choice(
        "stft", "window", C, [](RunConfig& c, const std::string& v) { c.codec.stft.window = dsp::parse_window(v); },
        [](const RunConfig& c) { return dsp::to_string(c.codec.stft.window); }));
    f.push_back(choice(
        "stft", "pad_mode", C, [](RunConfig& c, const std::string& v) { c.codec.stft.pad_mode = dsp::parse_pad_mode(v); },
        [](const RunConfig& c) { return dsp::to_string(c.codec.stft.pad_mode); }));
    f.push_back(choice(
        "stft", "bin_trim", C, [](RunConfig& c, const std::string& v) { c.codec.stft.bin_trim = dsp::parse_bin_trim(v); },
        [](const RunConfig& c) { return dsp::to_string(c.codec.stft.bin_trim); }));
    f.push_back(integer("stft", "target_frames", C, [](RunConfig& c) -> int& { return c.codec.stft.target_frames; }));
    f.push_back(integer("stft", "griffin_lim_iterations", A,
                        [](RunConfig& c) -> int& { return c.codec.griffin_lim_iterations; }));

    f.push_back(integer("mel", "n_mels", A, [](RunConfig& c) -> int& { return c.mel.n_mels; }));
    f.push_back(real("mel", "f_min", A, [](RunConfig& c) -> double& { return c.mel.f_min; }));
    f.push_back(real("mel", "f_max", A, [](RunConfig& c) -> double& { return c.mel.f_max; }));

    f.push_back(choice(
        "cmx", "layout", C, [](RunConfig& c, const std::string& v) { c.codec.layout = tokenizer::parse_layout(v); },
        [](const RunConfig& c) { return tokenizer::to_string(c.codec.layout); }));
    f.push_back(choice(
        "cmx", "mode", C, [](RunConfig& c, const std::string& v) { c.codec.cmx_mode = cmx::parse_mode(v); },
        [](const RunConfig& c) { return cmx::to_string(c.codec.cmx_mode); }));

    auto tok = [](RunConfig& c) -> tokenizer::TokenizerConfig& { return c.codec.tokenizer; };
    f.push_back(integer("tokenizer", "channels", C, [=](RunConfig& c) -> int& { return tok(c).channels; }));
    f.push_back(integer("tokenizer", "size", C, [=](RunConfig& c) -> int& { return tok(c).size; }));
    f.push_back(integer("tokenizer", "patch", A, [=](RunConfig& c) -> int& { return tok(c).patch; }));
    f.push_back(integer("tokenizer", "learnable_tokens", A, [=](RunConfig& c) -> int& { return tok(c).learnable_tokens; }));
    f.push_back(integer("tokenizer", "width", A, [=](RunConfig& c) -> int& { return tok(c).width; }));
    f.push_back(integer("tokenizer", "encoder_depth", A, [=](RunConfig& c) -> int& { return tok(c).encoder_depth; }));
    f.push_back(integer("tokenizer", "decoder_depth", A, [=](RunConfig& c) -> int& { return tok(c).decoder_depth; }));
    f.push_back(integer("tokenizer", "heads", A, [=](RunConfig& c) -> int& { return tok(c).heads; }));
    f.push_back(integer("tokenizer", "mlp_hidden", A, [=](RunConfig& c) -> int& { return tok(c).mlp_hidden; }));
    f.push_back(integer("tokenizer", "codebook_size", A, [=](RunConfig& c) -> int& { return tok(c).codebook_size; }));
    f.push_back(integer("tokenizer", "code_dim", A, [=](RunConfig& c) -> int& { return tok(c).code_dim; }));
    f.push_back(choice(
        "tokenizer", "schedule", A,
        [](RunConfig& c, const std::string& v) {
          c.codec.tokenizer.schedule.clear();
          for (const auto& s : split_list(v)) c.codec.tokenizer.schedule.push_back(parse_number<int>(s, "tokenizer.schedule"));
        },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.codec.tokenizer.schedule.size(); ++i)
            s += (i ? "," : "") + std::to_string(c.codec.tokenizer.schedule[i]);
          return s;
        }));
    f.push_back(real("tokenizer", "lambda_recon", A, [=](RunConfig& c) -> double& { return tok(c).lambda_recon; }));
    f.push_back(real("tokenizer", "lambda_vq", A, [=](RunConfig& c) -> double& { return tok(c).lambda_vq; }));
    f.push_back(real("tokenizer", "lambda_ad", A, [=](RunConfig& c) -> double& { return tok(c).lambda_ad; }));
    f.push_back(real("tokenizer", "beta", A, [=](RunConfig& c) -> double& { return tok(c).beta; }));
    f.push_back(integer("tokenizer", "dead_code_steps", A, [=](RunConfig& c) -> int& { return tok(c).dead_code_steps; }));
    f.push_back(real("tokenizer", "learning_rate", A, [=](RunConfig& c) -> double& { return tok(c).learning_rate; }));
    f.push_back(integer("tokenizer", "disc_width", A, [=](RunConfig& c) -> int& { return tok(c).disc_width; }));
    f.push_back(real("tokenizer", "disc_learning_rate", A, [=](RunConfig& c) -> double& { return tok(c).disc_learning_rate; }));

    f.push_back(integer("ar", "width", A, [](RunConfig& c) -> int& { return c.ar.width; }));
    f.push_back(integer("ar", "depth", A, [](RunConfig& c) -> int& { return c.ar.depth; }));
    f.push_back(integer("ar", "heads", A, [](RunConfig& c) -> int& { return c.ar.heads; }));
    f.push_back(integer("ar", "mlp_hidden", A, [](RunConfig& c) -> int& { return c.ar.mlp_hidden; }));
    f.push_back(real("ar", "learning_rate", A, [](RunConfig& c) -> double& { return c.ar.learning_rate; }));
    f.push_back(real("ar", "temperature", A, [](RunConfig& c) -> double& { return c.ar.sampling.temperature; }));
    f.push_back(integer("ar", "top_k", A, [](RunConfig& c) -> int& { return c.ar.sampling.top_k; }));
    f.push_back(real("ar", "top_p", A, [](RunConfig& c) -> double& { return c.ar.sampling.top_p; }));

    f.push_back(integer("train", "tokenizer_steps", A, [](RunConfig& c) -> int& { return c.train.tokenizer_steps; }));
    f.push_back(integer("train", "tokenizer_batch", A, [](RunConfig& c) -> int& { return c.train.tokenizer_batch; }));
    f.push_back(integer("train", "ar_steps", A, [](RunConfig& c) -> int& { return c.train.ar_steps; }));
    f.push_back(integer("train", "ar_batch", A, [](RunConfig& c) -> int& { return c.train.ar_batch; }));
    f.push_back(integer("train", "checkpoint_every", A, [](RunConfig& c) -> int& { return c.train.checkpoint_every; }));

    f.push_back(integer("generate", "count", A, [](RunConfig& c) -> int& { return c.generate.count; }));
    f.push_back(text("generate", "condition", A, [](RunConfig& c) -> std::string& { return c.generate.condition; }));

    f.push_back(integer("metrics", "ndb_k", A, [](RunConfig& c) -> int& { return c.metrics.ndb_k; }));
    f.push_back(real("metrics", "ndb_alpha", A, [](RunConfig& c) -> double& { return c.metrics.ndb_alpha; }));
    f.push_back(integer("metrics", "min_samples", A, [](RunConfig& c) -> int& { return c.metrics.min_samples; }));
    f.push_back(integer("metrics", "classifier_hidden", A, [](RunConfig& c) -> int& { return c.metrics.classifier.hidden; }));
    f.push_back(integer("metrics", "classifier_embedding", A,
                        [](RunConfig& c) -> int& { return c.metrics.classifier.embedding; }));
    f.push_back(integer("metrics", "classifier_steps", A, [](RunConfig& c) -> int& { return c.metrics.classifier.steps; }));
    f.push_back(real("metrics", "classifier_learning_rate", A,
                     [](RunConfig& c) -> double& { return c.metrics.classifier.learning_rate; }));
    return f;
  }();
  return table;
}

std::string render(const RunConfig& c, unsigned scope) {
  std::string s, section;
  for (const auto& f : fields()) {
    if (scope != kOutput && !(f.scope & scope)) continue;
    if (f.section != section) {
      section = f.section;
      s += (s.empty() ? "[" : "\n[") + section + "]\n";
    }
    s += std::string(f.key) + " = " + f.get(c) + "\n";
  }
  return s;
}

}  // namespace

void sync_derived(RunConfig& c) {
  c.ar.vocab = c.codec.tokenizer.codebook_size;
  c.ar.code_dim = c.codec.tokenizer.code_dim;
  c.ar.schedule = c.codec.tokenizer.schedule;
  c.ar.classes = static_cast<int>(c.data.families.size());
}

void validate(const RunConfig& c) {
  auto mismatch = [](bool ok, const std::string& msg) { require(ok, "config: " + msg, ErrorCategory::kConfigMismatch); };
  mismatch(c.threads >= 1, "run.threads must be at least 1");
  mismatch(!c.data.families.empty(), "data.families must list at least one family");
  std::set<std::string> unique(c.data.families.begin(), c.data.families.end());
  mismatch(unique.size() == c.data.families.size(), "data.families contains duplicates");
  for (const auto& f : c.data.families) mismatch(!f.empty() && f != "cycle" && f != "none", "invalid family name '" + f + "'");
  mismatch(c.data.pitch_min >= 0 && c.data.pitch_min <= c.data.pitch_max && c.data.pitch_max <= 127,
           "data.pitch_min/pitch_max must satisfy 0 <= min <= max <= 127");
  mismatch(c.codec.sample_rate > 0, "data.sample_rate must be positive");
  tokenizer::validate(c.codec);
  mismatch(c.mel.n_mels > 0 && c.mel.n_mels <= c.codec.stft.full_bins(), "mel.n_mels must be in [1, n_fft/2 + 1]");
  mismatch(c.mel.f_min >= 0 && c.mel.f_min < c.mel.f_max && c.mel.f_max <= c.codec.sample_rate / 2.0,
           "mel band must satisfy 0 <= f_min < f_max <= sample_rate / 2");
  mismatch(c.ar.vocab == c.codec.tokenizer.codebook_size && c.ar.code_dim == c.codec.tokenizer.code_dim &&
               c.ar.schedule == c.codec.tokenizer.schedule && c.ar.classes == static_cast<int>(c.data.families.size()),
           "AR vocabulary, code_dim, schedule and classes must follow the tokenizer and family list");
  ar::validate(c.ar);
  mismatch(c.train.tokenizer_steps >= 0 && c.train.ar_steps >= 0, "training step budgets must be non-negative");
  mismatch(c.train.tokenizer_batch >= 1 && c.train.ar_batch >= 1, "batch sizes must be at least 1");
  mismatch(c.train.checkpoint_every >= 1, "train.checkpoint_every must be at least 1");
  mismatch(c.generate.count >= 0, "generate.count must be non-negative");
  mismatch(c.metrics.ndb_k >= 1 && c.metrics.ndb_alpha > 0 && c.metrics.ndb_alpha < 1,
           "metrics.ndb_k must be positive and ndb_alpha in (0, 1)");
  mismatch(c.metrics.min_samples >= 2, "metrics.min_samples must be at least 2");
  mismatch(c.metrics.classifier.hidden > 0 && c.metrics.classifier.embedding > 0 && c.metrics.classifier.steps >= 0 &&
               c.metrics.classifier.learning_rate > 0,
           "classifier settings must be positive");
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCategory::kInvalidInput, "config: line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, keys] : tree) {
    require(!keys.empty() || keys.data().empty(), "config: key '" + section + "' must sit inside a [section]");
    for (const auto& [key, value] : keys) {
      const Field* hit = nullptr;
      for (const auto& f : fields())
        if (section == f.section && key == f.key) hit = &f;
      require(hit != nullptr, "config: unknown key '" + section + "." + key + "'");
      hit->set(c, value.get_value<std::string>());
    }
  }
  if (!c.data.manifest.empty() && !base.empty() && std::filesystem::path(c.data.manifest).is_relative())
    c.data.manifest = (base / c.data.manifest).lexically_normal().string();
  sync_derived(c);
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCategory::kIo, "config file not found: " + path.string());
  return parse_config(io::read_text(path), path.parent_path());
}

std::string to_text(const RunConfig& c) { return render(c, kOutput); }

std::uint64_t config_hash(const RunConfig& c) { return io::fnv1a(render(c, kArtifact)); }

std::uint64_t cache_hash(const RunConfig& c) { return io::fnv1a(render(c, kCache)); }

}  // namespace mars::pipeline
