#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numeric>
#include <vector>

#include "mars/ad/checkpoint.hpp"
#include "mars/ad/layers.hpp"
#include "mars/ad/optim.hpp"
#include "mars/ar/config.hpp"
#include "mars/ar/sequence.hpp"
#include "mars/tokenizer/quantizer.hpp"

namespace mars::ar {

using ad::Matrix;
using ad::Parameter;
using ad::ParameterList;
using ad::Var;

/// Next-scale transformer. Position 0 holds a learned per-class start token
/// (the scale-1 input); positions of scale s >= 2 receive the accumulated,
/// upsampled code vectors of all coarser scales, area-downsampled to k_s.
template <typename T>
struct ArModel {
  ArConfig config;
  Matrix<T> codebook;  // frozen copy of the tokenizer codebook
  tokenizer::ScalePyramid<T> pyramid;
  std::vector<int> offsets;
  std::vector<int> scale_of;
  ad::AttentionMask mask;

  Parameter<T> class_tokens;  // (classes + 1) x width, last row unconditional
  ad::Linear<T> input_proj;
  Parameter<T> position;
  Parameter<T> scale_embedding;
  std::vector<ad::TransformerBlock<T>> blocks;
  ad::LayerNorm<T> norm;
  ad::Linear<T> head;

  ArModel(const ArConfig& cfg, const Matrix<T>& frozen_codebook, Rng& rng)
      : config(cfg), codebook(frozen_codebook) {
    validate(cfg);
    require(codebook.rows() == cfg.vocab && codebook.cols() == cfg.code_dim,
            "ar model: codebook is " + std::to_string(codebook.rows()) + "x" + std::to_string(codebook.cols()) +
                ", config expects " + std::to_string(cfg.vocab) + "x" + std::to_string(cfg.code_dim),
            ErrorCategory::kConfigMismatch);
    pyramid = tokenizer::ScalePyramid<T>(cfg.schedule);
    offsets = scale_offsets(cfg.schedule);
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s)
      for (int i = offsets[s]; i < offsets[s + 1]; ++i) scale_of.push_back(static_cast<int>(s));
    mask = block_causal_mask(cfg.schedule);
    const int n = cfg.context_length();
    class_tokens = Parameter<T>("ar.class_tokens", ad::normal_init<T>(cfg.classes + 1, cfg.width, 0.02, rng));
    input_proj = ad::Linear<T>("ar.input_proj", cfg.code_dim, cfg.width, rng);
    position = Parameter<T>("ar.position", ad::normal_init<T>(n, cfg.width, 0.02, rng));
    scale_embedding = Parameter<T>("ar.scale_embedding",
                                   ad::normal_init<T>(static_cast<Eigen::Index>(cfg.schedule.size()), cfg.width, 0.02, rng));
    for (int i = 0; i < cfg.depth; ++i)
      blocks.emplace_back("ar.block." + std::to_string(i), cfg.width, cfg.heads, cfg.mlp_hidden, rng);
    norm = ad::LayerNorm<T>("ar.norm", cfg.width);
    head = ad::Linear<T>("ar.head", cfg.width, cfg.vocab, rng);
    head.weight.mutable_value() = ad::normal_init<T>(cfg.width, cfg.vocab, 0.02, rng);
  }
  ArModel(const ArModel&) = delete;
  ArModel& operator=(const ArModel&) = delete;

  ParameterList<T> parameters() {
    ParameterList<T> out{&class_tokens};
    input_proj.collect(out);
    out.push_back(&position);
    out.push_back(&scale_embedding);
    for (auto& b : blocks) b.collect(out);
    norm.collect(out);
    head.collect(out);
    return out;
  }

  std::size_t scales() const { return config.schedule.size(); }
  int prefix_length(std::size_t scales_used) const { return offsets[scales_used]; }

  /// Inputs for positions 1 .. prefix_length(scales_used)-1 from the tokens
  /// of the first scales_used-1 scales; rows of scales beyond are unused.
  Matrix<T> scale_inputs(const MultiScaleTokenMap& t, std::size_t scales_used) const {
    require(t.schedule == config.schedule, "ar: token map schedule does not match the model", ErrorCategory::kConfigMismatch);
    require(scales_used >= 1 && scales_used <= scales(), "ar: scale count out of range");
    const int K = pyramid.full_side();
    Matrix<T> out(prefix_length(scales_used) - 1, config.code_dim);
    Matrix<T> acc = Matrix<T>::Zero(static_cast<Eigen::Index>(K) * K, config.code_dim);
    for (std::size_t s = 1; s < scales_used; ++s) {
      const auto& g = t.grids[s - 1];
      Matrix<T> q(static_cast<Eigen::Index>(g.size()), config.code_dim);
      for (std::size_t i = 0; i < g.size(); ++i) {
        require(g[i] >= 0 && g[i] < config.vocab, "ar: token index out of range");
        q.row(static_cast<Eigen::Index>(i)) = codebook.row(g[i]);
      }
      acc.noalias() += pyramid.up[s - 1] * q;
      out.middleRows(offsets[s] - 1, offsets[s + 1] - offsets[s]).noalias() = pyramid.down[s] * acc;
    }
    return out;
  }

  /// Logits (prefix_length x vocab) for the given input rows.
  Var<T> forward(const Var<T>& inputs, int condition, std::size_t scales_used) const {
    validate_condition(config, condition);
    const int n = prefix_length(scales_used);
    require(inputs.rows() == n - 1 && (n == 1 || inputs.cols() == config.code_dim), "ar_forward: input shape mismatch",
            ErrorCategory::kConfigMismatch);
    const int cls = condition == kUnconditional ? config.classes : condition;
    Var<T> h = ad::embedding_lookup(class_tokens.var, std::span<const int>(&cls, 1));
    if (n > 1) h = ad::concat_rows<T>({h, input_proj(inputs)});
    h = ad::add(h, ad::slice_rows(position.var, 0, n));
    h = ad::add(h, ad::embedding_lookup(scale_embedding.var, std::span<const int>(scale_of.data(), static_cast<std::size_t>(n))));
    const ad::AttentionMask m = mask.topLeftCorner(n, n);
    for (const auto& b : blocks) h = b(h, m);
    return head(norm(h));
  }

  Var<T> forward(const MultiScaleTokenMap& t, int condition) const {
    return forward(ad::constant<T>(scale_inputs(t, scales())), condition, scales());
  }
};

struct ArExample {
  MultiScaleTokenMap tokens;
  int condition = kUnconditional;
};

struct ArStepReport {
  std::int64_t step = 0;
  bool skipped = false;
  double loss = 0;      // mean cross-entropy per position
  double accuracy = 0;  // teacher-forced argmax accuracy
  std::vector<double> scale_loss;  // mean per position within each scale
  std::vector<int> scale_positions;
};

/// Per-position cross-entropy and argmax hits for one logit matrix.
template <typename T>
void score_logits(const Matrix<T>& logits, const std::vector<int>& targets, const std::vector<int>& scale_of,
                  ArStepReport& rep, double weight) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const double m = static_cast<double>(row.maxCoeff());
    double z = 0;
    for (Eigen::Index j = 0; j < row.size(); ++j) z += std::exp(static_cast<double>(row(j)) - m);
    const int y = targets[static_cast<std::size_t>(i)];
    const double nll = m + std::log(z) - static_cast<double>(row(y));
    Eigen::Index arg = 0;
    row.maxCoeff(&arg);
    const auto s = static_cast<std::size_t>(scale_of[static_cast<std::size_t>(i)]);
    rep.scale_loss[s] += weight * nll;
    rep.accuracy += weight * (arg == y ? 1.0 : 0.0);
  }
}

template <typename T>
class ArTrainer {
 public:
  ArTrainer(const ArConfig& cfg, const Matrix<T>& codebook, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    Rng rng = Rng::derive(seed, 0xa7);
    model_ = std::make_unique<ArModel<T>>(cfg, codebook, rng);
    adam_ = ad::Adam<T>(model_->parameters(), {cfg.learning_rate, 0.9, 0.95, 1e-8});
  }

  ArModel<T>& model() { return *model_; }
  const ArModel<T>& model() const { return *model_; }
  std::int64_t steps() const { return step_; }

  ArStepReport step(const std::vector<ArExample>& batch) {
    require(!batch.empty(), "ar_train_step: empty batch");
    ArStepReport rep = blank();
    adam_.zero_grad();
    const T inv_b = T(1) / static_cast<T>(batch.size());
    bool finite = true;
    for (const auto& ex : batch) {
      ad::Tape<T> tape;
      const ScaleSequence seq = flatten_scales(ex.tokens);
      const Var<T> logits = model_->forward(ex.tokens, ex.condition);
      const Var<T> loss = ad::cross_entropy(logits, std::span<const int>(seq.tokens));
      if (!std::isfinite(static_cast<double>(loss.scalar()))) {
        finite = false;
        break;
      }
      tape.backward(ad::scale(loss, inv_b));
      score_logits(logits.value(), seq.tokens, model_->scale_of, rep, 1.0 / static_cast<double>(batch.size()));
    }
    ++step_;
    if (!finite || !adam_.step()) {
      adam_.zero_grad();
      rep = blank();
      rep.step = step_ - 1;
      rep.skipped = true;
      return rep;
    }
    finish(rep);
    rep.step = step_ - 1;
    return rep;
  }

  /// Teacher-forced loss and accuracy without updating anything.
  ArStepReport evaluate(const std::vector<ArExample>& batch) const {
    require(!batch.empty(), "ar evaluate: empty batch");
    ArStepReport rep = blank();
    for (const auto& ex : batch)
      score_logits(model_->forward(ex.tokens, ex.condition).value(), flatten_scales(ex.tokens).tokens, model_->scale_of,
                   rep, 1.0 / static_cast<double>(batch.size()));
    finish(rep);
    rep.step = step_;
    return rep;
  }

  ad::Checkpoint checkpoint() {
    ad::Checkpoint ck;
    ck.config_hash = config_hash(cfg_);
    ck.add("ar.codebook", model_->codebook);
    ck.add_parameters(model_->parameters());
    ck.add_optimizer(adam_, "adam");
    ck.add_integer("trainer.step", step_);
    return ck;
  }

  void restore(const ad::Checkpoint& ck) {
    require(ck.config_hash == config_hash(cfg_), "ar checkpoint was written for a different config",
            ErrorCategory::kConfigMismatch);
    model_->codebook = ck.matrix<T>("ar.codebook");
    ck.load_parameters(model_->parameters());
    ck.load_optimizer(adam_, "adam");
    step_ = ck.integer("trainer.step");
  }

  void save(const std::filesystem::path& path) { checkpoint().save(path); }
  void load(const std::filesystem::path& path) { restore(ad::Checkpoint::load(path)); }

 private:
  ArStepReport blank() const {
    ArStepReport rep;
    rep.step = step_;
    rep.scale_loss.assign(cfg_.schedule.size(), 0.0);
    for (int k : cfg_.schedule) rep.scale_positions.push_back(k * k);
    return rep;
  }

  static void finish(ArStepReport& rep) {
    const double n = std::accumulate(rep.scale_positions.begin(), rep.scale_positions.end(), 0.0);
    rep.loss = std::accumulate(rep.scale_loss.begin(), rep.scale_loss.end(), 0.0) / n;
    rep.accuracy /= n;
    for (std::size_t s = 0; s < rep.scale_loss.size(); ++s) rep.scale_loss[s] /= rep.scale_positions[s];
  }

  ArConfig cfg_;
  std::uint64_t seed_;
  std::unique_ptr<ArModel<T>> model_;
  ad::Adam<T> adam_;
  std::int64_t step_ = 0;
};

/// Index drawn from one logit row. Temperature 0 or top_k 1 gives the
/// argmax (lowest index on ties).
template <typename Row>
int sample_logits(const Row& logits, const SamplingOptions& opt, Rng& rng) {
  const Eigen::Index v = logits.size();
  auto argmax = [&]() {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < v; ++j)
      if (logits(j) > logits(best)) best = j;
    return static_cast<int>(best);
  };
  if (opt.temperature == 0.0 || opt.top_k == 1) return argmax();
  std::vector<int> order(static_cast<std::size_t>(v));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return logits(a) > logits(b); });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(opt.top_k)));
  const double top = static_cast<double>(logits(order.front()));
  std::vector<double> p;
  double z = 0;
  for (int j : order) {
    p.push_back(std::exp((static_cast<double>(logits(j)) - top) / opt.temperature));
    z += p.back();
  }
  std::size_t keep = p.size();
  if (opt.top_p < 1.0) {
    double cum = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      cum += p[i] / z;
      if (cum >= opt.top_p) {
        keep = i + 1;
        break;
      }
    }
    z = std::accumulate(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(keep), 0.0);
  }
  double u = rng.uniform() * z;
  for (std::size_t i = 0; i < keep; ++i) {
    u -= p[i];
    if (u < 0) return order[i];
  }
  return order[keep - 1];
}

/// Coarse-to-fine generation: every position of a scale is drawn in one
/// pass conditioned on the scales already generated.
template <typename T>
MultiScaleTokenMap ar_sample(const ArModel<T>& m, int condition, std::uint64_t seed, const SamplingOptions& opt) {
  validate(opt);
  validate_condition(m.config, condition);
  Rng rng = Rng::derive(seed, 0x5a3);
  MultiScaleTokenMap t;
  t.schedule = m.config.schedule;
  for (int k : t.schedule) t.grids.emplace_back(static_cast<std::size_t>(k * k), 0);
  for (std::size_t s = 0; s < m.scales(); ++s) {
    const Matrix<T> logits = m.forward(ad::constant<T>(m.scale_inputs(t, s + 1)), condition, s + 1).value();
    for (int i = m.offsets[s]; i < m.offsets[s + 1]; ++i)
      t.grids[s][static_cast<std::size_t>(i - m.offsets[s])] = sample_logits(logits.row(i), opt, rng);
  }
  return t;
}

}  // namespace mars::ar
