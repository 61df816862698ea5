#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <vector>

#include "mars/ad/checkpoint.hpp"
#include "mars/ad/optim.hpp"
#include "mars/tokenizer/model.hpp"

namespace mars::tokenizer {

struct TokenizerStepReport {
  std::int64_t step = 0;
  bool skipped = false;
  LossBreakdown loss;
  double discriminator = 0;
  int reseeded = 0;
  int codes_used = 0;  // distinct codes hit by this batch
};

/// Model, discriminator, optimisers and codebook bookkeeping for tokenizer
/// training. Each step depends only on (seed, step index, batch).
template <typename T>
class TokenizerTrainer {
 public:
  TokenizerTrainer(const TokenizerConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    validate(cfg);
    Rng rng = Rng::derive(seed, 0x70c);
    model_ = std::make_unique<TokenizerModel<T>>(cfg, rng);
    disc_ = std::make_unique<PatchDiscriminator<T>>(cfg.channels, cfg.size, cfg.disc_width, rng);
    adam_ = ad::Adam<T>(model_->parameters(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
    disc_adam_ = ad::Adam<T>(disc_->parameters(), {cfg.disc_learning_rate, 0.5, 0.9, 1e-8});
    image_index_ = patch_source_indices(cfg.channels, cfg.size, cfg.patch);
    const auto v = static_cast<std::size_t>(cfg.codebook_size);
    usage_.assign(v, 0);
    idle_.assign(v, 0);
    for (std::size_t i = 0; i < adam_.params().size(); ++i)
      if (adam_.params()[i] == &model_->codebook) codebook_slot_ = i;
  }

  const TokenizerConfig& config() const { return cfg_; }
  TokenizerModel<T>& model() { return *model_; }
  const TokenizerModel<T>& model() const { return *model_; }
  PatchDiscriminator<T>& discriminator() { return *disc_; }
  std::int64_t steps() const { return step_; }
  const std::vector<std::int64_t>& usage() const { return usage_; }

  TokenizerStepReport step(const std::vector<Tensor3<T>>& batch) {
    require(!batch.empty(), "train_tokenizer_step: empty batch");
    for (const auto& x : batch)
      require(x.channels == cfg_.channels && x.height == cfg_.size && x.width == cfg_.size,
              "train_tokenizer_step: batch item shape does not match the tokenizer config", ErrorCategory::kConfigMismatch);
    TokenizerStepReport rep;
    rep.step = step_;
    Rng rng = Rng::derive(seed_, static_cast<std::uint64_t>(step_), 1);
    std::vector<Matrix<T>> patches;
    for (const auto& x : batch) patches.push_back(patchify(x, cfg_.patch));
    if (!codebook_ready_) initialise_codebook(patches, rng);

    adam_.zero_grad();
    disc_adam_.zero_grad();
    const T inv_b = T(1) / static_cast<T>(batch.size());
    const bool adversarial = cfg_.lambda_ad > 0;
    const LossWeights weights = LossWeights::from(cfg_);
    std::vector<Matrix<T>> fakes;
    std::vector<Matrix<T>> candidates;
    std::vector<char> used(usage_.size(), 0);
    bool finite = true;
    for (const auto& p : patches) {
      ad::Tape<T> tape;
      const Var<T> x = ad::constant<T>(p);
      const Var<T> z = model_->encode(x);
      const QuantizedLatent<T> q = quantize_with_gradients(z, model_->codebook.var, model_->pyramid);
      const Var<T> x_hat = model_->decode(q.z_prime);
      Var<T> scores;
      if (adversarial) scores = (*disc_)(to_image(x_hat));
      const TokenizerLoss<T> loss = tokenizer_loss(x, x_hat, q, adversarial ? &scores : nullptr, weights);
      if (!std::isfinite(loss.parts.total)) {
        finite = false;
        break;
      }
      tape.backward(ad::scale(loss.total, inv_b));
      accumulate(rep.loss, loss.parts, static_cast<double>(inv_b));
      for (const auto& g : q.result.tokens.grids)
        for (int idx : g) used[static_cast<std::size_t>(idx)] = 1;
      for (const auto& m : q.result.scale_inputs) candidates.push_back(m);
      if (adversarial) fakes.push_back(x_hat.value());
    }
    ++step_;
    if (!finite || !adam_.step()) {
      adam_.zero_grad();
      disc_adam_.zero_grad();
      rep.skipped = true;
      rep.loss = {};
      return rep;
    }
    if (adversarial) rep.discriminator = discriminator_step(patches, fakes, static_cast<double>(inv_b));
    update_usage(used, candidates, rng, rep);
    return rep;
  }

  ad::Checkpoint checkpoint() {
    ad::Checkpoint ck;
    ck.config_hash = config_hash(cfg_);
    ck.add_parameters(model_->parameters());
    ck.add_parameters(disc_->parameters());
    ck.add_optimizer(adam_, "adam");
    ck.add_optimizer(disc_adam_, "disc_adam");
    ck.add_integer("trainer.step", step_);
    ck.add_integer("trainer.codebook_ready", codebook_ready_ ? 1 : 0);
    Matrix<double> counts(2, static_cast<Eigen::Index>(usage_.size()));
    for (std::size_t i = 0; i < usage_.size(); ++i) {
      counts(0, static_cast<Eigen::Index>(i)) = static_cast<double>(usage_[i]);
      counts(1, static_cast<Eigen::Index>(i)) = idle_[i];
    }
    ck.add("codebook.counts", counts);
    return ck;
  }

  void restore(const ad::Checkpoint& ck) {
    require(ck.config_hash == config_hash(cfg_), "tokenizer checkpoint was written for a different config",
            ErrorCategory::kConfigMismatch);
    ck.load_parameters(model_->parameters());
    ck.load_parameters(disc_->parameters());
    ck.load_optimizer(adam_, "adam");
    ck.load_optimizer(disc_adam_, "disc_adam");
    step_ = ck.integer("trainer.step");
    codebook_ready_ = ck.integer("trainer.codebook_ready") != 0;
    const Matrix<double> counts = ck.matrix<double>("codebook.counts");
    require(counts.rows() == 2 && counts.cols() == static_cast<Eigen::Index>(usage_.size()),
            "checkpoint: codebook.counts size mismatch", ErrorCategory::kConfigMismatch);
    for (std::size_t i = 0; i < usage_.size(); ++i) {
      usage_[i] = static_cast<std::int64_t>(counts(0, static_cast<Eigen::Index>(i)));
      idle_[i] = static_cast<int>(counts(1, static_cast<Eigen::Index>(i)));
    }
  }

  void save(const std::filesystem::path& path) { checkpoint().save(path); }
  void load(const std::filesystem::path& path) { restore(ad::Checkpoint::load(path)); }

 private:
  Var<T> to_image(const Var<T>& patches) const {
    return ad::gather(patches, cfg_.channels, Eigen::Index(cfg_.size) * cfg_.size, image_index_);
  }

  static void accumulate(LossBreakdown& acc, const LossBreakdown& x, double w) {
    acc.total += w * x.total;
    acc.recon += w * x.recon;
    acc.vq += w * x.vq;
    acc.codebook += w * x.codebook;
    acc.commitment += w * x.commitment;
    acc.adversarial += w * x.adversarial;
  }

  /// Seeds the codebook from residual vectors of the first batch, as seen
  /// by a quantiser that passes every scale through unchanged.
  void initialise_codebook(const std::vector<Matrix<T>>& patches, Rng& rng) {
    std::vector<Matrix<T>> candidates;
    const VectorQuantizer<T> passthrough = [](const Matrix<T>& v) {
      return NearestResult<T>{std::vector<int>(static_cast<std::size_t>(v.rows()), 0), v};
    };
    for (const auto& p : patches) {
      const Matrix<T> z = model_->encode(ad::constant<T>(p)).value();
      for (auto& m : multiscale_quantize<T>(z, model_->pyramid, passthrough).scale_inputs) candidates.push_back(std::move(m));
    }
    Matrix<T>& cb = model_->codebook.mutable_value();
    for (Eigen::Index r = 0; r < cb.rows(); ++r) cb.row(r) = pick(candidates, rng);
    codebook_ready_ = true;
  }

  Eigen::Matrix<T, 1, Eigen::Dynamic> pick(const std::vector<Matrix<T>>& candidates, Rng& rng) const {
    Eigen::Index total = 0;
    for (const auto& m : candidates) total += m.rows();
    auto at = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(total)));
    for (const auto& m : candidates) {
      if (at < m.rows()) {
        Eigen::Matrix<T, 1, Eigen::Dynamic> row = m.row(at);
        for (Eigen::Index j = 0; j < row.size(); ++j) row(j) += static_cast<T>(1e-3 * rng.normal());
        return row;
      }
      at -= m.rows();
    }
    return candidates.back().row(0);
  }

  void update_usage(const std::vector<char>& used, const std::vector<Matrix<T>>& candidates, Rng& rng,
                    TokenizerStepReport& rep) {
    Matrix<T>& cb = model_->codebook.mutable_value();
    for (std::size_t v = 0; v < used.size(); ++v) {
      if (used[v]) {
        ++usage_[v];
        idle_[v] = 0;
        ++rep.codes_used;
        continue;
      }
      if (++idle_[v] < cfg_.dead_code_steps) continue;
      cb.row(static_cast<Eigen::Index>(v)) = pick(candidates, rng);
      adam_.reset_row(codebook_slot_, static_cast<Eigen::Index>(v));
      idle_[v] = 0;
      ++rep.reseeded;
    }
  }

  double discriminator_step(const std::vector<Matrix<T>>& real, const std::vector<Matrix<T>>& fake, double w) {
    disc_adam_.zero_grad();
    double total = 0;
    for (std::size_t i = 0; i < real.size(); ++i) {
      ad::Tape<T> tape;
      const Var<T> r = (*disc_)(to_image(ad::constant<T>(real[i])));
      const Var<T> f = (*disc_)(to_image(ad::constant<T>(fake[i])));
      const Var<T> loss = hinge_discriminator_loss(r, f);
      total += w * static_cast<double>(loss.scalar());
      tape.backward(ad::scale(loss, static_cast<T>(w)));
    }
    if (!disc_adam_.step()) disc_adam_.zero_grad();
    return total;
  }

  TokenizerConfig cfg_;
  std::uint64_t seed_;
  std::unique_ptr<TokenizerModel<T>> model_;
  std::unique_ptr<PatchDiscriminator<T>> disc_;
  ad::Adam<T> adam_;
  ad::Adam<T> disc_adam_;
  std::vector<int> image_index_;
  std::vector<std::int64_t> usage_;
  std::vector<int> idle_;
  std::size_t codebook_slot_ = 0;
  bool codebook_ready_ = false;
  std::int64_t step_ = 0;
};

}  // namespace mars::tokenizer
