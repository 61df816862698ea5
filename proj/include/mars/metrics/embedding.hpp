#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "mars/ad/layers.hpp"
#include "mars/metrics/distances.hpp"

namespace mars::metrics {

/// Per-band mean and standard deviation over time of each log-mel matrix.
EmbeddingSet mel_stats_embedding(const std::vector<Eigen::MatrixXd>& log_mels);

/// "MARSEMBD" | u32 n | u32 d | f32 row-major values.
void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& e);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

/// Throws unless both sets share a dimension.
void check_compatible(const EmbeddingSet& a, const EmbeddingSet& b);

struct ClassifierConfig {
  int hidden = 32;
  int embedding = 16;
  int steps = 300;
  double learning_rate = 1e-2;
};

/// Small MLP (standardise -> gelu hidden -> tanh embedding -> classes) trained
/// full-batch in-repo; its penultimate activations and class posteriors
/// stand in for the pretrained embedders.
class MiniClassifier {
 public:
  MiniClassifier(int input_dim, int classes, const ClassifierConfig& cfg, std::uint64_t seed);

  /// Returns the final training cross-entropy.
  double fit(const Eigen::MatrixXd& features, const std::vector<int>& labels);

  EmbeddingSet embed(const Eigen::MatrixXd& features) const;
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& features) const;
  double accuracy(const Eigen::MatrixXd& features, const std::vector<int>& labels) const;
  int classes() const { return classes_; }

 private:
  ad::Var<double> hidden(const Eigen::MatrixXd& features) const;

  int input_dim_, classes_;
  ClassifierConfig cfg_;
  Eigen::RowVectorXd mean_, inv_std_;
  ad::Linear<double> fc1_, fc2_, out_;
};

}  // namespace mars::metrics
