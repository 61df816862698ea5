#include "mars/metrics/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "mars/ad/optim.hpp"
#include "mars/io.hpp"

namespace mars::metrics {

EmbeddingSet mel_stats_embedding(const std::vector<Eigen::MatrixXd>& log_mels) {
  require(!log_mels.empty(), "mel_stats: no inputs");
  const Eigen::Index bands = log_mels.front().rows();
  EmbeddingSet e{Eigen::MatrixXd(static_cast<Eigen::Index>(log_mels.size()), 2 * bands), "mel_stats"};
  for (std::size_t i = 0; i < log_mels.size(); ++i) {
    const auto& m = log_mels[i];
    require(m.rows() == bands && m.cols() >= 1, "mel_stats: inconsistent mel shapes");
    const Eigen::VectorXd mu = m.rowwise().mean();
    const Eigen::VectorXd sd = ((m.colwise() - mu).array().square().rowwise().mean()).sqrt();
    const auto r = static_cast<Eigen::Index>(i);
    e.values.row(r).head(bands) = mu.transpose();
    e.values.row(r).tail(bands) = sd.transpose();
  }
  return e;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& e) {
  io::ByteWriter w;
  w.put_bytes("MARSEMBD");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(e.count()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(e.dim()));
  for (Eigen::Index i = 0; i < e.count(); ++i)
    for (Eigen::Index j = 0; j < e.dim(); ++j) w.put<float>(static_cast<float>(e.values(i, j)));
  io::write_file(path, w.bytes());
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorCategory::kMissingPrerequisite, "embedding file not found: " + path.string());
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes, "embedding file");
  r.expect_magic("MARSEMBD");
  const auto n = r.get<std::uint32_t>(), d = r.get<std::uint32_t>();
  require(static_cast<std::uint64_t>(n) * d * 4 == r.remaining(), "embedding file: size does not match n x d");
  EmbeddingSet e{Eigen::MatrixXd(n, d), "external_file"};
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j) e.values(i, j) = r.get<float>();
  require(e.values.allFinite(), "embedding file: non-finite values", ErrorCategory::kNumeric);
  return e;
}

void check_compatible(const EmbeddingSet& a, const EmbeddingSet& b) {
  require(a.dim() == b.dim(), "embedding dimension disagreement: " + std::to_string(a.dim()) + " (" + a.provider +
                                  ") vs " + std::to_string(b.dim()) + " (" + b.provider + ")",
          ErrorCategory::kConfigMismatch);
}

MiniClassifier::MiniClassifier(int input_dim, int classes, const ClassifierConfig& cfg, std::uint64_t seed)
    : input_dim_(input_dim), classes_(classes), cfg_(cfg) {
  require(input_dim > 0 && classes >= 2, "mini_classifier: need a positive input dimension and >= 2 classes");
  Rng rng = Rng::derive(seed, 0xc1a5);
  fc1_ = ad::Linear<double>("clf.fc1", input_dim, cfg.hidden, rng);
  fc2_ = ad::Linear<double>("clf.fc2", cfg.hidden, cfg.embedding, rng);
  out_ = ad::Linear<double>("clf.out", cfg.embedding, classes, rng);
  mean_ = Eigen::RowVectorXd::Zero(input_dim);
  inv_std_ = Eigen::RowVectorXd::Ones(input_dim);
}

ad::Var<double> MiniClassifier::hidden(const Eigen::MatrixXd& features) const {
  require(features.cols() == input_dim_, "mini_classifier: feature dimension mismatch", ErrorCategory::kConfigMismatch);
  const Eigen::MatrixXd x = ((features.rowwise() - mean_).array().rowwise() * inv_std_.array()).matrix();
  const ad::Var<double> h = ad::gelu(fc1_(ad::constant<double>(x)));
  return ad::tanh(fc2_(h));
}

double MiniClassifier::fit(const Eigen::MatrixXd& features, const std::vector<int>& labels) {
  require(features.rows() >= 2 && static_cast<std::size_t>(features.rows()) == labels.size(),
          "mini_classifier: need one label per row and at least two rows");
  for (int y : labels) require(y >= 0 && y < classes_, "mini_classifier: label out of range");
  mean_ = features.colwise().mean();
  const Eigen::RowVectorXd sd = ((features.rowwise() - mean_).array().square().colwise().mean()).sqrt();
  // Near-constant features (silent bands) would otherwise blow up inputs
  // that differ from the training material.
  const double floor = std::max(1e-2 * sd.maxCoeff(), 1e-12);
  inv_std_ = sd.array().max(floor).inverse();
  ad::ParameterList<double> params;
  fc1_.collect(params);
  fc2_.collect(params);
  out_.collect(params);
  ad::Adam<double> opt(params, {cfg_.learning_rate, 0.9, 0.999, 1e-8});
  double loss = 0;
  for (int s = 0; s < cfg_.steps; ++s) {
    opt.zero_grad();
    ad::Tape<double> tape;
    const ad::Var<double> l = ad::cross_entropy(out_(hidden(features)), std::span<const int>(labels));
    loss = l.scalar();
    tape.backward(l);
    opt.step();
  }
  return loss;
}

EmbeddingSet MiniClassifier::embed(const Eigen::MatrixXd& features) const {
  return {hidden(features).value(), "mini_classifier"};
}

Eigen::MatrixXd MiniClassifier::probabilities(const Eigen::MatrixXd& features) const {
  return ad::softmax(out_(hidden(features))).value();
}

double MiniClassifier::accuracy(const Eigen::MatrixXd& features, const std::vector<int>& labels) const {
  const Eigen::MatrixXd p = probabilities(features);
  int hits = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index arg = 0;
    p.row(i).maxCoeff(&arg);
    hits += arg == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(p.rows());
}

}  // namespace mars::metrics
