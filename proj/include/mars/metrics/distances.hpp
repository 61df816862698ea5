#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace mars::metrics {

/// n x d embeddings plus the tag of the provider that produced them.
struct EmbeddingSet {
  Eigen::MatrixXd values;
  std::string provider;

  Eigen::Index count() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Sample mean and unbiased (n - 1) covariance, symmetrised.
GaussianStats gaussian_stats(const Eigen::MatrixXd& x);

/// Symmetric PSD square root; eigenvalues down to -1e-8 are clamped to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a);

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), clamped at 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Unbiased squared MMD with k(x, y) = (x.y / d + 1)^3. Every term skips
/// pairs of identical samples: the diagonals within a set, and in the cross
/// term any sample shared by both sets. Identical sets score exactly 0.
double kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct NdbResult {
  int bins = 0;
  int different = 0;
  double ndb_over_k = 0;
  std::vector<int> train_counts;
  std::vector<int> eval_counts;
  std::vector<double> z;
};

/// Number of statistically different bins: k-means (k-means++ seeding,
/// at most 100 Lloyd iterations) on the training set, then a two-sided
/// two-proportion z-test per bin at level alpha.
NdbResult ndb(const Eigen::MatrixXd& train, const Eigen::MatrixXd& eval, int k, double alpha = 0.05,
              std::uint64_t seed = 0);

/// Centroids from k-means++ seeding and Lloyd iterations; rows are visited
/// in lexicographic order so the result ignores input order.
Eigen::MatrixXd kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int max_iterations = 100);

/// exp(mean_i KL(p_i || mean_j p_j)) for a row-stochastic matrix.
double inception_score(const Eigen::MatrixXd& probabilities);

struct SpectroError {
  double mse = 0;
  double mae = 0;
};

/// Element-wise errors averaged over every element of every pair.
SpectroError spectro_error(const std::vector<Eigen::MatrixXd>& reference, const std::vector<Eigen::MatrixXd>& estimate);

struct NearestNeighborError {
  double mse = 0;
  double mae = 0;
  std::vector<int> matches;
};

/// For each generated mel, the test mel of least MSE (lowest index on ties).
NearestNeighborError nearest_neighbor_error(const std::vector<Eigen::MatrixXd>& generated,
                                            const std::vector<Eigen::MatrixXd>& test_set);

/// Upper standard normal quantile: z with P(Z > z) = p.
double normal_upper_quantile(double p);

}  // namespace mars::metrics
