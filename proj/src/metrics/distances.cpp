#include "mars/metrics/distances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "mars/error.hpp"
#include "mars/random.hpp"

namespace mars::metrics {

GaussianStats gaussian_stats(const Eigen::MatrixXd& x) {
  require(x.rows() >= 2, "gaussian_stats: need at least two samples");
  require(x.allFinite(), "gaussian_stats: non-finite embeddings", ErrorCategory::kNumeric);
  GaussianStats g;
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - g.mean.transpose();
  g.covariance = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
  g.covariance = 0.5 * (g.covariance + g.covariance.transpose()).eval();
  return g;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  require(a.rows() == a.cols(), "psd_sqrt: matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale, "psd_sqrt: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  require(es.info() == Eigen::Success, "psd_sqrt: eigendecomposition failed", ErrorCategory::kNumeric);
  Eigen::VectorXd ev = es.eigenvalues();
  require(ev.minCoeff() >= -1e-8 * scale, "psd_sqrt: matrix has a negative eigenvalue", ErrorCategory::kNumeric);
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& v = es.eigenvectors();
  Eigen::MatrixXd s = v * ev.asDiagonal() * v.transpose();
  return 0.5 * (s + s.transpose());
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  require(a.mean.size() == b.mean.size() && a.covariance.rows() == b.covariance.rows(),
          "frechet_distance: dimension mismatch");
  if (a.mean == b.mean && a.covariance == b.covariance) return 0.0;
  const Eigen::MatrixXd ra = psd_sqrt(a.covariance);
  Eigen::MatrixXd inner = ra * b.covariance * ra;
  inner = 0.5 * (inner + inner.transpose()).eval();
  const double cross = psd_sqrt(inner).trace();
  const double d = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
  return std::max(d, 0.0);
}

namespace {

// Mean kernel value over pairs of distinct samples, i.e. skipping pairs
// whose rows are identical (the i == j pairs when a and b are one set).
double kernel_mean(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double inv_d = 1.0 / static_cast<double>(a.cols());
  double total = 0;
  std::int64_t pairs = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      if (a.row(i) == b.row(j)) continue;
      const double t = a.row(i).dot(b.row(j)) * inv_d + 1.0;
      total += t * t * t;
      ++pairs;
    }
  require(pairs > 0, "kid: every pair of samples is identical", ErrorCategory::kNumeric);
  return total / static_cast<double>(pairs);
}

}  // namespace

double kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require(a.cols() == b.cols(), "kid: embedding dimension mismatch");
  require(a.rows() >= 2 && b.rows() >= 2, "kid: need at least two samples per set");
  if (a.rows() == b.rows() && a == b) return 0.0;
  return kernel_mean(a, a) + kernel_mean(b, b) - 2.0 * kernel_mean(a, b);
}

Eigen::MatrixXd kmeans(const Eigen::MatrixXd& input, int k, std::uint64_t seed, int max_iterations) {
  require(k >= 1 && input.rows() >= k, "kmeans: need at least k points");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(input.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index p, Eigen::Index q) {
    for (Eigen::Index j = 0; j < input.cols(); ++j)
      if (input(p, j) != input(q, j)) return input(p, j) < input(q, j);
    return false;
  });
  Eigen::MatrixXd x(input.rows(), input.cols());
  for (std::size_t i = 0; i < order.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = input.row(order[i]);

  const Eigen::Index n = x.rows();
  Rng rng = Rng::derive(seed, 0x6b6d);
  Eigen::MatrixXd c(k, x.cols());
  c.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (x.row(i) - c.row(0)).squaredNorm();
  for (int m = 1; m < k; ++m) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2(pick);
        if (u < 0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    c.row(m) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (x.row(i) - c.row(m)).squaredNorm());
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (c.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        assign[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      ++count[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int m = 0; m < k; ++m)
      if (count[static_cast<std::size_t>(m)] > 0) c.row(m) = sum.row(m) / count[static_cast<std::size_t>(m)];
  }
  return c;
}

double normal_upper_quantile(double p) {
  require(p > 0 && p < 1, "normal_upper_quantile: p must lie in (0, 1)");
  double lo = -40, hi = 40;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

NdbResult ndb(const Eigen::MatrixXd& train, const Eigen::MatrixXd& eval, int k, double alpha, std::uint64_t seed) {
  require(k >= 2, "ndb: need at least two bins");
  require(eval.rows() >= 1, "ndb: empty evaluation set");
  require(train.rows() >= k, "ndb: training set smaller than the bin count");
  require(train.cols() == eval.cols(), "ndb: embedding dimension mismatch");
  require(alpha > 0 && alpha < 1, "ndb: alpha must lie in (0, 1)");
  const Eigen::MatrixXd c = kmeans(train, k, seed);
  NdbResult r;
  r.bins = k;
  r.train_counts.assign(static_cast<std::size_t>(k), 0);
  r.eval_counts.assign(static_cast<std::size_t>(k), 0);
  auto nearest = [&](const auto& row) {
    Eigen::Index best = 0;
    (c.rowwise() - row).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<std::size_t>(best);
  };
  for (Eigen::Index i = 0; i < train.rows(); ++i) ++r.train_counts[nearest(train.row(i))];
  for (Eigen::Index i = 0; i < eval.rows(); ++i) ++r.eval_counts[nearest(eval.row(i))];
  const double n1 = static_cast<double>(train.rows()), n2 = static_cast<double>(eval.rows());
  const double threshold = normal_upper_quantile(alpha / 2.0);
  for (int b = 0; b < k; ++b) {
    const double c1 = r.train_counts[static_cast<std::size_t>(b)], c2 = r.eval_counts[static_cast<std::size_t>(b)];
    const double p1 = c1 / n1, p2 = c2 / n2, p = (c1 + c2) / (n1 + n2);
    const double se = std::sqrt(p * (1 - p) * (1 / n1 + 1 / n2));
    const double z = se > 0 ? (p1 - p2) / se : 0.0;
    r.z.push_back(z);
    if (std::abs(z) > threshold) ++r.different;
  }
  r.ndb_over_k = static_cast<double>(r.different) / k;
  return r;
}

double inception_score(const Eigen::MatrixXd& p) {
  require(p.rows() >= 1 && p.cols() >= 1, "inception_score: empty probability matrix");
  require((p.array() >= 0).all() && p.allFinite(), "inception_score: probabilities must be finite and non-negative");
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    require(std::abs(p.row(i).sum() - 1.0) <= 1e-6, "inception_score: row " + std::to_string(i) + " does not sum to 1");
  const Eigen::RowVectorXd marginal = p.colwise().mean();
  double kl = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (p(i, j) > 0) kl += p(i, j) * (std::log(p(i, j)) - std::log(marginal(j)));
  return std::exp(kl / static_cast<double>(p.rows()));
}

SpectroError spectro_error(const std::vector<Eigen::MatrixXd>& ref, const std::vector<Eigen::MatrixXd>& est) {
  require(!ref.empty() && ref.size() == est.size(), "spectro_error: sets must be non-empty and paired");
  SpectroError e;
  double n = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    require(ref[i].rows() == est[i].rows() && ref[i].cols() == est[i].cols(),
            "spectro_error: shape mismatch at pair " + std::to_string(i));
    const Eigen::ArrayXXd d = ref[i].array() - est[i].array();
    e.mse += d.square().sum();
    e.mae += d.abs().sum();
    n += static_cast<double>(d.size());
  }
  e.mse /= n;
  e.mae /= n;
  return e;
}

NearestNeighborError nearest_neighbor_error(const std::vector<Eigen::MatrixXd>& generated,
                                            const std::vector<Eigen::MatrixXd>& test_set) {
  require(!generated.empty() && !test_set.empty(), "nearest_neighbor_error: empty inputs");
  NearestNeighborError r;
  double n = 0;
  for (const auto& g : generated) {
    int best = -1;
    double best_mse = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < test_set.size(); ++j) {
      require(test_set[j].rows() == g.rows() && test_set[j].cols() == g.cols(), "nearest_neighbor_error: shape mismatch");
      const double m = (g - test_set[j]).squaredNorm() / static_cast<double>(g.size());
      if (m < best_mse) {
        best_mse = m;
        best = static_cast<int>(j);
      }
    }
    r.matches.push_back(best);
    const Eigen::ArrayXXd d = g.array() - test_set[static_cast<std::size_t>(best)].array();
    r.mse += d.square().sum();
    r.mae += d.abs().sum();
    n += static_cast<double>(d.size());
  }
  r.mse /= n;
  r.mae /= n;
  return r;
}

}  // namespace mars::metrics
