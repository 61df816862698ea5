#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mars/ad/var.hpp"

namespace mars::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Non-trainable
/// parameters are carried along untouched.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(ParameterList<T> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(Matrix<T>::Zero(p->value().rows(), p->value().cols()));
      v_.push_back(Matrix<T>::Zero(p->value().rows(), p->value().cols()));
    }
  }

  /// Applies one update from the accumulated gradients. Returns false, and
  /// leaves everything untouched, when any gradient is non-finite.
  bool step() {
    for (auto* p : params_)
      if (p->trainable && p->var.has_grad() && !p->var.grad().allFinite()) return false;
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T lr_t = static_cast<T>(cfg_.lr / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      if (!p->trainable || !p->var.has_grad()) continue;
      const Matrix<T>& g = p->var.grad();
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseProduct(g);
      p->mutable_value().array() -= lr_t * m_[i].array() / ((v_[i].array() * inv_bc2).sqrt() + eps);
    }
    return true;
  }

  void zero_grad() { zero_grads(params_); }

  std::int64_t steps() const { return step_; }
  void set_steps(std::int64_t s) { step_ = s; }
  AdamConfig& config() { return cfg_; }
  const ParameterList<T>& params() const { return params_; }
  std::vector<Matrix<T>>& first_moments() { return m_; }
  std::vector<Matrix<T>>& second_moments() { return v_; }

  /// Clears the moments of row `row` of parameter `index` (used when a
  /// codebook entry is re-seeded).
  void reset_row(std::size_t index, Eigen::Index row) {
    m_[index].row(row).setZero();
    v_[index].row(row).setZero();
  }

 private:
  ParameterList<T> params_;
  AdamConfig cfg_;
  std::vector<Matrix<T>> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace mars::ad
