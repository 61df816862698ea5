#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mars/error.hpp"

/// Reverse-mode differentiation over row-major dense matrices.
///
/// Operations record themselves on the thread's active Tape only when at
/// least one input requires a gradient. With no tape active, every op is a
/// plain forward evaluation.
namespace mars::ad {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Process-wide accounting of bytes held by graph nodes (values + grads).
class MemoryMeter {
 public:
  static void add(std::int64_t bytes) {
    const auto now = live_.fetch_add(bytes) + bytes;
    auto peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
  }
  static void sub(std::int64_t bytes) { live_.fetch_sub(bytes); }
  static std::int64_t live() { return live_.load(); }
  static std::int64_t peak() { return peak_.load(); }
  static void reset_peak() { peak_.store(live_.load()); }

 private:
  static inline std::atomic<std::int64_t> live_{0};
  static inline std::atomic<std::int64_t> peak_{0};
};

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  std::function<void(Node&)> backward;
  std::vector<std::shared_ptr<Node>> inputs;
  std::int64_t accounted = 0;

  explicit Node(Matrix<T> v, bool rg = false) : value(std::move(v)), requires_grad(rg) {
    account();
  }
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  ~Node() { MemoryMeter::sub(accounted); }

  Matrix<T>& ensure_grad() {
    if (grad.size() != value.size()) {
      grad = Matrix<T>::Zero(value.rows(), value.cols());
      account();
    }
    return grad;
  }

  void account() {
    const std::int64_t now = static_cast<std::int64_t>((value.size() + grad.size()) * sizeof(T));
    MemoryMeter::add(now - accounted);
    accounted = now;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Matrix<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>(std::move(value), requires_grad)) {}
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  /// Gradient; a zero matrix until something flows into it.
  Matrix<T>& grad() const { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad() const {
    if (has_grad()) node_->grad.setZero();
  }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  T scalar() const { return node_->value(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Records differentiable operations; installs itself as the thread's
/// active tape for its lifetime.
template <typename T>
class Tape {
 public:
  Tape() : previous_(current_) { current_ = this; }
  ~Tape() { current_ = previous_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return current_; }

  void record(std::shared_ptr<Node<T>> n) { nodes_.push_back(std::move(n)); }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates in reverse recording order.
  void backward(const Var<T>& loss) {
    require(loss.rows() == 1 && loss.cols() == 1, "backward: loss must be a scalar");
    loss.grad().setConstant(T(1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.backward && n.grad.size() == n.value.size()) n.backward(n);
    }
  }

 private:
  static inline thread_local Tape* current_ = nullptr;
  Tape* previous_;
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

/// Builds an op result. `backward` runs only when the result is recorded.
template <typename T>
Var<T> make_result(Matrix<T> value, std::vector<std::shared_ptr<Node<T>>> inputs,
                   std::function<void(Node<T>&)> backward) {
  Tape<T>* tape = Tape<T>::active();
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in->requires_grad;
  auto node = std::make_shared<Node<T>>(std::move(value), needs && tape != nullptr);
  if (node->requires_grad) {
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    tape->record(node);
  }
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> constant(Matrix<T> value) {
  return Var<T>(std::move(value), false);
}

/// Named trainable leaf.
template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> value, bool train = true)
      : name(std::move(n)), var(std::move(value), train), trainable(train) {}

  const Matrix<T>& value() const { return var.value(); }
  Matrix<T>& mutable_value() { return var.mutable_value(); }
};

template <typename T>
using ParameterList = std::vector<Parameter<T>*>;

template <typename T>
void zero_grads(const ParameterList<T>& params) {
  for (auto* p : params) p->var.zero_grad();
}

/// Throws if two parameters share a name.
template <typename T>
void check_unique_names(const ParameterList<T>& params) {
  std::vector<std::string> names;
  for (auto* p : params) names.push_back(p->name);
  std::sort(names.begin(), names.end());
  for (std::size_t i = 1; i < names.size(); ++i)
    require(names[i] != names[i - 1], "duplicate parameter name '" + names[i] + "'");
}

}  // namespace mars::ad
