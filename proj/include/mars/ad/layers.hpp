#pragma once

#include <cmath>
#include <string>

#include "mars/ad/ops.hpp"
#include "mars/random.hpp"

namespace mars::ad {

template <typename T>
Matrix<T> xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-a, a));
  return m;
}

template <typename T>
Matrix<T> normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(stddev * rng.normal());
  return m;
}

template <typename T>
struct Linear {
  Parameter<T> weight;
  Parameter<T> bias;

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
      : weight(name + ".weight", xavier_uniform<T>(in, out, rng)), bias(name + ".bias", Matrix<T>::Zero(1, out)) {}

  Var<T> operator()(const Var<T>& x) const { return linear(x, weight.var, bias.var); }
  void collect(ParameterList<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename T>
struct LayerNorm {
  Parameter<T> gamma;
  Parameter<T> beta;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index d)
      : gamma(name + ".gamma", Matrix<T>::Ones(1, d)), beta(name + ".beta", Matrix<T>::Zero(1, d)) {}

  Var<T> operator()(const Var<T>& x) const { return layer_norm(x, gamma.var, beta.var); }
  void collect(ParameterList<T>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

/// Projections plus attention: softmax((xq Wq)(xkv Wk)^T / sqrt(dh)) (xkv Wv) Wo.
template <typename T>
struct MultiHeadAttention {
  Linear<T> q, k, v, o;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, Eigen::Index width, int n_heads, Rng& rng)
      : q(name + ".q", width, width, rng),
        k(name + ".k", width, width, rng),
        v(name + ".v", width, width, rng),
        o(name + ".o", width, width, rng),
        heads(n_heads) {
    require(n_heads > 0 && width % n_heads == 0, "attention: width must be divisible by heads");
  }

  Var<T> operator()(const Var<T>& q_in, const Var<T>& kv_in, const AttentionMask& mask) const {
    return o(attention(q(q_in), k(kv_in), v(kv_in), mask, heads));
  }
  void collect(ParameterList<T>& out) {
    q.collect(out);
    k.collect(out);
    v.collect(out);
    o.collect(out);
  }
};

template <typename T>
struct Mlp {
  Linear<T> fc1, fc2;

  Mlp() = default;
  Mlp(const std::string& name, Eigen::Index width, Eigen::Index hidden, Rng& rng)
      : fc1(name + ".fc1", width, hidden, rng), fc2(name + ".fc2", hidden, width, rng) {}

  Var<T> operator()(const Var<T>& x) const { return fc2(gelu(fc1(x))); }
  void collect(ParameterList<T>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }
};

/// Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x)).
template <typename T>
struct TransformerBlock {
  LayerNorm<T> ln1, ln2;
  MultiHeadAttention<T> attn;
  Mlp<T> mlp;

  TransformerBlock() = default;
  TransformerBlock(const std::string& name, Eigen::Index width, int heads, Eigen::Index hidden, Rng& rng)
      : ln1(name + ".ln1", width),
        ln2(name + ".ln2", width),
        attn(name + ".attn", width, heads, rng),
        mlp(name + ".mlp", width, hidden, rng) {}

  Var<T> operator()(const Var<T>& x, const AttentionMask& mask = {}) const {
    const Var<T> h = ln1(x);
    const Var<T> y = x + attn(h, h, mask);
    return y + mlp(ln2(y));
  }
  void collect(ParameterList<T>& out) {
    ln1.collect(out);
    ln2.collect(out);
    attn.collect(out);
    mlp.collect(out);
  }
};

/// Copies values between parameter lists of identical layout (e.g. a float
/// model into its double twin for gradient checking).
template <typename From, typename To>
void copy_parameters(const ParameterList<From>& src, const ParameterList<To>& dst) {
  require(src.size() == dst.size(), "copy_parameters: parameter count mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    require(src[i]->name == dst[i]->name, "copy_parameters: name mismatch at " + src[i]->name);
    require(src[i]->value().rows() == dst[i]->value().rows() && src[i]->value().cols() == dst[i]->value().cols(),
            "copy_parameters: shape mismatch for " + src[i]->name);
    dst[i]->mutable_value() = src[i]->value().template cast<To>();
  }
}

}  // namespace mars::ad
