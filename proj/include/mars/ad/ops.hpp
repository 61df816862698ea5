#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mars/ad/var.hpp"

namespace mars::ad {

namespace detail {

template <typename T>
void accumulate(Node<T>* n, const auto& g) {
  if (n->requires_grad) n->ensure_grad().noalias() += g;
}

inline void check_same_shape(Eigen::Index r1, Eigen::Index c1, Eigen::Index r2, Eigen::Index c2,
                             const char* op) {
  require(r1 == r2 && c1 == c2, std::string(op) + ": shape mismatch (" + std::to_string(r1) + "x" +
                                    std::to_string(c1) + " vs " + std::to_string(r2) + "x" +
                                    std::to_string(c2) + ")");
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "add");
  auto na = a.shared(), nb = b.shared();
  return make_result<T>(a.value() + b.value(), {na, nb}, [na, nb](Node<T>& self) {
    detail::accumulate(na.get(), self.grad);
    detail::accumulate(nb.get(), self.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "sub");
  auto na = a.shared(), nb = b.shared();
  return make_result<T>(a.value() - b.value(), {na, nb}, [na, nb](Node<T>& self) {
    detail::accumulate(na.get(), self.grad);
    detail::accumulate(nb.get(), -self.grad);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "mul");
  auto na = a.shared(), nb = b.shared();
  return make_result<T>(a.value().cwiseProduct(b.value()), {na, nb}, [na, nb](Node<T>& self) {
    detail::accumulate(na.get(), self.grad.cwiseProduct(nb->value));
    detail::accumulate(nb.get(), self.grad.cwiseProduct(na->value));
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  auto na = a.shared();
  return make_result<T>(a.value() * s, {na}, [na, s](Node<T>& self) { detail::accumulate(na.get(), self.grad * s); });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  auto na = a.shared();
  return make_result<T>((a.value().array() + s).matrix(), {na},
                        [na](Node<T>& self) { detail::accumulate(na.get(), self.grad); });
}

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T>
Var<T> operator*(const Var<T>& a, T s) { return scale(a, s); }

/// x (n x d) plus a broadcast row vector (1 x d).
template <typename T>
Var<T> add_row(const Var<T>& x, const Var<T>& row) {
  require(row.rows() == 1 && row.cols() == x.cols(), "add_row: expected a 1 x cols row vector");
  auto nx = x.shared(), nr = row.shared();
  Matrix<T> y = x.value();
  y.rowwise() += row.value().row(0);
  return make_result<T>(std::move(y), {nx, nr}, [nx, nr](Node<T>& self) {
    detail::accumulate(nx.get(), self.grad);
    detail::accumulate(nr.get(), self.grad.colwise().sum());
  });
}

/// Identity forward, zero gradient.
template <typename T>
Var<T> detach(const Var<T>& x) {
  return constant<T>(x.value());
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  auto nx = x.shared();
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  Matrix<T> y = x.value().unaryExpr([inv_sqrt2](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); });
  return make_result<T>(std::move(y), {nx}, [nx, inv_sqrt2](Node<T>& self) {
    const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    Matrix<T> d = nx->value.unaryExpr([&](T v) {
      return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-T(0.5) * v * v);
    });
    detail::accumulate(nx.get(), self.grad.cwiseProduct(d));
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2)) {
  auto nx = x.shared();
  Matrix<T> y = x.value().unaryExpr([slope](T v) { return v > T(0) ? v : slope * v; });
  return make_result<T>(std::move(y), {nx}, [nx, slope](Node<T>& self) {
    Matrix<T> d = nx->value.unaryExpr([slope](T v) { return v > T(0) ? T(1) : slope; });
    detail::accumulate(nx.get(), self.grad.cwiseProduct(d));
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu(x, T(0));
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  auto nx = x.shared();
  Matrix<T> y = x.value().array().tanh().matrix();
  return make_result<T>(y, {nx}, [nx, y](Node<T>& self) {
    detail::accumulate(nx.get(), self.grad.cwiseProduct((T(1) - y.array().square()).matrix()));
  });
}

/// log(1 + exp(x)), evaluated stably.
template <typename T>
Var<T> softplus(const Var<T>& x) {
  auto nx = x.shared();
  Matrix<T> y = x.value().unaryExpr([](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); });
  return make_result<T>(std::move(y), {nx}, [nx](Node<T>& self) {
    Matrix<T> d = nx->value.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
    detail::accumulate(nx.get(), self.grad.cwiseProduct(d));
  });
}

// ---------------------------------------------------------------- reductions

template <typename T>
Var<T> sum(const Var<T>& x) {
  auto nx = x.shared();
  Matrix<T> y(1, 1);
  y(0, 0) = x.value().sum();
  return make_result<T>(std::move(y), {nx}, [nx](Node<T>& self) {
    detail::accumulate(nx.get(), Matrix<T>::Constant(nx->value.rows(), nx->value.cols(), self.grad(0, 0)));
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

/// Mean of (a - b)^2 over all elements.
template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "mse");
  auto na = a.shared(), nb = b.shared();
  const T n = static_cast<T>(a.value().size());
  Matrix<T> y(1, 1);
  y(0, 0) = (a.value() - b.value()).squaredNorm() / n;
  return make_result<T>(std::move(y), {na, nb}, [na, nb, n](Node<T>& self) {
    const Matrix<T> d = (na->value - nb->value) * (T(2) * self.grad(0, 0) / n);
    detail::accumulate(na.get(), d);
    detail::accumulate(nb.get(), -d);
  });
}

// ---------------------------------------------------------------- linear algebra

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
  auto na = a.shared(), nb = b.shared();
  Matrix<T> y(a.rows(), b.cols());
  y.noalias() = a.value() * b.value();
  return make_result<T>(std::move(y), {na, nb}, [na, nb](Node<T>& self) {
    if (na->requires_grad) na->ensure_grad().noalias() += self.grad * nb->value.transpose();
    if (nb->requires_grad) nb->ensure_grad().noalias() += na->value.transpose() * self.grad;
  });
}

/// y = x W + b with W (in x out) and b (1 x out).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& W, const Var<T>& b) {
  require(x.cols() == W.rows(), "linear: input width " + std::to_string(x.cols()) + " does not match weight rows " +
                                    std::to_string(W.rows()));
  require(b.rows() == 1 && b.cols() == W.cols(), "linear: bias must be 1 x out");
  auto nx = x.shared(), nw = W.shared(), nb = b.shared();
  Matrix<T> y(x.rows(), W.cols());
  y.noalias() = x.value() * W.value();
  y.rowwise() += b.value().row(0);
  return make_result<T>(std::move(y), {nx, nw, nb}, [nx, nw, nb](Node<T>& self) {
    if (nx->requires_grad) nx->ensure_grad().noalias() += self.grad * nw->value.transpose();
    if (nw->requires_grad) nw->ensure_grad().noalias() += nx->value.transpose() * self.grad;
    if (nb->requires_grad) nb->ensure_grad().noalias() += self.grad.colwise().sum();
  });
}

/// R x for a constant matrix R (resampling, pooling).
template <typename T>
Var<T> left_apply(const Matrix<T>& R, const Var<T>& x) {
  require(R.cols() == x.rows(), "left_apply: dimension mismatch");
  auto nx = x.shared();
  Matrix<T> y(R.rows(), x.cols());
  y.noalias() = R * x.value();
  return make_result<T>(std::move(y), {nx}, [nx, R](Node<T>& self) {
    if (nx->requires_grad) nx->ensure_grad().noalias() += R.transpose() * self.grad;
  });
}

template <typename T>
Var<T> transpose(const Var<T>& x) {
  auto nx = x.shared();
  return make_result<T>(x.value().transpose(), {nx},
                        [nx](Node<T>& self) { detail::accumulate(nx.get(), self.grad.transpose()); });
}

// ---------------------------------------------------------------- structure

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
    nodes.push_back(p.shared());
  }
  Matrix<T> y(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  auto ins = nodes;
  return make_result<T>(std::move(y), std::move(nodes), [ins](Node<T>& self) {
    Eigen::Index off = 0;
    for (const auto& n : ins) {
      detail::accumulate(n.get(), self.grad.middleRows(off, n->value.rows()));
      off += n->value.rows();
    }
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= x.rows(), "slice_rows: range out of bounds");
  auto nx = x.shared();
  return make_result<T>(x.value().middleRows(start, count), {nx}, [nx, start, count](Node<T>& self) {
    if (nx->requires_grad) nx->ensure_grad().middleRows(start, count) += self.grad;
  });
}

/// Rows of `table` selected by `indices`.
template <typename T>
Var<T> embedding_lookup(const Var<T>& table, std::span<const int> indices) {
  const Eigen::Index V = table.rows();
  Matrix<T> y(static_cast<Eigen::Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < V, "embedding_lookup: index " + std::to_string(indices[i]) +
                                                   " out of range [0, " + std::to_string(V) + ")");
    y.row(static_cast<Eigen::Index>(i)) = table.value().row(indices[i]);
  }
  auto nt = table.shared();
  std::vector<int> idx(indices.begin(), indices.end());
  return make_result<T>(std::move(y), {nt}, [nt, idx = std::move(idx)](Node<T>& self) {
    if (!nt->requires_grad) return;
    auto& g = nt->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

/// Reshapes x to (rows x cols) taking element i (row-major) from
/// x's element src[i]; a permutation when src is one.
template <typename T>
Var<T> gather(const Var<T>& x, Eigen::Index rows, Eigen::Index cols, std::vector<int> src) {
  require(static_cast<Eigen::Index>(src.size()) == rows * cols, "gather: index count must equal rows*cols");
  Matrix<T> y(rows, cols);
  const Eigen::Index n = x.value().size();
  for (std::size_t i = 0; i < src.size(); ++i) {
    require(src[i] >= 0 && src[i] < n, "gather: source index out of range");
    y.data()[i] = x.value().data()[src[i]];
  }
  auto nx = x.shared();
  return make_result<T>(std::move(y), {nx}, [nx, src = std::move(src)](Node<T>& self) {
    if (!nx->requires_grad) return;
    auto& g = nx->ensure_grad();
    for (std::size_t i = 0; i < src.size(); ++i) g.data()[src[i]] += self.grad.data()[i];
  });
}

// ---------------------------------------------------------------- normalisation

template <typename T>
Var<T> softmax(const Var<T>& x, int axis = 1) {
  if (axis == 0) return transpose(softmax(transpose(x), 1));
  require(axis == 1, "softmax: axis must be 0 or 1");
  auto nx = x.shared();
  Matrix<T> y = x.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const T m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return make_result<T>(std::move(y), {nx}, [nx](Node<T>& self) {
    const Matrix<T>& p = self.value;
    Matrix<T> d = self.grad.cwiseProduct(p);
    const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = d.rowwise().sum();
    d -= p.cwiseProduct(dot.replicate(1, p.cols()));
    detail::accumulate(nx.get(), d);
  });
}

/// Row-wise layer normalisation with affine gamma, beta (1 x d).
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  const Eigen::Index d = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == d && beta.rows() == 1 && beta.cols() == d,
          "layer_norm: gamma/beta must be 1 x d");
  auto nx = x.shared(), ng = gamma.shared(), nb = beta.shared();
  Matrix<T> xhat(x.rows(), d);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mu = x.value().row(r).mean();
    const T var = (x.value().row(r).array() - mu).square().mean();
    inv_std[r] = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mu) * inv_std[r];
  }
  Matrix<T> y = xhat.array().rowwise() * gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  return make_result<T>(std::move(y), {nx, ng, nb},
                        [nx, ng, nb, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
                          if (ng->requires_grad) ng->ensure_grad() += self.grad.cwiseProduct(xhat).colwise().sum();
                          if (nb->requires_grad) nb->ensure_grad() += self.grad.colwise().sum();
                          if (!nx->requires_grad) return;
                          const Matrix<T> gx = self.grad.array().rowwise() * ng->value.row(0).array();
                          auto& out = nx->ensure_grad();
                          for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                            const T m1 = gx.row(r).mean();
                            const T m2 = gx.row(r).cwiseProduct(xhat.row(r)).mean();
                            out.row(r).array() +=
                                inv_std[r] * (gx.row(r).array() - m1 - xhat.row(r).array() * m2);
                          }
                        });
}

// ---------------------------------------------------------------- losses

/// Mean over rows of -log softmax(logits)[target].
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const int> targets) {
  const Eigen::Index n = logits.rows(), V = logits.cols();
  require(static_cast<Eigen::Index>(targets.size()) == n, "cross_entropy: one target per row required");
  require(n > 0, "cross_entropy: empty batch");
  Matrix<T> probs(n, V);
  T total = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    require(t >= 0 && t < V, "cross_entropy: target " + std::to_string(t) + " out of range [0, " +
                                 std::to_string(V) + ")");
    const T m = logits.value().row(r).maxCoeff();
    probs.row(r) = (logits.value().row(r).array() - m).exp().matrix();
    const T z = probs.row(r).sum();
    probs.row(r) /= z;
    total += m + std::log(z) - logits.value()(r, t);
  }
  Matrix<T> y(1, 1);
  y(0, 0) = total / static_cast<T>(n);
  auto nl = logits.shared();
  std::vector<int> tg(targets.begin(), targets.end());
  return make_result<T>(std::move(y), {nl}, [nl, probs = std::move(probs), tg = std::move(tg)](Node<T>& self) {
    if (!nl->requires_grad) return;
    Matrix<T> d = probs;
    for (std::size_t r = 0; r < tg.size(); ++r) d(static_cast<Eigen::Index>(r), tg[r]) -= T(1);
    nl->ensure_grad() += d * (self.grad(0, 0) / static_cast<T>(tg.size()));
  });
}

// ---------------------------------------------------------------- attention

/// Allow-mask (1 = may attend) of shape queries x keys; empty means all allowed.
using AttentionMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multi-head scaled dot-product attention on pre-projected q (n x D),
/// k, v (m x D). Forbidden positions get exactly zero weight.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, const AttentionMask& mask, int heads) {
  const Eigen::Index n = q.rows(), m = k.rows(), D = q.cols();
  require(heads > 0 && D % heads == 0, "attention: width must be divisible by heads");
  require(k.cols() == D && v.cols() == D && v.rows() == m, "attention: q/k/v shape mismatch");
  const bool masked = mask.size() > 0;
  if (masked) {
    require(mask.rows() == n && mask.cols() == m, "attention: mask shape must be queries x keys");
    for (Eigen::Index i = 0; i < n; ++i)
      require(mask.row(i).any(), "attention: mask forbids every key for query " + std::to_string(i));
  }
  const Eigen::Index dh = D / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));

  auto probs = std::make_shared<std::vector<Matrix<T>>>(heads);
  Matrix<T> out(n, D);
  for (int h = 0; h < heads; ++h) {
    Matrix<T> s(n, m);
    s.noalias() = q.value().middleCols(h * dh, dh) * k.value().middleCols(h * dh, dh).transpose();
    s *= sc;
    for (Eigen::Index i = 0; i < n; ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (Eigen::Index j = 0; j < m; ++j)
        if (!masked || mask(i, j)) mx = std::max(mx, s(i, j));
      T z = 0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const T e = (!masked || mask(i, j)) ? std::exp(s(i, j) - mx) : T(0);
        s(i, j) = e;
        z += e;
      }
      s.row(i) /= z;
    }
    out.middleCols(h * dh, dh).noalias() = s * v.value().middleCols(h * dh, dh);
    (*probs)[h] = std::move(s);
  }

  auto nq = q.shared(), nk = k.shared(), nv = v.shared();
  return make_result<T>(std::move(out), {nq, nk, nv}, [nq, nk, nv, probs, heads, dh, sc](Node<T>& self) {
    for (int h = 0; h < heads; ++h) {
      const Matrix<T>& p = (*probs)[h];
      const auto go = self.grad.middleCols(h * dh, dh);
      if (nv->requires_grad) nv->ensure_grad().middleCols(h * dh, dh).noalias() += p.transpose() * go;
      if (!nq->requires_grad && !nk->requires_grad) continue;
      Matrix<T> dp(p.rows(), p.cols());
      dp.noalias() = go * nv->value.middleCols(h * dh, dh).transpose();
      const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = dp.cwiseProduct(p).rowwise().sum();
      Matrix<T> ds = p.cwiseProduct(dp - dot.replicate(1, p.cols()));
      ds *= sc;
      if (nq->requires_grad) nq->ensure_grad().middleCols(h * dh, dh).noalias() += ds * nk->value.middleCols(h * dh, dh);
      if (nk->requires_grad)
        nk->ensure_grad().middleCols(h * dh, dh).noalias() += ds.transpose() * nq->value.middleCols(h * dh, dh);
    }
  });
}

// ---------------------------------------------------------------- convolution

struct ConvShape {
  int in_channels = 1;
  int height = 1;
  int width = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;

  int out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
};

/// 2-D convolution on x laid out as (in_channels x height*width). K is
/// (out_channels x in_channels*kernel*kernel), bias (out_channels x 1).
/// Output is (out_channels x out_h*out_w).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& K, const Var<T>& bias, const ConvShape& s) {
  require(s.kernel > 0 && s.stride > 0 && s.padding >= 0, "conv2d: invalid geometry");
  require(x.rows() == s.in_channels && x.cols() == Eigen::Index(s.height) * s.width,
          "conv2d: input does not match declared shape");
  const int kk = s.kernel * s.kernel;
  require(K.cols() == Eigen::Index(s.in_channels) * kk, "conv2d: kernel width must be in_channels*k*k");
  require(bias.rows() == K.rows() && bias.cols() == 1, "conv2d: bias must be out_channels x 1");
  const int oh = s.out_height(), ow = s.out_width();
  require(oh > 0 && ow > 0, "conv2d: output would be empty");

  // im2col: (in*k*k) x (oh*ow)
  Matrix<T> cols = Matrix<T>::Zero(Eigen::Index(s.in_channels) * kk, Eigen::Index(oh) * ow);
  for (int c = 0; c < s.in_channels; ++c)
    for (int ki = 0; ki < s.kernel; ++ki)
      for (int kj = 0; kj < s.kernel; ++kj) {
        const Eigen::Index row = Eigen::Index(c) * kk + ki * s.kernel + kj;
        for (int i = 0; i < oh; ++i) {
          const int yi = i * s.stride + ki - s.padding;
          if (yi < 0 || yi >= s.height) continue;
          for (int j = 0; j < ow; ++j) {
            const int xj = j * s.stride + kj - s.padding;
            if (xj < 0 || xj >= s.width) continue;
            cols(row, Eigen::Index(i) * ow + j) = x.value()(c, Eigen::Index(yi) * s.width + xj);
          }
        }
      }
  Matrix<T> y(K.rows(), cols.cols());
  y.noalias() = K.value() * cols;
  y.colwise() += bias.value().col(0);

  auto nx = x.shared(), nk = K.shared(), nb = bias.shared();
  return make_result<T>(std::move(y), {nx, nk, nb}, [nx, nk, nb, cols = std::move(cols), s, oh, ow, kk](Node<T>& self) {
    if (nk->requires_grad) nk->ensure_grad().noalias() += self.grad * cols.transpose();
    if (nb->requires_grad) nb->ensure_grad() += self.grad.rowwise().sum();
    if (!nx->requires_grad) return;
    Matrix<T> dcols(cols.rows(), cols.cols());
    dcols.noalias() = nk->value.transpose() * self.grad;
    auto& gx = nx->ensure_grad();
    for (int c = 0; c < s.in_channels; ++c)
      for (int ki = 0; ki < s.kernel; ++ki)
        for (int kj = 0; kj < s.kernel; ++kj) {
          const Eigen::Index row = Eigen::Index(c) * kk + ki * s.kernel + kj;
          for (int i = 0; i < oh; ++i) {
            const int yi = i * s.stride + ki - s.padding;
            if (yi < 0 || yi >= s.height) continue;
            for (int j = 0; j < ow; ++j) {
              const int xj = j * s.stride + kj - s.padding;
              if (xj < 0 || xj >= s.width) continue;
              gx(c, Eigen::Index(yi) * s.width + xj) += dcols(row, Eigen::Index(i) * ow + j);
            }
          }
        }
  });
}

}  // namespace mars::ad
