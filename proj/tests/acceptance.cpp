// Acceptance suite: one line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "mars/ad/gradcheck.hpp"
#include "mars/ad/layers.hpp"
#include "mars/ar/model.hpp"
#include "mars/cmx.hpp"
#include "mars/dsp/griffin_lim.hpp"
#include "mars/dsp/mel.hpp"
#include "mars/dsp/synth.hpp"
#include "mars/io.hpp"
#include "mars/metrics/distances.hpp"
#include "mars/pipeline/cache.hpp"
#include "mars/pipeline/runs.hpp"
#include "mars/tokenizer/codec.hpp"
#include "mars/tokenizer/trainer.hpp"

using namespace mars;
using ad::Matrix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix<double> rnd(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

template <typename T>
ad::Var<T> weighted_sum(const ad::Var<T>& x, const Matrix<double>& w) {
  return ad::sum(ad::mul(x, ad::constant<T>(w.cast<T>())));
}

tokenizer::MultiScaleTokenMap random_map(const tokenizer::Schedule& s, int vocab, Rng& rng) {
  tokenizer::MultiScaleTokenMap t;
  t.schedule = s;
  for (int k : s) {
    std::vector<int> g(static_cast<std::size_t>(k * k));
    for (auto& v : g) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab)));
    t.grids.push_back(std::move(g));
  }
  return t;
}

// ---------------------------------------------------------------------------

Outcome cmx_bijectivity() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const int factors[] = {1, 2, 4, 8};
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int fh = factors[rng.below(4)], fw = factors[rng.below(4)];
    const int c = 1 + static_cast<int>(rng.below(4));
    const int h = fh * (1 + static_cast<int>(rng.below(16)));
    const int w = fw * (1 + static_cast<int>(rng.below(16)));
    const cmx::Mode mode = rng.below(2) ? cmx::Mode::kBlock : cmx::Mode::kInterleave;
    const cmx::Descriptor d{c, h, w, fh, fw, mode};
    Tensor3<float> x(c, h, w);
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    const auto p = cmx::pack(x, d);
    const bool shape_ok = p.values.channels == c * fh * fw && p.values.height == h / fh && p.values.width == w / fw;
    if (!shape_ok || !(cmx::unpack(p) == x)) ++bad;
  }
  const double t = seconds_since(t0);
  return {bad == 0 && t < 10.0, fmt("1000 random cases, %d not bit-exact, %.2f s (limit 10 s)", bad, t)};
}

double snr_db(const Eigen::VectorXd& ref, const Eigen::VectorXd& est) {
  return 10.0 * std::log10(ref.squaredNorm() / std::max((ref - est).squaredNorm(), 1e-300));
}

Outcome stft_roundtrip() {
  const auto t0 = Clock::now();
  std::vector<dsp::StftConfig> configs;
  for (int n : {256, 512, 1024, 2048})
    for (int div : {1, 2, 4, 8})
      for (auto win : {dsp::WindowKind::kHann, dsp::WindowKind::kHamming, dsp::WindowKind::kRectangular})
        for (auto pad : {dsp::PadMode::kZero, dsp::PadMode::kReflect}) {
          dsp::StftConfig c;
          c.n_fft = n;
          c.hop = n / div;
          c.window = win;
          c.pad_mode = pad;
          try {
            dsp::validate(c);
            configs.push_back(c);
          } catch (const Error&) {
          }
        }
  Rng rng(202);
  std::vector<dsp::Waveform> waves;
  for (int i = 0; i < 100; ++i) {
    dsp::Waveform w{Eigen::VectorXd(16000), 16000};
    for (Eigen::Index j = 0; j < w.size(); ++j) w.samples[j] = std::clamp(0.3 * rng.normal(), -1.0, 1.0);
    waves.push_back(std::move(w));
  }
  double worst = 1e300;
  for (const auto& c : configs)
    for (const auto& w : waves) {
      const dsp::Waveform r = dsp::istft(dsp::stft(w, c), c, w.sample_rate);
      const Eigen::Index lo = c.n_fft, n = w.size() - 2 * c.n_fft;
      worst = std::min(worst, snr_db(w.samples.segment(lo, n), r.samples.segment(lo, n)));
    }
  const double t = seconds_since(t0);
  return {worst > 60.0 && t < 30.0 && !configs.empty(),
          fmt("%zu COLA-valid configs x 100 waveforms, worst interior SNR %.1f dB (need > 60), %.1f s (limit 30 s)",
              configs.size(), worst, t)};
}

Outcome griffin_lim_criterion() {
  dsp::StftConfig cfg;
  int increases = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    Rng rng(300 + k);
    dsp::Spectrogram s{Eigen::MatrixXd(cfg.trimmed_bins(), 64), cfg, dsp::AmplitudeScale::kLinear, 16000};
    for (Eigen::Index i = 0; i < s.values.size(); ++i) s.values.data()[i] = 3.0 * rng.uniform();
    std::vector<double> res;
    dsp::griffin_lim(s, {32, k}, &res);
    for (std::size_t t = 1; t < res.size(); ++t) increases += res[t] > res[t - 1];
  }
  const dsp::MelConfig mel;
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    dsp::NoteSpec note;
    note.family = i % dsp::kSynthFamilies;
    note.midi_pitch = 36 + 5 * i;
    note.seed = static_cast<std::uint64_t>(i);
    const dsp::Waveform w = dsp::synth_note(note);
    const dsp::Spectrogram s = dsp::magnitude(dsp::stft(w, cfg), cfg, w.sample_rate);
    const dsp::Waveform r = dsp::griffin_lim(s, {64, static_cast<std::uint64_t>(i)});
    const Eigen::MatrixXd a = dsp::mel_spectrogram(s, mel);
    const Eigen::MatrixXd b = dsp::mel_spectrogram(dsp::magnitude(dsp::stft(r, cfg), cfg, r.sample_rate), mel);
    worst = std::max(worst, (a - b).norm() / a.norm());
  }
  return {increases == 0 && worst < 0.05,
          fmt("20 random magnitudes x 32 iterations: %d residual increases; 10 synthesized notes x 64 iterations: "
              "worst mel relative error %.4f (need < 0.05)",
              increases, worst)};
}

Outcome gradient_checks() {
  Rng rng(404);
  std::vector<std::string> failures;
  int checked = 0;
  double worst32 = 0, worst64 = 0;
  auto check = [&](const std::string& name, auto fn, const std::vector<Matrix<double>>& inputs) {
    const double e32 = ad::gradient_check<float>(fn, inputs).max_relative_error;
    const double e64 = ad::gradient_check<double>(fn, inputs).max_relative_error;
    worst32 = std::max(worst32, e32);
    worst64 = std::max(worst64, e64);
    ++checked;
    if (!(e32 < 1e-4 && e64 < 1e-6)) failures.push_back(name + fmt(" (%.2e / %.2e)", e32, e64));
  };
  using namespace mars::ad;
  const AttentionMask causal = [] {
    AttentionMask m = AttentionMask::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j <= i; ++j) m(i, j) = 1;
    return m;
  }();
  const Matrix<double> w34 = rnd(3, 4, rng), w44 = rnd(4, 4, rng), w33 = rnd(3, 3, rng), w43 = rnd(4, 3, rng);
  const std::vector<int> targets{1, 0, 3};
  const std::vector<int> rows{2, 0, 2, 1};
  const std::vector<int> src{5, 0, 11, 3, 3, 7, 1, 10, 2, 9, 4, 6};
  const ConvShape cs{2, 5, 5, 3, 2, 1};
  const Matrix<double> wconv = rnd(3, cs.out_height() * cs.out_width(), rng);

  check("add", [&](auto& v) { return weighted_sum(add(v[0], v[1]), w34); }, {rnd(3, 4, rng), rnd(3, 4, rng)});
  check("sub", [&](auto& v) { return weighted_sum(sub(v[0], v[1]), w34); }, {rnd(3, 4, rng), rnd(3, 4, rng)});
  check("mul", [&](auto& v) { return weighted_sum(mul(v[0], v[1]), w34); }, {rnd(3, 4, rng), rnd(3, 4, rng)});
  check("scale", [&](auto& v) { return weighted_sum(v[0] * decltype(v[0].scalar())(1.7), w34); }, {rnd(3, 4, rng)});
  check("add_scalar", [&](auto& v) { return weighted_sum(add_scalar(v[0], decltype(v[0].scalar())(0.3)), w34); },
        {rnd(3, 4, rng)});
  check("add_row", [&](auto& v) { return weighted_sum(add_row(v[0], v[1]), w34); }, {rnd(3, 4, rng), rnd(1, 4, rng)});
  check("gelu", [&](auto& v) { return weighted_sum(gelu(v[0]), w34); }, {rnd(3, 4, rng)});
  check("leaky_relu", [&](auto& v) { return weighted_sum(leaky_relu(v[0]), w34); }, {rnd(3, 4, rng)});
  check("relu", [&](auto& v) { return weighted_sum(relu(v[0]), w34); }, {rnd(3, 4, rng)});
  check("tanh", [&](auto& v) { return weighted_sum(ad::tanh(v[0]), w34); }, {rnd(3, 4, rng)});
  check("softplus", [&](auto& v) { return weighted_sum(softplus(v[0]), w34); }, {rnd(3, 4, rng)});
  check("sum", [&](auto& v) { return sum(mul(v[0], v[0])); }, {rnd(3, 4, rng)});
  check("mean", [&](auto& v) { return mean(mul(v[0], v[0])); }, {rnd(3, 4, rng)});
  check("mse", [&](auto& v) { return mse(v[0], v[1]); }, {rnd(3, 4, rng), rnd(3, 4, rng)});
  check("matmul", [&](auto& v) { return weighted_sum(matmul(v[0], v[1]), w34); }, {rnd(3, 2, rng), rnd(2, 4, rng)});
  check("linear", [&](auto& v) { return weighted_sum(linear(v[0], v[1], v[2]), w34); },
        {rnd(3, 5, rng), rnd(5, 4, rng), rnd(1, 4, rng)});
  check("left_apply", [&](auto& v) {
    using T = std::decay_t<decltype(v[0].scalar())>;
    return weighted_sum(left_apply<T>(w34.cast<T>(), v[0]), w33);
  }, {rnd(4, 3, rng)});
  check("transpose", [&](auto& v) { return weighted_sum(transpose(v[0]), w43); }, {rnd(3, 4, rng)});
  check("concat_rows", [&](auto& v) {
    using T = std::decay_t<decltype(v[0].scalar())>;
    return weighted_sum(concat_rows<T>({v[0], v[1]}), w44);
  }, {rnd(1, 4, rng), rnd(3, 4, rng)});
  check("slice_rows", [&](auto& v) { return weighted_sum(slice_rows(v[0], 1, 3), w34); }, {rnd(5, 4, rng)});
  check("embedding_lookup", [&](auto& v) { return weighted_sum(embedding_lookup(v[0], rows), w44); }, {rnd(3, 4, rng)});
  check("gather", [&](auto& v) { return weighted_sum(gather(v[0], 3, 4, src), w34); }, {rnd(4, 3, rng)});
  check("softmax rows", [&](auto& v) { return weighted_sum(softmax(v[0]), w34); }, {rnd(3, 4, rng)});
  check("softmax columns", [&](auto& v) { return weighted_sum(softmax(v[0], 0), w34); }, {rnd(3, 4, rng)});
  check("layer_norm", [&](auto& v) { return weighted_sum(layer_norm(v[0], v[1], v[2]), w34); },
        {rnd(3, 4, rng), rnd(1, 4, rng), rnd(1, 4, rng)});
  check("cross_entropy", [&](auto& v) { return cross_entropy(v[0], targets); }, {rnd(3, 4, rng)});
  check("attention", [&](auto& v) { return weighted_sum(attention(v[0], v[1], v[2], causal, 2), w44); },
        {rnd(4, 4, rng), rnd(4, 4, rng), rnd(4, 4, rng)});
  check("conv2d", [&](auto& v) { return weighted_sum(conv2d(v[0], v[1], v[2], cs), wconv); },
        {rnd(2, 25, rng), rnd(3, 18, rng), rnd(3, 1, rng)});

  // Composed blocks: double and float copies share parameters.
  {
    Rng a(1), b(1);
    TransformerBlock<double> b64("blk", 8, 2, 16, a);
    TransformerBlock<float> b32("blk", 8, 2, 16, b);
    AttentionMask mask = AttentionMask::Ones(5, 5);
    mask(0, 4) = 0;
    const Matrix<double> w = rnd(5, 8, rng);
    check("transformer block", [&](auto& v) {
      if constexpr (std::is_same_v<std::decay_t<decltype(v[0])>, Var<float>>) return weighted_sum(b32(v[0], mask), w);
      else return weighted_sum(b64(v[0], mask), w);
    }, {rnd(5, 8, rng)});
  }
  {
    tokenizer::TokenizerConfig cfg;
    cfg.channels = 1;
    cfg.size = 8;
    cfg.patch = 2;
    cfg.learnable_tokens = 2;
    cfg.width = 8;
    cfg.heads = 2;
    cfg.mlp_hidden = 16;
    cfg.encoder_depth = 1;
    cfg.decoder_depth = 1;
    cfg.codebook_size = 16;
    cfg.code_dim = 4;
    cfg.schedule = {1, 2, 4};
    Rng a(2), b(2);
    tokenizer::TokenizerModel<double> m64(cfg, a);
    tokenizer::TokenizerModel<float> m32(cfg, b);
    const Matrix<double> wz = rnd(16, 4, rng), wx = rnd(16, 4, rng);
    auto pick = [&](auto& v) -> auto& {
      if constexpr (std::is_same_v<std::decay_t<decltype(v[0])>, Var<float>>) return m32;
      else return m64;
    };
    check("tokenizer encoder", [&](auto& v) {
      auto& m = pick(v);
      m.patch_embed.weight.var = v[1];
      m.encoder_tokens.var = v[2];
      return weighted_sum(m.encode(v[0]), wz);
    }, {rnd(16, 4, rng), m64.patch_embed.weight.value(), m64.encoder_tokens.value()});
    check("tokenizer decoder", [&](auto& v) {
      auto& m = pick(v);
      m.decoder_queries.var = v[1];
      return weighted_sum(m.decode(v[0]), wx);
    }, {rnd(16, 4, rng), m64.decoder_queries.value()});
  }
  {
    ar::ArConfig cfg;
    cfg.vocab = 12;
    cfg.code_dim = 3;
    cfg.schedule = {1, 2};
    cfg.width = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.mlp_hidden = 16;
    const Matrix<double> cb = rnd(12, 3, rng);
    Rng a(3), b(3);
    ar::ArModel<double> m64(cfg, cb, a);
    ar::ArModel<float> m32(cfg, cb.cast<float>(), b);
    const std::vector<int> tgt{3, 0, 7, 11, 5};
    check("AR transformer", [&](auto& v) {
      auto& m = [&]() -> auto& {
        if constexpr (std::is_same_v<std::decay_t<decltype(v[0])>, Var<float>>) return m32;
        else return m64;
      }();
      m.class_tokens.var = v[1];
      m.head.weight.var = v[2];
      return cross_entropy(m.forward(v[0], 2, 2), std::span<const int>(tgt));
    }, {rnd(4, 3, rng), m64.class_tokens.value(), rnd(8, 12, rng, 0.3)});
  }
  std::string detail = fmt("%d checks, worst relative error %.2e (32-bit) / %.2e (64-bit)", checked, worst32, worst64);
  for (const auto& f : failures) detail += "; failed " + f;
  return {failures.empty(), detail};
}

Outcome quantizer_oracle() {
  using namespace mars::tokenizer;
  Rng rng(505);
  const Matrix<double> book = rnd(256, 16, rng), batch = rnd(10000, 16, rng);
  const auto q = quantize_nearest<double>(batch, book);
  int mismatches = 0;
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    int best = -1;
    double best_d = 0;
    for (Eigen::Index c = 0; c < book.rows(); ++c) {
      double d = 0;
      for (Eigen::Index j = 0; j < book.cols(); ++j) d += (batch(i, j) - book(c, j)) * (batch(i, j) - book(c, j));
      if (best < 0 || d < best_d) {
        best = static_cast<int>(c);
        best_d = d;
      }
    }
    mismatches += q.indices[static_cast<std::size_t>(i)] != best;
  }

  // K = 2, schedule {1, 2}, codebook {0, 1, 2, -1}: scale 1 averages to 1.55 -> code 2;
  // residual (-0.8, 0.2, -1.3, 0.1) -> codes (3, 0, 3, 0); z_hat = (1, 2, 1, 2).
  Matrix<double> cb(4, 1), z(4, 1), expect(4, 1);
  cb << 0, 1, 2, -1;
  z << 1.2, 2.2, 0.7, 2.1;
  expect << 1, 2, 1, 2;
  const auto toy = multiscale_quantize<double>(z, ScalePyramid<double>({1, 2}), cb);
  const bool toy_ok = toy.tokens.grids[0] == std::vector<int>{2} && toy.tokens.grids[1] == std::vector<int>{3, 0, 3, 0} &&
                      toy.z_hat == expect;

  Matrix<double> latent(256, 16);
  for (Eigen::Index i = 0; i < latent.size(); ++i)
    latent.data()[i] = static_cast<double>(static_cast<int>(rng.below(129)) - 64) / 16.0;
  const VectorQuantizer<double> passthrough = [](const Matrix<double>& v) {
    return NearestResult<double>{std::vector<int>(static_cast<std::size_t>(v.rows()), 0), v};
  };
  const auto tele = multiscale_quantize<double>(latent, ScalePyramid<double>({1, 2, 4, 8, 16}), passthrough);
  const double tele_err = (tele.z_hat - latent).cwiseAbs().maxCoeff();
  return {mismatches == 0 && toy_ok && tele_err == 0.0,
          fmt("10000 vectors: %d mismatches vs exhaustive scan; 2-scale toy %s; identity telescoping max error %.3g",
              mismatches, toy_ok ? "matches" : "differs", tele_err)};
}

long double kid_triple_loop(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const long double d = static_cast<long double>(a.cols());
  auto k = [&](const Eigen::MatrixXd& x, Eigen::Index i, const Eigen::MatrixXd& y, Eigen::Index j) {
    long double dot = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) dot += static_cast<long double>(x(i, c)) * y(j, c);
    const long double t = dot / d + 1;
    return t * t * t;
  };
  long double xx = 0, yy = 0, xy = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.rows(); ++j)
      if (i != j) xx += k(a, i, a, j);
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      if (i != j) yy += k(b, i, b, j);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) xy += k(a, i, b, j);
  const long double na = a.rows(), nb = b.rows();
  return xx / (na * (na - 1)) + yy / (nb * (nb - 1)) - 2 * xy / (na * nb);
}

Outcome metric_oracles() {
  using namespace mars::metrics;
  Rng rng(606);
  std::vector<std::string> failed;

  // 1-D Gaussians: (m1 - m2)^2 + v1 + v2 - 2 sqrt(v1 v2).
  double fad_err = 0;
  for (int t = 0; t < 20; ++t) {
    GaussianStats a{Eigen::VectorXd::Constant(1, rng.normal()), Eigen::MatrixXd::Constant(1, 1, 0.1 + rng.uniform())};
    GaussianStats b{Eigen::VectorXd::Constant(1, rng.normal()), Eigen::MatrixXd::Constant(1, 1, 0.1 + rng.uniform())};
    const double dm = a.mean(0) - b.mean(0), va = a.covariance(0, 0), vb = b.covariance(0, 0);
    const double closed = dm * dm + va + vb - 2 * std::sqrt(va * vb);
    fad_err = std::max(fad_err, std::abs(frechet_distance(a, b) - closed) / std::max(closed, 1e-300));
  }
  if (fad_err > 1e-12) failed.push_back(fmt("FAD 1-D closed form (rel err %.2e)", fad_err));
  const Eigen::MatrixXd x = rnd(200, 8, rng);
  if (frechet_distance(gaussian_stats(x), gaussian_stats(x)) != 0.0) failed.push_back("FAD(a,a) != 0");

  double kid_err = 0;
  for (int t = 0; t < 5; ++t) {
    const Eigen::MatrixXd a = rnd(20 + 10 * t, 6, rng), b = (rnd(25 + 5 * t, 6, rng, 1.3).array() + 0.4).matrix();
    kid_err = std::max(kid_err, std::abs(kid(a, b) - static_cast<double>(kid_triple_loop(a, b))));
  }
  if (kid_err > 1e-10) failed.push_back(fmt("KID oracle (abs err %.2e)", kid_err));
  if (kid(x, x) != 0.0) failed.push_back("KID(E,E) != 0");

  if (inception_score(Eigen::MatrixXd::Constant(9, 3, 1.0 / 3)) != 1.0) failed.push_back("IS uniform != 1");
  for (int c : {2, 5, 10}) {
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(3 * c, c);
    for (int i = 0; i < 3 * c; ++i) onehot(i, i % c) = 1.0;
    if (std::abs(inception_score(onehot) - c) > 1e-12 * c) failed.push_back(fmt("IS one-hot != %d", c));
  }

  auto clusters = [&](int left, int right) {
    Eigen::MatrixXd m(left + right, 3);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = (i < left ? -20.0 : 20.0) + 0.5 * rng.normal();
    return m;
  };
  const double same = ndb(x, x, 10, 0.05, 1).ndb_over_k;
  const double disjoint = ndb(clusters(50, 50), clusters(40, 0), 2, 0.05, 1).ndb_over_k;
  if (same != 0.0) failed.push_back("NDB identical != 0");
  if (disjoint != 1.0) failed.push_back("NDB disjoint != 1");

  std::string detail = fmt("FAD 1-D rel err %.1e, KID oracle abs err %.1e, IS/NDB fixtures", fad_err, kid_err);
  for (const auto& f : failed) detail += "; failed " + f;
  return {failed.empty(), detail};
}

// Mean squared difference of log1p mel spectrograms.
double mel_mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

Eigen::MatrixXd log_mel_of(const dsp::Spectrogram& log_amplitude, const Eigen::MatrixXd& bank) {
  return dsp::mel_spectrogram(dsp::to_linear(log_amplitude), bank).array().log1p().matrix();
}

Eigen::MatrixXd log_mel_of(const dsp::Waveform& w, const dsp::StftConfig& cfg, const Eigen::MatrixXd& bank) {
  return dsp::mel_spectrogram(dsp::magnitude(dsp::stft(w, cfg), cfg, w.sample_rate), bank).array().log1p().matrix();
}

constexpr int kTokenizerSteps = 1000;

Outcome overfit_tokenizer() {
  const auto t0 = Clock::now();
  tokenizer::CodecConfig codec;
  std::vector<dsp::Waveform> clips;
  std::vector<dsp::Spectrogram> specs;
  for (int i = 0; i < 8; ++i) {
    dsp::NoteSpec note;
    note.family = i % dsp::kSynthFamilies;
    note.midi_pitch = 45 + 4 * i;
    note.seed = static_cast<std::uint64_t>(i);
    clips.push_back(dsp::synth_note(note));
    specs.push_back(tokenizer::analyse(clips.back(), codec));
  }
  long double sum = 0, sq = 0, n = 0;
  for (const auto& s : specs) {
    sum += s.values.sum();
    sq += s.values.squaredNorm();
    n += static_cast<long double>(s.values.size());
  }
  codec.normalization.mean = static_cast<double>(sum / n);
  codec.normalization.stddev = static_cast<double>(std::sqrt(sq / n - (sum / n) * (sum / n)));
  std::vector<Tensor3<float>> batch;
  for (const auto& s : specs) batch.push_back(tokenizer::to_model_input(s, codec));

  const Eigen::MatrixXd bank = dsp::mel_filterbank({}, codec.stft, codec.sample_rate);
  std::vector<Eigen::MatrixXd> target;
  for (const auto& s : specs) target.push_back(log_mel_of(s, bank));
  tokenizer::TokenizerTrainer<float> trainer(codec.tokenizer, 7);
  auto recon_error = [&]() {
    double e = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& m = trainer.model();
      const dsp::Spectrogram y = tokenizer::from_model_output(m.detokenize(m.tokenize(batch[i])), codec);
      e += mel_mse(log_mel_of(y, bank), target[i]);
    }
    return e / static_cast<double>(batch.size());
  };
  const double initial = recon_error();
  int skipped = 0;
  for (int s = 0; s < kTokenizerSteps; ++s) skipped += trainer.step(batch).skipped;
  const double final_error = recon_error();

  double audio = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto tokens = tokenizer::tokenize(clips[i], codec, trainer.model());
    const dsp::Waveform r = tokenizer::detokenize(tokens, codec, trainer.model(), 11 + i);
    audio += mel_mse(log_mel_of(r, codec.stft, bank), log_mel_of(clips[i], codec.stft, bank));
  }
  audio /= static_cast<double>(clips.size());
  const double t = seconds_since(t0);
  const double ratio = final_error / initial;
  return {ratio < 0.10 && audio < 0.05 && t < 20 * 60,
          fmt("%d steps (%d skipped): mel-MSE %.4g -> %.4g (%.1f%% of initial, need < 10%%); "
              "audio roundtrip mel-MSE %.4f (need < 0.05); %.0f s",
              kTokenizerSteps, skipped, initial, final_error, 100 * ratio, audio, t)};
}

Outcome overfit_ar() {
  const auto t0 = Clock::now();
  Rng rng(808);
  ar::ArConfig cfg;  // desk-scale shapes: 1024 codes, 341 positions
  ar::ArTrainer<float> trainer(cfg, rnd(cfg.vocab, cfg.code_dim, rng).cast<float>(), 3);
  std::vector<ar::ArExample> batch;
  for (int i = 0; i < 4; ++i) batch.push_back({random_map(cfg.schedule, cfg.vocab, rng), i});
  double accuracy = 0;
  int steps = 0;
  while (steps < 1000) {
    trainer.step(batch);
    ++steps;
    if (steps % 25 == 0) {
      accuracy = trainer.evaluate(batch).accuracy;
      if (accuracy == 1.0) break;  // one wrong token derails greedy decoding of the map
    }
  }
  accuracy = trainer.evaluate(batch).accuracy;
  ar::SamplingOptions greedy;
  greedy.temperature = 0;
  int reproduced = 0;
  for (const auto& ex : batch) reproduced += ar::ar_sample(trainer.model(), ex.condition, 99, greedy) == ex.tokens;
  return {accuracy > 0.99 && reproduced == 4 && steps <= 1000,
          fmt("%d steps: teacher-forced accuracy %.4f (need > 0.99); temperature-0 sampling reproduced %d/4 maps; %.0f s",
              steps, accuracy, reproduced, seconds_since(t0))};
}

Outcome causality() {
  Rng rng(909);
  ar::ArConfig cfg;
  ar::ArModel<float> m(cfg, rnd(cfg.vocab, cfg.code_dim, rng).cast<float>(), rng);
  const auto offsets = ar::scale_offsets(cfg.schedule);
  int violations = 0, later_changed = 0, later_trials = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_map(cfg.schedule, cfg.vocab, rng);
    const auto s = static_cast<std::size_t>(rng.below(cfg.schedule.size()));
    auto u = t;
    for (auto& v : u.grids[s]) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.vocab)));
    const int cond = static_cast<int>(rng.below(5)) - 1;
    const Matrix<float> a = m.forward(t, cond).value(), b = m.forward(u, cond).value();
    const int upto = offsets[s + 1];
    violations += !(a.topRows(upto) == b.topRows(upto));
    if (upto < a.rows()) {
      ++later_trials;
      later_changed += !(a.bottomRows(a.rows() - upto) == b.bottomRows(a.rows() - upto));
    }
  }
  return {violations == 0 && later_changed == later_trials,
          fmt("100 trials: %d with changed logits at scales <= s; finer scales reacted in %d/%d", violations,
              later_changed, later_trials)};
}

struct LayoutRun {
  double steps_per_second = 0;
  std::int64_t peak_bytes = 0;
  int kept_rows = 0;
  int total_rows = 0;
};

LayoutRun measure_layout(const tokenizer::CodecConfig& codec, const std::vector<dsp::Waveform>& clips) {
  tokenizer::validate(codec);
  std::vector<Tensor3<float>> batch;
  LayoutRun r;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const dsp::Spectrogram s = tokenizer::analyse(clips[i], codec);
    batch.push_back(tokenizer::to_model_input(s, codec));
    if (i == 0) {
      const dsp::Spectrogram back = tokenizer::from_model_output(batch.back(), codec);
      r.total_rows = static_cast<int>(s.bins());
      for (Eigen::Index row = 0; row < s.bins(); ++row)
        r.kept_rows += back.values.row(row).isApprox(s.values.row(row), 1e-5) && s.values.row(row).norm() > 0;
    }
  }
  const std::int64_t base = ad::MemoryMeter::live();
  ad::MemoryMeter::reset_peak();
  tokenizer::TokenizerTrainer<float> trainer(codec.tokenizer, 5);
  trainer.step(batch);  // warm-up, includes codebook seeding
  constexpr int kSteps = 12;
  const auto t0 = Clock::now();
  for (int s = 0; s < kSteps; ++s) trainer.step(batch);
  r.steps_per_second = kSteps / seconds_since(t0);
  r.peak_bytes = ad::MemoryMeter::peak() - base;
  return r;
}

Outcome cmx_efficiency() {
  tokenizer::TokenizerConfig toy;
  toy.width = 32;
  toy.heads = 2;
  toy.mlp_hidden = 64;
  toy.encoder_depth = 1;
  toy.decoder_depth = 1;
  toy.codebook_size = 256;
  toy.code_dim = 8;
  toy.patch = 16;

  tokenizer::CodecConfig cmx_codec;
  cmx_codec.stft.n_fft = 1024;
  cmx_codec.stft.hop = 512;
  cmx_codec.stft.target_frames = 128;
  cmx_codec.layout = tokenizer::Layout::kCmx;
  cmx_codec.tokenizer = toy;
  cmx_codec.tokenizer.channels = 4;
  cmx_codec.tokenizer.size = 128;
  cmx_codec.tokenizer.schedule = {1, 2, 4, 8};

  tokenizer::CodecConfig trunc_codec;
  trunc_codec.stft.n_fft = 1024;
  trunc_codec.stft.hop = 256;
  trunc_codec.stft.target_frames = 256;
  trunc_codec.layout = tokenizer::Layout::kTruncate;
  trunc_codec.tokenizer = toy;
  trunc_codec.tokenizer.channels = 1;
  trunc_codec.tokenizer.size = 256;
  trunc_codec.tokenizer.schedule = {1, 2, 4, 8, 16};

  std::vector<dsp::Waveform> clips;
  for (int i = 0; i < 4; ++i) {
    dsp::NoteSpec note;
    note.family = i;
    note.midi_pitch = 50 + 3 * i;
    clips.push_back(dsp::synth_note(note));
  }
  const LayoutRun packed = measure_layout(cmx_codec, clips);
  const LayoutRun cut = measure_layout(trunc_codec, clips);
  const double speedup = packed.steps_per_second / cut.steps_per_second;
  const bool rows_ok = packed.kept_rows == packed.total_rows && cut.kept_rows * 2 == cut.total_rows;
  return {speedup >= 1.2 && packed.peak_bytes < cut.peak_bytes && rows_ok,
          fmt("4x128x128 CMX %.2f steps/s, peak %.1f MB, keeps %d/%d rows; 1x256x256 truncated %.2f steps/s, "
              "peak %.1f MB, keeps %d/%d rows; speedup %.2fx (need >= 1.2x)",
              packed.steps_per_second, packed.peak_bytes / 1048576.0, packed.kept_rows, packed.total_rows,
              cut.steps_per_second, cut.peak_bytes / 1048576.0, cut.kept_rows, cut.total_rows, speedup)};
}

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> run_artifacts(const fs::path& dir) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
  for (const char* sub : {"generated", "eval", "tokenizer", "ar"}) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / sub))
      if (e.path().extension() != ".tsv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.emplace_back(fs::relative(f, dir).string(), io::read_file(f));
  }
  return out;
}

Outcome end_to_end_determinism() {
  using namespace mars::pipeline;
  const auto t0 = Clock::now();
  std::vector<std::vector<std::pair<std::string, std::vector<std::uint8_t>>>> runs;
  for (const char* name : {"first", "second"}) {
    const fs::path root = fs::temp_directory_path() / (std::string("mars_acceptance_") + name);
    fs::remove_all(root);
    RunConfig c;
    c.seed = 11;
    c.threads = 1;
    c.out = (root / "run").string();
    c.data.manifest = (root / "data" / "manifest.jsonl").string();
    c.train.tokenizer_steps = 20;
    c.train.ar_steps = 20;
    c.train.checkpoint_every = 10;
    sync_derived(c);
    SyntheticDatasetOptions opt;
    opt.count = 48;
    opt.seed = c.seed;
    write_synthetic_dataset(root / "data", opt, c.data);
    const DatasetManifest m = ingest(c.data.manifest, c);
    preprocess_cache(m, c);
    run_train_tokenizer(m, c);
    run_train_ar(m, c);
    run_generate(c, 4, "cycle", c.seed);
    run_evaluate(m, c, EvalMode::kReconstruction);
    run_evaluate(m, c, EvalMode::kGeneration);
    runs.push_back(run_artifacts(c.out));
  }
  int differing = 0, wavs = 0, reports = 0;
  const bool same_listing = runs[0].size() == runs[1].size();
  for (std::size_t i = 0; same_listing && i < runs[0].size(); ++i) {
    differing += runs[0][i].first != runs[1][i].first || runs[0][i].second != runs[1][i].second;
    wavs += runs[0][i].first.ends_with(".wav");
    reports += runs[0][i].first.starts_with("eval");
  }
  return {same_listing && differing == 0 && wavs == 4 && reports == 4,
          fmt("2 runs x %zu artifacts (%d WAVs, %d report files, checkpoints): %d differ; %.0f s", runs[0].size(), wavs,
              reports, differing, seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"cmx bijectivity", cmx_bijectivity},
      {"stft/istft roundtrip", stft_roundtrip},
      {"griffin-lim", griffin_lim_criterion},
      {"gradient checks", gradient_checks},
      {"quantizer oracle", quantizer_oracle},
      {"metric oracles", metric_oracles},
      {"overfit tokenizer", overfit_tokenizer},
      {"overfit AR", overfit_ar},
      {"causality", causality},
      {"CMX efficiency", cmx_efficiency},
      {"end-to-end determinism", end_to_end_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2d %-24s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
