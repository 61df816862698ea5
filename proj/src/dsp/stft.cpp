#include "mars/dsp/stft.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "mars/error.hpp"

namespace mars::dsp {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

Eigen::VectorXd padded_signal(const Eigen::VectorXd& x, const StftConfig& cfg, Eigen::Index frames) {
  const Eigen::Index half = cfg.n_fft / 2;
  const Eigen::Index len = x.size();
  const Eigen::Index total = (frames - 1) * cfg.hop + cfg.n_fft;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(total);
  const Eigen::Index copy = std::min(len, total - half);
  p.segment(half, copy) = x.head(copy);
  if (cfg.pad_mode == PadMode::kReflect) {
    for (Eigen::Index i = 1; i <= half; ++i) p[half - i] = x[i];
    for (Eigen::Index j = 0; j < half && half + len + j < total && len - 2 - j >= 0; ++j)
      p[half + len + j] = x[len - 2 - j];
  }
  return p;
}

}  // namespace

Eigen::VectorXd make_window(WindowKind kind, int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    const double ph = 2.0 * std::numbers::pi * i / n;
    switch (kind) {
      case WindowKind::kHann: w[i] = 0.5 - 0.5 * std::cos(ph); break;
      case WindowKind::kHamming: w[i] = 0.54 - 0.46 * std::cos(ph); break;
      case WindowKind::kRectangular: w[i] = 1.0; break;
    }
  }
  return w;
}

void validate(const StftConfig& cfg) {
  require(is_pow2(cfg.n_fft) && cfg.n_fft >= 4, "stft: n_fft must be a power of two >= 4");
  require(cfg.hop > 0 && cfg.hop <= cfg.n_fft, "stft: hop must be in [1, n_fft]");
  require(cfg.n_fft % cfg.hop == 0, "stft: hop must divide n_fft");
  require(cfg.target_frames >= 0, "stft: target_frames must be non-negative");
  const Eigen::VectorXd w = make_window(cfg.window, cfg.n_fft);
  Eigen::VectorXd ola = Eigen::VectorXd::Zero(cfg.hop);
  for (int i = 0; i < cfg.n_fft; ++i) ola[i % cfg.hop] += w[i];
  const double ref = ola.maxCoeff();
  if (!(ref > 0.0 && (ola.array() - ref).abs().maxCoeff() <= 1e-9 * ref))
    fail(ErrorCategory::kInvalidInput, "stft: window/hop pair violates constant-overlap-add (" + to_string(cfg.window) +
                                           ", n_fft " + std::to_string(cfg.n_fft) + ", hop " + std::to_string(cfg.hop) + ")");
}

Waveform fit_to_frames(const Waveform& w, const StftConfig& cfg) {
  if (cfg.target_frames <= 0) return w;
  const Eigen::Index target = static_cast<Eigen::Index>(cfg.target_frames) * cfg.hop;
  Waveform out{Eigen::VectorXd::Zero(target), w.sample_rate};
  const Eigen::Index n = std::min(target, w.samples.size());
  out.samples.head(n) = w.samples.head(n);
  return out;
}

ComplexSpectrogram stft(const Waveform& w_in, const StftConfig& cfg) {
  validate(cfg);
  const Waveform w = fit_to_frames(w_in, cfg);
  const Eigen::Index len = w.samples.size();
  require(len > 0, "stft: waveform shorter than one frame");
  if (cfg.pad_mode == PadMode::kReflect)
    require(len > cfg.n_fft / 2, "stft: waveform shorter than one frame for reflect padding");
  require(w.samples.allFinite(), "stft: non-finite samples");

  const Eigen::Index frames = (len + cfg.hop - 1) / cfg.hop;
  const Eigen::VectorXd p = padded_signal(w.samples, cfg, frames);
  const Eigen::VectorXd win = make_window(cfg.window, cfg.n_fft);
  const int bins = cfg.full_bins();

  ComplexSpectrogram c{Eigen::MatrixXd(bins, frames), Eigen::MatrixXd(bins, frames)};
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  Eigen::VectorXd frame(cfg.n_fft);
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(cfg.n_fft));
  for (Eigen::Index t = 0; t < frames; ++t) {
    frame = p.segment(t * cfg.hop, cfg.n_fft).cwiseProduct(win);
    fft.fwd(spec.data(), frame.data(), cfg.n_fft);
    double* re = c.real.col(t).data();
    double* im = c.imag.col(t).data();
    for (int k = 0; k < bins; ++k) {
      re[k] = spec[static_cast<std::size_t>(k)].real();
      im[k] = spec[static_cast<std::size_t>(k)].imag();
    }
  }
  return c;
}

Waveform istft(const ComplexSpectrogram& c, const StftConfig& cfg, int sample_rate) {
  validate(cfg);
  require(c.bins() == cfg.full_bins(), "istft: expected n_fft/2 + 1 frequency rows");
  require(c.imag.rows() == c.real.rows() && c.imag.cols() == c.real.cols(), "istft: real/imag shape mismatch");
  require(c.frames() > 0, "istft: no frames");
  const Eigen::Index frames = c.frames();
  const Eigen::Index total = (frames - 1) * cfg.hop + cfg.n_fft;
  const Eigen::VectorXd win = make_window(cfg.window, cfg.n_fft);
  const Eigen::VectorXd win2 = win.cwiseProduct(win);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(total);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(total);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(cfg.full_bins()));
  Eigen::VectorXd frame(cfg.n_fft);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const double* re = c.real.col(t).data();
    const double* im = c.imag.col(t).data();
    for (int k = 0; k < cfg.full_bins(); ++k) spec[static_cast<std::size_t>(k)] = {re[k], im[k]};
    fft.inv(frame.data(), spec.data(), cfg.n_fft);
    acc.segment(t * cfg.hop, cfg.n_fft) += frame.cwiseProduct(win);
    norm.segment(t * cfg.hop, cfg.n_fft) += win2;
  }
  Waveform w{Eigen::VectorXd::Zero(frames * cfg.hop), sample_rate};
  const Eigen::Index half = cfg.n_fft / 2;
  for (Eigen::Index n = 0; n < w.samples.size(); ++n) {
    const double d = norm[n + half];
    w.samples[n] = d > 1e-10 ? acc[n + half] / d : 0.0;
  }
  return w;
}

Spectrogram magnitude(const ComplexSpectrogram& c, const StftConfig& cfg, int sample_rate,
                      AmplitudeScale scale) {
  require(c.bins() == cfg.full_bins(), "magnitude: bin count does not match config");
  Eigen::MatrixXd mag = (c.real.array().square() + c.imag.array().square()).sqrt().matrix();
  Spectrogram s;
  s.config = cfg;
  s.sample_rate = sample_rate;
  switch (cfg.bin_trim) {
    case BinTrim::kDropDc: s.values = mag.bottomRows(mag.rows() - 1); break;
    case BinTrim::kDropNyquist: s.values = mag.topRows(mag.rows() - 1); break;
    case BinTrim::kKeepAll: s.values = std::move(mag); break;
  }
  s.scale = AmplitudeScale::kLinear;
  return scale == AmplitudeScale::kLog1p ? to_log1p(s) : s;
}

Eigen::MatrixXd restore_trimmed(const Eigen::MatrixXd& values, const StftConfig& cfg) {
  require(values.rows() == cfg.trimmed_bins(), "restore_trimmed: row count does not match config");
  if (cfg.bin_trim == BinTrim::kKeepAll) return values;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(cfg.full_bins(), values.cols());
  if (cfg.bin_trim == BinTrim::kDropDc)
    full.bottomRows(values.rows()) = values;
  else
    full.topRows(values.rows()) = values;
  return full;
}

Spectrogram to_linear(const Spectrogram& s) {
  if (s.scale == AmplitudeScale::kLinear) return s;
  Spectrogram out = s;
  out.values = s.values.array().expm1().max(0.0).matrix();
  out.scale = AmplitudeScale::kLinear;
  return out;
}

Spectrogram to_log1p(const Spectrogram& s) {
  if (s.scale == AmplitudeScale::kLog1p) return s;
  Spectrogram out = s;
  out.values = s.values.array().log1p().matrix();
  out.scale = AmplitudeScale::kLog1p;
  return out;
}

std::string to_string(WindowKind k) {
  switch (k) {
    case WindowKind::kHann: return "hann";
    case WindowKind::kHamming: return "hamming";
    case WindowKind::kRectangular: return "rectangular";
  }
  return "?";
}
std::string to_string(PadMode m) { return m == PadMode::kReflect ? "reflect" : "zero"; }
std::string to_string(BinTrim t) {
  switch (t) {
    case BinTrim::kDropDc: return "drop_dc";
    case BinTrim::kDropNyquist: return "drop_nyquist";
    case BinTrim::kKeepAll: return "keep_all";
  }
  return "?";
}

WindowKind parse_window(const std::string& s) {
  if (s == "hann") return WindowKind::kHann;
  if (s == "hamming") return WindowKind::kHamming;
  if (s == "rectangular") return WindowKind::kRectangular;
  fail(ErrorCategory::kInvalidInput, "unknown window '" + s + "'");
}
PadMode parse_pad_mode(const std::string& s) {
  if (s == "reflect") return PadMode::kReflect;
  if (s == "zero") return PadMode::kZero;
  fail(ErrorCategory::kInvalidInput, "unknown pad_mode '" + s + "'");
}
BinTrim parse_bin_trim(const std::string& s) {
  if (s == "drop_dc") return BinTrim::kDropDc;
  if (s == "drop_nyquist") return BinTrim::kDropNyquist;
  if (s == "keep_all") return BinTrim::kKeepAll;
  fail(ErrorCategory::kInvalidInput, "unknown bin_trim '" + s + "'");
}

}  // namespace mars::dsp
