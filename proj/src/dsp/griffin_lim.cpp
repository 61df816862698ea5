#include "mars/dsp/griffin_lim.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "mars/error.hpp"

namespace mars::dsp {

Waveform griffin_lim(const Spectrogram& s, const GriffinLimOptions& opts, std::vector<double>* residuals) {
  require(s.scale == AmplitudeScale::kLinear, "griffin_lim: expects a linear-scale spectrogram");
  require(opts.iterations >= 1, "griffin_lim: iterations must be >= 1");
  require(opts.momentum >= 0.0 && opts.momentum < 1.0, "griffin_lim: momentum must be in [0, 1)");
  require(s.values.allFinite(), "griffin_lim: non-finite magnitudes");
  require((s.values.array() >= 0.0).all(), "griffin_lim: negative magnitudes");

  // Analysis of the reconstruction must not re-pad or crop it, and the
  // overlap-add inverse is the least-squares projection only under zero padding.
  StftConfig cfg = s.config;
  cfg.target_frames = 0;
  cfg.pad_mode = PadMode::kZero;
  const Eigen::MatrixXd target = restore_trimmed(s.values, cfg);

  std::mt19937_64 rng(opts.seed);
  Eigen::MatrixXd phase(target.rows(), target.cols());
  for (Eigen::Index t = 0; t < phase.cols(); ++t)
    for (Eigen::Index k = 0; k < phase.rows(); ++k)
      phase(k, t) = 2.0 * std::numbers::pi * static_cast<double>(rng() >> 11) * 0x1.0p-53;

  // Two-sided weighting: interior bins stand for a conjugate pair.
  Eigen::ArrayXd bin_weight = Eigen::ArrayXd::Constant(target.rows(), 2.0);
  bin_weight[0] = 1.0;
  bin_weight[bin_weight.size() - 1] = 1.0;

  auto project = [&](const ComplexSpectrogram& x) {
    const Eigen::ArrayXXd mag = (x.real.array().square() + x.imag.array().square()).sqrt();
    const Eigen::ArrayXXd safe = (mag > 0.0).select(mag, 1.0);
    return ComplexSpectrogram{
        (mag > 0.0).select(target.array() * x.real.array() / safe, target.array()).matrix(),
        (mag > 0.0).select(target.array() * x.imag.array() / safe, 0.0).matrix()};
  };
  auto residual = [&](const ComplexSpectrogram& x) {
    const Eigen::ArrayXXd mag = (x.real.array().square() + x.imag.array().square()).sqrt();
    return std::sqrt(((mag - target.array()).square().colwise() * bin_weight).sum());
  };

  ComplexSpectrogram c{target.array() * phase.array().cos(), target.array() * phase.array().sin()};
  ComplexSpectrogram prev;
  double prev_residual = std::numeric_limits<double>::infinity();
  Waveform w;
  if (residuals) residuals->clear();
  for (int it = 0; it < opts.iterations; ++it) {
    Waveform candidate = istft(project(c), cfg, s.sample_rate);
    ComplexSpectrogram x = stft(candidate, cfg);
    double r = residual(x);
    if (r > prev_residual) {
      candidate = istft(project(prev), cfg, s.sample_rate);
      x = stft(candidate, cfg);
      r = residual(x);
      c = x;
    } else if (it > 0) {
      c.real = x.real + opts.momentum * (x.real - prev.real);
      c.imag = x.imag + opts.momentum * (x.imag - prev.imag);
    } else {
      c = x;
    }
    w = std::move(candidate);
    prev = std::move(x);
    prev_residual = r;
    if (residuals) residuals->push_back(r);
  }
  return w;
}

}  // namespace mars::dsp
