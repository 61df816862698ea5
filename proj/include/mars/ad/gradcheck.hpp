#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mars/ad/var.hpp"

namespace mars::ad {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
};

/// Compares reverse-mode gradients (computed in scalar type T) with
/// five-point central differences evaluated in double precision.
///
/// `fn` must be callable with `std::vector<Var<U>>&` for both U = T and
/// U = double and return a scalar Var. The error for each input is
/// max|analytic - numeric| / max(max|numeric|, 1e-12); the report holds
/// the worst input.
template <typename T, typename Fn>
GradCheckReport gradient_check(Fn&& fn, const std::vector<Matrix<double>>& inputs, double step = 1e-5) {
  std::vector<Matrix<T>> analytic;
  {
    Tape<T> tape;
    std::vector<Var<T>> vars;
    for (const auto& m : inputs) vars.emplace_back(m.template cast<T>(), true);
    const Var<T> loss = fn(vars);
    tape.backward(loss);
    for (auto& v : vars) analytic.push_back(v.grad());
  }

  GradCheckReport report;
  std::vector<Var<double>> probe;
  for (const auto& m : inputs) probe.emplace_back(m, false);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Matrix<double> numeric(inputs[k].rows(), inputs[k].cols());
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      double& x = probe[k].mutable_value().data()[i];
      const double orig = x;
      const double h = step * std::max(1.0, std::abs(orig));
      auto at = [&](double offset) {
        x = orig + offset;
        return fn(probe).scalar();
      };
      const double d = 8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h));
      x = orig;
      numeric.data()[i] = d / (12.0 * h);
    }
    const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
    const double err = (analytic[k].template cast<double>() - numeric).cwiseAbs().maxCoeff() / scale;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_input = k;
    }
  }
  return report;
}

}  // namespace mars::ad
