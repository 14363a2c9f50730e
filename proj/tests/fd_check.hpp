#pragma once

// Central finite-difference gradient oracle, kept independent of the
// backward-pass implementation it checks. 64-bit only: gradient checks are
// unreliable at 32-bit.

#include <algorithm>
#include <cmath>
#include <functional>

#include "rcac/params.hpp"

namespace fd {

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Analytic gradients must already be stored in ps. Perturbs every entry of
// every parameter and compares against (L(p+h) - L(p-h)) / 2h.
inline double max_rel_error(rcac::ParameterSet<double>& ps,
                            const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0;
  for (auto& [name, p] : ps) {
    for (int64_t i = 0; i < p.value.numel(); ++i) {
      const double orig = p.value.data[i];
      p.value.data[i] = orig + h;
      const double lp = loss();
      p.value.data[i] = orig - h;
      const double lm = loss();
      p.value.data[i] = orig;
      const double numeric = (lp - lm) / (2 * h);
      worst = std::max(worst, rel_error(p.grad.data[i], numeric));
    }
  }
  return worst;
}

// Same check for the gradient with respect to an input tensor.
inline double max_rel_error_input(rcac::Tensor<double>& input, const rcac::Tensor<double>& grad,
                                  const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0;
  for (int64_t i = 0; i < input.numel(); ++i) {
    const double orig = input.data[i];
    input.data[i] = orig + h;
    const double lp = loss();
    input.data[i] = orig - h;
    const double lm = loss();
    input.data[i] = orig;
    const double numeric = (lp - lm) / (2 * h);
    worst = std::max(worst, rel_error(grad.data[i], numeric));
  }
  return worst;
}

}  // namespace fd
