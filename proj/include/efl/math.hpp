#pragma once

#include <cmath>

namespace efl {

// Numerically stable sigmoid / log-sigmoid helpers. All loss kernels go
// through these so that |x| > 30 never produces a log(0) or an overflow.

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)), stable for large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0.0) {
    return -std::log1p(std::exp(-x));
  }
  return x - std::log1p(std::exp(x));
}

}  // namespace efl
