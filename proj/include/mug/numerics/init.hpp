#pragma once

#include <cmath>

#include "mug/numerics/mat.hpp"
#include "mug/numerics/rng.hpp"

namespace mug {

// Glorot/Xavier uniform initialisation.
inline Mat glorot(std::size_t rows, std::size_t cols, RngStream& rng) {
  const double a = std::sqrt(6.0 / double(rows + cols));
  Mat m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-a, a);
  return m;
}

}  // namespace mug
