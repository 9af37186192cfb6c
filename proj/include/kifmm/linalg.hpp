#pragma once

#include "kifmm/common.hpp"

namespace kifmm {

struct TruncatedPinv {
  Matrix pinv;
  Vector singular_values;  // all of them, descending
  int rank = 0;
};

/// Pseudo-inverse keeping singular values >= cutoff * sigma_max.
/// Throws NumericalError for a numerically zero matrix.
TruncatedPinv truncated_pinv(const Matrix& a, double cutoff);

/// Largest singular value.
double spectral_norm(const Matrix& a);

}  // namespace kifmm
