#include "kifmm/linalg.hpp"

#include <Eigen/SVD>

namespace kifmm {

TruncatedPinv truncated_pinv(const Matrix& a, double cutoff) {
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw ConfigError("pseudo-inverse cutoff must lie in (0, 1]");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  TruncatedPinv out;
  out.singular_values = s;
  if (s.size() == 0 || !(s[0] > 0.0)) throw NumericalError("pseudo-inverse of a numerically zero matrix");
  const double threshold = cutoff * s[0];
  int rank = 0;
  while (rank < s.size() && s[rank] >= threshold) ++rank;
  out.rank = rank;
  const auto u = svd.matrixU().leftCols(rank);
  const auto v = svd.matrixV().leftCols(rank);
  out.pinv = v * s.head(rank).cwiseInverse().asDiagonal() * u.transpose();
  return out;
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues()[0];
}

}  // namespace kifmm
