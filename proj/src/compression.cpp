#include "kifmm/compression.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace kifmm {

namespace {



struct GramSplit {
  Matrix vectors;  // retained, descending sigma
  Vector sigma;    // all, descending
};

GramSplit split_gram(const Matrix& gram, double eps1) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("Gram eigendecomposition failed");
  const Index n = gram.rows();
  GramSplit out;
  out.sigma.resize(n);
  for (Index i = 0; i < n; ++i) out.sigma[i] = std::sqrt(std::max(eig.eigenvalues()[n - 1 - i], 0.0));
  if (!(out.sigma[0] > 0.0)) throw NumericalError("M2L operators are all zero");
  const double threshold = eps1 * out.sigma[0];
  Index keep = 0;
  while (keep < n && out.sigma[keep] >= threshold) ++keep;
  if (keep == 0) throw NumericalError("epsilon1 retains no projector columns");
  out.vectors.resize(n, keep);
  for (Index i = 0; i < keep; ++i) out.vectors.col(i) = eig.eigenvectors().col(n - 1 - i);
  return out;
}

void check_eps1(double eps1) {
  if (!(eps1 > 0.0 && eps1 < 1.0)) throw ConfigError("epsilon1 must lie in (0, 1)");
}

Projectors projectors_from_grams(const Matrix& gram_fat, const Matrix* gram_thin, double eps1) {
  Projectors proj;
  proj.epsilon1 = eps1;
  GramSplit fat = split_gram(gram_fat, eps1);
  proj.U_tilde = std::move(fat.vectors);
  proj.fat_singular_values = std::move(fat.sigma);
  proj.sigma_max_fat = proj.fat_singular_values[0];
  if (gram_thin) {
    GramSplit thin = split_gram(*gram_thin, eps1);
    proj.R_tilde = std::move(thin.vectors);
    proj.thin_singular_values = std::move(thin.sigma);
  } else {
    proj.R_tilde = proj.U_tilde;
    proj.thin_singular_values = proj.fat_singular_values;
  }
  proj.sigma_max_thin = proj.thin_singular_values[0];
  return proj;
}

}  // namespace

FatThin assemble_fat_thin(std::span<const Matrix> blocks) {
  if (blocks.empty()) throw std::invalid_argument("assemble_fat_thin: no blocks");
  const Index rows = blocks[0].rows(), cols = blocks[0].cols();
  for (std::size_t o = 0; o < blocks.size(); ++o)
    if (blocks[o].rows() != rows || blocks[o].cols() != cols) {
      std::ostringstream msg;
      msg << "assemble_fat_thin: block " << o << " has shape " << blocks[o].rows() << "x" << blocks[o].cols()
          << ", expected " << rows << "x" << cols;
      throw std::invalid_argument(msg.str());
    }
  const Index m = Index(blocks.size());
  FatThin out;
  out.fat.resize(rows, m * cols);
  out.thin.resize(m * rows, cols);
  for (Index o = 0; o < m; ++o) {
    out.fat.middleCols(o * cols, cols) = blocks[o];
    out.thin.middleRows(o * rows, rows) = blocks[o];
  }
  return out;
}

Projectors compute_projectors(const Matrix& k_fat, const Matrix& k_thin, double eps1, bool symmetric) {
  check_eps1(eps1);
  if (k_fat.rows() != k_thin.cols()) throw std::invalid_argument("compute_projectors: fat/thin shapes disagree");
  const Matrix gram_fat = k_fat * k_fat.transpose();
  if (symmetric) return projectors_from_grams(gram_fat, nullptr, eps1);
  const Matrix gram_thin = k_thin.transpose() * k_thin;
  return projectors_from_grams(gram_fat, &gram_thin, eps1);
}

Projectors compute_projectors(std::span<const Matrix> blocks, double eps1, bool symmetric) {
  check_eps1(eps1);
  if (blocks.empty()) throw std::invalid_argument("compute_projectors: no blocks");
  const Index n = blocks[0].rows();
  Matrix gram_fat = Matrix::Zero(n, n);
  Matrix gram_thin = symmetric ? Matrix() : Matrix::Zero(blocks[0].cols(), blocks[0].cols());
  for (const auto& k : blocks) {
    if (k.rows() != n || k.cols() != blocks[0].cols())
      throw std::invalid_argument("compute_projectors: blocks differ in shape");
    gram_fat.noalias() += k * k.transpose();
    if (!symmetric) gram_thin.noalias() += k.transpose() * k;
  }
  return projectors_from_grams(gram_fat, symmetric ? nullptr : &gram_thin, eps1);
}

Matrix compress_m2l(const Matrix& k, const Projectors& proj) {
  if (k.rows() != proj.U_tilde.rows() || k.cols() != proj.R_tilde.rows())
    throw std::invalid_argument("compress_m2l: operator and projector shapes disagree");
  return proj.U_tilde.transpose() * k * proj.R_tilde;
}

void M2LBlock::apply_add(const Matrix& x, Matrix& y, double scale) const {
  if (rank == 0) return;
  if (low_rank)
    y.noalias() += scale * (u_hat * (v_hat * x));
  else
    y.noalias() += scale * (dense * x);
}

Matrix M2LBlock::to_dense() const {
  if (rank == 0) return Matrix::Zero(rows, cols);
  return low_rank ? Matrix(u_hat * v_hat) : dense;
}

std::size_t M2LBlock::bytes() const {
  return sizeof(double) * std::size_t(dense.size() + u_hat.size() + v_hat.size());
}

M2LBlock low_rank_factor(const Matrix& k_tilde, double eps2, double sigma_max_fat) {
  if (!(eps2 >= 0.0)) throw ConfigError("epsilon2 must be >= 0");
  M2LBlock b;
  b.rows = int(k_tilde.rows());
  b.cols = int(k_tilde.cols());
  Eigen::JacobiSVD<Matrix> svd(k_tilde, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double threshold = eps2 * sigma_max_fat;
  int rank = 0;
  while (rank < s.size() && s[rank] >= threshold && s[rank] > 0.0) ++rank;
  if (eps2 == 0.0) rank = int(s.size());
  b.rank = rank;
  if (rank == 0) return b;
  b.low_rank = std::size_t(rank) * (b.rows + b.cols) < std::size_t(b.rows) * b.cols;
  if (b.low_rank) {
    b.u_hat = svd.matrixU().leftCols(rank);
    b.v_hat = s.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).transpose();
  } else if (rank == s.size()) {
    b.dense = k_tilde;
  } else {
    b.dense = svd.matrixU().leftCols(rank) * s.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).transpose();
  }
  return b;
}

M2LBlock dense_block(const Matrix& k) {
  M2LBlock b;
  b.rows = int(k.rows());
  b.cols = int(k.cols());
  b.rank = int(std::min(k.rows(), k.cols()));
  b.dense = k;
  return b;
}

CompressedM2L compress_m2l_set(std::span<const Matrix> blocks, const Projectors& proj, double eps2) {
  CompressedM2L out;
  out.epsilon2 = eps2;
  out.blocks.reserve(blocks.size());
  for (const auto& k : blocks) out.blocks.push_back(low_rank_factor(compress_m2l(k, proj), eps2, proj.sigma_max_fat));
  return out;
}

double epsilon1(double c1, int depth) {
  if (!(c1 > 0.0)) throw ConfigError("C1 must be positive");
  if (depth < 1) throw ConfigError("epsilon1 needs depth >= 1");
  return c1 * std::ldexp(1.0, -depth) / depth;
}

double epsilon2(double c2, double eps1, int p_tilde) {
  if (!(c2 >= 0.0)) throw ConfigError("C2 must be >= 0");
  if (p_tilde < 1) throw ConfigError("epsilon2 needs p~ >= 1");
  return c2 * eps1 / p_tilde;
}

double scale_to_level(int level, double r0, int m) {
  return std::pow(r0 / std::ldexp(1.0, level), m);
}

CompressedPassOps transform_pass_ops(const Matrix& s, std::span<const Matrix> m, std::span<const Matrix> l,
                                     const Matrix& t, const Projectors& parent, const Projectors& child) {
  if (m.size() != 8 || l.size() != 8) throw std::invalid_argument("transform_pass_ops: need 8 M2M and 8 L2L");
  const Index n = parent.full_dim();
  if (child.full_dim() != n || s.rows() != n || t.cols() != n)
    throw std::invalid_argument("transform_pass_ops: projector dimension mismatch across levels");
  CompressedPassOps out;
  out.S_tilde = child.R_tilde.transpose() * s;
  out.T_tilde = t * child.U_tilde;
  for (int o = 0; o < 8; ++o) {
    if (m[o].rows() != n || m[o].cols() != n || l[o].rows() != n || l[o].cols() != n)
      throw std::invalid_argument("transform_pass_ops: pass operator shape mismatch");
    out.M_tilde[o] = parent.R_tilde.transpose() * m[o] * child.R_tilde;
    out.L_tilde[o] = child.U_tilde.transpose() * l[o] * parent.U_tilde;
  }
  return out;
}

CompressedPassOps transform_pass_ops(const Matrix& s, std::span<const Matrix> m, std::span<const Matrix> l,
                                     const Matrix& t, const Projectors& proj) {
  return transform_pass_ops(s, m, l, t, proj, proj);
}

}  // namespace kifmm
