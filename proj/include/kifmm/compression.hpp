#pragma once

#include <array>
#include <span>
#include <vector>

#include "kifmm/common.hpp"

namespace kifmm {

/// Row projector U~ (range of the fat matrix) and column projector R~
/// (co-range of the thin matrix) shared by all M2L operators of a level.
struct Projectors {
  Matrix U_tilde;  // n x row_dim, orthonormal columns
  Matrix R_tilde;  // n x col_dim, orthonormal columns
  double epsilon1 = 0.0;
  double sigma_max_fat = 0.0;   // ||K_fat||_2
  double sigma_max_thin = 0.0;  // ||K_thin||_2
  Vector fat_singular_values;   // descending, from the Gram route
  Vector thin_singular_values;

  int row_dim() const { return int(U_tilde.cols()); }
  int col_dim() const { return int(R_tilde.cols()); }
  int full_dim() const { return int(U_tilde.rows()); }
};

struct FatThin {
  Matrix fat;   // n x (m n), blocks side by side
  Matrix thin;  // (m n) x n, blocks stacked
};

/// Concatenates same-shape square blocks (in offset_table() order).
FatThin assemble_fat_thin(std::span<const Matrix> blocks);

/// Projectors from explicit fat/thin matrices. Singular vectors come from
/// the eigendecomposition of the n x n Gram matrices; directions with
/// sigma >= epsilon1 * sigma_max are kept. With `symmetric`, only the fat
/// Gram matrix is decomposed and R~ = U~ (valid when the block set is closed
/// under transposition, K(o)^T = K(-o)).
Projectors compute_projectors(const Matrix& k_fat, const Matrix& k_thin, double epsilon1, bool symmetric);

/// Same result without materialising K_fat / K_thin.
Projectors compute_projectors(std::span<const Matrix> blocks, double epsilon1, bool symmetric);

/// K~ = U~^T K R~.
Matrix compress_m2l(const Matrix& k, const Projectors& proj);

/// One M2L operator in its cheapest stored form: dense K~ or U^ V^.
struct M2LBlock {
  int rows = 0;
  int cols = 0;
  int rank = 0;
  bool low_rank = false;
  Matrix dense;  // rows x cols, when !low_rank
  Matrix u_hat;  // rows x rank
  Matrix v_hat;  // rank x cols (singular values folded in)

  /// y += scale * block * x
  void apply_add(const Matrix& x, Matrix& y, double scale) const;
  Matrix to_dense() const;
  std::size_t bytes() const;
};

/// Truncated SVD of K~ at epsilon2 * sigma_max_fat. Keeps the factor pair
/// when rank*(rows+cols) < rows*cols, else keeps K~ dense. Rank 0 yields an
/// explicit zero operator.
M2LBlock low_rank_factor(const Matrix& k_tilde, double epsilon2, double sigma_max_fat);

/// Dense block without any truncation (uncompressed baseline).
M2LBlock dense_block(const Matrix& k);

struct CompressedM2L {
  std::vector<M2LBlock> blocks;  // one per offset id
  double epsilon2 = 0.0;
};

/// First and second stage applied to every block.
CompressedM2L compress_m2l_set(std::span<const Matrix> blocks, const Projectors& proj, double epsilon2);

/// epsilon1 = C1 * 2^-L / L
double epsilon1(double c1, int depth);

/// epsilon2 = C2 * epsilon1 / p~
double epsilon2(double c2, double eps1, int p_tilde);

/// (r0 / 2^level)^m: multiplier turning a unit-halfwidth operator of a
/// degree-m homogeneous kernel into the level-`level` operator.
double scale_to_level(int level, double r0, int m);

/// Upward/downward pass operators restricted to the projector subspaces.
struct CompressedPassOps {
  Matrix S_tilde;                 // R~^T S        (col_dim x n)
  std::array<Matrix, 8> M_tilde;  // R~^T M R~     (col_dim x col_dim)
  std::array<Matrix, 8> L_tilde;  // U~^T L U~     (row_dim x row_dim)
  Matrix T_tilde;                 // T U~          (n x row_dim)
};

/// S and T are the shared check-to-equivalent solves of S2M / L2T; M and L
/// hold one matrix per child octant.
CompressedPassOps transform_pass_ops(const Matrix& s, std::span<const Matrix> m, std::span<const Matrix> l,
                                     const Matrix& t, const Projectors& proj);

/// Same transform with different projectors on the two sides of M2M/L2L
/// (parent-level and child-level subspaces).
CompressedPassOps transform_pass_ops(const Matrix& s, std::span<const Matrix> m, std::span<const Matrix> l,
                                     const Matrix& t, const Projectors& parent, const Projectors& child);

}  // namespace kifmm
