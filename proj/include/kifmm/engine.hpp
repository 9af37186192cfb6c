#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "kifmm/compression.hpp"
#include "kifmm/kernel.hpp"
#include "kifmm/mesh.hpp"
#include "kifmm/octree.hpp"
#include "kifmm/quadrature.hpp"
#include "kifmm/surfaces.hpp"

namespace kifmm {

enum class SourceMode { particle, bem };

struct FmmConfig {
  int p = 6;
  int s_max = 100;
  double C1 = 0.1;
  double C2 = 10.0;
  double C_d = 0.5;          // BEM: d = C_d / sqrt(s_max)
  double d_particle = 0.1;   // particle-mode surface offset
  double pinv_cutoff = 1e-12;
  bool near_cache = false;   // particle mode: store near blocks at plan time
  bool compress = true;      // false: dense M2L, no projectors
  std::optional<double> epsilon1;  // overrides C1 * 2^-L / L
  bool per_level_operators = false;  // build operators natively on every level
  bool enclose_elements = false;     // BEM: grow d until leaf elements are enclosed
  double pad = 1e-6;
  ElementQuadrature quadrature{};

  /// Throws ConfigError on violations.
  void validate() const;
};

/// Operators for one cube size. For homogeneous kernels one set built at
/// unit halfwidth serves every level.
struct OperatorSet {
  double halfwidth = 1.0;
  Projectors proj;
  CompressedM2L m2l;
  Matrix S_tilde;                 // R~^T E_up^+
  Matrix T_tilde;                 // E_down^+ U~
  std::array<Matrix, 8> M_tilde;  // this level -> parent level
  std::array<Matrix, 8> L_tilde;  // parent level -> this level
  std::vector<Vec3> up_equiv;     // around the origin, at `halfwidth`
  std::vector<Vec3> up_check;
  std::vector<Vec3> down_equiv;

  int row_dim() const { return proj.row_dim(); }
  int col_dim() const { return proj.col_dim(); }
  std::size_t bytes() const;
};

struct LevelOperators {
  std::shared_ptr<const OperatorSet> ops;
  double halfwidth = 0.0;
  double m2l_scale = 1.0;
  double s2m_scale = 1.0;
  double l2t_scale = 1.0;
  double surface_ratio = 1.0;  // halfwidth / ops->halfwidth
  // M2L (target position, source position) pairs per offset id
  std::vector<std::vector<std::pair<int, int>>> m2l_pairs;
  // (position on this level, parent position) pairs per child octant
  std::array<std::vector<std::pair<int, int>>, 8> child_pairs;
};

struct PhaseTimings {
  double upward = 0.0;
  double m2l = 0.0;
  double downward = 0.0;
  double near = 0.0;
  double total = 0.0;
};

/// Translation operators of every level; shared between plans over the
/// same tree.
struct FarFieldOperators {
  std::vector<std::shared_ptr<const OperatorSet>> sets;
  std::vector<LevelOperators> levels;
};

/// Per-level compressed upward equivalent densities; column j belongs to
/// tree.level(l)[j].
struct UpwardState {
  std::vector<Matrix> levels;
};

class FmmPlan {
 public:
  /// Point sources and targets (the same set).
  static FmmPlan particles(std::span<const Vec3> points, const FmmConfig& config,
                           const KernelSpec& kernel = KernelSpec::single_layer());
  /// Piecewise-constant element sources, collocation at centroids.
  static FmmPlan bem(const TriMesh& mesh, const FmmConfig& config, const KernelSpec& kernel);
  /// BEM plan for another layer kernel over the same mesh, reusing the tree
  /// and translation operators of `base`.
  static FmmPlan bem_sharing(const FmmPlan& base, const KernelSpec& kernel);

  std::size_t size() const { return n_; }
  SourceMode mode() const { return mode_; }
  const KernelSpec& kernel() const { return kernel_; }
  const FmmConfig& config() const { return config_; }
  const Octree& tree() const { return *tree_; }
  const SurfaceSpec& surface() const { return surface_; }
  double epsilon1() const { return epsilon1_; }
  double epsilon2() const { return epsilon2_; }
  const LevelOperators& level_ops(int l) const { return far_->levels[l]; }
  /// Number of distinct operator sets (1 for the homogeneous path).
  std::size_t operator_set_count() const { return far_->sets.size(); }

  /// Far + near.
  Vector apply(const Vector& q, PhaseTimings* timings = nullptr) const;
  UpwardState upward_pass(const Vector& q) const;
  /// Far-field potentials (M2L, L2L, L2T).
  Vector downward_pass(const UpwardState& up, PhaseTimings* timings = nullptr) const;
  Vector near_pass(const Vector& q) const;

  /// Bytes of stored operators: translation sets, cached leaf matrices and
  /// near blocks. Operators borrowed from another plan are not counted.
  std::size_t memory_estimate() const;
  /// memory_estimate plus tree, interaction tables and point storage.
  std::size_t footprint_bytes() const;

  /// Upward equivalent densities at level l, expanded from the projector
  /// subspace and scaled to physical units, with the surface points.
  void equivalent_densities(const UpwardState& up, int level, int position, std::vector<Vec3>& points,
                            Vector& densities) const;

 private:
  FmmPlan() = default;
  void check_length(const Vector& q) const;
  void init_far_field();
  void build_near_cache();
  void build_bem_s2m_cache();
  void build_bem_l2t_cache();
  void check_coincident() const;
  void sort_points();
  Matrix s2m(const Vector& q) const;
  void l2t(const Matrix& leaf_local, Vector& out) const;

  SourceMode mode_ = SourceMode::particle;
  KernelSpec kernel_;
  FmmConfig config_;
  SurfaceSpec surface_;
  double epsilon1_ = 0.0;
  double epsilon2_ = 0.0;
  std::size_t n_ = 0;
  std::vector<Vec3> points_;  // particle positions or element centroids
  Eigen::ArrayXd sx_, sy_, sz_;  // points_ in tree order
  std::shared_ptr<const TriMesh> mesh_;
  std::shared_ptr<const Octree> tree_;
  std::shared_ptr<const FarFieldOperators> far_;
  // per leaf position: cached S2M (col_dim x members) and L2T (members x row_dim)
  std::shared_ptr<const std::vector<Matrix>> leaf_s2m_;
  std::shared_ptr<const std::vector<Matrix>> leaf_l2t_;
  bool borrowed_far_ = false;  // far_ and leaf_l2t_ belong to another plan
  // per leaf position: near block (members x concatenated near members)
  std::vector<Matrix> near_blocks_;
};

/// Builds the operator set for cubes of halfwidth h, with M2M/L2L
/// conjugated by its own projectors on both sides.
std::shared_ptr<OperatorSet> build_operator_set(double halfwidth, const SurfaceSpec& surface,
                                                const KernelSpec& surface_kernel, const FmmConfig& config,
                                                double epsilon1);

/// Smallest relative offset d for which every leaf element lies inside the
/// leaf's upward-equivalent surface.
double required_element_offset(const Octree& tree, const TriMesh& mesh);

}  // namespace kifmm
