#pragma once

#include <span>

#include "kifmm/kernel.hpp"
#include "kifmm/surfaces.hpp"

namespace kifmm {

/// Center and halfwidth of a cube; enough to place its surfaces.
struct CubeGeometry {
  Vec3 center = Vec3::Zero();
  double halfwidth = 1.0;
};

enum class EquivRole { upward, downward };

/// Regularised solve for equivalent densities from check potentials.
struct EquivSolver {
  Matrix equiv_to_check;   // E(i, j) = G(check_i, equiv_j)
  Matrix check_to_equiv;   // truncated-SVD pseudo-inverse of E
  Vector singular_values;  // of E, descending
  double cutoff = 1e-12;
  int rank = 0;
  EquivRole role = EquivRole::upward;

  Vector solve(const Vector& check_potentials) const { return check_to_equiv * check_potentials; }
};

/// Builds E from the two clouds and pseudo-inverts it, discarding singular
/// values below cutoff * sigma_max.
EquivSolver build_equiv_solver(const SurfaceCloud& equiv, const SurfaceCloud& check, const KernelSpec& kernel,
                               double cutoff);

/// Solvers for a cube of halfwidth r, built in the cube's local frame.
EquivSolver upward_equiv_solver(double r, const SurfaceSpec& spec, const KernelSpec& kernel, double cutoff);
EquivSolver downward_equiv_solver(double r, const SurfaceSpec& spec, const KernelSpec& kernel, double cutoff);

// Every builder below works in the local frame of the cube it is given, so
// the result depends only on (halfwidth, octant/offset, p, d, kernel) and is
// bitwise identical for any two cubes of the same size. The kernel argument
// is the surface-to-surface kernel and must not need normals.

/// Child upward-equivalent densities -> parent upward-equivalent densities.
Matrix build_m2m(const CubeGeometry& parent, int child_octant, const SurfaceSpec& spec, const KernelSpec& kernel,
                 const EquivSolver& parent_upward);
Matrix build_m2m(const CubeGeometry& parent, int child_octant, const SurfaceSpec& spec, const KernelSpec& kernel,
                 double cutoff = 1e-12);

/// Source upward-equivalent densities -> target downward-check potentials,
/// with the source cube at grid offset `offset` from the target on `level`.
Matrix build_m2l(const Index3& offset, int level, const SurfaceSpec& spec, const KernelSpec& kernel, double r0);

/// Same as build_m2l for cubes of halfwidth r.
Matrix build_m2l_for_halfwidth(const Index3& offset, double r, const SurfaceSpec& spec, const KernelSpec& kernel);

/// Parent downward-check potentials -> child downward-check potentials.
Matrix build_l2l(const CubeGeometry& parent, int child_octant, const SurfaceSpec& spec, const KernelSpec& kernel,
                 const EquivSolver& parent_downward);
Matrix build_l2l(const CubeGeometry& parent, int child_octant, const SurfaceSpec& spec, const KernelSpec& kernel,
                 double cutoff = 1e-12);

/// Leaf downward-check potentials -> potentials at targets. Targets must lie
/// strictly inside the leaf's downward-equivalent surface.
Matrix build_l2t(std::span<const Vec3> targets, const CubeGeometry& leaf, const SurfaceSpec& spec,
                 const KernelSpec& kernel, const EquivSolver& leaf_downward);

}  // namespace kifmm
