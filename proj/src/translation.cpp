#include "kifmm/translation.hpp"

#include <sstream>

#include "kifmm/linalg.hpp"
#include "kifmm/octree.hpp"

namespace kifmm {

namespace {

void require_surface_kernel(const KernelSpec& kernel) {
  if (kernel.needs_normals())
    throw std::invalid_argument("surface-to-surface translations need a kernel without source normals");
}

std::vector<Vec3> local_surface(SurfaceRole role, const Vec3& center, double r, const SurfaceSpec& spec) {
  return sample_cube_surface(center, role_halfwidth(role, r, spec.d), spec.p);
}

}  // namespace

EquivSolver build_equiv_solver(const SurfaceCloud& equiv, const SurfaceCloud& check, const KernelSpec& kernel,
                               double cutoff) {
  require_surface_kernel(kernel);
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw ConfigError("equivalent-density cutoff must lie in (0, 1]");
  EquivSolver solver;
  solver.cutoff = cutoff;
  solver.role = equiv.role == SurfaceRole::downward_equivalent ? EquivRole::downward : EquivRole::upward;
  solver.equiv_to_check = kernel_matrix(check.points, equiv.points, kernel);
  TruncatedPinv pinv = [&] {
    try {
      return truncated_pinv(solver.equiv_to_check, cutoff);
    } catch (const NumericalError&) {
      throw NumericalError("equivalent-density matrix is numerically rank 0 (degenerate surfaces)");
    }
  }();
  solver.check_to_equiv = std::move(pinv.pinv);
  solver.singular_values = std::move(pinv.singular_values);
  solver.rank = pinv.rank;
  return solver;
}

EquivSolver upward_equiv_solver(double r, const SurfaceSpec& spec, const KernelSpec& kernel, double cutoff) {
  return build_equiv_solver(make_surface(SurfaceRole::upward_equivalent, Vec3::Zero(), r, spec),
                            make_surface(SurfaceRole::upward_check, Vec3::Zero(), r, spec), kernel, cutoff);
}

EquivSolver downward_equiv_solver(double r, const SurfaceSpec& spec, const KernelSpec& kernel, double cutoff) {
  return build_equiv_solver(make_surface(SurfaceRole::downward_equivalent, Vec3::Zero(), r, spec),
                            make_surface(SurfaceRole::downward_check, Vec3::Zero(), r, spec), kernel, cutoff);
}

Matrix build_m2m(const CubeGeometry& parent, int child_octant, const SurfaceSpec& spec, const KernelSpec& kernel,
                 const EquivSolver& parent_upward) {
  require_surface_kernel(kernel);
  if (child_octant < 0 || child_octant > 7) throw std::invalid_argument("build_m2m: octant must be in [0, 8)");
  const double r = parent.halfwidth;
  const Vec3 child_center = 0.5 * r * octant_direction(child_octant);
  const auto child_equiv = local_surface(SurfaceRole::upward_equivalent, child_center, 0.5 * r, spec);
  const auto parent_check = local_surface(SurfaceRole::upward_check, Vec3::Zero(), r, spec);
  return parent_upward.check_to_equiv * kernel_matrix(parent_check, child_equiv, kernel);
}

Matrix build_m2m(const CubeGeometry& parent, int child_octant, const SurfaceSpec& spec, const KernelSpec& kernel,
                 double cutoff) {
  return build_m2m(parent, child_octant, spec, kernel, upward_equiv_solver(parent.halfwidth, spec, kernel, cutoff));
}

Matrix build_m2l_for_halfwidth(const Index3& offset, double r, const SurfaceSpec& spec, const KernelSpec& kernel) {
  require_surface_kernel(kernel);
  if (offset_id(offset) < 0) {
    std::ostringstream msg;
    msg << "build_m2l: offset (" << offset[0] << "," << offset[1] << "," << offset[2]
        << ") is not in the far-offset table";
    throw std::invalid_argument(msg.str());
  }
  const Vec3 source_center = 2.0 * r * Vec3(offset[0], offset[1], offset[2]);
  const auto target_check = local_surface(SurfaceRole::downward_check, Vec3::Zero(), r, spec);
  const auto source_equiv = local_surface(SurfaceRole::upward_equivalent, source_center, r, spec);
  return kernel_matrix(target_check, source_equiv, kernel);
}

Matrix build_m2l(const Index3& offset, int level, const SurfaceSpec& spec, const KernelSpec& kernel, double r0) {
  if (level < 0 || !(r0 > 0.0)) throw std::invalid_argument("build_m2l: need level >= 0 and r0 > 0");
  return build_m2l_for_halfwidth(offset, r0 / double(1 << level), spec, kernel);
}

Matrix build_l2l(const CubeGeometry& parent, int child_octant, const SurfaceSpec& spec, const KernelSpec& kernel,
                 const EquivSolver& parent_downward) {
  require_surface_kernel(kernel);
  if (child_octant < 0 || child_octant > 7) throw std::invalid_argument("build_l2l: octant must be in [0, 8)");
  const double r = parent.halfwidth;
  const Vec3 child_center = 0.5 * r * octant_direction(child_octant);
  const auto child_check = local_surface(SurfaceRole::downward_check, child_center, 0.5 * r, spec);
  const auto parent_equiv = local_surface(SurfaceRole::downward_equivalent, Vec3::Zero(), r, spec);
  return kernel_matrix(child_check, parent_equiv, kernel) * parent_downward.check_to_equiv;
}

Matrix build_l2l(const CubeGeometry& parent, int child_octant, const SurfaceSpec& spec, const KernelSpec& kernel,
                 double cutoff) {
  return build_l2l(parent, child_octant, spec, kernel,
                   downward_equiv_solver(parent.halfwidth, spec, kernel, cutoff));
}

Matrix build_l2t(std::span<const Vec3> targets, const CubeGeometry& leaf, const SurfaceSpec& spec,
                 const KernelSpec& kernel, const EquivSolver& leaf_downward) {
  require_surface_kernel(kernel);
  const double r = leaf.halfwidth;
  const double limit = role_halfwidth(SurfaceRole::downward_equivalent, r, spec.d);
  std::vector<Vec3> local(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    local[i] = targets[i] - leaf.center;
    if (local[i].cwiseAbs().maxCoeff() >= limit) {
      std::ostringstream msg;
      msg << "build_l2t: target " << i << " lies outside the leaf's downward-equivalent surface";
      throw std::invalid_argument(msg.str());
    }
  }
  const auto equiv = local_surface(SurfaceRole::downward_equivalent, Vec3::Zero(), r, spec);
  return kernel_matrix(local, equiv, kernel) * leaf_downward.check_to_equiv;
}

}  // namespace kifmm
