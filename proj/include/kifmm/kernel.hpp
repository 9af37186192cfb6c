#pragma once

#include <cmath>
#include <span>

#include "kifmm/common.hpp"

namespace kifmm {

enum class Layer { single_layer, double_layer };

/// Describes which Laplace layer kernel is in use and how it scales.
///
/// G(a*x, a*y) = a^homogeneity_degree * G(x, y). The FMM relies on this to
/// reuse one set of unit-halfwidth operators on every level.
struct KernelSpec {
  Layer layer = Layer::single_layer;
  int homogeneity_degree = -1;
  bool symmetric = true;

  static KernelSpec single_layer() { return {Layer::single_layer, -1, true}; }
  static KernelSpec double_layer() { return {Layer::double_layer, -2, false}; }

  bool needs_normals() const { return layer == Layer::double_layer; }
  bool homogeneous() const { return true; }
  const char* name() const { return layer == Layer::single_layer ? "single" : "double"; }
};

// Unchecked kernel functors used in inner loops. Callers guarantee x != y.
struct SingleLayerKernel {
  double operator()(const Vec3& x, const Vec3& y, const Vec3& /*n_y*/) const {
    return 1.0 / (4.0 * kPi * (x - y).norm());
  }
};

struct DoubleLayerKernel {
  double operator()(const Vec3& x, const Vec3& y, const Vec3& n_y) const {
    const Vec3 r = x - y;
    const double d = r.norm();
    return r.dot(n_y) / (4.0 * kPi * d * d * d);
  }
};

/// Calls f with the unchecked functor matching spec.layer, so hot loops get
/// an inlined kernel. New kernels plug in here.
template <class F>
decltype(auto) with_kernel(const KernelSpec& spec, F&& f) {
  switch (spec.layer) {
    case Layer::double_layer:
      return f(DoubleLayerKernel{});
    case Layer::single_layer:
    default:
      return f(SingleLayerKernel{});
  }
}

/// 1/(4 pi |x-y|). Throws KernelDomainError for coincident points.
double eval_single(const Vec3& x, const Vec3& y);

/// ((x-y).n_y) / (4 pi |x-y|^3). n_y must be a unit vector.
double eval_double(const Vec3& x, const Vec3& y, const Vec3& n_y);

/// Uniform entry point: value of the kernel given target, source and an
/// optional source normal (required for the double layer).
double evaluate(const KernelSpec& spec, const Vec3& x, const Vec3& y, const Vec3* n_y = nullptr);

/// Dense interaction matrix, entry (i, j) = G(targets[i], sources[j]).
/// Pairs closer than 1e-14 * (scene diameter) raise KernelDomainError naming
/// the pair.
Matrix kernel_matrix(std::span<const Vec3> targets, std::span<const Vec3> sources, const KernelSpec& spec,
                     std::span<const Vec3> normals = {});

/// Throws std::invalid_argument unless |n| = 1 within 1e-12.
void require_unit_normal(const Vec3& n);

}  // namespace kifmm
