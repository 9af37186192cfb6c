#pragma once

#include <span>

#include "kifmm/kernel.hpp"
#include "kifmm/mesh.hpp"
#include "kifmm/quadrature.hpp"

namespace kifmm {

inline constexpr std::size_t kDenseBemGuard = 5000;
inline constexpr std::size_t kDirectSumGuard = 200000;

/// p_i = sum_{j != i} G(x_i, x_j) q_j by the plain double loop.
Vector direct_sum(std::span<const Vec3> points, const Vector& q);
/// p_i = sum_j G(t_i, s_j) q_j; coincident pairs raise KernelDomainError.
Vector direct_sum(std::span<const Vec3> targets, std::span<const Vec3> sources, const Vector& q);

double relative_l2(const Vector& approx, const Vector& exact);

struct DenseSystem {
  Matrix A;
  Vector b;
};

/// A(i, j) = element_integral(element j, centroid i), with the same
/// quadrature as the FMM near field.
Matrix dense_layer_matrix(const TriMesh& mesh, const KernelSpec& kernel, const ElementQuadrature& quad = {});

/// Dense counterpart of the matrix-free BEM systems.
DenseSystem dense_dirichlet_system(const TriMesh& mesh, const BoundaryCondition& bc,
                                   Layer layer = Layer::single_layer, const ElementQuadrature& quad = {});
DenseSystem dense_mixed_system(const TriMesh& mesh, const BoundaryCondition& bc, const ElementQuadrature& quad = {});

/// Full-pivot LU solve; a rank-deficient matrix raises NumericalError.
Vector dense_solve(const DenseSystem& sys);

/// Dense direct BEM solve (Dirichlet system if all conditions are Dirichlet,
/// mixed otherwise). Meshes above kDenseBemGuard elements are refused.
Vector dense_bem_solve(const TriMesh& mesh, const BoundaryCondition& bc, Layer layer = Layer::single_layer,
                       const ElementQuadrature& quad = {});

/// Signed solid angle of the triangle seen from x (Van Oosterom-Strackee).
double solid_angle(const Triangle& t, const Vec3& x);

/// Independent high-accuracy element integral: Duffy-collapsed Gauss rules
/// on the three sub-triangles around x when x lies in the element, nested
/// subdivision with a high-order rule otherwise; the double layer uses the
/// closed-form solid angle.
double oracle_element_integral(const Triangle& tri, const Vec3& x, const KernelSpec& kernel, int order = 24);

}  // namespace kifmm
