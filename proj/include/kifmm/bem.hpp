#pragma once

#include <memory>
#include <span>

#include "kifmm/engine.hpp"
#include "kifmm/gmres.hpp"
#include "kifmm/mesh.hpp"
#include "kifmm/quadrature.hpp"

namespace kifmm {

/// Potentials at `points` from piecewise-constant densities on the listed
/// elements.
Vector s2m_bem(std::span<const int> elements, const TriMesh& mesh, const Vector& q, std::span<const Vec3> points,
               const KernelSpec& kernel, const ElementQuadrature& quad = {});

/// Matrix-free square system A x = rhs.
struct BemSystem {
  LinearOperator op;
  Vector rhs;
};

/// First-kind single-layer system V q = f (plan kernel single layer), or the
/// second-kind double-layer system (-1/2 I + K) mu = f (plan kernel double
/// layer). Collocation at centroids.
BemSystem assemble_dirichlet_system(const TriMesh& mesh, const BoundaryCondition& bc, const FmmPlan& plan);

/// Direct formulation 1/2 u + K u = V q with unknown q on Dirichlet elements
/// and unknown u on Neumann elements. Requires a closed mesh.
BemSystem assemble_mixed_system(const TriMesh& mesh, const BoundaryCondition& bc, const FmmPlan& single,
                                const FmmPlan& dbl);

/// Splits a mixed-system solution into full potential and flux vectors.
void mixed_traces(const BoundaryCondition& bc, const Vector& x, Vector& u, Vector& q);

struct BemSolution {
  Vector x;  // unknown per element
  Vector u;  // potential trace (mixed solves)
  Vector q;  // flux trace (mixed solves)
  IterationStats stats;
  double setup_seconds = 0.0;
  std::size_t memory_bytes = 0;
  std::shared_ptr<const FmmPlan> plan;  // single-layer plan, or the Dirichlet plan
};

/// Builds the plans and runs GMRES. All-Dirichlet input with the single or
/// double layer uses the Dirichlet system; anything else the mixed system.
BemSolution solve_bem(const TriMesh& mesh, const BoundaryCondition& bc, const FmmConfig& config,
                      const GmresOptions& options, Layer dirichlet_layer = Layer::single_layer);

}  // namespace kifmm
