#include "kifmm/bem.hpp"

#include <chrono>

namespace kifmm {

Vector s2m_bem(std::span<const int> elements, const TriMesh& mesh, const Vector& q, std::span<const Vec3> points,
               const KernelSpec& kernel, const ElementQuadrature& quad) {
  Vector out = Vector::Zero(Index(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i)
    for (int e : elements)
      if (q[e] != 0.0) out[i] += q[e] * element_integral(mesh.triangle(e), points[i], kernel, quad);
  return out;
}

BemSystem assemble_dirichlet_system(const TriMesh& mesh, const BoundaryCondition& bc, const FmmPlan& plan) {
  if (bc.size() != mesh.size()) throw ConfigError("boundary condition size does not match the mesh");
  if (!bc.all_dirichlet()) throw ConfigError("mixed boundary conditions: use assemble_mixed_system");
  if (plan.mode() != SourceMode::bem || plan.size() != mesh.size())
    throw ConfigError("Dirichlet system needs a BEM plan over the same mesh");
  BemSystem sys;
  sys.rhs = Eigen::Map<const Vector>(bc.value.data(), Index(bc.value.size()));
  if (plan.kernel().layer == Layer::single_layer)
    sys.op = [&plan](const Vector& x) { return plan.apply(x); };
  else
    sys.op = [&plan](const Vector& x) { return Vector(plan.apply(x) - 0.5 * x); };
  return sys;
}

namespace {

void split(const BoundaryCondition& bc, const Vector& x, Vector& on_neumann, Vector& on_dirichlet) {
  const Index n = x.size();
  on_neumann = Vector::Zero(n);
  on_dirichlet = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) (bc.kind[i] == BcKind::neumann ? on_neumann : on_dirichlet)[i] = x[i];
}

}  // namespace

BemSystem assemble_mixed_system(const TriMesh& mesh, const BoundaryCondition& bc, const FmmPlan& single,
                                const FmmPlan& dbl) {
  if (!mesh.closed) throw ConfigError("mixed formulation needs a closed mesh");
  if (bc.size() != mesh.size()) throw ConfigError("boundary condition size does not match the mesh");
  if (single.kernel().layer != Layer::single_layer || dbl.kernel().layer != Layer::double_layer)
    throw ConfigError("mixed system needs a single-layer and a double-layer plan");
  if (single.size() != mesh.size() || dbl.size() != mesh.size())
    throw ConfigError("plans do not match the mesh");
  BemSystem sys;
  sys.op = [&bc, &single, &dbl](const Vector& x) {
    Vector zu, zq;
    split(bc, x, zu, zq);
    return Vector(0.5 * zu + dbl.apply(zu) - single.apply(zq));
  };
  const Vector known = Eigen::Map<const Vector>(bc.value.data(), Index(bc.value.size()));
  Vector qbar, ubar;
  split(bc, known, qbar, ubar);
  sys.rhs = single.apply(qbar) - 0.5 * ubar - dbl.apply(ubar);
  return sys;
}

void mixed_traces(const BoundaryCondition& bc, const Vector& x, Vector& u, Vector& q) {
  const Index n = x.size();
  u.resize(n);
  q.resize(n);
  for (Index i = 0; i < n; ++i) {
    if (bc.kind[i] == BcKind::dirichlet) {
      u[i] = bc.value[i];
      q[i] = x[i];
    } else {
      u[i] = x[i];
      q[i] = bc.value[i];
    }
  }
}

BemSolution solve_bem(const TriMesh& mesh, const BoundaryCondition& bc, const FmmConfig& config,
                      const GmresOptions& options, Layer dirichlet_layer) {
  BemSolution sol;
  const auto t0 = std::chrono::steady_clock::now();
  auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  if (bc.all_dirichlet()) {
    const KernelSpec k =
        dirichlet_layer == Layer::single_layer ? KernelSpec::single_layer() : KernelSpec::double_layer();
    auto owned = std::make_shared<const FmmPlan>(FmmPlan::bem(mesh, config, k));
    const FmmPlan& plan = *owned;
    sol.plan = owned;
    sol.setup_seconds = seconds();
    sol.memory_bytes = plan.memory_estimate();
    const BemSystem sys = assemble_dirichlet_system(mesh, bc, plan);
    GmresResult r = gmres(sys.op, sys.rhs, options);
    sol.x = std::move(r.x);
    sol.stats = std::move(r.stats);
    sol.u = sys.rhs;
    if (dirichlet_layer == Layer::single_layer) sol.q = sol.x;
    return sol;
  }
  auto owned = std::make_shared<const FmmPlan>(FmmPlan::bem(mesh, config, KernelSpec::single_layer()));
  const FmmPlan& single = *owned;
  sol.plan = owned;
  const FmmPlan dbl = FmmPlan::bem_sharing(single, KernelSpec::double_layer());
  sol.setup_seconds = seconds();
  sol.memory_bytes = single.memory_estimate() + dbl.memory_estimate();
  const BemSystem sys = assemble_mixed_system(mesh, bc, single, dbl);
  GmresResult r = gmres(sys.op, sys.rhs, options);
  sol.x = std::move(r.x);
  sol.stats = std::move(r.stats);
  mixed_traces(bc, sol.x, sol.u, sol.q);
  return sol;
}

}  // namespace kifmm
