#include "kifmm/oracle.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/LU>

namespace kifmm {

Vector direct_sum(std::span<const Vec3> points, const Vector& q) {
  if (std::size_t(q.size()) != points.size()) throw std::invalid_argument("direct_sum: length mismatch");
  if (points.size() > kDirectSumGuard) throw ConfigError("direct_sum: too many points for the O(N^2) oracle");
  const std::size_t n = points.size();
  Vector out = Vector::Zero(Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (points[i] - points[j]).norm();
      if (d == 0.0) {
        std::ostringstream msg;
        msg << "points " << std::min(i, j) << " and " << std::max(i, j) << " coincide";
        throw KernelDomainError(msg.str());
      }
      s += q[j] / (4.0 * kPi * d);
    }
    out[i] = s;
  }
  return out;
}

Vector direct_sum(std::span<const Vec3> targets, std::span<const Vec3> sources, const Vector& q) {
  if (std::size_t(q.size()) != sources.size()) throw std::invalid_argument("direct_sum: length mismatch");
  Vector out = Vector::Zero(Index(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const double d = (targets[i] - sources[j]).norm();
      if (d == 0.0) {
        std::ostringstream msg;
        msg << "target " << i << " coincides with source " << j;
        throw KernelDomainError(msg.str());
      }
      s += q[j] / (4.0 * kPi * d);
    }
    out[i] = s;
  }
  return out;
}

double relative_l2(const Vector& approx, const Vector& exact) {
  if (approx.size() != exact.size()) throw std::invalid_argument("relative_l2: length mismatch");
  const double den = exact.norm();
  return den == 0.0 ? (approx - exact).norm() : (approx - exact).norm() / den;
}

Matrix dense_layer_matrix(const TriMesh& mesh, const KernelSpec& kernel, const ElementQuadrature& quad) {
  if (mesh.size() > kDenseBemGuard)
    throw ConfigError("dense BEM assembly refused above " + std::to_string(kDenseBemGuard) +
                      " elements; use the FMM path");
  const Index n = Index(mesh.size());
  Matrix a(n, n);
#pragma omp parallel for schedule(dynamic)
  for (Index j = 0; j < n; ++j) {
    const Triangle t = mesh.triangle(j);
    for (Index i = 0; i < n; ++i) a(i, j) = element_integral(t, mesh.centroids[i], kernel, quad);
  }
  return a;
}

DenseSystem dense_dirichlet_system(const TriMesh& mesh, const BoundaryCondition& bc, Layer layer,
                                   const ElementQuadrature& quad) {
  if (!bc.all_dirichlet()) throw ConfigError("mixed boundary conditions: use dense_mixed_system");
  DenseSystem sys;
  if (layer == Layer::single_layer) {
    sys.A = dense_layer_matrix(mesh, KernelSpec::single_layer(), quad);
  } else {
    sys.A = dense_layer_matrix(mesh, KernelSpec::double_layer(), quad);
    sys.A.diagonal().array() -= 0.5;
  }
  sys.b = Eigen::Map<const Vector>(bc.value.data(), Index(bc.value.size()));
  return sys;
}

DenseSystem dense_mixed_system(const TriMesh& mesh, const BoundaryCondition& bc, const ElementQuadrature& quad) {
  if (!mesh.closed) throw ConfigError("mixed formulation needs a closed mesh");
  const Matrix v = dense_layer_matrix(mesh, KernelSpec::single_layer(), quad);
  Matrix k = dense_layer_matrix(mesh, KernelSpec::double_layer(), quad);
  k.diagonal().array() += 0.5;
  const Index n = Index(mesh.size());
  DenseSystem sys;
  sys.A.resize(n, n);
  sys.b = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    if (bc.kind[j] == BcKind::neumann) {
      sys.A.col(j) = k.col(j);
      sys.b += bc.value[j] * v.col(j);
    } else {
      sys.A.col(j) = -v.col(j);
      sys.b -= bc.value[j] * k.col(j);
    }
  }
  return sys;
}

Vector dense_solve(const DenseSystem& sys) {
  Eigen::FullPivLU<Matrix> lu(sys.A);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) {
    std::ostringstream msg;
    msg << "dense system is singular (rank " << lu.rank() << " of " << sys.A.rows() << ")";
    throw NumericalError(msg.str());
  }
  return lu.solve(sys.b);
}

Vector dense_bem_solve(const TriMesh& mesh, const BoundaryCondition& bc, Layer layer, const ElementQuadrature& quad) {
  if (mesh.size() > kDenseBemGuard)
    throw ConfigError("dense BEM solve refused above " + std::to_string(kDenseBemGuard) +
                      " elements; use the FMM path");
  if (bc.size() != mesh.size()) throw ConfigError("boundary condition size does not match the mesh");
  return dense_solve(bc.all_dirichlet() ? dense_dirichlet_system(mesh, bc, layer, quad)
                                        : dense_mixed_system(mesh, bc, quad));
}

double solid_angle(const Triangle& t, const Vec3& x) {
  const Vec3 r1 = t.a - x, r2 = t.b - x, r3 = t.c - x;
  const double n1 = r1.norm(), n2 = r2.norm(), n3 = r3.norm();
  const double num = r1.dot(r2.cross(r3));
  const double den = n1 * n2 * n3 + r1.dot(r2) * n3 + r1.dot(r3) * n2 + r2.dot(r3) * n1;
  return 2.0 * std::atan2(num, den);
}

namespace {

double duffy_at(const Vec3& x, const Vec3& b, const Vec3& c, const QuadRule& line_rule) {
  // y = x + u (b - x) + u v (c - b); the Jacobian u cancels 1/r at x.
  const double jac2 = (b - x).cross(c - x).norm();
  if (jac2 == 0.0) return 0.0;
  double s = 0.0;
  for (int k = 0; k < line_rule.size(); ++k) {
    const double u = line_rule.points[k][0], v = line_rule.points[k][1], w = line_rule.weights[k];
    const Vec3 y = x + u * (b - x) + u * v * (c - b);
    s += w * u / (y - x).norm();
  }
  return s * jac2 / (4.0 * kPi);
}

QuadRule square_rule(int n) {
  std::vector<double> g, w;
  gauss_legendre01(n, g, w);
  QuadRule r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      r.points.push_back({g[i], g[j]});
      r.weights.push_back(w[i] * w[j]);
    }
  return r;
}

double nested_single(const Triangle& t, const Vec3& x, const QuadRule& rule, int depth) {
  if (depth >= 16 || point_triangle_distance(x, t) > 3.0 * t.diameter())
    return integrate(t, rule, [&](const Vec3& y) { return 1.0 / (4.0 * kPi * (x - y).norm()); });
  const Vec3 ab = 0.5 * (t.a + t.b), bc = 0.5 * (t.b + t.c), ca = 0.5 * (t.c + t.a);
  return nested_single({t.a, ab, ca}, x, rule, depth + 1) + nested_single({ab, t.b, bc}, x, rule, depth + 1) +
         nested_single({ca, bc, t.c}, x, rule, depth + 1) + nested_single({ab, bc, ca}, x, rule, depth + 1);
}

}  // namespace

double oracle_element_integral(const Triangle& tri, const Vec3& x, const KernelSpec& kernel, int order) {
  if (kernel.layer == Layer::double_layer) return -solid_angle(tri, x) / (4.0 * kPi);
  const Vec3 n = tri.unit_normal();
  const double h = (x - tri.a).dot(n);
  if (std::abs(h) <= 1e-12 * tri.diameter()) {
    // barycentric test in the plane
    const Vec3 v0 = tri.b - tri.a, v1 = tri.c - tri.a, v2 = x - tri.a;
    const double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1), d20 = v2.dot(v0), d21 = v2.dot(v1);
    const double den = d00 * d11 - d01 * d01;
    const double l1 = (d11 * d20 - d01 * d21) / den, l2 = (d00 * d21 - d01 * d20) / den;
    if (l1 >= 0.0 && l2 >= 0.0 && l1 + l2 <= 1.0) {
      const QuadRule rule = square_rule(order);
      return duffy_at(x, tri.a, tri.b, rule) + duffy_at(x, tri.b, tri.c, rule) + duffy_at(x, tri.c, tri.a, rule);
    }
  }
  return nested_single(tri, x, collapsed_gauss(order), 0);
}

}  // namespace kifmm
