#pragma once

#include <array>
#include <atomic>
#include <vector>

#include "kifmm/kernel.hpp"
#include "kifmm/mesh.hpp"

namespace kifmm {

/// Rule on the reference triangle (0,0), (1,0), (0,1); weights sum to 1/2.
struct QuadRule {
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
  int size() const { return int(weights.size()); }
};

/// Symmetric 6-point rule, exact for degree 4.
const QuadRule& triangle_rule6();
/// One-point centroid rule.
const QuadRule& triangle_rule1();
/// Collapsed (Duffy) tensor Gauss-Legendre rule with n^2 points.
QuadRule collapsed_gauss(int n);

/// Gauss-Legendre nodes/weights on [0, 1].
void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w);

/// Applies a reference rule to a physical triangle: sum_k w_k * 2A * f(y_k).
template <class F>
double integrate(const Triangle& t, const QuadRule& rule, F&& f) {
  const Vec3 e1 = t.b - t.a, e2 = t.c - t.a;
  const double jac = e1.cross(e2).norm();
  double s = 0.0;
  for (int k = 0; k < rule.size(); ++k) s += rule.weights[k] * f(Vec3(t.a + rule.points[k][0] * e1 + rule.points[k][1] * e2));
  return s * jac;
}

/// Euclidean distance from x to the closed triangle.
double point_triangle_distance(const Vec3& x, const Triangle& t);

/// Strategy for integrating a kernel over one flat element.
struct ElementQuadrature {
  const QuadRule* rule = &triangle_rule6();
  double theta = 2.0;  // regular rule when dist > theta * diam
  int max_depth = 10;  // subdivision cap
};

/// Number of times the subdivision cap was reached since the last reset.
std::atomic<long>& subdivision_cap_hits();

/// Integral over the element of G(x, y) dy (single layer) or of
/// dG/dn_y(x, y) dy (double layer, n the element normal). Points in the
/// element plane and inside it use the closed form (single layer) or give 0
/// (double layer); far points use the rule; the rest subdivide.
double element_integral(const Triangle& tri, const Vec3& x, const KernelSpec& kernel,
                        const ElementQuadrature& quad = {});

/// Closed-form integral of 1/(4 pi |x - y|) over a triangle for x in its
/// plane.
double coplanar_single_layer(const Triangle& tri, const Vec3& x);

}  // namespace kifmm
