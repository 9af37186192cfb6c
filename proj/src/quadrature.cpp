#include "kifmm/quadrature.hpp"

#include <cmath>

namespace kifmm {

const QuadRule& triangle_rule6() {
  static const QuadRule rule = [] {
    QuadRule r;
    const double a = 0.445948490915965, wa = 0.223381589678011 / 2.0;
    const double b = 0.091576213509771, wb = 0.109951743655322 / 2.0;
    r.points = {{a, a}, {1 - 2 * a, a}, {a, 1 - 2 * a}, {b, b}, {1 - 2 * b, b}, {b, 1 - 2 * b}};
    r.weights = {wa, wa, wa, wb, wb, wb};
    return r;
  }();
  return rule;
}

const QuadRule& triangle_rule1() {
  static const QuadRule rule{{{1.0 / 3.0, 1.0 / 3.0}}, {0.5}};
  return rule;
}

void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre01: n must be >= 1");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double wt = 2.0 / ((1.0 - z * z) * dp * dp);
    x[i] = 0.5 * (1.0 - z);
    x[n - 1 - i] = 0.5 * (1.0 + z);
    w[i] = w[n - 1 - i] = 0.5 * wt;
  }
}

QuadRule collapsed_gauss(int n) {
  std::vector<double> x, w;
  gauss_legendre01(n, x, w);
  QuadRule r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      r.points.push_back({x[i], x[j] * (1.0 - x[i])});
      r.weights.push_back(w[i] * w[j] * (1.0 - x[i]));
    }
  return r;
}

double point_triangle_distance(const Vec3& p, const Triangle& t) {
  const Vec3 &a = t.a, &b = t.b, &c = t.c;
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return ap.norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return bp.norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return cp.norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

std::atomic<long>& subdivision_cap_hits() {
  static std::atomic<long> hits{0};
  return hits;
}

double coplanar_single_layer(const Triangle& tri, const Vec3& x) {
  const Vec3 n = tri.unit_normal();
  const Vec3 v[3] = {tri.a, tri.b, tri.c};
  const double tiny = 1e-14 * tri.diameter();
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Vec3& a = v[k];
    const Vec3& b = v[(k + 1) % 3];
    const Vec3 u = (b - a).normalized();
    const Vec3 m = u.cross(n);
    const double h = (a - x).dot(m);
    if (std::abs(h) <= tiny) continue;
    const double ta = (a - x).dot(u), tb = (b - x).dot(u);
    s += h * (std::asinh(tb / std::abs(h)) - std::asinh(ta / std::abs(h)));
  }
  return s / (4.0 * kPi);
}

namespace {

template <class K>
double rule_integral(const Triangle& t, const Vec3& x, const Vec3& n, const QuadRule& rule, K kernel) {
  return integrate(t, rule, [&](const Vec3& y) { return kernel(x, y, n); });
}

template <class K>
double subdivide(const Triangle& t, const Vec3& x, const Vec3& n, const ElementQuadrature& q, int depth, K kernel) {
  if (point_triangle_distance(x, t) > q.theta * t.diameter()) return rule_integral(t, x, n, *q.rule, kernel);
  if (depth >= q.max_depth) {
    subdivision_cap_hits().fetch_add(1, std::memory_order_relaxed);
    return rule_integral(t, x, n, *q.rule, kernel);
  }
  const Vec3 ab = 0.5 * (t.a + t.b), bc = 0.5 * (t.b + t.c), ca = 0.5 * (t.c + t.a);
  return subdivide(Triangle{t.a, ab, ca}, x, n, q, depth + 1, kernel) +
         subdivide(Triangle{ab, t.b, bc}, x, n, q, depth + 1, kernel) +
         subdivide(Triangle{ca, bc, t.c}, x, n, q, depth + 1, kernel) +
         subdivide(Triangle{ab, bc, ca}, x, n, q, depth + 1, kernel);
}

}  // namespace

double element_integral(const Triangle& tri, const Vec3& x, const KernelSpec& kernel, const ElementQuadrature& quad) {
  const Vec3 n = tri.unit_normal();
  const double diam = tri.diameter();
  if (std::abs((x - tri.a).dot(n)) <= 1e-8 * diam)
    return kernel.layer == Layer::single_layer ? coplanar_single_layer(tri, x) : 0.0;
  return with_kernel(kernel, [&](auto k) { return subdivide(tri, x, n, quad, 0, k); });
}

}  // namespace kifmm
