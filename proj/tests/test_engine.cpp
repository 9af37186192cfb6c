#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "kifmm/engine.hpp"
#include "kifmm/oracle.hpp"
#include "support.hpp"

using namespace kifmm;
using testing::uniform_cube;
using testing::uniform_vector;

namespace {

FmmConfig small_config(int p = 6, int s_max = 20) {
  FmmConfig c;
  c.p = p;
  c.s_max = s_max;
  return c;
}

}  // namespace

TEST_CASE("particle plan structure and determinism") {
  const auto pts = uniform_cube(1000, 1);
  const FmmPlan plan = FmmPlan::particles(pts, small_config());
  CHECK(plan.size() == 1000);
  CHECK(plan.mode() == SourceMode::particle);
  for (int id : plan.tree().leaves()) CHECK(plan.tree().cube(id).size() <= 20);
  CHECK(plan.operator_set_count() == 1);
  CHECK(plan.epsilon1() == doctest::Approx(epsilon1(0.1, plan.tree().depth())));
  CHECK(plan.level_ops(2).ops->row_dim() < plan.surface().n_points());
  CHECK(plan.memory_estimate() > 0);
  CHECK(plan.footprint_bytes() > plan.memory_estimate());

  const Vector q = uniform_vector(1000, 2);
  const Vector a = plan.apply(q);
  const Vector b = plan.apply(q);
  CHECK((a.array() == b.array()).all());
  const FmmPlan again = FmmPlan::particles(pts, small_config());
  CHECK((again.apply(q).array() == a.array()).all());

  PhaseTimings t;
  plan.apply(q, &t);
  CHECK(t.total >= t.m2l);
  CHECK(t.total > 0.0);
}

TEST_CASE("two points") {
  // the points sit on opposite corners of the root, so the pair is far field
  const std::vector<Vec3> pts{Vec3(0.1, 0.1, 0.1), Vec3(0.2, 0.1, 0.1)};
  FmmConfig cfg = small_config();
  cfg.compress = false;
  const Vector p = FmmPlan::particles(pts, cfg).apply(Vector::Ones(2));
  CHECK(p[0] == doctest::Approx(1.0 / (4 * kPi * 0.1)).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(1.0 / (4 * kPi * 0.1)).epsilon(1e-5));
}

TEST_CASE("a pair sharing a leaf is exact") {
  auto pts = uniform_cube(200, 30);
  pts.push_back(Vec3(0.5001, 0.5001, 0.5001));
  pts.push_back(Vec3(0.5101, 0.5001, 0.5001));
  Vector q = Vector::Zero(202);
  q[200] = q[201] = 1.0;
  const FmmPlan plan = FmmPlan::particles(pts, small_config());
  bool shared = false;
  for (int id : plan.tree().leaves()) {
    const auto m = plan.tree().members(plan.tree().cube(id));
    shared |= std::count(m.begin(), m.end(), 200) && std::count(m.begin(), m.end(), 201);
  }
  REQUIRE(shared);
  const Vector p = plan.apply(q);
  CHECK(p[200] == doctest::Approx(1.0 / (4 * kPi * 0.01)).epsilon(1e-14));
  CHECK(p[201] == doctest::Approx(1.0 / (4 * kPi * 0.01)).epsilon(1e-14));
}

TEST_CASE("linearity and zero input") {
  const auto pts = uniform_cube(2000, 3);
  const FmmPlan plan = FmmPlan::particles(pts, small_config(4, 30));
  const Vector q1 = uniform_vector(2000, 4, -1, 1), q2 = uniform_vector(2000, 5, -1, 1);
  const Vector lhs = plan.apply(2.5 * q1 - 0.75 * q2);
  const Vector rhs = 2.5 * plan.apply(q1) - 0.75 * plan.apply(q2);
  CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());

  const UpwardState up = plan.upward_pass(Vector::Zero(2000));
  for (const Matrix& m : up.levels) CHECK((m.array() == 0.0).all());
  CHECK((plan.apply(Vector::Zero(2000)).array() == 0.0).all());
}

TEST_CASE("near plus far is the full product") {
  const auto pts = uniform_cube(3000, 6);
  const FmmPlan plan = FmmPlan::particles(pts, small_config(4, 40));
  const Vector q = uniform_vector(3000, 7);
  const Vector split = plan.near_pass(q) + plan.downward_pass(plan.upward_pass(q));
  const Vector full = plan.apply(q);
  CHECK((split - full).norm() <= 1e-15 * full.norm());
}

TEST_CASE("root equivalent densities reproduce the far field") {
  const auto pts = uniform_cube(1500, 8);
  const Vector q = uniform_vector(1500, 9);
  std::vector<Vec3> far;
  for (const Vec3& d : testing::uniform_sphere(20, 10)) far.push_back(Vec3(0.5, 0.5, 0.5) + 4.0 * d);
  const Vector exact = direct_sum(far, pts, q);

  FmmConfig cfg = small_config(8, 60);
  cfg.compress = false;
  const FmmPlan plan = FmmPlan::particles(pts, cfg);
  const UpwardState up = plan.upward_pass(q);
  std::vector<Vec3> eq;
  Vector dens;
  plan.equivalent_densities(up, 0, 0, eq, dens);
  CHECK(int(eq.size()) == plan.surface().n_points());
  const double err = relative_l2(kernel_matrix(far, eq, KernelSpec::single_layer()) * dens, exact);
  MESSAGE("root reproduction error " << err);
  CHECK(err <= 1e-6);

  // compressed densities live in the projector subspace
  cfg.compress = true;
  const FmmPlan cplan = FmmPlan::particles(pts, cfg);
  cplan.equivalent_densities(cplan.upward_pass(q), 0, 0, eq, dens);
  CHECK(relative_l2(kernel_matrix(far, eq, KernelSpec::single_layer()) * dens, exact) <= 1e-3);
}

TEST_CASE("permutation invariance") {
  const auto pts = uniform_cube(2000, 11);
  const Vector q = uniform_vector(2000, 12);
  std::vector<int> perm(2000);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(13));
  std::vector<Vec3> pp(2000);
  Vector qp(2000);
  for (int i = 0; i < 2000; ++i) {
    pp[i] = pts[perm[i]];
    qp[i] = q[perm[i]];
  }
  const Vector a = FmmPlan::particles(pts, small_config(4, 30)).apply(q);
  const Vector b = FmmPlan::particles(pp, small_config(4, 30)).apply(qp);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) worst = std::max(worst, std::abs(b[i] - a[perm[i]]) / std::abs(a[perm[i]]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("scaling the geometry scales the potential") {
  const auto pts = uniform_cube(2000, 14);
  const Vector q = uniform_vector(2000, 15);
  const Vector a = FmmPlan::particles(pts, small_config(4, 30)).apply(q);
  for (double alpha : {0.01, 7.0}) {
    std::vector<Vec3> scaled;
    for (const Vec3& x : pts) scaled.push_back(alpha * x + Vec3(3, -1, 2));
    const Vector b = FmmPlan::particles(scaled, small_config(4, 30)).apply(q);
    CHECK((alpha * b - a).norm() <= 1e-10 * a.norm());
  }
}

TEST_CASE("per-level operators match the homogeneous path") {
  const auto pts = uniform_cube(3000, 16);
  const Vector q = uniform_vector(3000, 17);
  FmmConfig cfg = small_config(4, 30);
  cfg.compress = false;
  const FmmPlan unit = FmmPlan::particles(pts, cfg);
  cfg.per_level_operators = true;
  const FmmPlan native = FmmPlan::particles(pts, cfg);
  CHECK(native.operator_set_count() == std::size_t(native.tree().depth() + 1));
  const Vector a = unit.apply(q), b = native.apply(q);
  CHECK((a - b).norm() <= 1e-10 * a.norm());
}

TEST_CASE("accuracy against direct summation") {
  const auto pts = uniform_cube(4000, 18);
  const Vector q = uniform_vector(4000, 19);
  const Vector exact = direct_sum(pts, q);
  double last = 1.0;
  for (int p : {4, 6, 8}) {
    FmmConfig cfg = small_config(p, 50);
    cfg.compress = false;
    const double err = relative_l2(FmmPlan::particles(pts, cfg).apply(q), exact);
    MESSAGE("p = " << p << " uncompressed error " << err);
    CHECK(err <= last);
    last = err;
  }
  CHECK(last <= 1e-5);
  const double compressed = relative_l2(FmmPlan::particles(pts, small_config(6, 50)).apply(q), exact);
  MESSAGE("p = 6 compressed error " << compressed);
  CHECK(compressed <= 1e-2);

  // two well separated clusters
  std::vector<Vec3> two;
  for (const Vec3& x : uniform_cube(1000, 20)) two.push_back(0.1 * x);
  for (const Vec3& x : uniform_cube(1000, 21)) two.push_back(Vec3(10, 10, 10) + 0.1 * x);
  const Vector q2 = uniform_vector(2000, 22);
  const double err = relative_l2(FmmPlan::particles(two, small_config(6, 20)).apply(q2), direct_sum(two, q2));
  MESSAGE("two clusters error " << err);
  CHECK(err <= 1e-3);
}

TEST_CASE("input errors") {
  const auto pts = uniform_cube(100, 23);
  const FmmPlan plan = FmmPlan::particles(pts, small_config());
  CHECK_THROWS_AS(plan.apply(Vector::Ones(99)), std::invalid_argument);
  std::vector<Vec3> dup = pts;
  dup.push_back(pts[5]);
  CHECK_THROWS_AS(FmmPlan::particles(dup, small_config()), KernelDomainError);
  FmmConfig bad = small_config();
  bad.p = 1;
  CHECK_THROWS_AS(FmmPlan::particles(pts, bad), ConfigError);
  bad = small_config();
  bad.s_max = 0;
  CHECK_THROWS_AS(FmmPlan::particles(pts, bad), ConfigError);
}

TEST_CASE("bem plan surfaces") {
  const TriMesh mesh = icosphere(3);
  FmmConfig cfg;
  cfg.s_max = 100;
  const FmmPlan plan = FmmPlan::bem(mesh, cfg, KernelSpec::single_layer());
  CHECK(plan.mode() == SourceMode::bem);
  CHECK(plan.surface().d == doctest::Approx(0.05));

  cfg.enclose_elements = true;
  cfg.s_max = 32;
  const FmmPlan enclosed = FmmPlan::bem(mesh, cfg, KernelSpec::single_layer());
  const double need = required_element_offset(enclosed.tree(), mesh);
  CHECK(enclosed.surface().d >= need);
  CHECK(enclosed.surface().d >= bem_offset(32, 0.5));
  // every element vertex inside its leaf's upward-equivalent surface
  const Octree& t = enclosed.tree();
  for (int id : t.leaves()) {
    const Cube& c = t.cube(id);
    const double r = (1 + enclosed.surface().d) * c.halfwidth;
    for (int i : t.members(c)) {
      const Triangle tri = mesh.triangle(i);
      for (const Vec3& v : {tri.a, tri.b, tri.c}) CHECK((v - c.center).cwiseAbs().maxCoeff() <= r);
    }
  }

  const FmmPlan dbl = FmmPlan::bem_sharing(plan, KernelSpec::double_layer());
  CHECK(&dbl.tree() == &plan.tree());
  CHECK(dbl.memory_estimate() < dbl.footprint_bytes());
}

TEST_CASE("bem self terms match the integration oracle") {
  const TriMesh mesh = octahedron_ellipsoid(2, Vec3(1, 1.5, 2));
  FmmConfig cfg;
  cfg.s_max = 20;
  const FmmPlan single = FmmPlan::bem(mesh, cfg, KernelSpec::single_layer());
  const FmmPlan dbl = FmmPlan::bem_sharing(single, KernelSpec::double_layer());
  for (std::size_t j = 0; j < mesh.size(); j += 5) {
    Vector e = Vector::Zero(mesh.size());
    e[j] = 1.0;
    // far-field contributions of an element to itself vanish
    const double self = single.near_pass(e)[j];
    const double ref = oracle_element_integral(mesh.triangle(j), mesh.centroids[j], KernelSpec::single_layer());
    CHECK(self == doctest::Approx(ref).epsilon(1e-6));
    CHECK(dbl.near_pass(e)[j] == 0.0);
  }
}
