#include <doctest.h>

#include <Eigen/SVD>
#include <algorithm>
#include <vector>

#include "kifmm/kernel.hpp"
#include "kifmm/octree.hpp"
#include "kifmm/translation.hpp"
#include "support.hpp"

using namespace kifmm;

namespace {

const KernelSpec kSingle = KernelSpec::single_layer();

std::vector<Vec3> shifted(std::vector<Vec3> pts, const Vec3& c) {
  for (auto& p : pts) p += c;
  return pts;
}

std::vector<Vec3> surface(SurfaceRole role, const Vec3& c, double r, const SurfaceSpec& spec) {
  return make_surface(role, c, r, spec).points;
}

// points uniformly inside the cube of halfwidth r around c
std::vector<Vec3> inside(std::size_t n, const Vec3& c, double r, unsigned seed) {
  auto pts = testing::uniform_cube(n, seed);
  for (auto& p : pts) p = c + r * (2.0 * p - Vec3::Ones());
  return pts;
}

// points on a sphere of the given radius around c
std::vector<Vec3> probes(std::size_t n, const Vec3& c, double radius, unsigned seed) {
  auto pts = testing::uniform_sphere(n, seed);
  for (auto& p : pts) p = c + radius * p;
  return pts;
}

Vector potentials(const std::vector<Vec3>& targets, const std::vector<Vec3>& sources, const Vector& q) {
  return kernel_matrix(targets, sources, kSingle) * q;
}

// index map: perm[i] = j with b[j] == -a[i] (reflection through the origin)
std::vector<int> reflection_map(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  std::vector<int> perm(a.size(), -1);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if ((a[i] + b[j]).norm() < 1e-12) perm[i] = int(j);
  return perm;
}

double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("equivalent solver reproduces check potentials") {
  const SurfaceSpec spec = SurfaceSpec::make(6, 0.1);
  for (const EquivSolver& s : {upward_equiv_solver(0.5, spec, kSingle, 1e-12), downward_equiv_solver(0.5, spec, kSingle, 1e-12)}) {
    const Vector q = testing::uniform_vector(spec.n_points(), 3, -1, 1);
    const Vector p = s.equiv_to_check * q;
    const Vector qh = s.solve(p);
    CHECK((s.equiv_to_check * qh - p).norm() <= 1e-8 * p.norm());
    // dense SVD oracle: all singular values positive
    const Vector sv = Eigen::JacobiSVD<Matrix>(s.equiv_to_check).singularValues();
    CHECK(sv.minCoeff() > 0.0);
    CHECK(s.singular_values.size() == spec.n_points());
    CHECK(s.singular_values[0] == doctest::Approx(sv[0]).epsilon(1e-10));
  }
  const EquivSolver up = upward_equiv_solver(0.5, spec, kSingle, 1e-12);
  CHECK(up.role == EquivRole::upward);
  CHECK(downward_equiv_solver(0.5, spec, kSingle, 1e-12).role == EquivRole::downward);
}

TEST_CASE("cutoff one keeps a single singular value") {
  const SurfaceSpec spec = SurfaceSpec::make(4, 0.1);
  const EquivSolver s = upward_equiv_solver(1.0, spec, kSingle, 1.0);
  CHECK(s.rank == 1);
  Eigen::JacobiSVD<Matrix> svd(s.check_to_equiv);
  CHECK(svd.singularValues()[1] <= 1e-12 * svd.singularValues()[0]);
  CHECK_THROWS_AS(upward_equiv_solver(1.0, spec, kSingle, 0.0), ConfigError);
  CHECK_THROWS(upward_equiv_solver(1.0, spec, KernelSpec::double_layer(), 1e-12));
}

TEST_CASE("m2m") {
  const SurfaceSpec spec = SurfaceSpec::make(8, 0.1);
  const CubeGeometry parent{Vec3(0.2, -0.1, 0.4), 0.5};
  for (int o : {0, 5}) {
    const Matrix m = build_m2m(parent, o, spec, kSingle);
    CHECK(m.rows() == spec.n_points());
    CHECK(m.cols() == spec.n_points());
    CHECK((m * Vector::Zero(spec.n_points())).norm() == 0.0);

    const Vec3 cc = parent.center + 0.5 * parent.halfwidth * octant_direction(o);
    const auto child_equiv = surface(SurfaceRole::upward_equivalent, cc, 0.5 * parent.halfwidth, spec);
    const auto parent_equiv = surface(SurfaceRole::upward_equivalent, parent.center, parent.halfwidth, spec);
    const Vector q = testing::uniform_vector(spec.n_points(), 7 + o, -1, 1);
    const double r_check = role_halfwidth(SurfaceRole::upward_check, parent.halfwidth, spec.d);
    const auto pr = probes(20, parent.center, 1.8 * r_check, 9);
    CHECK(rel_err(potentials(pr, parent_equiv, m * q), potentials(pr, child_equiv, q)) <= 1e-6);
  }
  // translation invariance
  const Matrix a = build_m2m(CubeGeometry{Vec3(0, 0, 0), 0.25}, 3, spec, kSingle);
  const Matrix b = build_m2m(CubeGeometry{Vec3(5, -3, 2), 0.25}, 3, spec, kSingle);
  CHECK((a.array() == b.array()).all());
  CHECK_THROWS(build_m2m(parent, 8, spec, kSingle));
}

TEST_CASE("m2l") {
  const SurfaceSpec spec = SurfaceSpec::make(6, 0.1);
  const Matrix k = build_m2l(Index3{2, 0, 0}, 2, spec, kSingle, 1.0);
  CHECK(k.minCoeff() > 0.0);
  CHECK(k.rows() == 152);

  // K(-v) = K(v)^T after matching points of the (identical) check/equivalent clouds
  for (const Index3& v : {Index3{2, 0, 0}, Index3{3, -1, 2}, Index3{-2, 3, 3}}) {
    const Matrix kv = build_m2l(v, 3, spec, kSingle, 1.0);
    const Matrix km = build_m2l(Index3{-v[0], -v[1], -v[2]}, 3, spec, kSingle, 1.0);
    const double r = 1.0 / 8;
    const auto check = surface(SurfaceRole::downward_check, Vec3::Zero(), r, spec);
    const auto equiv = surface(SurfaceRole::upward_equivalent, Vec3::Zero(), r, spec);
    std::vector<int> perm(check.size(), -1);  // check point i == equiv point perm[i]
    for (std::size_t i = 0; i < check.size(); ++i)
      for (std::size_t j = 0; j < equiv.size(); ++j)
        if ((check[i] - equiv[j]).norm() < 1e-14) perm[i] = int(j);
    double worst = 0.0;
    for (std::size_t i = 0; i < check.size(); ++i)
      for (std::size_t j = 0; j < equiv.size(); ++j) {
        REQUIRE(perm[i] >= 0);
        worst = std::max(worst, std::abs(km(i, j) - kv(perm[j], perm[i])) / std::abs(kv(perm[j], perm[i])));
      }
    CHECK(worst <= 1e-13);
  }

  // level scaling, m = -1
  for (int l = 0; l < 5; ++l) {
    const Matrix a = build_m2l(Index3{1, 3, -2}, l, spec, kSingle, 2.0);
    const Matrix b = build_m2l(Index3{1, 3, -2}, l + 1, spec, kSingle, 2.0);
    CHECK((b - 2.0 * a).norm() <= 1e-13 * b.norm());
    const Matrix unit = build_m2l_for_halfwidth(Index3{1, 3, -2}, 1.0, spec, kSingle);
    CHECK((a - std::pow(2.0 / (1 << l), -1.0) * unit).norm() <= 1e-13 * a.norm());
  }
  CHECK_THROWS(build_m2l(Index3{1, 1, 0}, 2, spec, kSingle, 1.0));
}

TEST_CASE("l2l") {
  const SurfaceSpec spec = SurfaceSpec::make(8, 0.1);
  const CubeGeometry parent{Vec3(-0.3, 0.2, 0.1), 0.5};
  const EquivSolver down = downward_equiv_solver(parent.halfwidth, spec, kSingle, 1e-12);
  const auto parent_check = surface(SurfaceRole::downward_check, parent.center, parent.halfwidth, spec);
  const double r_equiv = role_halfwidth(SurfaceRole::downward_equivalent, parent.halfwidth, spec.d);
  const auto src = probes(30, parent.center, 2.5 * r_equiv, 4);
  const Vector q = testing::uniform_vector(src.size(), 5, -1, 1);
  for (int o = 0; o < 8; ++o) {
    const Matrix l = build_l2l(parent, o, spec, kSingle, down);
    CHECK((l * Vector::Zero(l.cols())).norm() == 0.0);
    const Vec3 cc = parent.center + 0.5 * parent.halfwidth * octant_direction(o);
    const auto child_check = surface(SurfaceRole::downward_check, cc, 0.5 * parent.halfwidth, spec);
    CHECK(rel_err(l * potentials(parent_check, src, q), potentials(child_check, src, q)) <= 1e-5);
  }

  // reflection through the parent center maps octant 7 onto octant 0: the two
  // operators agree on mirrored far-field data
  const CubeGeometry unit{Vec3::Zero(), 1.0};
  const Matrix l7 = build_l2l(unit, 7, spec, kSingle);
  const Matrix l0 = build_l2l(unit, 0, spec, kSingle);
  const auto c7 = surface(SurfaceRole::downward_check, 0.5 * octant_direction(7), 0.5, spec);
  const auto c0 = surface(SurfaceRole::downward_check, 0.5 * octant_direction(0), 0.5, spec);
  const auto pc = surface(SurfaceRole::downward_check, Vec3::Zero(), 1.0, spec);
  const auto row_map = reflection_map(c7, c0);
  const auto col_map = reflection_map(pc, pc);
  REQUIRE(std::find(row_map.begin(), row_map.end(), -1) == row_map.end());
  REQUIRE(std::find(col_map.begin(), col_map.end(), -1) == col_map.end());
  auto far = probes(30, Vec3::Zero(), 7.0, 31);
  std::vector<Vec3> mirrored;
  for (const Vec3& s : far) mirrored.push_back(-s);
  const Vector g = testing::uniform_vector(far.size(), 32, -1, 1);
  const Vector f7 = l7 * potentials(pc, far, g);
  const Vector f0 = l0 * potentials(pc, mirrored, g);
  Vector f0_back(f7.size());
  for (int i = 0; i < f7.size(); ++i) f0_back[i] = f0[row_map[i]];
  CHECK(rel_err(f0_back, f7) <= 1e-6);  // both sides carry the pseudo-inverse error
  for (std::size_t j = 0; j < pc.size(); ++j) CHECK(col_map[col_map[j]] == int(j));
}

TEST_CASE("l2t") {
  const SurfaceSpec spec = SurfaceSpec::make(8, 0.1);
  const CubeGeometry leaf{Vec3(0.1, 0.2, 0.3), 0.125};
  const EquivSolver down = downward_equiv_solver(leaf.halfwidth, spec, kSingle, 1e-12);
  const auto check = surface(SurfaceRole::downward_check, leaf.center, leaf.halfwidth, spec);
  const double r_equiv = role_halfwidth(SurfaceRole::downward_equivalent, leaf.halfwidth, spec.d);
  const auto src = probes(25, leaf.center, 2.0 * r_equiv, 12);
  const Vector q = testing::uniform_vector(src.size(), 13, -1, 1);

  const std::vector<Vec3> center{leaf.center};
  const Matrix t = build_l2t(center, leaf, spec, kSingle, down);
  CHECK(t.rows() == 1);
  CHECK(testing::rel((t * potentials(check, src, q))[0], potentials(center, src, q)[0]) <= 1e-5);
  CHECK((t * Vector::Zero(t.cols())).norm() == 0.0);

  const std::vector<Vec3> twins{leaf.center + Vec3(0.01, 0, 0), leaf.center + Vec3(0.01, 0, 0)};
  const Matrix t2 = build_l2t(twins, leaf, spec, kSingle, down);
  CHECK((t2.row(0).array() == t2.row(1).array()).all());
  const std::vector<Vec3> outside{leaf.center + Vec3(r_equiv, 0, 0)};
  CHECK_THROWS(build_l2t(outside, leaf, spec, kSingle, down));
}

TEST_CASE("full chain against direct summation") {
  // sources in a leaf of parent A, targets in a leaf of parent B; A sits at
  // offset (-2, 0, 0) from B on the parent level
  struct Case {
    int p;
    double bound;
  };
  for (const Case& c : {Case{6, 1e-4}, Case{8, 1e-6}}) {
    CAPTURE(c.p);
    const SurfaceSpec spec = SurfaceSpec::make(c.p, 0.1);
    const double R = 0.5, r = 0.25;
    const CubeGeometry pa{Vec3(0, 0, 0), R}, pb{Vec3(2, 0, 0), R};
    const int oa = 5, ob = 2;
    const CubeGeometry la{pa.center + 0.5 * R * octant_direction(oa), r};
    const CubeGeometry lb{pb.center + 0.5 * R * octant_direction(ob), r};
    const auto src = inside(200, la.center, r, 21);
    const auto tgt = inside(150, lb.center, r, 22);
    const Vector q = testing::uniform_vector(src.size(), 23, -1, 1);

    const EquivSolver up_leaf = upward_equiv_solver(r, spec, kSingle, 1e-12);
    const EquivSolver down_leaf = downward_equiv_solver(r, spec, kSingle, 1e-12);
    const auto leaf_check = surface(SurfaceRole::upward_check, la.center, r, spec);
    const Vector qa = up_leaf.solve(potentials(leaf_check, src, q));              // S2M
    const Vector qpa = build_m2m(pa, oa, spec, kSingle) * qa;                      // M2M
    const Vector ppb = build_m2l_for_halfwidth(Index3{-2, 0, 0}, R, spec, kSingle) * qpa;  // M2L
    const Vector plb = build_l2l(pb, ob, spec, kSingle) * ppb;                     // L2L
    const Vector phi = build_l2t(tgt, lb, spec, kSingle, down_leaf) * plb;         // L2T
    const Vector exact = potentials(tgt, src, q);
    const double err = rel_err(phi, exact);
    MESSAGE("p = " << c.p << " chain error " << err);
    CHECK(err <= c.bound);
  }
}

TEST_CASE("operators are independent of cube position") {
  const SurfaceSpec spec = SurfaceSpec::make(5, 0.2);
  const CubeGeometry a{Vec3(0, 0, 0), 0.5}, b{Vec3(-7, 3, 11), 0.5};
  CHECK((build_l2l(a, 6, spec, kSingle).array() == build_l2l(b, 6, spec, kSingle).array()).all());
  const std::vector<Vec3> ta{Vec3(0.1, -0.2, 0.05)};
  const auto tb = shifted(ta, b.center);
  const EquivSolver down = downward_equiv_solver(0.5, spec, kSingle, 1e-12);
  const Matrix xa = build_l2t(ta, a, spec, kSingle, down);
  const Matrix xb = build_l2t(tb, b, spec, kSingle, down);
  CHECK((xa - xb).norm() <= 1e-10 * xa.norm());
}
