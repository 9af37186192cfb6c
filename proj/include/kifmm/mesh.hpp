#pragma once

#include <algorithm>
#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "kifmm/common.hpp"

namespace kifmm {

struct Triangle {
  Vec3 a, b, c;
  Vec3 centroid() const { return (a + b + c) / 3.0; }
  double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
  Vec3 unit_normal() const { return (b - a).cross(c - a).normalized(); }
  /// Longest edge.
  double diameter() const { return std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()}); }
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Validated triangle mesh with per-element centroid, area and unit normal.
/// Normals follow the vertex winding (counter-clockwise seen from outside).
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> centroids;
  std::vector<Vec3> normals;
  std::vector<double> areas;
  bool closed = false;

  std::size_t size() const { return triangles.size(); }
  Triangle triangle(std::size_t e) const {
    const auto& t = triangles[e];
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }
  double total_area() const;
  double signed_volume() const;
  /// Longest element edge over the mesh.
  double max_diameter() const;
  double scale() const;  // bounding-box diagonal
};

/// Validates and fills derived quantities. Throws MeshError naming the
/// offending element for out-of-range indices, degenerate triangles
/// (area <= 1e-14 * scale^2), inconsistent orientation, or a closed mesh
/// whose signed volume is not positive.
TriMesh make_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles);

enum class MeshFormat { automatic, off, plain };

/// OFF, or plain text: `NV NT`, NV lines `x y z`, NT lines `i j k` (0-based).
TriMesh read_mesh(std::istream& in, MeshFormat format = MeshFormat::automatic);
TriMesh load_mesh(const std::string& path, MeshFormat format = MeshFormat::automatic);
void write_mesh(std::ostream& out, const TriMesh& mesh, MeshFormat format = MeshFormat::plain);

TriMesh octahedron();
/// Icosahedron refined `level` times (20 * 4^level triangles), vertices on
/// the sphere of the given radius.
TriMesh icosphere(int level, double radius = 1.0);
/// Octahedron refined `level` times (8 * 4^level triangles), projected onto
/// the ellipsoid with the given semi-axes.
TriMesh octahedron_ellipsoid(int level, const Vec3& semi_axes = Vec3(1, 1, 1));
/// Latitude/longitude ellipsoid, 2 * n_phi * (n_theta - 1) triangles.
TriMesh ellipsoid_mesh(int n_phi, int n_theta, const Vec3& semi_axes);
/// Surface of an axis-aligned cube, k x k squares per face split into
/// 12 k^2 triangles.
TriMesh cube_mesh(int k, double side = 1.0, const Vec3& center = Vec3::Zero());

enum class BcKind { dirichlet, neumann };

struct BoundaryCondition {
  std::vector<BcKind> kind;
  std::vector<double> value;

  std::size_t size() const { return kind.size(); }
  bool all_dirichlet() const;
  static BoundaryCondition dirichlet(std::vector<double> values);
};

/// CSV `element_id,kind,value` with kind d or n; an optional header line is
/// skipped. Every element must appear exactly once.
BoundaryCondition read_bc(std::istream& in, std::size_t n_elements);
BoundaryCondition load_bc(const std::string& path, std::size_t n_elements);

}  // namespace kifmm
