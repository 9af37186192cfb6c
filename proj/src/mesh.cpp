#include "kifmm/mesh.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace kifmm {

double TriMesh::total_area() const {
  double a = 0.0;
  for (double x : areas) a += x;
  return a;
}

double TriMesh::signed_volume() const {
  double v = 0.0;
  for (const auto& t : triangles) v += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]]));
  return v / 6.0;
}

double TriMesh::max_diameter() const {
  double d = 0.0;
  for (std::size_t e = 0; e < size(); ++e) d = std::max(d, triangle(e).diameter());
  return d;
}

double TriMesh::scale() const {
  if (vertices.empty()) return 0.0;
  Vec3 lo = vertices[0], hi = vertices[0];
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

TriMesh make_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles) {
  TriMesh m;
  m.vertices = std::move(vertices);
  m.triangles = std::move(triangles);
  if (m.triangles.empty()) throw MeshError("mesh has no triangles");
  const int nv = int(m.vertices.size());
  for (std::size_t e = 0; e < m.size(); ++e) {
    const auto& t = m.triangles[e];
    for (int v : t)
      if (v < 0 || v >= nv) {
        std::ostringstream msg;
        msg << "triangle " << e << " references vertex " << v << " outside [0, " << nv << ")";
        throw MeshError(msg.str());
      }
  }
  const double scale = m.scale();
  m.centroids.resize(m.size());
  m.normals.resize(m.size());
  m.areas.resize(m.size());
  for (std::size_t e = 0; e < m.size(); ++e) {
    const Triangle tri = m.triangle(e);
    const Vec3 cr = (tri.b - tri.a).cross(tri.c - tri.a);
    const double area = 0.5 * cr.norm();
    if (!(area > 1e-14 * scale * scale)) {
      std::ostringstream msg;
      msg << "triangle " << e << " is degenerate (area " << area << ")";
      throw MeshError(msg.str());
    }
    m.areas[e] = area;
    m.normals[e] = cr / cr.norm();
    m.centroids[e] = tri.centroid();
  }

  std::map<std::pair<int, int>, int> directed;
  std::map<std::pair<int, int>, int> uses;
  for (std::size_t e = 0; e < m.size(); ++e) {
    const auto& t = m.triangles[e];
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      auto [it, fresh] = directed.emplace(std::make_pair(a, b), int(e));
      if (!fresh) {
        std::ostringstream msg;
        msg << "inconsistent orientation: triangles " << it->second << " and " << e << " traverse edge (" << a
            << ", " << b << ") in the same direction";
        throw MeshError(msg.str());
      }
      if (++uses[{std::min(a, b), std::max(a, b)}] > 2) {
        std::ostringstream msg;
        msg << "non-manifold edge (" << a << ", " << b << ") at triangle " << e;
        throw MeshError(msg.str());
      }
    }
  }
  m.closed = true;
  for (const auto& [edge, n] : uses)
    if (n != 2) {
      m.closed = false;
      break;
    }
  if (m.closed && !(m.signed_volume() > 0.0))
    throw MeshError("closed mesh has non-positive signed volume (normals point inward)");
  return m;
}

namespace {

bool next_data_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

[[noreturn]] void parse_fail(int line_no, const std::string& what) {
  std::ostringstream msg;
  msg << "mesh parse error at line " << line_no << ": " << what;
  throw MeshError(msg.str());
}

}  // namespace

TriMesh read_mesh(std::istream& in, MeshFormat format) {
  std::string line;
  int line_no = 0;
  if (!next_data_line(in, line, line_no)) throw MeshError("mesh parse error: empty input");
  {
    std::istringstream first(line);
    std::string tok;
    first >> tok;
    const bool is_off = tok.rfind("OFF", 0) == 0;
    if (format == MeshFormat::automatic) format = is_off ? MeshFormat::off : MeshFormat::plain;
    if (format == MeshFormat::off) {
      if (!is_off) parse_fail(line_no, "missing OFF header");
      std::string rest;
      std::getline(first, rest);
      if (rest.find_first_not_of(" \t\r") != std::string::npos)
        line = rest;
      else if (!next_data_line(in, line, line_no))
        parse_fail(line_no, "missing counts");
    }
  }
  long nv = -1, nt = -1;
  {
    std::istringstream counts(line);
    if (!(counts >> nv >> nt) || nv < 3 || nt < 1) parse_fail(line_no, "bad vertex/triangle counts");
  }
  std::vector<Vec3> verts(nv);
  for (long i = 0; i < nv; ++i) {
    if (!next_data_line(in, line, line_no)) parse_fail(line_no, "unexpected end of vertex list");
    std::istringstream ls(line);
    if (!(ls >> verts[i][0] >> verts[i][1] >> verts[i][2])) parse_fail(line_no, "bad vertex");
    if (!verts[i].allFinite()) parse_fail(line_no, "non-finite vertex coordinate");
  }
  std::vector<std::array<int, 3>> tris(nt);
  for (long i = 0; i < nt; ++i) {
    if (!next_data_line(in, line, line_no)) parse_fail(line_no, "unexpected end of triangle list");
    std::istringstream ls(line);
    if (format == MeshFormat::off) {
      int k = 0;
      if (!(ls >> k)) parse_fail(line_no, "bad face");
      if (k != 3) parse_fail(line_no, "only triangular faces are supported");
    }
    if (!(ls >> tris[i][0] >> tris[i][1] >> tris[i][2])) parse_fail(line_no, "bad triangle");
  }
  return make_mesh(std::move(verts), std::move(tris));
}

TriMesh load_mesh(const std::string& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file " + path);
  if (format == MeshFormat::automatic && path.size() >= 4 && path.substr(path.size() - 4) == ".off")
    format = MeshFormat::off;
  return read_mesh(in, format);
}

void write_mesh(std::ostream& out, const TriMesh& mesh, MeshFormat format) {
  out << std::setprecision(17);
  if (format == MeshFormat::off) out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.size() << " 0\n";
  else out << mesh.vertices.size() << ' ' << mesh.size() << '\n';
  for (const auto& v : mesh.vertices) out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& t : mesh.triangles) {
    if (format == MeshFormat::off) out << "3 ";
    out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
}

namespace {

struct Refiner {
  std::vector<Vec3>& verts;
  std::map<std::pair<int, int>, int> mid;
  int midpoint(int a, int b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
    mid.emplace(key, int(verts.size()) - 1);
    return int(verts.size()) - 1;
  }
};

std::vector<std::array<int, 3>> refine_on_sphere(std::vector<Vec3>& verts, std::vector<std::array<int, 3>> tris,
                                                 int levels) {
  for (int l = 0; l < levels; ++l) {
    Refiner r{verts, {}};
    std::vector<std::array<int, 3>> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const int ab = r.midpoint(t[0], t[1]), bc = r.midpoint(t[1], t[2]), ca = r.midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({ab, t[1], bc});
      next.push_back({ca, bc, t[2]});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  return tris;
}

void octahedron_base(std::vector<Vec3>& verts, std::vector<std::array<int, 3>>& tris) {
  verts = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  tris.clear();
  for (int sx : {1, -1})
    for (int sy : {1, -1})
      for (int sz : {1, -1}) {
        const int a = sx > 0 ? 0 : 1, b = sy > 0 ? 2 : 3, c = sz > 0 ? 4 : 5;
        if (sx * sy * sz > 0) tris.push_back({a, b, c});
        else tris.push_back({a, c, b});
      }
}

}  // namespace

TriMesh octahedron() {
  std::vector<Vec3> v;
  std::vector<std::array<int, 3>> t;
  octahedron_base(v, t);
  return make_mesh(std::move(v), std::move(t));
}

TriMesh icosphere(int level, double radius) {
  if (level < 0) throw ConfigError("icosphere level must be >= 0");
  if (!(radius > 0.0)) throw ConfigError("icosphere radius must be positive");
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                         {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto& x : v) x.normalize();
  std::vector<std::array<int, 3>> t = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  t = refine_on_sphere(v, std::move(t), level);
  for (auto& x : v) x *= radius;
  return make_mesh(std::move(v), std::move(t));
}

TriMesh octahedron_ellipsoid(int level, const Vec3& semi_axes) {
  if (level < 0) throw ConfigError("refinement level must be >= 0");
  if (!(semi_axes.minCoeff() > 0.0)) throw ConfigError("semi-axes must be positive");
  std::vector<Vec3> v;
  std::vector<std::array<int, 3>> t;
  octahedron_base(v, t);
  t = refine_on_sphere(v, std::move(t), level);
  for (auto& x : v) x = x.cwiseProduct(semi_axes);
  return make_mesh(std::move(v), std::move(t));
}

TriMesh ellipsoid_mesh(int n_phi, int n_theta, const Vec3& semi_axes) {
  if (n_phi < 3 || n_theta < 2) throw ConfigError("ellipsoid_mesh needs n_phi >= 3 and n_theta >= 2");
  if (!(semi_axes.minCoeff() > 0.0)) throw ConfigError("semi-axes must be positive");
  std::vector<Vec3> v;
  v.push_back({0, 0, 1});
  for (int j = 1; j < n_theta; ++j) {
    const double th = kPi * j / n_theta;
    for (int i = 0; i < n_phi; ++i) {
      const double ph = 2.0 * kPi * i / n_phi;
      v.push_back({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
    }
  }
  v.push_back({0, 0, -1});
  const int south = int(v.size()) - 1;
  auto ring = [&](int j, int i) { return 1 + (j - 1) * n_phi + ((i % n_phi) + n_phi) % n_phi; };
  std::vector<std::array<int, 3>> t;
  for (int i = 0; i < n_phi; ++i) t.push_back({0, ring(1, i), ring(1, i + 1)});
  for (int j = 1; j + 1 < n_theta; ++j)
    for (int i = 0; i < n_phi; ++i) {
      t.push_back({ring(j, i), ring(j + 1, i), ring(j + 1, i + 1)});
      t.push_back({ring(j, i), ring(j + 1, i + 1), ring(j, i + 1)});
    }
  for (int i = 0; i < n_phi; ++i) t.push_back({south, ring(n_theta - 1, i + 1), ring(n_theta - 1, i)});
  for (auto& x : v) x = x.cwiseProduct(semi_axes);
  return make_mesh(std::move(v), std::move(t));
}

TriMesh cube_mesh(int k, double side, const Vec3& center) {
  if (k < 1) throw ConfigError("cube_mesh needs k >= 1");
  if (!(side > 0.0)) throw ConfigError("cube side must be positive");
  std::map<std::array<int, 3>, int> ids;
  std::vector<Vec3> v;
  auto vertex = [&](const std::array<int, 3>& g) {
    auto [it, fresh] = ids.emplace(g, int(v.size()));
    if (fresh) v.push_back(center + side * (Vec3(g[0], g[1], g[2]) / k - Vec3::Constant(0.5)));
    return it->second;
  };
  std::vector<std::array<int, 3>> t;
  for (int axis = 0; axis < 3; ++axis)
    for (int s : {-1, 1}) {
      int u = (axis + 1) % 3, w = (axis + 2) % 3;
      if (s < 0) std::swap(u, w);
      auto at = [&](int i, int j) {
        std::array<int, 3> g{};
        g[axis] = s > 0 ? k : 0;
        g[u] = i;
        g[w] = j;
        return vertex(g);
      };
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          const int a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
          t.push_back({a, b, c});
          t.push_back({a, c, d});
        }
    }
  return make_mesh(std::move(v), std::move(t));
}

bool BoundaryCondition::all_dirichlet() const {
  return std::all_of(kind.begin(), kind.end(), [](BcKind k) { return k == BcKind::dirichlet; });
}

BoundaryCondition BoundaryCondition::dirichlet(std::vector<double> values) {
  BoundaryCondition bc;
  bc.kind.assign(values.size(), BcKind::dirichlet);
  bc.value = std::move(values);
  return bc;
}

BoundaryCondition read_bc(std::istream& in, std::size_t n_elements) {
  BoundaryCondition bc;
  bc.kind.assign(n_elements, BcKind::dirichlet);
  bc.value.assign(n_elements, 0.0);
  std::vector<char> seen(n_elements, 0);
  std::string line;
  int line_no = 0;
  bool first = true;
  auto fail = [&](const std::string& what) {
    std::ostringstream msg;
    msg << "boundary condition line " << line_no << ": " << what;
    throw ConfigError(msg.str());
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
      const auto b = f.find_first_not_of(" \t"), e = f.find_last_not_of(" \t");
      fields.push_back(b == std::string::npos ? std::string() : f.substr(b, e - b + 1));
    }
    const bool header = first && !fields.empty() && !fields[0].empty() &&
                        !(std::isdigit(static_cast<unsigned char>(fields[0][0])) || fields[0][0] == '-');
    first = false;
    if (header) continue;
    if (fields.size() != 3) fail("expected element_id,kind,value");
    long id = -1;
    double value = 0.0;
    std::size_t used = 0;
    try {
      id = std::stol(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail("bad element id '" + fields[0] + "'");
    }
    if (id < 0 || std::size_t(id) >= n_elements) fail("element id " + fields[0] + " out of range");
    if (fields[1] != "d" && fields[1] != "n") fail("unknown kind '" + fields[1] + "' (expected d or n)");
    try {
      value = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail("bad value '" + fields[2] + "'");
    }
    if (seen[id]) fail("element " + fields[0] + " given twice");
    seen[id] = 1;
    bc.kind[id] = fields[1] == "d" ? BcKind::dirichlet : BcKind::neumann;
    bc.value[id] = value;
  }
  for (std::size_t e = 0; e < n_elements; ++e)
    if (!seen[e]) throw ConfigError("boundary condition missing for element " + std::to_string(e));
  return bc;
}

BoundaryCondition load_bc(const std::string& path, std::size_t n_elements) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open boundary condition file " + path);
  return read_bc(in, n_elements);
}

}  // namespace kifmm
