#include "kifmm/octree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace kifmm {

namespace {

std::uint64_t spread_bits(std::uint64_t v) {
  // 16 bits -> every third bit of 48
  v &= 0xFFFF;
  v = (v | (v << 16)) & 0x0000FF0000FFULL;
  v = (v | (v << 8)) & 0x00F00F00F00FULL;
  v = (v | (v << 4)) & 0x0C30C30C30C3ULL;
  v = (v | (v << 2)) & 0x249249249249ULL;
  return v;
}

std::uint64_t morton(const Index3& ijk) {
  return (spread_bits(ijk[0]) << 2) | (spread_bits(ijk[1]) << 1) | spread_bits(ijk[2]);
}

std::uint64_t compact_bits(std::uint64_t v) {
  v &= 0x249249249249ULL;
  v = (v | (v >> 2)) & 0x0C30C30C30C3ULL;
  v = (v | (v >> 4)) & 0x00F00F00F00FULL;
  v = (v | (v >> 8)) & 0x0000FF0000FFULL;
  v = (v | (v >> 16)) & 0xFFFF;
  return v;
}

Index3 unmorton(std::uint64_t key) {
  return {int(compact_bits(key >> 2)), int(compact_bits(key >> 1)), int(compact_bits(key))};
}

int grid_index(double x, double lo, double width, int n) {
  const int i = static_cast<int>(std::floor((x - lo) / width));
  return std::clamp(i, 0, n - 1);
}

}  // namespace

const std::vector<Index3>& offset_table() {
  static const std::vector<Index3> table = [] {
    std::vector<Index3> t;
    for (int i = -3; i <= 3; ++i)
      for (int j = -3; j <= 3; ++j)
        for (int k = -3; k <= 3; ++k)
          if (std::max({std::abs(i), std::abs(j), std::abs(k)}) > 1) t.push_back({i, j, k});
    return t;
  }();
  return table;
}

int offset_id(const Index3& o) {
  static const std::array<int, 343> lookup = [] {
    std::array<int, 343> a{};
    a.fill(-1);
    const auto& t = offset_table();
    for (int id = 0; id < int(t.size()); ++id) a[(t[id][0] + 3) * 49 + (t[id][1] + 3) * 7 + (t[id][2] + 3)] = id;
    return a;
  }();
  for (int c : o)
    if (c < -3 || c > 3) return -1;
  return lookup[(o[0] + 3) * 49 + (o[1] + 3) * 7 + (o[2] + 3)];
}

std::span<const int> Octree::level(int l) const {
  return {level_ids_.data() + level_begin_[l], static_cast<std::size_t>(level_begin_[l + 1] - level_begin_[l])};
}

int Octree::find(int l, const Index3& index) const {
  if (l < 0 || l > depth_) return -1;
  const int n = 1 << l;
  for (int c : index)
    if (c < 0 || c >= n) return -1;
  const auto& keys = level_keys_[l];
  const std::uint64_t key = morton(index);
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return -1;
  return level_ids_[level_begin_[l] + int(it - keys.begin())];
}

Octree Octree::build(std::span<const Vec3> points, int s_max, double pad) {
  if (points.empty()) throw std::invalid_argument("build_tree: empty point set");
  if (s_max < 1) throw ConfigError("build_tree: s_max must be >= 1");
  if (!(pad >= 0.0)) throw ConfigError("build_tree: pad must be >= 0");

  Octree tree;
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    if (!p.allFinite()) throw std::invalid_argument("build_tree: non-finite point");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  tree.root_center_ = 0.5 * (lo + hi);
  double half = 0.5 * (hi - lo).maxCoeff() * (1.0 + pad);
  if (half <= 0.0) half = 0.5 * std::max(1.0, tree.root_center_.cwiseAbs().maxCoeff());
  tree.root_halfwidth_ = half;

  const std::size_t n_points = points.size();
  int depth = std::max(kMinDepth, int(std::ceil(std::log(double(n_points) / s_max) / std::log(8.0) - 1e-12)));
  depth = std::min(depth, kMaxDepth);

  const Vec3 origin = tree.root_center_ - Vec3::Constant(half);
  std::vector<std::uint64_t> keys(n_points);
  std::vector<int> order(n_points);

  for (;;) {
    const int n = 1 << depth;
    const double width = 2.0 * half / n;
    for (std::size_t i = 0; i < n_points; ++i) {
      const Vec3& p = points[i];
      keys[i] = morton({grid_index(p[0], origin[0], width, n), grid_index(p[1], origin[1], width, n),
                        grid_index(p[2], origin[2], width, n)});
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });

    int max_count = 0, run = 0;
    for (std::size_t i = 0; i < n_points; ++i) {
      run = (i > 0 && keys[order[i]] == keys[order[i - 1]]) ? run + 1 : 1;
      max_count = std::max(max_count, run);
    }
    if (max_count <= s_max) break;
    if (depth == kMaxDepth) {
      std::ostringstream msg;
      msg << "build_tree: a leaf still holds " << max_count << " points (s_max = " << s_max
          << ") at the depth cap " << kMaxDepth << "; points are too clustered or duplicated";
      throw std::runtime_error(msg.str());
    }
    ++depth;
  }
  tree.depth_ = depth;
  tree.order_ = order;

  // Cubes level by level; each level is a run-length grouping of the sorted keys.
  tree.level_keys_.assign(depth + 1, {});
  tree.level_begin_.assign(depth + 2, 0);
  std::vector<std::vector<int>> ids_per_level(depth + 1);
  std::vector<int> prev_level_point_cube;  // cube id per sorted point at level l-1
  for (int l = 0; l <= depth; ++l) {
    const int shift = 3 * (depth - l);
    std::vector<int> point_cube(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
      const std::uint64_t key = keys[order[i]] >> shift;
      if (i == 0 || key != (keys[order[i - 1]] >> shift)) {
        Cube c;
        c.level = l;
        c.index = unmorton(key);
        c.halfwidth = tree.halfwidth(l);
        for (int a = 0; a < 3; ++a) c.center[a] = origin[a] + (2 * c.index[a] + 1) * c.halfwidth;
        c.begin = int(i);
        c.octant = octant_of(c.index);
        if (l > 0) {
          c.parent = prev_level_point_cube[i];
          tree.cubes_[c.parent].children[c.octant] = int(tree.cubes_.size());
        }
        ids_per_level[l].push_back(int(tree.cubes_.size()));
        tree.level_keys_[l].push_back(key);
        tree.cubes_.push_back(c);
      }
      point_cube[i] = int(tree.cubes_.size()) - 1;
      tree.cubes_.back().end = int(i) + 1;
    }
    prev_level_point_cube = std::move(point_cube);
  }
  for (int l = 0; l <= depth; ++l) {
    tree.level_begin_[l] = int(tree.level_ids_.size());
    tree.level_ids_.insert(tree.level_ids_.end(), ids_per_level[l].begin(), ids_per_level[l].end());
  }
  tree.level_begin_[depth + 1] = int(tree.level_ids_.size());
  return tree;
}

void compute_near_field(Octree& tree) {
  for (auto& c : tree.cubes_) {
    c.near_list.clear();
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj)
        for (int dk = -1; dk <= 1; ++dk) {
          const int id = tree.find(c.level, {c.index[0] + di, c.index[1] + dj, c.index[2] + dk});
          if (id >= 0) c.near_list.push_back(id);
        }
    std::sort(c.near_list.begin(), c.near_list.end());
  }
  tree.near_done_ = true;
}

void compute_interaction_lists(Octree& tree) {
  if (!tree.near_done_) throw std::logic_error("compute_interaction_lists: near fields not computed");
  for (auto& c : tree.cubes_) {
    c.interaction_list.clear();
    if (c.level < 2) continue;
    for (int pn : tree.cubes_[c.parent].near_list) {
      for (int child : tree.cubes_[pn].children) {
        if (child < 0) continue;
        const Cube& d = tree.cubes_[child];
        const Index3 off{d.index[0] - c.index[0], d.index[1] - c.index[1], d.index[2] - c.index[2]};
        const int id = offset_id(off);
        if (id >= 0) c.interaction_list.push_back({child, id});
      }
    }
    std::sort(c.interaction_list.begin(), c.interaction_list.end(),
              [](const Interaction& a, const Interaction& b) { return a.offset_id < b.offset_id; });
  }
  tree.interactions_done_ = true;
}

Octree build_tree(std::span<const Vec3> points, int s_max, double pad) {
  Octree tree = Octree::build(points, s_max, pad);
  compute_near_field(tree);
  compute_interaction_lists(tree);
  return tree;
}

}  // namespace kifmm
