#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kifmm/common.hpp"

namespace kifmm {

inline constexpr int kMinDepth = 2;
inline constexpr int kMaxDepth = 16;
inline constexpr int kNumOffsets = 316;

struct Interaction {
  int cube = -1;
  int offset_id = -1;
};

/// One nonempty cube of the uniform-depth octree. Empty cubes are never
/// materialised; they are pruned from traversal and lists.
struct Cube {
  int level = 0;
  Index3 index{0, 0, 0};
  Vec3 center = Vec3::Zero();
  double halfwidth = 0.0;
  int parent = -1;
  std::array<int, 8> children{-1, -1, -1, -1, -1, -1, -1, -1};
  int octant = 0;   // position inside the parent, see octant_of()
  int begin = 0;    // member range [begin, end) into Octree::order()
  int end = 0;
  std::vector<int> near_list;                 // same-level neighbours incl. self, ascending id
  std::vector<Interaction> interaction_list;  // ascending offset_id

  int size() const { return end - begin; }
};

/// Uniform-depth octree over a point set. Points are reordered (Morton order)
/// so every cube owns a contiguous slice of order().
class Octree {
 public:
  /// Builds the cube hierarchy. Depth is max(2, ceil(log8(N / s_max))),
  /// deepened until no leaf holds more than s_max points. Lists are not
  /// computed; see compute_near_field / compute_interaction_lists.
  static Octree build(std::span<const Vec3> points, int s_max, double pad = 1e-6);

  int depth() const { return depth_; }
  const Vec3& root_center() const { return root_center_; }
  double root_halfwidth() const { return root_halfwidth_; }
  double halfwidth(int level) const { return root_halfwidth_ / double(1 << level); }
  std::size_t num_points() const { return order_.size(); }

  const std::vector<Cube>& cubes() const { return cubes_; }
  std::vector<Cube>& cubes() { return cubes_; }
  const Cube& cube(int id) const { return cubes_[id]; }

  /// Cube ids of a level, in Morton order.
  std::span<const int> level(int l) const;
  std::span<const int> leaves() const { return level(depth_); }
  std::size_t nonempty_count(int l) const { return level(l).size(); }

  /// Point indices owned by a cube.
  std::span<const int> members(const Cube& c) const {
    return {order_.data() + c.begin, static_cast<std::size_t>(c.size())};
  }
  std::span<const int> order() const { return order_; }

  /// Id of the nonempty cube with the given grid index, or -1.
  int find(int level, const Index3& index) const;

  bool near_computed() const { return near_done_; }
  bool interactions_computed() const { return interactions_done_; }

 private:
  friend void compute_near_field(Octree& tree);
  friend void compute_interaction_lists(Octree& tree);

  int depth_ = 0;
  Vec3 root_center_ = Vec3::Zero();
  double root_halfwidth_ = 0.0;
  std::vector<Cube> cubes_;
  std::vector<int> level_ids_;
  std::vector<int> level_begin_;
  std::vector<std::vector<std::uint64_t>> level_keys_;  // sorted Morton keys per level
  std::vector<int> order_;
  bool near_done_ = false;
  bool interactions_done_ = false;
};

void compute_near_field(Octree& tree);
void compute_interaction_lists(Octree& tree);

/// build + both list passes.
Octree build_tree(std::span<const Vec3> points, int s_max, double pad = 1e-6);

/// The 316 offsets in [-3,3]^3 \ [-1,1]^3, sorted lexicographically.
const std::vector<Index3>& offset_table();

/// Canonical id of an offset, or -1 if it is not a far offset.
int offset_id(const Index3& offset);

/// Octant numbering: bit 2 = x, bit 1 = y, bit 0 = z (set = upper half).
inline int octant_of(const Index3& child_index) {
  return ((child_index[0] & 1) << 2) | ((child_index[1] & 1) << 1) | (child_index[2] & 1);
}

/// Unit direction (+-1, +-1, +-1) from a parent center to a child center.
inline Vec3 octant_direction(int octant) {
  return {(octant & 4) ? 1.0 : -1.0, (octant & 2) ? 1.0 : -1.0, (octant & 1) ? 1.0 : -1.0};
}

}  // namespace kifmm
