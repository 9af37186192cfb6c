#include "kifmm/engine.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "kifmm/translation.hpp"

namespace kifmm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct RawOps {
  Matrix S, T;
  std::vector<Matrix> m2l;
  std::array<Matrix, 8> M, L;
  std::vector<Vec3> up_equiv, up_check, down_equiv;
};

RawOps build_raw(double h, const SurfaceSpec& surface, const KernelSpec& kernel, double cutoff) {
  RawOps raw;
  const EquivSolver up = upward_equiv_solver(h, surface, kernel, cutoff);
  const EquivSolver down = downward_equiv_solver(h, surface, kernel, cutoff);
  raw.S = up.check_to_equiv;
  raw.T = down.check_to_equiv;
  const auto& offsets = offset_table();
  raw.m2l.resize(offsets.size());
  for (std::size_t o = 0; o < offsets.size(); ++o)
    raw.m2l[o] = build_m2l_for_halfwidth(offsets[o], h, surface, kernel);
  const CubeGeometry parent{Vec3::Zero(), 2.0 * h};
  const EquivSolver up2 = upward_equiv_solver(2.0 * h, surface, kernel, cutoff);
  const EquivSolver down2 = downward_equiv_solver(2.0 * h, surface, kernel, cutoff);
  for (int o = 0; o < 8; ++o) {
    raw.M[o] = build_m2m(parent, o, surface, kernel, up2);
    raw.L[o] = build_l2l(parent, o, surface, kernel, down2);
  }
  const Vec3 origin = Vec3::Zero();
  raw.up_equiv = make_surface(SurfaceRole::upward_equivalent, origin, h, surface).points;
  raw.up_check = make_surface(SurfaceRole::upward_check, origin, h, surface).points;
  raw.down_equiv = make_surface(SurfaceRole::downward_equivalent, origin, h, surface).points;
  return raw;
}

Projectors identity_projectors(int n) {
  Projectors p;
  p.U_tilde = Matrix::Identity(n, n);
  p.R_tilde = Matrix::Identity(n, n);
  p.fat_singular_values = Vector::Ones(n);
  p.thin_singular_values = Vector::Ones(n);
  return p;
}

std::shared_ptr<OperatorSet> make_set(double h, RawOps& raw, const KernelSpec& kernel, const FmmConfig& config,
                                      double eps1) {
  auto set = std::make_shared<OperatorSet>();
  set->halfwidth = h;
  const int n = int(raw.S.rows());
  if (config.compress) {
    set->proj = compute_projectors(std::span<const Matrix>(raw.m2l), eps1, kernel.symmetric);
    const int pt = std::max(set->proj.row_dim(), set->proj.col_dim());
    set->m2l = compress_m2l_set(raw.m2l, set->proj, epsilon2(config.C2, eps1, pt));
  } else {
    set->proj = identity_projectors(n);
    set->m2l.blocks.reserve(raw.m2l.size());
    for (const auto& k : raw.m2l) set->m2l.blocks.push_back(dense_block(k));
  }
  raw.m2l.clear();
  raw.m2l.shrink_to_fit();
  set->up_equiv = raw.up_equiv;
  set->up_check = raw.up_check;
  set->down_equiv = raw.down_equiv;
  return set;
}

void attach_pass_ops(OperatorSet& set, const RawOps& raw, const Projectors& parent) {
  CompressedPassOps ops = transform_pass_ops(raw.S, raw.M, raw.L, raw.T, parent, set.proj);
  set.S_tilde = std::move(ops.S_tilde);
  set.T_tilde = std::move(ops.T_tilde);
  set.M_tilde = std::move(ops.M_tilde);
  set.L_tilde = std::move(ops.L_tilde);
}

std::size_t matrix_bytes(const Matrix& m) { return sizeof(double) * std::size_t(m.size()); }

constexpr double kInv4Pi = 1.0 / (4.0 * kPi);

/// sum_s q_s / |t - y_s| over k contiguous sources (no coincidences).
inline double inverse_distance_sum(double tx, double ty, double tz, const double* x, const double* y, const double* z,
                                   const double* q, Index k) {
  using Map = Eigen::Map<const Eigen::ArrayXd>;
  const Map X(x, k), Y(y, k), Z(z, k), Q(q, k);
  return (Q * ((X - tx).square() + (Y - ty).square() + (Z - tz).square()).rsqrt()).sum();
}

}  // namespace

void FmmConfig::validate() const {
  if (p < 2) throw ConfigError("p must be >= 2");
  if (s_max < 1) throw ConfigError("s_max must be >= 1");
  if (!(C1 > 0.0)) throw ConfigError("C1 must be positive");
  if (!(C2 >= 0.0)) throw ConfigError("C2 must be >= 0");
  if (!(C_d > 0.0)) throw ConfigError("C_d must be positive");
  if (!(d_particle >= 0.0 && d_particle < 2.0 / 3.0)) throw ConfigError("d_particle must lie in [0, 2/3)");
  if (!(pinv_cutoff > 0.0 && pinv_cutoff < 1.0)) throw ConfigError("pinv_cutoff must lie in (0, 1)");
  if (epsilon1 && !(*epsilon1 > 0.0 && *epsilon1 < 1.0)) throw ConfigError("epsilon1 must lie in (0, 1)");
  if (!(pad >= 0.0)) throw ConfigError("pad must be >= 0");
}

std::size_t OperatorSet::bytes() const {
  std::size_t b = matrix_bytes(proj.U_tilde) + matrix_bytes(proj.R_tilde) + matrix_bytes(S_tilde) +
                  matrix_bytes(T_tilde);
  for (int o = 0; o < 8; ++o) b += matrix_bytes(M_tilde[o]) + matrix_bytes(L_tilde[o]);
  for (const auto& blk : m2l.blocks) b += blk.bytes();
  b += sizeof(Vec3) * (up_equiv.size() + up_check.size() + down_equiv.size());
  return b;
}

std::shared_ptr<OperatorSet> build_operator_set(double halfwidth, const SurfaceSpec& surface,
                                                const KernelSpec& surface_kernel, const FmmConfig& config,
                                                double eps1) {
  RawOps raw = build_raw(halfwidth, surface, surface_kernel, config.pinv_cutoff);
  auto set = make_set(halfwidth, raw, surface_kernel, config, eps1);
  attach_pass_ops(*set, raw, set->proj);
  return set;
}

double required_element_offset(const Octree& tree, const TriMesh& mesh) {
  double req = 0.0;
  for (int id : tree.leaves()) {
    const Cube& c = tree.cube(id);
    for (int e : tree.members(c))
      for (int v : mesh.triangles[e]) {
        const double ext = (mesh.vertices[v] - c.center).cwiseAbs().maxCoeff() / c.halfwidth - 1.0;
        req = std::max(req, ext);
      }
  }
  return req;
}

void FmmPlan::check_length(const Vector& q) const {
  if (std::size_t(q.size()) != n_) {
    std::ostringstream msg;
    msg << "density vector has length " << q.size() << ", plan expects " << n_;
    throw std::invalid_argument(msg.str());
  }
}

void FmmPlan::init_far_field() {
  const Octree& tree = *tree_;
  const int depth = tree.depth();
  const double r0 = tree.root_halfwidth();
  const KernelSpec surface_kernel = KernelSpec::single_layer();
  const int m = surface_kernel.homogeneity_degree;
  epsilon1_ = config_.epsilon1 ? *config_.epsilon1 : kifmm::epsilon1(config_.C1, depth);

  auto far = std::make_shared<FarFieldOperators>();
  std::vector<std::shared_ptr<const OperatorSet>> per_level(depth + 1);
  if (config_.per_level_operators) {
    std::vector<std::shared_ptr<OperatorSet>> sets(depth + 1);
    for (int l = 0; l <= depth; ++l) {
      RawOps raw = build_raw(tree.halfwidth(l), surface_, surface_kernel, config_.pinv_cutoff);
      sets[l] = make_set(tree.halfwidth(l), raw, surface_kernel, config_, epsilon1_);
      attach_pass_ops(*sets[l], raw, l > 0 ? sets[l - 1]->proj : sets[l]->proj);
    }
    for (int l = 0; l <= depth; ++l) {
      per_level[l] = sets[l];
      far->sets.push_back(sets[l]);
    }
  } else {
    auto set = build_operator_set(1.0, surface_, surface_kernel, config_, epsilon1_);
    far->sets.push_back(set);
    for (int l = 0; l <= depth; ++l) per_level[l] = set;
  }
  epsilon2_ = per_level[depth]->m2l.epsilon2;

  far->levels.resize(depth + 1);
  for (int l = 0; l <= depth; ++l) {
    LevelOperators& lv = far->levels[l];
    lv.ops = per_level[l];
    lv.halfwidth = tree.halfwidth(l);
    lv.surface_ratio = lv.halfwidth / lv.ops->halfwidth;
    if (!config_.per_level_operators) {
      lv.m2l_scale = scale_to_level(l, r0, m);
      lv.s2m_scale = scale_to_level(l, r0, -m);
      lv.l2t_scale = scale_to_level(l, r0, -m);
    }
    const auto ids = tree.level(l);
    const int first = ids.empty() ? 0 : ids[0];
    for (std::size_t j = 0; j < ids.size(); ++j)
      if (ids[j] != first + int(j)) throw std::logic_error("octree level ids are not contiguous");
    lv.m2l_pairs.assign(kNumOffsets, {});
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const Cube& c = tree.cube(ids[j]);
      for (const Interaction& it : c.interaction_list) lv.m2l_pairs[it.offset_id].push_back({int(j), it.cube - first});
      if (l > 0) {
        const int parent_first = tree.level(l - 1)[0];
        lv.child_pairs[c.octant].push_back({int(j), c.parent - parent_first});
      }
    }
  }
  far_ = std::move(far);
}

void FmmPlan::check_coincident() const {
  const Octree& tree = *tree_;
  double extent = 0.0;
  for (const auto& x : points_) extent = std::max(extent, (x - tree.root_center()).cwiseAbs().maxCoeff());
  const double tol2 = std::pow(1e-14 * std::max(extent, 1e-300), 2);
  for (int id : tree.leaves()) {
    const Cube& c = tree.cube(id);
    for (int nb : c.near_list)
      for (int t : tree.members(c))
        for (int s : tree.members(tree.cube(nb)))
          if (s != t && (points_[t] - points_[s]).squaredNorm() <= tol2) {
            std::ostringstream msg;
            msg << "points " << std::min(s, t) << " and " << std::max(s, t) << " coincide";
            throw KernelDomainError(msg.str());
          }
  }
}

void FmmPlan::sort_points() {
  const auto order = tree_->order();
  sx_.resize(Index(order.size()));
  sy_.resize(Index(order.size()));
  sz_.resize(Index(order.size()));
  for (std::size_t k = 0; k < order.size(); ++k) {
    sx_[Index(k)] = points_[order[k]][0];
    sy_[Index(k)] = points_[order[k]][1];
    sz_[Index(k)] = points_[order[k]][2];
  }
}

FmmPlan FmmPlan::particles(std::span<const Vec3> points, const FmmConfig& config, const KernelSpec& kernel) {
  config.validate();
  if (kernel.needs_normals()) throw ConfigError("particle mode supports the single-layer kernel only");
  if (points.empty()) throw ConfigError("particle plan needs at least one point");
  FmmPlan plan;
  plan.mode_ = SourceMode::particle;
  plan.kernel_ = kernel;
  plan.config_ = config;
  plan.n_ = points.size();
  plan.points_.assign(points.begin(), points.end());
  plan.tree_ = std::make_shared<const Octree>(build_tree(points, config.s_max, config.pad));
  plan.check_coincident();
  plan.sort_points();
  plan.surface_ = SurfaceSpec::make(config.p, config.d_particle);
  plan.init_far_field();
  if (config.near_cache) plan.build_near_cache();
  return plan;
}

FmmPlan FmmPlan::bem(const TriMesh& mesh, const FmmConfig& config, const KernelSpec& kernel) {
  config.validate();
  FmmPlan plan;
  plan.mode_ = SourceMode::bem;
  plan.kernel_ = kernel;
  plan.config_ = config;
  plan.n_ = mesh.size();
  plan.mesh_ = std::make_shared<const TriMesh>(mesh);
  plan.points_ = mesh.centroids;
  plan.tree_ = std::make_shared<const Octree>(build_tree(plan.points_, config.s_max, config.pad));
  double d = bem_offset(config.s_max, config.C_d);
  if (config.enclose_elements) {
    const double req = required_element_offset(*plan.tree_, mesh);
    if (req > 0.0) d = std::max(d, 1.05 * req);
    if (!(d < 2.0 / 3.0)) {
      std::ostringstream msg;
      msg << "leaf elements protrude " << req << " leaf halfwidths; no offset d < 2/3 encloses them (raise s_max)";
      throw ConfigError(msg.str());
    }
  }
  plan.surface_ = SurfaceSpec::make(config.p, d);
  plan.init_far_field();
  plan.build_bem_s2m_cache();
  plan.build_bem_l2t_cache();
  plan.build_near_cache();
  return plan;
}

FmmPlan FmmPlan::bem_sharing(const FmmPlan& base, const KernelSpec& kernel) {
  if (base.mode_ != SourceMode::bem) throw ConfigError("bem_sharing needs a BEM plan");
  FmmPlan plan;
  plan.mode_ = SourceMode::bem;
  plan.kernel_ = kernel;
  plan.config_ = base.config_;
  plan.surface_ = base.surface_;
  plan.epsilon1_ = base.epsilon1_;
  plan.epsilon2_ = base.epsilon2_;
  plan.n_ = base.n_;
  plan.points_ = base.points_;
  plan.mesh_ = base.mesh_;
  plan.tree_ = base.tree_;
  plan.far_ = base.far_;
  plan.leaf_l2t_ = base.leaf_l2t_;
  plan.borrowed_far_ = true;
  plan.build_bem_s2m_cache();
  plan.build_near_cache();
  return plan;
}

void FmmPlan::build_bem_s2m_cache() {
  const Octree& tree = *tree_;
  const LevelOperators& lv = far_->levels[tree.depth()];
  const auto leaves = tree.leaves();
  auto cache = std::make_shared<std::vector<Matrix>>(leaves.size());
  const int n = int(lv.ops->up_check.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
    const Cube& c = tree.cube(leaves[j]);
    const auto members = tree.members(c);
    Matrix ic(n, members.size());
    for (int i = 0; i < n; ++i) {
      const Vec3 x = c.center + lv.surface_ratio * lv.ops->up_check[i];
      for (std::size_t k = 0; k < members.size(); ++k)
        ic(i, k) = element_integral(mesh_->triangle(members[k]), x, kernel_, config_.quadrature);
    }
    (*cache)[j] = lv.s2m_scale * (lv.ops->S_tilde * ic);
  }
  leaf_s2m_ = std::move(cache);
}

void FmmPlan::build_bem_l2t_cache() {
  const Octree& tree = *tree_;
  const LevelOperators& lv = far_->levels[tree.depth()];
  const auto leaves = tree.leaves();
  auto cache = std::make_shared<std::vector<Matrix>>(leaves.size());
  const int n = int(lv.ops->down_equiv.size());
  const SingleLayerKernel g;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
    const Cube& c = tree.cube(leaves[j]);
    const auto members = tree.members(c);
    Matrix dm(members.size(), n);
    for (int i = 0; i < n; ++i) {
      const Vec3 y = c.center + lv.surface_ratio * lv.ops->down_equiv[i];
      for (std::size_t k = 0; k < members.size(); ++k) dm(k, i) = g(points_[members[k]], y, Vec3::Zero());
    }
    (*cache)[j] = lv.l2t_scale * (dm * lv.ops->T_tilde);
  }
  leaf_l2t_ = std::move(cache);
}

void FmmPlan::build_near_cache() {
  const Octree& tree = *tree_;
  const auto leaves = tree.leaves();
  near_blocks_.assign(leaves.size(), Matrix());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
    const Cube& c = tree.cube(leaves[j]);
    const auto rows = tree.members(c);
    int cols = 0;
    for (int nb : c.near_list) cols += tree.cube(nb).size();
    Matrix block(rows.size(), cols);
    int col = 0;
    for (int nb : c.near_list)
      for (int s : tree.members(tree.cube(nb))) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const int t = rows[i];
          if (mode_ == SourceMode::bem)
            block(i, col) = element_integral(mesh_->triangle(s), points_[t], kernel_, config_.quadrature);
          else
            block(i, col) = t == s ? 0.0 : SingleLayerKernel{}(points_[t], points_[s], Vec3::Zero());
        }
        ++col;
      }
    near_blocks_[j] = std::move(block);
  }
}

Matrix FmmPlan::s2m(const Vector& q) const {
  const Octree& tree = *tree_;
  const LevelOperators& lv = far_->levels[tree.depth()];
  const auto leaves = tree.leaves();
  const OperatorSet& ops = *lv.ops;
  if (mode_ == SourceMode::bem) {
    Matrix out(ops.col_dim(), leaves.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
      const auto members = tree.members(tree.cube(leaves[j]));
      Vector qm(members.size());
      for (std::size_t k = 0; k < members.size(); ++k) qm[k] = q[members[k]];
      out.col(j).noalias() = (*leaf_s2m_)[j] * qm;
    }
    return out;
  }
  const int n = int(ops.up_check.size());
  Matrix check(n, leaves.size());
  Eigen::ArrayXd qs(static_cast<Index>(n_));
  const auto order = tree.order();
  for (std::size_t k = 0; k < n_; ++k) qs[Index(k)] = q[order[k]];
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
    const Cube& c = tree.cube(leaves[j]);
    for (int i = 0; i < n; ++i) {
      const Vec3 x = c.center + lv.surface_ratio * ops.up_check[i];
      check(i, j) = kInv4Pi * inverse_distance_sum(x[0], x[1], x[2], &sx_[c.begin], &sy_[c.begin], &sz_[c.begin],
                                                   &qs[c.begin], c.size());
    }
  }
  return lv.s2m_scale * (ops.S_tilde * check);
}

void FmmPlan::l2t(const Matrix& local, Vector& out) const {
  const Octree& tree = *tree_;
  const LevelOperators& lv = far_->levels[tree.depth()];
  const auto leaves = tree.leaves();
  const OperatorSet& ops = *lv.ops;
  if (mode_ == SourceMode::bem) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
      const auto members = tree.members(tree.cube(leaves[j]));
      const Vector v = (*leaf_l2t_)[j] * local.col(j);
      for (std::size_t k = 0; k < members.size(); ++k) out[members[k]] = v[k];
    }
    return;
  }
  const Matrix equiv = lv.l2t_scale * (ops.T_tilde * local);
  const int n = int(ops.down_equiv.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
    const Cube& c = tree.cube(leaves[j]);
    Eigen::ArrayXd ex(n), ey(n), ez(n);
    for (int i = 0; i < n; ++i) {
      const Vec3 y = c.center + lv.surface_ratio * ops.down_equiv[i];
      ex[i] = y[0];
      ey[i] = y[1];
      ez[i] = y[2];
    }
    const auto order = tree.order();
    for (int k = c.begin; k < c.end; ++k)
      out[order[k]] = kInv4Pi * inverse_distance_sum(sx_[k], sy_[k], sz_[k], ex.data(), ey.data(), ez.data(),
                                                     &equiv(0, j), n);
  }
}

namespace {

/// y(:, targets) += scale * op(x(:, sources)) over (target, source) pairs.
template <class Op>
void batched(const std::vector<std::pair<int, int>>& pairs, const Matrix& x, Matrix& y, Op op) {
  if (pairs.empty()) return;
  Matrix gathered(x.rows(), pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) gathered.col(k) = x.col(pairs[k].second);
  Matrix result = Matrix::Zero(y.rows(), pairs.size());
  op(gathered, result);
  for (std::size_t k = 0; k < pairs.size(); ++k) y.col(pairs[k].first) += result.col(k);
}

std::vector<std::pair<int, int>> swapped(const std::vector<std::pair<int, int>>& pairs) {
  std::vector<std::pair<int, int>> out(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) out[k] = {pairs[k].second, pairs[k].first};
  return out;
}

}  // namespace

UpwardState FmmPlan::upward_pass(const Vector& q) const {
  check_length(q);
  const Octree& tree = *tree_;
  const int depth = tree.depth();
  UpwardState up;
  up.levels.resize(depth + 1);
  up.levels[depth] = s2m(q);
  for (int l = depth - 1; l >= 0; --l) {
    const LevelOperators& child = far_->levels[l + 1];
    const LevelOperators& self = far_->levels[l];
    up.levels[l] = Matrix::Zero(self.ops->col_dim(), tree.level(l).size());
    for (int o = 0; o < 8; ++o) {
      // pairs are (child, parent); batched wants (target, source)
      batched(swapped(child.child_pairs[o]), up.levels[l + 1], up.levels[l],
              [&](const Matrix& x, Matrix& y) { y.noalias() = child.ops->M_tilde[o] * x; });
    }
  }
  return up;
}

Vector FmmPlan::downward_pass(const UpwardState& up, PhaseTimings* timings) const {
  const Octree& tree = *tree_;
  const int depth = tree.depth();
  if (int(up.levels.size()) != depth + 1) throw std::invalid_argument("upward state does not match the plan");
  double t_m2l = 0.0;
  const auto t0 = Clock::now();
  Matrix parent_local;
  Matrix local;
  for (int l = kMinDepth; l <= depth; ++l) {
    const LevelOperators& lv = far_->levels[l];
    local = Matrix::Zero(lv.ops->row_dim(), tree.level(l).size());
    if (l > kMinDepth)
      for (int o = 0; o < 8; ++o)
        batched(lv.child_pairs[o], parent_local, local,
                [&](const Matrix& x, Matrix& y) { y.noalias() = lv.ops->L_tilde[o] * x; });
    const auto tm = Clock::now();
    for (int off = 0; off < kNumOffsets; ++off) {
      const M2LBlock& blk = lv.ops->m2l.blocks[off];
      if (blk.rank == 0) continue;
      batched(lv.m2l_pairs[off], up.levels[l], local,
              [&](const Matrix& x, Matrix& y) { blk.apply_add(x, y, lv.m2l_scale); });
    }
    t_m2l += seconds_since(tm);
    parent_local = std::move(local);
  }
  Vector out = Vector::Zero(n_);
  l2t(parent_local, out);
  if (timings) {
    timings->m2l = t_m2l;
    timings->downward = seconds_since(t0) - t_m2l;
  }
  return out;
}

Vector FmmPlan::near_pass(const Vector& q) const {
  check_length(q);
  const Octree& tree = *tree_;
  const auto leaves = tree.leaves();
  Vector out = Vector::Zero(n_);
  if (!near_blocks_.empty()) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
      const Cube& c = tree.cube(leaves[j]);
      Vector src(near_blocks_[j].cols());
      int col = 0;
      for (int nb : c.near_list)
        for (int s : tree.members(tree.cube(nb))) src[col++] = q[s];
      const Vector v = near_blocks_[j] * src;
      const auto rows = tree.members(c);
      for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = v[i];
    }
    return out;
  }
  const auto order = tree.order();
  Eigen::ArrayXd qs(static_cast<Index>(n_));
  for (std::size_t k = 0; k < n_; ++k) qs[Index(k)] = q[order[k]];
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(leaves.size()); ++j) {
    const Cube& c = tree.cube(leaves[j]);
    for (int t = c.begin; t < c.end; ++t) {
      double s = 0.0;
      for (int nb : c.near_list) {
        const Cube& d = tree.cube(nb);
        if (nb != leaves[j]) {
          s += inverse_distance_sum(sx_[t], sy_[t], sz_[t], &sx_[d.begin], &sy_[d.begin], &sz_[d.begin], &qs[d.begin],
                                    d.size());
        } else {
          for (int k = d.begin; k < d.end; ++k)
            if (k != t) s += qs[k] / std::sqrt(std::pow(sx_[t] - sx_[k], 2) + std::pow(sy_[t] - sy_[k], 2) +
                                               std::pow(sz_[t] - sz_[k], 2));
        }
      }
      out[order[t]] = kInv4Pi * s;
    }
  }
  return out;
}

Vector FmmPlan::apply(const Vector& q, PhaseTimings* timings) const {
  check_length(q);
  const auto t0 = Clock::now();
  const UpwardState up = upward_pass(q);
  const double t_up = seconds_since(t0);
  PhaseTimings local;
  const Vector far = downward_pass(up, &local);
  const auto tn = Clock::now();
  const Vector near = near_pass(q);
  const double t_near = seconds_since(tn);
  Vector out = far + near;
  if (timings) {
    timings->upward = t_up;
    timings->m2l = local.m2l;
    timings->downward = local.downward;
    timings->near = t_near;
    timings->total = seconds_since(t0);
  }
  return out;
}

std::size_t FmmPlan::memory_estimate() const {
  std::size_t b = 0;
  if (!borrowed_far_) {
    for (const auto& s : far_->sets) b += s->bytes();
    if (leaf_l2t_)
      for (const auto& m : *leaf_l2t_) b += matrix_bytes(m);
  }
  if (leaf_s2m_)
    for (const auto& m : *leaf_s2m_) b += matrix_bytes(m);
  for (const auto& m : near_blocks_) b += matrix_bytes(m);
  return b;
}

std::size_t FmmPlan::footprint_bytes() const {
  std::size_t b = memory_estimate();
  for (const auto& lv : far_->levels) {
    for (const auto& pairs : lv.m2l_pairs) b += pairs.size() * sizeof(std::pair<int, int>);
    for (const auto& pairs : lv.child_pairs) b += pairs.size() * sizeof(std::pair<int, int>);
  }
  for (const auto& c : tree_->cubes())
    b += sizeof(Cube) + c.near_list.size() * sizeof(int) + c.interaction_list.size() * sizeof(Interaction);
  b += tree_->num_points() * sizeof(int) + points_.size() * sizeof(Vec3) + 3 * sizeof(double) * std::size_t(sx_.size());
  return b;
}

void FmmPlan::equivalent_densities(const UpwardState& up, int level, int position, std::vector<Vec3>& points,
                                   Vector& densities) const {
  const LevelOperators& lv = far_->levels.at(level);
  const Cube& c = tree_->cube(tree_->level(level)[position]);
  points.resize(lv.ops->up_equiv.size());
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = c.center + lv.surface_ratio * lv.ops->up_equiv[i];
  densities = lv.ops->proj.R_tilde * up.levels.at(level).col(position);
}

}  // namespace kifmm
