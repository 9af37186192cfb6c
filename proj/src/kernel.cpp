#include "kifmm/kernel.hpp"

#include <algorithm>
#include <sstream>

namespace kifmm {

namespace {

constexpr double kCoincidentRelTol = 1e-14;

void check_distinct(const Vec3& x, const Vec3& y) {
  const double scale = std::max({x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff(), 0.0});
  const double r = (x - y).norm();
  if (r == 0.0 || r < kCoincidentRelTol * scale) {
    std::ostringstream msg;
    msg << "kernel evaluated at coincident points (" << x.transpose() << ") and (" << y.transpose() << ")";
    throw KernelDomainError(msg.str());
  }
}

}  // namespace

void require_unit_normal(const Vec3& n) {
  if (std::abs(n.norm() - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "double-layer normal is not a unit vector: |n| = " << n.norm();
    throw std::invalid_argument(msg.str());
  }
}

double eval_single(const Vec3& x, const Vec3& y) {
  check_distinct(x, y);
  return SingleLayerKernel{}(x, y, Vec3::Zero());
}

double eval_double(const Vec3& x, const Vec3& y, const Vec3& n_y) {
  check_distinct(x, y);
  require_unit_normal(n_y);
  return DoubleLayerKernel{}(x, y, n_y);
}

double evaluate(const KernelSpec& spec, const Vec3& x, const Vec3& y, const Vec3* n_y) {
  if (spec.layer == Layer::double_layer) {
    if (n_y == nullptr) throw std::invalid_argument("double-layer kernel requires a source normal");
    return eval_double(x, y, *n_y);
  }
  return eval_single(x, y);
}

Matrix kernel_matrix(std::span<const Vec3> targets, std::span<const Vec3> sources, const KernelSpec& spec,
                     std::span<const Vec3> normals) {
  if (spec.needs_normals()) {
    if (normals.size() != sources.size())
      throw std::invalid_argument("kernel_matrix: double layer needs one normal per source");
    for (const auto& n : normals) require_unit_normal(n);
  }

  Matrix out(targets.size(), sources.size());
  if (targets.empty() || sources.empty()) return out;

  Vec3 lo = targets[0], hi = targets[0];
  for (const auto& t : targets) lo = lo.cwiseMin(t), hi = hi.cwiseMax(t);
  for (const auto& s : sources) lo = lo.cwiseMin(s), hi = hi.cwiseMax(s);
  const double min_dist = kCoincidentRelTol * (hi - lo).norm();

  with_kernel(spec, [&](auto kernel) {
    const Vec3 zero = Vec3::Zero();
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const Vec3& n = spec.needs_normals() ? normals[j] : zero;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        const double r = (targets[i] - sources[j]).norm();
        if (r == 0.0 || r < min_dist) {
          std::ostringstream msg;
          msg << "kernel_matrix: target " << i << " and source " << j << " coincide";
          throw KernelDomainError(msg.str());
        }
        out(i, j) = kernel(targets[i], sources[j], n);
      }
    }
  });
  return out;
}

}  // namespace kifmm
