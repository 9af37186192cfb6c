#include "kifmm/surfaces.hpp"

#include <cmath>
#include <sstream>

namespace kifmm {

SurfaceSpec SurfaceSpec::make(int p, double d) {
  if (p < 2) throw ConfigError("surface sampling needs p >= 2");
  if (!(d >= 0.0 && d < 2.0 / 3.0)) throw ConfigError("surface offset d must lie in [0, 2/3)");
  return SurfaceSpec{p, d};
}

std::vector<Vec3> sample_cube_surface(const Vec3& center, double halfwidth, int p) {
  if (p < 2) throw ConfigError("surface sampling needs p >= 2");
  if (!(halfwidth > 0.0)) throw ConfigError("surface halfwidth must be positive");
  std::vector<Vec3> pts;
  pts.reserve(6 * (p - 1) * (p - 1) + 2);
  const double step = 2.0 / (p - 1);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      for (int k = 0; k < p; ++k) {
        if (i != 0 && i != p - 1 && j != 0 && j != p - 1 && k != 0 && k != p - 1) continue;
        const Vec3 unit(-1.0 + i * step, -1.0 + j * step, -1.0 + k * step);
        pts.push_back(center + halfwidth * unit);
      }
  return pts;
}

SurfaceHalfwidths surface_halfwidths(double r, double d) {
  if (!(d >= 0.0 && d < 2.0 / 3.0)) {
    std::ostringstream msg;
    msg << "surface offset d = " << d << " outside [0, 2/3): equivalent and check surfaces would touch";
    throw ConfigError(msg.str());
  }
  return {(1.0 + d) * r, (3.0 - 2.0 * d) * r};
}

double role_halfwidth(SurfaceRole role, double r, double d) {
  const auto hw = surface_halfwidths(r, d);
  switch (role) {
    case SurfaceRole::upward_equivalent:
    case SurfaceRole::downward_check:
      return hw.equiv;
    case SurfaceRole::upward_check:
    case SurfaceRole::downward_equivalent:
    default:
      return hw.check;
  }
}

SurfaceCloud make_surface(SurfaceRole role, const Vec3& center, double r, const SurfaceSpec& spec) {
  SurfaceCloud cloud;
  cloud.role = role;
  cloud.owner_center = center;
  cloud.owner_halfwidth = r;
  cloud.points = sample_cube_surface(center, role_halfwidth(role, r, spec.d), spec.p);
  return cloud;
}

double bem_offset(int s_max, double c_d) {
  if (s_max < 1) throw ConfigError("bem_offset: s_max must be >= 1");
  if (!(c_d > 0.0)) throw ConfigError("bem_offset: C_d must be positive");
  const double d = c_d / std::sqrt(double(s_max));
  if (d >= 2.0 / 3.0) {
    std::ostringstream msg;
    msg << "bem_offset: d = C_d/sqrt(s_max) = " << d << " >= 2/3; use a larger s_max or a smaller C_d";
    throw ConfigError(msg.str());
  }
  return d;
}

}  // namespace kifmm
