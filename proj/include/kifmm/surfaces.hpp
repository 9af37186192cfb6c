#pragma once

#include <vector>

#include "kifmm/common.hpp"

namespace kifmm {

enum class SurfaceRole { upward_equivalent, upward_check, downward_equivalent, downward_check };

/// Sampling density and relative offset of the equivalent/check cubes.
struct SurfaceSpec {
  int p = 6;         // points per cube edge
  double d = 0.1;    // relative offset, 0 <= d < 2/3

  /// Validating constructor; throws ConfigError.
  static SurfaceSpec make(int p, double d);
  int n_points() const { return 6 * (p - 1) * (p - 1) + 2; }
};

struct SurfaceCloud {
  std::vector<Vec3> points;
  SurfaceRole role = SurfaceRole::upward_equivalent;
  Vec3 owner_center = Vec3::Zero();
  double owner_halfwidth = 0.0;  // halfwidth of the owning cube, not of the surface
};

struct SurfaceHalfwidths {
  double equiv;  // (1+d) r: upward equivalent, downward check
  double check;  // (3-2d) r: upward check, downward equivalent
};

/// Boundary points of the p^3 Cartesian grid on the cube [c-h, c+h]^3,
/// in (i, j, k) lexicographic order. Count = 6(p-1)^2 + 2.
std::vector<Vec3> sample_cube_surface(const Vec3& center, double halfwidth, int p);

SurfaceHalfwidths surface_halfwidths(double r, double d);

/// Halfwidth of the surface a role uses around a cube of halfwidth r.
double role_halfwidth(SurfaceRole role, double r, double d);

SurfaceCloud make_surface(SurfaceRole role, const Vec3& center, double r, const SurfaceSpec& spec);

/// d = C_d / sqrt(s_max) for boundary-element sources.
double bem_offset(int s_max, double c_d);

}  // namespace kifmm
