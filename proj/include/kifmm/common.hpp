#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace kifmm {

using Vec3 = Eigen::Vector3d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index3 = std::array<int, 3>;
using Index = Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;

/// Invalid tunable or geometric configuration (bad p, d out of range, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Kernel evaluated at (numerically) coincident points.
class KernelDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Unrecoverable numerical failure (rank-0 operator, singular system, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kifmm
