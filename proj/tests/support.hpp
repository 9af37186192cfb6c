#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "kifmm/common.hpp"

namespace testing {

inline std::vector<kifmm::Vec3> uniform_cube(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<kifmm::Vec3> pts(n);
  for (auto& p : pts) p = kifmm::Vec3(u(rng), u(rng), u(rng));
  return pts;
}

inline std::vector<kifmm::Vec3> uniform_sphere(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<kifmm::Vec3> pts(n);
  for (auto& p : pts) p = kifmm::Vec3(g(rng), g(rng), g(rng)).normalized();
  return pts;
}

inline kifmm::Vector uniform_vector(std::size_t n, unsigned seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  kifmm::Vector v(static_cast<kifmm::Index>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Scratch directory removed at scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(std::random_device{}()) + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testing
