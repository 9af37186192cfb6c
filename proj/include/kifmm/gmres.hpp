#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "kifmm/common.hpp"

namespace kifmm {

using LinearOperator = std::function<Vector(const Vector&)>;

struct GmresOptions {
  double tol = 1e-6;
  int restart = 50;
  int max_iter = 1000;
  std::optional<Vector> x0;
  LinearOperator preconditioner;  // right preconditioner M^-1; empty = identity
  double reorth_threshold = 1e-8;
};

struct IterationStats {
  int iterations = 0;
  int restarts = 0;
  double final_residual = 0.0;              // ||b - A x|| / ||b||, recomputed at exit
  std::vector<double> iteration_seconds;    // wall time of each Arnoldi step
  std::vector<double> residual_history;     // Arnoldi estimate after each step
  bool converged = false;
};

struct GmresResult {
  Vector x;
  IterationStats stats;
};

/// Restarted GMRES with modified Gram-Schmidt (plus one reorthogonalisation
/// pass when needed) and Givens rotations. Hitting max_iter returns a
/// non-converged result rather than throwing.
GmresResult gmres(const LinearOperator& op, const Vector& b, const GmresOptions& options = {});

}  // namespace kifmm
