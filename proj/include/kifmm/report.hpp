#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "kifmm/engine.hpp"
#include "kifmm/gmres.hpp"

namespace kifmm {

struct RunReport {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  long long n = 0;
  int depth = 0;
  int original_dim = 0;
  int p_tilde_row = 0;
  int p_tilde_col = 0;
  double epsilon1 = 0.0;
  double epsilon2 = 0.0;
  double surface_offset = 0.0;
  double t_setup = 0.0;
  PhaseTimings mvm;  // one matrix-vector product
  long long memory_bytes = 0;     // stored operators and near blocks
  long long footprint_bytes = 0;  // plus tree and point storage
  std::optional<double> error;  // vs oracle, when requested
  std::optional<IterationStats> solver;
};

nlohmann::json config_json(const FmmConfig& config);
nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

/// Fills the plan-derived fields (N, depth, dims, epsilons, memory).
void describe_plan(RunReport& report, const FmmPlan& plan);

}  // namespace kifmm
