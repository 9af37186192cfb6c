#include "kifmm/report.hpp"

namespace kifmm {

using nlohmann::json;

json config_json(const FmmConfig& c) {
  json j = {{"p", c.p},
            {"s_max", c.s_max},
            {"C1", c.C1},
            {"C2", c.C2},
            {"C_d", c.C_d},
            {"d_particle", c.d_particle},
            {"pinv_cutoff", c.pinv_cutoff},
            {"near_cache", c.near_cache},
            {"compress", c.compress},
            {"per_level_operators", c.per_level_operators},
            {"enclose_elements", c.enclose_elements},
            {"pad", c.pad}};
  j["epsilon1_override"] = c.epsilon1 ? json(*c.epsilon1) : json(nullptr);
  return j;
}

json to_json(const RunReport& r) {
  json j;
  j["command"] = r.command;
  j["config"] = r.config;
  j["N"] = r.n;
  j["depth"] = r.depth;
  j["original_dim"] = r.original_dim;
  j["p_tilde"] = {{"row", r.p_tilde_row}, {"col", r.p_tilde_col}};
  j["epsilon1"] = r.epsilon1;
  j["epsilon2"] = r.epsilon2;
  j["surface_offset"] = r.surface_offset;
  j["timings"] = {{"setup", r.t_setup},      {"upward", r.mvm.upward}, {"m2l", r.mvm.m2l},
                  {"downward", r.mvm.downward}, {"near", r.mvm.near},     {"total_mvm", r.mvm.total}};
  j["memory_bytes"] = r.memory_bytes;
  j["footprint_bytes"] = r.footprint_bytes;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  if (r.solver) {
    const IterationStats& s = *r.solver;
    j["solver"] = {{"iterations", s.iterations},
                   {"restarts", s.restarts},
                   {"final_residual", s.final_residual},
                   {"converged", s.converged},
                   {"iteration_seconds", s.iteration_seconds},
                   {"residual_history", s.residual_history}};
  } else {
    j["solver"] = nullptr;
  }
  return j;
}

RunReport report_from_json(const json& j) {
  RunReport r;
  r.command = j.at("command").get<std::string>();
  r.config = j.at("config");
  r.n = j.at("N").get<long long>();
  r.depth = j.at("depth").get<int>();
  r.original_dim = j.at("original_dim").get<int>();
  r.p_tilde_row = j.at("p_tilde").at("row").get<int>();
  r.p_tilde_col = j.at("p_tilde").at("col").get<int>();
  r.epsilon1 = j.at("epsilon1").get<double>();
  r.epsilon2 = j.at("epsilon2").get<double>();
  r.surface_offset = j.at("surface_offset").get<double>();
  const json& t = j.at("timings");
  r.t_setup = t.at("setup").get<double>();
  r.mvm.upward = t.at("upward").get<double>();
  r.mvm.m2l = t.at("m2l").get<double>();
  r.mvm.downward = t.at("downward").get<double>();
  r.mvm.near = t.at("near").get<double>();
  r.mvm.total = t.at("total_mvm").get<double>();
  r.memory_bytes = j.at("memory_bytes").get<long long>();
  r.footprint_bytes = j.at("footprint_bytes").get<long long>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<double>();
  if (!j.at("solver").is_null()) {
    const json& s = j.at("solver");
    IterationStats st;
    st.iterations = s.at("iterations").get<int>();
    st.restarts = s.at("restarts").get<int>();
    st.final_residual = s.at("final_residual").get<double>();
    st.converged = s.at("converged").get<bool>();
    st.iteration_seconds = s.at("iteration_seconds").get<std::vector<double>>();
    st.residual_history = s.at("residual_history").get<std::vector<double>>();
    r.solver = st;
  }
  return r;
}

void describe_plan(RunReport& r, const FmmPlan& plan) {
  r.config = config_json(plan.config());
  r.n = (long long)plan.size();
  r.depth = plan.tree().depth();
  const OperatorSet& ops = *plan.level_ops(plan.tree().depth()).ops;
  r.original_dim = plan.surface().n_points();
  r.p_tilde_row = ops.row_dim();
  r.p_tilde_col = ops.col_dim();
  r.epsilon1 = plan.epsilon1();
  r.epsilon2 = plan.epsilon2();
  r.surface_offset = plan.surface().d;
  r.memory_bytes = (long long)plan.memory_estimate();
  r.footprint_bytes = (long long)plan.footprint_bytes();
}

}  // namespace kifmm
