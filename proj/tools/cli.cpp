#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <Eigen/SVD>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kifmm/bem.hpp"
#include "kifmm/compression.hpp"
#include "kifmm/engine.hpp"
#include "kifmm/mesh.hpp"
#include "kifmm/oracle.hpp"
#include "kifmm/report.hpp"
#include "kifmm/translation.hpp"

namespace kifmm::cli {
namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw InputError(std::string("cannot open ") + what + " file '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

std::vector<Vec3> read_points(const std::string& path) {
  std::ifstream in = open_input(path, "points");
  std::string line;
  int lineno = 0;
  long long n = -1;
  std::vector<Vec3> pts;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::istringstream ls(line);
    std::string extra;
    if (n < 0) {
      if (!(ls >> n) || n < 1 || (ls >> extra)) throw InputError(path + ":" + std::to_string(lineno) + ": expected a positive point count");
      pts.reserve(std::size_t(n));
      continue;
    }
    Vec3 p;
    if (!(ls >> p[0] >> p[1] >> p[2]) || (ls >> extra) || !p.allFinite())
      throw InputError(path + ":" + std::to_string(lineno) + ": expected three finite coordinates");
    if ((long long)pts.size() == n) throw InputError(path + ":" + std::to_string(lineno) + ": more points than declared");
    pts.push_back(p);
  }
  if (n < 0) throw InputError(path + ": empty points file");
  if ((long long)pts.size() != n)
    throw InputError(path + ": declared " + std::to_string(n) + " points, found " + std::to_string(pts.size()));
  return pts;
}

Vector read_vector(const std::string& path, std::size_t n) {
  std::ifstream in = open_input(path, "densities");
  std::string line;
  int lineno = 0;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::istringstream ls(line);
    double x;
    std::string extra;
    if (!(ls >> x) || (ls >> extra) || !std::isfinite(x))
      throw InputError(path + ":" + std::to_string(lineno) + ": expected one finite real");
    v.push_back(x);
  }
  if (v.size() != n)
    throw InputError(path + ": expected " + std::to_string(n) + " densities, found " + std::to_string(v.size()));
  return Eigen::Map<Vector>(v.data(), Index(v.size()));
}

void write_report(const RunReport& report, const std::string& path) {
  const std::string text = to_json(report).dump(2);
  if (path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out = open_output(path);
    out << text << "\n";
  }
}

struct ConfigFlags {
  FmmConfig config;
  std::optional<double> eps1;
  bool no_compress = false;

  void add(CLI::App* app) {
    app->add_option("--p", config.p, "surface points per cube edge")->capture_default_str();
    app->add_option("--smax", config.s_max, "maximum members per leaf")->capture_default_str();
    app->add_option("--c1", config.C1, "epsilon1 = C1 2^-L / L")->capture_default_str();
    app->add_option("--c2", config.C2, "epsilon2 = C2 epsilon1 / p~")->capture_default_str();
    app->add_option("--eps1", eps1, "fixed epsilon1 (overrides --c1)");
    app->add_flag("--no-compress", no_compress, "dense M2L without projectors");
    app->add_flag("--per-level", config.per_level_operators, "build operators on every level");
  }
  FmmConfig get() const {
    FmmConfig c = config;
    c.epsilon1 = eps1;
    c.compress = !no_compress;
    c.validate();
    return c;
  }
};

// eval ---------------------------------------------------------------------

struct EvalArgs {
  ConfigFlags flags;
  std::string points, densities, out, report;
  bool check_dense = false;
};

int cmd_eval(const EvalArgs& a) {
  FmmConfig cfg = a.flags.get();
  const std::vector<Vec3> pts = read_points(a.points);
  const Vector q = read_vector(a.densities, pts.size());
  if (a.check_dense && pts.size() > kDirectSumGuard)
    throw ConfigError("--check-dense is limited to " + std::to_string(kDirectSumGuard) + " points");

  RunReport report;
  report.command = "eval";
  auto t0 = Clock::now();
  const FmmPlan plan = FmmPlan::particles(pts, cfg);
  report.t_setup = since(t0);
  const Vector phi = plan.apply(q, &report.mvm);
  describe_plan(report, plan);
  if (a.check_dense) report.error = relative_l2(phi, direct_sum(pts, q));

  std::ofstream out = open_output(a.out);
  for (Index i = 0; i < phi.size(); ++i) out << phi[i] << "\n";
  write_report(report, a.report);
  return ok;
}

// solve --------------------------------------------------------------------

struct SolveArgs {
  ConfigFlags flags;
  double c_d = 0.5;
  bool enclose = false;
  std::string mesh, bc, out, report, layer = "single";
  std::optional<double> dirichlet_const;
  double tol = 1e-6;
  int restart = 50;
  int max_iter = 1000;
  bool dense_baseline = false;
};

int cmd_solve(const SolveArgs& a) {
  FmmConfig cfg = a.flags.get();
  cfg.C_d = a.c_d;
  cfg.enclose_elements = a.enclose;
  cfg.validate();
  const TriMesh mesh = load_mesh(a.mesh);
  BoundaryCondition bc =
      a.dirichlet_const ? BoundaryCondition::dirichlet(std::vector<double>(mesh.size(), *a.dirichlet_const))
                        : load_bc(a.bc, mesh.size());
  const Layer layer = a.layer == "double" ? Layer::double_layer : Layer::single_layer;
  if (a.dense_baseline && mesh.size() > kDenseBemGuard)
    throw ConfigError("--dense-baseline is limited to " + std::to_string(kDenseBemGuard) + " elements");

  GmresOptions opt;
  opt.tol = a.tol;
  opt.restart = a.restart;
  opt.max_iter = a.max_iter;
  const BemSolution sol = solve_bem(mesh, bc, cfg, opt, layer);

  RunReport report;
  report.command = "solve";
  describe_plan(report, *sol.plan);
  report.config["gmres"] = {{"tol", a.tol}, {"restart", a.restart}, {"max_iter", a.max_iter}};
  report.config["layer"] = a.layer;
  report.t_setup = sol.setup_seconds;
  report.memory_bytes = (long long)sol.memory_bytes;
  sol.plan->apply(Vector::Ones(Index(mesh.size())), &report.mvm);
  report.solver = sol.stats;
  if (a.dense_baseline) report.error = relative_l2(sol.x, dense_bem_solve(mesh, bc, layer, cfg.quadrature));

  std::ofstream out = open_output(a.out);
  if (bc.all_dirichlet()) {
    out << "element_id,solution\n";
    for (Index i = 0; i < sol.x.size(); ++i) out << i << "," << sol.x[i] << "\n";
  } else {
    out << "element_id,u,q\n";
    for (Index i = 0; i < sol.x.size(); ++i) out << i << "," << sol.u[i] << "," << sol.q[i] << "\n";
  }
  write_report(report, a.report);
  if (!sol.stats.converged) {
    std::cerr << "solve: GMRES did not converge (relative residual " << sol.stats.final_residual << " after "
              << sol.stats.iterations << " iterations)\n";
    return not_converged;
  }
  return ok;
}

// compress-stats -----------------------------------------------------------

struct StatsArgs {
  int p = 8;
  std::optional<double> eps1, c1;
  std::optional<int> depth;
  double c2 = 10.0;
  double d = 0.1;
  std::string out;
};

int cmd_compress_stats(const StatsArgs& a) {
  double eps1;
  if (a.eps1) {
    eps1 = *a.eps1;
  } else if (a.c1 && a.depth) {
    if (*a.depth < 1) throw ConfigError("--depth must be >= 1");
    eps1 = epsilon1(*a.c1, *a.depth);
  } else {
    throw ConfigError("give --eps1, or --c1 together with --depth");
  }
  if (!(eps1 > 0.0 && eps1 < 1.0)) throw ConfigError("epsilon1 must lie in (0, 1)");
  if (!(a.c2 >= 0.0)) throw ConfigError("--c2 must be >= 0");
  const SurfaceSpec spec = SurfaceSpec::make(a.p, a.d);
  const KernelSpec kernel = KernelSpec::single_layer();
  const auto& offsets = offset_table();
  std::vector<Matrix> blocks;
  blocks.reserve(offsets.size());
  for (const Index3& o : offsets) blocks.push_back(build_m2l_for_halfwidth(o, 1.0, spec, kernel));
  const Projectors proj = compute_projectors(blocks, eps1, kernel.symmetric);
  const double eps2 = epsilon2(a.c2, eps1, std::max(proj.row_dim(), proj.col_dim()));

  std::ofstream file;
  if (!a.out.empty()) file = open_output(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << std::setprecision(10);
  out << "offset_id,di,dj,dk,original_dim,compressed_dim,rank,spectral_error\n";
  for (std::size_t id = 0; id < offsets.size(); ++id) {
    const M2LBlock b = low_rank_factor(compress_m2l(blocks[id], proj), eps2, proj.sigma_max_fat);
    const Matrix approx = proj.U_tilde * b.to_dense() * proj.R_tilde.transpose();
    const double err = Eigen::BDCSVD<Matrix>(approx - blocks[id]).singularValues()[0] / proj.sigma_max_fat;
    const Index3& o = offsets[id];
    out << id << "," << o[0] << "," << o[1] << "," << o[2] << "," << proj.full_dim() << "," << proj.row_dim() << ","
        << b.rank << "," << err << "\n";
  }
  return ok;
}

// bench --------------------------------------------------------------------

struct BenchArgs {
  ConfigFlags flags;
  std::vector<long long> n_list;
  std::string geometry = "cube-points";
  unsigned long long seed = 1;
  int repeat = 3;
  long long oracle_cap = 20000;
  std::string out;
};

int cmd_bench(const BenchArgs& a) {
  const FmmConfig cfg = a.flags.get();
  if (a.n_list.empty()) throw ConfigError("--n-list is empty");
  for (long long n : a.n_list)
    if (n < 1) throw ConfigError("--n-list entries must be positive");
  if (a.repeat < 1) throw ConfigError("--repeat must be >= 1");

  std::ofstream file;
  if (!a.out.empty()) file = open_output(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << std::setprecision(8);
  out << "N,T_setup,T_mvm,memory,footprint,error\n";
  for (long long n_req : a.n_list) {
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal;
    std::optional<TriMesh> mesh;
    std::vector<Vec3> pts;
    if (a.geometry == "icosphere-mesh") {
      int level = 0;
      while (20LL << (2 * level) < n_req) ++level;
      mesh = icosphere(level);
    } else {
      pts.resize(std::size_t(n_req));
      for (Vec3& p : pts) {
        if (a.geometry == "sphere-points") {
          do p = Vec3(normal(rng), normal(rng), normal(rng));
          while (p.norm() < 1e-12);
          p.normalize();
        } else {
          p = Vec3(unit(rng), unit(rng), unit(rng));
        }
      }
    }
    const std::size_t n = mesh ? mesh->size() : pts.size();
    Vector q(static_cast<Index>(n));
    for (Index i = 0; i < q.size(); ++i) q[i] = unit(rng);

    const auto t0 = Clock::now();
    const FmmPlan plan = mesh ? FmmPlan::bem(*mesh, cfg, KernelSpec::single_layer()) : FmmPlan::particles(pts, cfg);
    const double t_setup = since(t0);
    double t_mvm = std::numeric_limits<double>::infinity();
    Vector phi;
    for (int r = 0; r < a.repeat; ++r) {
      PhaseTimings t;
      phi = plan.apply(q, &t);
      t_mvm = std::min(t_mvm, t.total);
    }
    std::optional<double> err;
    if ((long long)n <= a.oracle_cap) {
      if (mesh) {
        if (n <= kDenseBemGuard)
          err = relative_l2(phi, dense_layer_matrix(*mesh, KernelSpec::single_layer(), cfg.quadrature) * q);
      } else {
        err = relative_l2(phi, direct_sum(pts, q));
      }
    }
    out << n << "," << t_setup << "," << t_mvm << "," << plan.memory_estimate() << "," << plan.footprint_bytes() << ",";
    if (err) out << *err;
    out << "\n";
    out.flush();
  }
  return ok;
}

void set_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("FMM_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v < 1) throw ConfigError("FMM_THREADS must be a positive integer");
      threads = int(v);
    }
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Kernel-independent FMM with compressed M2L for particles and boundary elements"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (fallback: FMM_THREADS)");

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "potentials of point densities");
  eval->add_option("--points", ev.points, "text file: N, then x y z per line")->required();
  eval->add_option("--densities", ev.densities, "text file: one density per line")->required();
  eval->add_option("--out", ev.out, "potentials, one per line")->required();
  eval->add_option("--report", ev.report, "RunReport JSON (stdout when omitted)");
  eval->add_option("--d", ev.flags.config.d_particle, "surface offset")->capture_default_str();
  eval->add_flag("--check-dense", ev.check_dense, "compare with direct summation");
  ev.flags.add(eval);

  SolveArgs sv;
  CLI::App* solve = app.add_subcommand("solve", "Laplace BEM solve");
  solve->add_option("--mesh", sv.mesh, "OFF or plain mesh")->required();
  CLI::Option* bc_opt = solve->add_option("--bc", sv.bc, "CSV element_id,kind,value with kind d or n");
  CLI::Option* dc_opt = solve->add_option("--dirichlet-const", sv.dirichlet_const, "Dirichlet value on every element");
  bc_opt->excludes(dc_opt);
  solve->add_option("--out", sv.out, "solution CSV")->required();
  solve->add_option("--report", sv.report, "RunReport JSON (stdout when omitted)");
  solve->add_option("--cd", sv.c_d, "d = C_d / sqrt(s_max)")->capture_default_str();
  solve->add_flag("--enclose", sv.enclose, "grow d until leaf elements are enclosed");
  solve->add_option("--tol", sv.tol, "GMRES relative tolerance")->capture_default_str();
  solve->add_option("--restart", sv.restart, "GMRES restart length")->capture_default_str();
  solve->add_option("--max-iter", sv.max_iter, "GMRES iteration cap")->capture_default_str();
  solve->add_option("--layer", sv.layer, "Dirichlet formulation")
      ->check(CLI::IsMember({"single", "double"}))
      ->capture_default_str();
  solve->add_flag("--dense-baseline", sv.dense_baseline, "compare with a dense direct solve");
  sv.flags.add(solve);

  StatsArgs st;
  CLI::App* stats = app.add_subcommand("compress-stats", "per-offset M2L compression table");
  stats->add_option("--p", st.p)->capture_default_str();
  stats->add_option("--eps1", st.eps1);
  stats->add_option("--c1", st.c1);
  stats->add_option("--depth", st.depth);
  stats->add_option("--c2", st.c2)->capture_default_str();
  stats->add_option("--d", st.d)->capture_default_str();
  stats->add_option("--out", st.out, "CSV (stdout when omitted)");

  BenchArgs bn;
  CLI::App* bench = app.add_subcommand("bench", "scaling table");
  bench->add_option("--n-list", bn.n_list, "comma-separated sizes")->delimiter(',')->required();
  bench->add_option("--geometry", bn.geometry)
      ->check(CLI::IsMember({"sphere-points", "cube-points", "icosphere-mesh"}))
      ->capture_default_str();
  bench->add_option("--seed", bn.seed)->capture_default_str();
  bench->add_option("--repeat", bn.repeat, "MVM repetitions, fastest kept")->capture_default_str();
  bench->add_option("--oracle-cap", bn.oracle_cap, "largest N with an oracle error")->capture_default_str();
  bench->add_option("--out", bn.out, "CSV (stdout when omitted)");
  bn.flags.add(bench);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }
  if (solve->parsed() && !bc_opt->count() && !dc_opt->count()) {
    std::cerr << "solve: give --bc or --dirichlet-const\n";
    return usage;
  }

  try {
    set_threads(threads);
    if (eval->parsed()) return cmd_eval(ev);
    if (solve->parsed()) return cmd_solve(sv);
    if (stats->parsed()) return cmd_compress_stats(st);
    return cmd_bench(bn);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const MeshError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const KernelDomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return usage;
}

}  // namespace kifmm::cli
