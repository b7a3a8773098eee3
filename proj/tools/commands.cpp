#include "commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "bdr/mpc.hpp"

#ifndef BDR_VERSION
#define BDR_VERSION "unknown"
#endif

namespace bdr::cli {
namespace {

namespace fs = std::filesystem;

// BDR_LOG=quiet|info|debug, default info.
int log_level() {
  static const int level = [] {
    const char* env = std::getenv("BDR_LOG");
    const std::string v = env ? env : "info";
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
  }();
  return level;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

std::function<void(const TraceRow&)> debug_hook(const std::string& tag) {
  if (log_level() < 2) return {};
  return [tag](const TraceRow& r) {
    std::cerr << tag << " iter " << r.iter << " residual " << r.residual_s << '\n';
  };
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

RunManifest manifest_for(const Common& c, std::string command, std::string scenario,
                         std::vector<std::string> solvers, double epsilon, double mu) {
  RunManifest m;
  m.command = std::move(command);
  m.scenario = std::move(scenario);
  m.solvers = std::move(solvers);
  m.seed = c.seed;
  m.epsilon = epsilon;
  m.mu = mu;
  m.out = c.out;
  m.version = version();
  m.argv = c.argv;
  return m;
}

}  // namespace

std::string version() { return BDR_VERSION; }

void write_manifest(const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["scenario"] = m.scenario;
  j["solvers"] = m.solvers;
  j["seed"] = m.seed;
  j["epsilon"] = m.epsilon;
  j["mu"] = m.mu;
  j["out"] = m.out.string();
  j["version"] = m.version;
  j["argv"] = m.argv;
  fs::create_directories(m.out);
  open_out(m.out / "manifest.json") << j.dump(2) << '\n';
}

Scenario resolve_scenario(const std::string& spec, std::uint64_t seed) {
  SynthOptions o;
  o.seed = seed;
  if (spec == "paper") return synth_scenario(paper_mix_kinds(), o);
  if (spec == "toy") {
    const std::vector<BuildingKind> kinds{BuildingKind::kSmall, BuildingKind::kSmall,
                                          BuildingKind::kMiddle};
    Scenario sc = synth_scenario(kinds, o);
    sc.name = "toy";
    return sc;
  }
  return load_scenario(spec);
}

int cmd_bench_paper(const BenchOptions& o) {
  const Common& c = o.common;
  SynthOptions so;
  so.seed = c.seed;
  so.noise = o.noise;
  so.surge_width = o.surge_width;
  const Scenario sc = synth_scenario(paper_mix_kinds(), so);
  write_manifest(manifest_for(c, "bench-paper", "paper", {"aladin", "admm"}, o.epsilon, sc.mu));

  const std::vector<LocalProblem> problems = build_problems(sc, 0);
  int vars = 0, ineqs = 0;
  for (const LocalProblem& lp : problems) {
    vars += lp.dim_z();
    ineqs += lp.num_inequalities();
  }
  const CouplingData coupling = coupling_at(sc, 0);
  {
    std::ofstream out = open_out(c.out / "scenario.csv");
    out << "key,value\n";
    out << "buildings," << sc.num_buildings() << '\n';
    out << "variables," << vars << '\n';
    out << "inequalities," << ineqs << '\n';
    out << "horizon," << sc.horizon << '\n';
    out << "dt_hours," << num(sc.dt_hours) << '\n';
    out << "mu," << num(sc.mu) << '\n';
    out << "v_lo," << num(sc.v_lo) << '\n';
    out << "v_hi," << num(sc.v_hi) << '\n';
    out << "pi_min," << num(coupling.pi.minCoeff()) << '\n';
    out << "pi_max," << num(coupling.pi.maxCoeff()) << '\n';
    out << "seed," << c.seed << '\n';
    out << "noise," << num(o.noise) << '\n';
    out << "surge_width," << num(o.surge_width) << '\n';
  }
  if (vars != 1456 || ineqs != 4816) {
    std::cerr << "bench-paper: expected 1456 variables and 4816 inequalities, got " << vars
              << " and " << ineqs << '\n';
    return 1;
  }

  std::ofstream summary = open_out(c.out / "summary.csv");
  summary << "run,solver,step,status,iterations,final_residual,case,active_set_delta\n";
  int code = 0;

  // Cold start on the first window.
  {
    AladinConfig ac;
    ac.epsilon = o.epsilon;
    ac.max_iter = o.cold_max_iter;
    ac.workers = c.workers;
    ac.on_iteration = debug_hook("cold aladin");
    AdmmConfig dc;
    dc.epsilon = o.epsilon;
    dc.max_iter = o.cold_max_iter;
    dc.workers = c.workers;
    dc.on_iteration = debug_hook("cold admm");
    for (SolverKind kind : {SolverKind::kAladin, SolverKind::kAdmm}) {
      const std::string name(to_string(kind));
      info("bench-paper: cold " + name);
      DistributedResult r;
      try {
        r = kind == SolverKind::kAladin ? aladin_solve(problems, ac) : admm_solve(problems, dc);
      } catch (const std::exception& ex) {
        std::cerr << "bench-paper: cold " << name << " failed: " << ex.what() << '\n';
        code = 2;
        continue;
      }
      write_trace_csv(c.out / ("cold_" + name + ".csv"), r.trace);
      summary << "cold," << name << ",0," << to_string(r.status) << ',' << r.iterations() << ','
              << num(r.trace.final_residual()) << ",,\n";
    }
  }

  // Warm-started closed loop.
  std::map<std::string, std::map<std::string, std::vector<int>>> by_case;
  for (SolverKind kind : {SolverKind::kAladin, SolverKind::kAdmm}) {
    const std::string name(to_string(kind));
    info("bench-paper: warm " + name + ", " + std::to_string(o.steps) + " steps");
    MpcConfig cfg;
    cfg.solver = kind;
    cfg.steps = o.steps;
    cfg.epsilon = o.epsilon;
    cfg.workers = c.workers;
    const ClosedLoopResult r = run_closed_loop(sc, cfg);
    write_episode_log(c.out / ("episodes_" + name + ".ndjson"), r.episodes, c.out / "traces");
    for (const MpcEpisode& ep : r.episodes) {
      const bool classified = ep.active_set_delta >= 0;
      const std::string cs = classified ? std::string(to_string(ep.episode_case)) : "";
      summary << "warm," << name << ',' << ep.step << ',' << to_string(ep.status) << ','
              << ep.trace.iterations() << ',' << num(ep.trace.final_residual()) << ',' << cs << ','
              << (classified ? std::to_string(ep.active_set_delta) : "") << '\n';
      if (classified) by_case[cs][name].push_back(ep.trace.iterations());
      if (ep.status != SolveStatus::kConverged) code = 2;
    }
    if (!r.ok()) {
      std::cerr << "bench-paper: warm " << name << " failed: " << r.error << '\n';
      code = 2;
    }
  }

  std::ofstream ratio = open_out(c.out / "speedup.csv");
  ratio << "case,episodes,aladin_mean_iterations,admm_mean_iterations,ratio\n";
  for (const auto& [cs, per_solver] : by_case) {
    auto mean = [&](const std::string& s) {
      const auto it = per_solver.find(s);
      if (it == per_solver.end() || it->second.empty()) return 0.0;
      double sum = 0;
      for (int k : it->second) sum += k;
      return sum / it->second.size();
    };
    const double a = mean("aladin"), d = mean("admm");
    const auto it = per_solver.find("aladin");
    ratio << cs << ',' << (it == per_solver.end() ? 0 : it->second.size()) << ',' << num(a) << ','
          << num(d) << ',' << (a > 0 ? num(d / a) : "") << '\n';
  }
  return code;
}

int cmd_mu_sweep(const MuSweepOptions& o) {
  const Common& c = o.common;
  if (o.grid.empty() || std::find(o.grid.begin(), o.grid.end(), 0.0) == o.grid.end()) {
    std::cerr << "mu-sweep: the grid must contain 0\n";
    return 1;
  }
  for (double mu : o.grid) {
    if (mu < 0) {
      std::cerr << "mu-sweep: negative mu " << mu << '\n';
      return 1;
    }
  }
  Scenario sc = resolve_scenario(o.scenario, c.seed);
  write_manifest(manifest_for(c, "mu-sweep", o.scenario, {"centralized"}, 0.0, sc.mu));

  // u*(0) from the form with the voltage eliminated.
  const CentralizedSolution ref = solve_centralized(assemble_eliminated(build_problems(sc, 0)));
  if (!ref.qp.ok()) {
    std::cerr << "mu-sweep: reference problem not solved\n";
    return 2;
  }
  std::ofstream out = open_out(c.out / "mu_sweep.csv");
  out << "mu,gap_inf_norm\n";
  int code = 0;
  for (double mu : o.grid) {
    double gap = 0.0;
    if (mu > 0) {
      sc.mu = mu;
      try {
        const CentralizedSolution s = solve_centralized(assemble_centralized(build_problems(sc, 0)));
        if (!s.qp.ok()) throw std::runtime_error("not solved");
        for (size_t i = 0; i < s.u.size(); ++i)
          gap = std::max(gap, (s.u[i] - ref.u[i]).cwiseAbs().maxCoeff());
      } catch (const std::exception& ex) {
        std::cerr << "mu-sweep: mu = " << mu << ": " << ex.what() << '\n';
        out << num(mu) << ",nan\n";
        code = 2;
        continue;
      }
    }
    info("mu-sweep: mu " + num(mu) + " gap " + num(gap));
    out << num(mu) << ',' << num(gap) << '\n';
  }
  return code;
}

int cmd_compare(const CompareOptions& o) {
  const Common& c = o.common;
  if (o.solvers.empty()) {
    std::cerr << "compare: no solvers\n";
    return 1;
  }
  std::vector<SolverKind> kinds;
  try {
    for (const std::string& s : o.solvers) kinds.push_back(parse_solver_kind(s));
  } catch (const std::invalid_argument& ex) {
    std::cerr << "compare: " << ex.what() << '\n';
    return 1;
  }
  if (o.warm && o.step < 1) {
    std::cerr << "compare: warm runs need --step >= 1\n";
    return 1;
  }
  const Scenario sc = resolve_scenario(o.scenario, c.seed);
  write_manifest(manifest_for(c, "compare", o.scenario, o.solvers, o.epsilon, sc.mu));

  std::vector<SolveTrace> traces;
  std::vector<SolveStatus> status;
  int code = 0;
  for (SolverKind kind : kinds) {
    const std::string name(to_string(kind));
    SolveTrace trace;
    SolveStatus st = SolveStatus::kMaxIterations;
    if (o.warm) {
      // Episode `step` of a closed loop bootstrapped at step 0.
      MpcConfig cfg;
      cfg.solver = kind;
      cfg.steps = o.step + 1;
      cfg.epsilon = o.epsilon;
      cfg.max_iter = o.max_iter;
      cfg.workers = c.workers;
      const ClosedLoopResult r = run_closed_loop(sc, cfg);
      if (!r.ok()) {
        std::cerr << "compare: " << name << ": " << r.error << '\n';
        code = 2;
      } else {
        trace = r.episodes.back().trace;
        st = r.episodes.back().status;
      }
    } else {
      const std::vector<LocalProblem> problems = build_problems(sc, 0);
      try {
        DistributedResult r;
        if (kind == SolverKind::kAladin) {
          AladinConfig ac;
          ac.epsilon = o.epsilon;
          ac.max_iter = o.max_iter;
          ac.workers = c.workers;
          ac.on_iteration = debug_hook(name);
          r = aladin_solve(problems, ac);
        } else {
          AdmmConfig dc;
          dc.epsilon = o.epsilon;
          dc.max_iter = o.max_iter;
          dc.workers = c.workers;
          dc.on_iteration = debug_hook(name);
          r = admm_solve(problems, dc);
        }
        trace = r.trace;
        st = r.status;
      } catch (const std::exception& ex) {
        std::cerr << "compare: " << name << ": " << ex.what() << '\n';
        code = 2;
      }
    }
    if (st != SolveStatus::kConverged) code = 2;
    info("compare: " + name + " " + std::string(to_string(st)) + " after " +
         std::to_string(trace.iterations()) + " iterations");
    write_trace_csv(c.out / ("trace_" + name + ".csv"), trace);
    traces.push_back(std::move(trace));
    status.push_back(st);
  }

  {
    std::ofstream out = open_out(c.out / "residuals.csv");
    out << "iter";
    for (SolverKind k : kinds) out << ',' << to_string(k);
    out << '\n';
    int rows = 0;
    for (const SolveTrace& t : traces) rows = std::max(rows, t.iterations());
    for (int k = 0; k < rows; ++k) {
      out << k + 1;
      for (const SolveTrace& t : traces) {
        out << ',';
        if (k < t.iterations()) out << num(t.rows[k].residual_s);
      }
      out << '\n';
    }
  }

  int admm_iters = 0;
  for (size_t j = 0; j < kinds.size(); ++j)
    if (kinds[j] == SolverKind::kAdmm) admm_iters = traces[j].iterations();
  std::ofstream out = open_out(c.out / "summary.csv");
  out << "solver,status,iterations,final_residual,speedup_vs_admm\n";
  for (size_t j = 0; j < kinds.size(); ++j) {
    const int it = traces[j].iterations();
    out << to_string(kinds[j]) << ',' << to_string(status[j]) << ',' << it << ','
        << num(traces[j].final_residual()) << ',';
    if (admm_iters > 0 && it > 0) out << num(static_cast<double>(admm_iters) / it);
    out << '\n';
  }
  return code;
}

int cmd_mpc(const MpcOptions& o) {
  const Common& c = o.common;
  MpcConfig cfg;
  try {
    cfg.solver = parse_solver_kind(o.solver);
  } catch (const std::invalid_argument& ex) {
    std::cerr << "mpc: " << ex.what() << '\n';
    return 1;
  }
  if (o.steps < 1) {
    std::cerr << "mpc: --steps must be >= 1\n";
    return 1;
  }
  const Scenario sc = resolve_scenario(o.scenario, c.seed);
  write_manifest(manifest_for(c, "mpc", o.scenario, {o.solver}, o.epsilon, sc.mu));
  cfg.steps = o.steps;
  cfg.epsilon = o.epsilon;
  cfg.workers = c.workers;
  const ClosedLoopResult r = run_closed_loop(sc, cfg);
  write_episode_log(c.out / "episodes.ndjson", r.episodes, c.out / "traces");
  for (const MpcEpisode& ep : r.episodes) {
    info("mpc: step " + std::to_string(ep.step) + " " + std::string(to_string(ep.status)) + " " +
         std::to_string(ep.trace.iterations()) + " iterations, v " + num(ep.v));
  }
  if (!r.ok()) {
    std::cerr << "mpc: " << r.error << '\n';
    return 2;
  }
  for (const MpcEpisode& ep : r.episodes)
    if (ep.status != SolveStatus::kConverged) return 2;
  return 0;
}

}  // namespace bdr::cli
