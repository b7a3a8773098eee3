#include "bdr/mpc.hpp"

#include "bdr/value_function.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>
#include <string>

namespace bdr {

std::string_view to_string(SolverKind kind) {
  return kind == SolverKind::kAladin ? "aladin" : "admm";
}

SolverKind parse_solver_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "aladin") return SolverKind::kAladin;
  if (lower == "admm") return SolverKind::kAdmm;
  throw std::invalid_argument("unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(EpisodeCase c) { return c == EpisodeCase::kCaseI ? "I" : "II"; }

std::vector<int> union_active_set(std::span<const LocalProblem> problems,
                                  const std::vector<std::vector<int>>& active_sets) {
  std::vector<int> out;
  int offset = 0;
  for (size_t i = 0; i < problems.size(); ++i) {
    if (i < active_sets.size()) {
      for (int row : active_sets[i]) out.push_back(offset + row);
    }
    offset += problems[i].num_inequalities();
  }
  return out;
}

EpisodeCase classify_episode(const MpcEpisode& current, const MpcEpisode& previous,
                             int threshold) {
  const int delta = symmetric_difference_size(current.active_union, previous.active_union);
  return delta <= threshold ? EpisodeCase::kCaseI : EpisodeCase::kCaseII;
}

namespace {

ConsensusState bootstrap_state(std::span<const LocalProblem> problems, SigmaMode mode,
                               const QPSettings& qp) {
  const CentralizedSolution c = solve_centralized(assemble_centralized(problems), qp);
  if (!c.qp.ok()) throw QPError(c.qp.status, "bootstrap: centralized problem not solved");
  ConsensusState st;
  st.s = c.s;
  st.lambda = c.lambda;
  const int ns = problems.front().dim_s();
  for (size_t i = 0; i < problems.size(); ++i) {
    if (mode == SigmaMode::kIdentity) {
      st.Sigma.push_back(Eigen::MatrixXd::Identity(ns, ns));
    } else {
      const PsiValue psi = eval_psi(problems[i], c.s[i], qp);
      st.Sigma.push_back(2.0 * local_hessian(problems[i], psi.active_set).S);
    }
  }
  return st;
}

}  // namespace

ClosedLoopResult run_closed_loop(const Scenario& sc, const MpcConfig& config) {
  sc.validate();
  if (config.steps < 1) throw std::invalid_argument("mpc: steps must be at least 1");
  const int M = sc.num_buildings();
  ClosedLoopResult out;
  std::vector<Eigen::VectorXd> x = sc.x0;
  std::vector<LocalProblem> before;

  for (int t = 0; t < config.steps; ++t) {
    const std::vector<LocalProblem> problems = build_problems(sc, t, x);
    const CouplingData coupling = coupling_at(sc, t);
    MpcEpisode ep;
    ep.step = t;
    ep.solver = config.solver;

    const MpcEpisode* prev = out.episodes.empty() ? nullptr : &out.episodes.back();
    ConsensusState init;
    const bool boot = config.warm_start && config.bootstrap && prev == nullptr;
    const bool warm = config.warm_start && (prev != nullptr || boot);
    try {
      if (boot) {
        init = bootstrap_state(problems, config.solver == SolverKind::kAladin ? config.sigma_mode
                                                                             : SigmaMode::kIdentity,
                               config.qp);
        ep.bootstrapped = true;
      }
      if (config.solver == SolverKind::kAladin) {
        AladinConfig ac;
        ac.epsilon = config.epsilon;
        ac.max_iter = config.max_iter;
        ac.workers = config.workers;
        ac.qp = config.qp;
        ac.sigma_mode = warm ? config.sigma_mode : SigmaMode::kIdentity;
        if (warm && !boot) init = warm_start(prev->result, problems, ac.sigma_mode, before, config.qp,
                                            config.padding, config.edge_tol);
        ep.result = aladin_solve(problems, ac, warm ? &init : nullptr);
      } else {
        AdmmConfig dc;
        dc.epsilon = config.epsilon;
        dc.max_iter = config.max_iter;
        dc.workers = config.workers;
        dc.qp = config.qp;
        dc.rho = config.rho;
        dc.equilibrate = config.equilibrate;
        if (warm && !boot) init = warm_start(prev->result, problems, SigmaMode::kIdentity, {}, config.qp,
                                            config.padding);
        ep.result = admm_solve(problems, dc, warm ? &init : nullptr);
      }
    } catch (const std::exception& ex) {
      out.error = "step " + std::to_string(t) + ": " + ex.what();
      return out;
    }
    ep.status = ep.result.status;
    ep.trace = ep.result.trace;
    ep.active_union = union_active_set(problems, ep.result.active_sets);
    if (prev != nullptr) {
      ep.active_set_delta = symmetric_difference_size(ep.active_union, prev->active_union);
      ep.episode_case = classify_episode(ep, *prev, config.case_threshold);
    }

    ep.v = coupling.v_tilde(0);
    for (int i = 0; i < M; ++i) {
      const BuildingModel& m = sc.buildings[i];
      Eigen::VectorXd u0 = ep.result.u[i].head(m.nu());
      // The QP tolerances may leave the iterate a hair outside the box.
      u0 = u0.cwiseMax(m.u_lo).cwiseMin(m.u_hi);
      const Eigen::VectorXd w = sc.mismatch * disturbance_window(sc.disturbance[i], t, 1);
      const StepResult r = simulate_step(m, x[i], u0, w);
      ep.v += m.G * m.F.dot(u0);
      ep.y.push_back(r.y);
      ep.u_applied.push_back(std::move(u0));
      x[i] = r.x_next;
    }
    before = problems;
    out.episodes.push_back(std::move(ep));
  }
  return out;
}

void write_episode_log(const std::filesystem::path& path, const std::vector<MpcEpisode>& episodes,
                       const std::filesystem::path& trace_dir) {
  using nlohmann::json;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("mpc: cannot write " + path.string());
  if (!trace_dir.empty()) std::filesystem::create_directories(trace_dir);
  for (const MpcEpisode& ep : episodes) {
    json j;
    j["step"] = ep.step;
    j["solver"] = std::string(to_string(ep.solver));
    j["status"] = std::string(to_string(ep.status));
    j["iterations"] = ep.trace.iterations();
    j["final_residual"] = ep.trace.final_residual();
    j["v"] = ep.v;
    j["active_set_size"] = ep.active_union.size();
    j["active_set_delta"] = ep.active_set_delta;
    j["case"] = ep.active_set_delta < 0 ? "" : std::string(to_string(ep.episode_case));
    json u = json::array();
    for (const Eigen::VectorXd& ui : ep.u_applied) u.push_back(std::vector<double>(ui.begin(), ui.end()));
    j["u_applied"] = u;
    json y = json::array();
    for (const Eigen::VectorXd& yi : ep.y) y.push_back(std::vector<double>(yi.begin(), yi.end()));
    j["y"] = y;
    if (!trace_dir.empty()) {
      const std::string name =
          "trace_" + std::string(to_string(ep.solver)) + "_step" + std::to_string(ep.step) + ".csv";
      write_trace_csv(trace_dir / name, ep.trace);
      j["trace_file"] = name;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace bdr
