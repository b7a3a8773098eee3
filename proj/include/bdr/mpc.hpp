#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bdr/admm.hpp"
#include "bdr/aladin.hpp"
#include "bdr/scenario.hpp"
#include "bdr/trace.hpp"

namespace bdr {

enum class SolverKind { kAladin, kAdmm };

std::string_view to_string(SolverKind kind);
/// Accepts "aladin" or "admm".
SolverKind parse_solver_kind(std::string_view name);

enum class EpisodeCase { kCaseI, kCaseII };

std::string_view to_string(EpisodeCase c);

struct MpcConfig {
  SolverKind solver = SolverKind::kAladin;
  int steps = 10;
  double epsilon = 1e-4;
  int max_iter = 2000;
  bool warm_start = true;
  /// Σ used by ALADIN on warm-started episodes.
  SigmaMode sigma_mode = SigmaMode::kExactHessianWarmStart;
  /// CaseI threshold on the active-set symmetric difference.
  int case_threshold = 2;
  /// Tail padding of the shifted (s, λ).
  TailPadding padding = TailPadding::kRepeatLast;
  /// Distance to the edge of dom Ψ below which a coupling pair counts as
  /// active when forming the warm-start Σ.
  double edge_tol = 1e-3;
  /// Initialize step 0 from the centralized optimum of step 0, as if the
  /// controller had been running before. Otherwise step 0 starts cold.
  bool bootstrap = true;
  int workers = 0;
  double rho = 1.0;
  bool equilibrate = true;
  QPSettings qp;
};

struct MpcEpisode {
  int step = 0;
  SolverKind solver = SolverKind::kAladin;
  SolveStatus status = SolveStatus::kMaxIterations;
  SolveTrace trace;
  /// First input block u_{i,0} per building.
  std::vector<Eigen::VectorXd> u_applied;
  /// Realized outputs C x_t + D u_t per building.
  std::vector<Eigen::VectorXd> y;
  /// Realized voltage ṽ_t + Σ_i G_i F_i u_{i,0}.
  double v = 0.0;
  /// Union of the local active sets, encoded as offset_i + row where
  /// offset_i is the number of inequality rows of buildings before i.
  std::vector<int> active_union;
  /// True for step 0 when it was initialized from the centralized optimum.
  bool bootstrapped = false;
  /// Symmetric difference to the previous episode's union (−1 on the first).
  int active_set_delta = -1;
  EpisodeCase episode_case = EpisodeCase::kCaseII;
  DistributedResult result;
};

struct ClosedLoopResult {
  std::vector<MpcEpisode> episodes;
  /// Empty when every step produced a solution.
  std::string error;

  bool ok() const { return error.empty(); }
};

/// Receding-horizon loop: solve, apply u_{i,0}, propagate the states with
/// the realized disturbance, then shift (s, λ) into the next solve.
ClosedLoopResult run_closed_loop(const Scenario& sc, const MpcConfig& config);

/// CaseI iff the union active sets differ in at most `threshold` indices.
EpisodeCase classify_episode(const MpcEpisode& current, const MpcEpisode& previous,
                             int threshold = 2);

/// Encodes per-building active sets as one ascending list (see MpcEpisode).
std::vector<int> union_active_set(std::span<const LocalProblem> problems,
                                  const std::vector<std::vector<int>>& active_sets);

/// Newline-delimited JSON, one record per episode. When `trace_dir` is
/// nonempty each trace is written there and referenced by file name.
void write_episode_log(const std::filesystem::path& path, const std::vector<MpcEpisode>& episodes,
                       const std::filesystem::path& trace_dir = {});

}  // namespace bdr
