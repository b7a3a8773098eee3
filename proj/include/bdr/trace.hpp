#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string_view>
#include <vector>

namespace bdr {

/// One row per iteration of a distributed solver.
struct TraceRow {
  int iter = 0;
  /// ‖s − ξˢ‖₂ over all buildings, measured after the parallel step.
  double residual_s = 0.0;
  /// ‖λ⁺ − λ‖₂; zero on the terminating iteration.
  double lambda_delta = 0.0;
  /// Size of the symmetric difference between this and the previous
  /// iteration's local active sets, summed over buildings.
  int active_set_changes = 0;
  long long bytes_up = 0;
  long long bytes_down = 0;
  double wall_ms = 0.0;
  /// max_k |Σ_i s_{i,k}| after the coordinator update. Not exported.
  double consensus_violation = 0.0;
};

struct SolveTrace {
  std::vector<TraceRow> rows;

  int iterations() const { return static_cast<int>(rows.size()); }
  double final_residual() const { return rows.empty() ? 0.0 : rows.back().residual_s; }
};

inline constexpr std::string_view kTraceHeader =
    "iter,residual_s,lambda_delta,active_set_changes,bytes_up,bytes_down,wall_ms";

void write_trace_csv(const std::filesystem::path& path, const SolveTrace& trace);
SolveTrace read_trace_csv(const std::filesystem::path& path);

enum class SolveStatus { kConverged, kMaxIterations };

std::string_view to_string(SolveStatus status);

/// Output of a distributed solve. On kMaxIterations the fields hold the
/// iterate with the smallest residual.
struct DistributedResult {
  SolveStatus status = SolveStatus::kMaxIterations;
  std::vector<Eigen::VectorXd> u;     // ξᵘ per building
  std::vector<Eigen::VectorXd> xi_s;  // ξˢ per building
  std::vector<Eigen::VectorXd> s;     // zero-sum s used in the last local step
  Eigen::VectorXd lambda;
  /// Final local active sets, rows of LocalProblem::constraint_matrix().
  std::vector<std::vector<int>> active_sets;
  SolveTrace trace;

  bool converged() const { return status == SolveStatus::kConverged; }
  int iterations() const { return trace.iterations(); }
};

/// Size of the symmetric difference of two ascending index lists.
int symmetric_difference_size(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace bdr
