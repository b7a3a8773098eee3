#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>

#include "bdr/aladin.hpp"
#include "bdr/problem.hpp"
#include "bdr/qp.hpp"
#include "bdr/trace.hpp"

namespace bdr {

/// E_scaled = diag(row_scale)·E·diag(col_scale), e_scaled = diag(row_scale)·e.
/// A point u satisfies E u ≤ e iff ũ = u ./ col_scale satisfies the scaled
/// system.
struct RuizResult {
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
  Eigen::VectorXd row_scale;
  Eigen::VectorXd col_scale;
  int iterations = 0;
};

/// Repeatedly divides rows and columns by the square roots of their
/// ∞-norms until every norm is within `tol` of one or `iters` passes are
/// done. Zero rows and columns keep scale 1.
RuizResult ruiz_equilibrate(const Eigen::MatrixXd& E, const Eigen::VectorXd& e, int iters = 10,
                            double tol = 1e-3);

struct AdmmConfig {
  double rho = 1.0;
  double epsilon = 1e-4;
  int max_iter = 5000;
  int ruiz_iters = 10;
  double ruiz_tol = 1e-3;
  /// Equilibrate each building's E before the local solves.
  bool equilibrate = true;
  int workers = 0;
  QPSettings qp;
  std::function<void(const TraceRow&)> on_iteration;
};

/// Sharing ADMM on Σ_i Ψ_i(s_i) s.t. Σ_i s_i = 0:
///   ξ_i = argmin F_i(ξ) + λᵀξˢ + (ρ/2)‖ξˢ − s_i‖² over Z_i,
///   s_i⁺ = ξ_iˢ − mean_j ξ_jˢ,   λ⁺ = λ + ρ·mean_j ξ_jˢ.
/// Stops when ‖s − ξˢ‖₂ ≤ ε after a local step. Any Σ in `init` is ignored.
DistributedResult admm_solve(std::span<const LocalProblem> problems, const AdmmConfig& config,
                             const ConsensusState* init = nullptr);

}  // namespace bdr
