#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "bdr/problem.hpp"
#include "bdr/qp.hpp"
#include "bdr/trace.hpp"

namespace bdr {

/// Coordinator-side iterate. The s_i always sum to zero.
struct ConsensusState {
  std::vector<Eigen::VectorXd> s;
  Eigen::VectorXd lambda;
  std::vector<Eigen::MatrixXd> Sigma;
  int iteration = 0;

  int buildings() const { return static_cast<int>(s.size()); }
  /// Throws std::invalid_argument on inconsistent sizes, a non-PD Sigma or
  /// a family s that does not sum to zero (tolerance `tol`).
  void validate(double tol = 1e-8) const;
};

/// Zero s and λ with Σ_i = I.
ConsensusState cold_state(std::span<const LocalProblem> problems);

enum class SigmaMode { kIdentity, kExactHessianWarmStart };

struct AladinConfig {
  double epsilon = 1e-4;
  int max_iter = 500;
  /// kIdentity replaces any Σ in the initial state by I; the warm-start
  /// mode uses the Σ supplied by warm_start().
  SigmaMode sigma_mode = SigmaMode::kIdentity;
  /// Number of threads for the local steps; 0 or 1 runs them in order.
  int workers = 0;
  QPSettings qp;
  /// Invoked after every iteration (may be empty).
  std::function<void(const TraceRow&)> on_iteration;
};

struct LocalStep {
  Eigen::VectorXd xi_u;
  Eigen::VectorXd xi_s;
  std::vector<int> active_set;
  QPSolution qp;
};

/// Solves min F(ξ) + λᵀξˢ + ½(ξˢ − s)ᵀΣ(ξˢ − s) over ξ ∈ Z for one building.
/// Σ is fixed at construction so the QP Hessian is factorized once.
///
/// Optional scalings rewrite the QP in ũ = u ./ u_scale with E rows
/// multiplied by e_row_scale; results are mapped back to u.
class LocalStepSolver {
 public:
  LocalStepSolver(const LocalProblem& lp, const Eigen::MatrixXd& Sigma, QPSettings settings = {},
                  Eigen::VectorXd u_scale = {}, Eigen::VectorXd e_row_scale = {});

  /// Throws QPError if the local QP has no solution.
  LocalStep operator()(const Eigen::VectorXd& lambda, const Eigen::VectorXd& s);

  const LocalProblem& problem() const { return *lp_; }
  const Eigen::MatrixXd& sigma() const { return Sigma_; }

 private:
  const LocalProblem* lp_;
  Eigen::MatrixXd Sigma_;
  Eigen::VectorXd u_scale_;
  Eigen::VectorXd q_u_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  std::unique_ptr<DualActiveSetSolver> solver_;
};

LocalStep local_step(const LocalProblem& lp, const Eigen::VectorXd& lambda,
                     const Eigen::VectorXd& s, const Eigen::MatrixXd& Sigma,
                     QPSettings settings = {});

struct ConsensusUpdate {
  std::vector<Eigen::VectorXd> s_plus;
  Eigen::VectorXd delta_lambda;
  /// True when Λ was too ill-conditioned for the direct factorization.
  bool used_iterative = false;
};

/// Closed-form solution of the coordinator QP
///   min Σ_i ½‖s_i⁺ − 2ξ_i + s_i‖²_{Σ_i}  s.t. Σ_i s_i⁺ = 0
/// via Λ = Σ_i Σ_i⁻¹, Δλ = 2Λ⁻¹Σ_i ξ_i and s_i⁺ = 2ξ_i − s_i − Σ_i⁻¹Δλ.
/// Factorizes Λ once for a fixed set of Σ_i.
class ConsensusOperator {
 public:
  explicit ConsensusOperator(std::vector<Eigen::MatrixXd> Sigma, double cond_limit = 1e12);

  /// Requires Σ_i s_i = 0 (throws std::invalid_argument otherwise).
  ConsensusUpdate operator()(std::span<const Eigen::VectorXd> xi_s,
                             std::span<const Eigen::VectorXd> s) const;
  /// Δλ = 2Λ⁻¹Σ_i ξ_i only.
  Eigen::VectorXd delta_lambda(std::span<const Eigen::VectorXd> xi_s) const;
  const Eigen::MatrixXd& sigma_inverse(int i) const { return Sigma_inv_[i]; }
  bool iterative() const { return iterative_; }

 private:
  Eigen::VectorXd solve_lambda_system(const Eigen::VectorXd& rhs) const;

  std::vector<Eigen::MatrixXd> Sigma_inv_;
  Eigen::MatrixXd Lambda_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool iterative_ = false;
};

ConsensusUpdate consensus_step(std::span<const Eigen::VectorXd> xi_s,
                               std::span<const Eigen::VectorXd> s,
                               const std::vector<Eigen::MatrixXd>& Sigma);

/// Algorithm 1. Terminates when ‖s − ξˢ‖₂ ≤ ε right after a parallel step.
DistributedResult aladin_solve(std::span<const LocalProblem> problems, const AladinConfig& config,
                               const ConsensusState* init = nullptr);

/// State of the simplified online iteration: the coordinator iterate, the
/// latest local proposals and the pending multiplier step.
struct OnlineState {
  ConsensusState consensus;
  std::vector<Eigen::VectorXd> xi_s;
  Eigen::VectorXd delta_lambda;
};

/// One online iteration. Each building applies the broadcast Δλ locally
/// (λ⁺ = λ + Δλ, s_i⁺ = 2ξ_i − s_i − Σ_i⁻¹Δλ) and solves its local QP at
/// (λ⁺, s_i⁺); the coordinator then forms Δλ⁺ = 2Λ⁻¹Σ_i ξ_i⁺.
OnlineState online_step(std::span<const LocalProblem> problems, const OnlineState& state,
                        QPSettings settings = {});

/// What fills the freed last block after a horizon shift.
enum class TailPadding { kZero, kRepeatLast };

/// Shifts a converged (s*, λ*) by one step and pads the tail (zeros by
/// default). Both paddings keep Σ_i s_i = 0.
/// In kExactHessianWarmStart mode Σ_i = 2S_i is the local Hessian of the
/// new problem at the shifted local minimizer ξ_i; if Ψ_i is undefined
/// there, the previous Hessian is shifted instead. Otherwise Σ_i = I.
/// Coupling pairs closer than edge_tol to the edge of dom Ψ_i are treated
/// as active when forming Σ_i (0 disables this).
ConsensusState warm_start(const DistributedResult& previous,
                          std::span<const LocalProblem> problems_now, SigmaMode mode,
                          std::span<const LocalProblem> problems_before = {},
                          QPSettings settings = {}, TailPadding padding = TailPadding::kZero,
                          double edge_tol = 0.0);

/// Shifts a stacked vector of (2-entry) blocks by one block.
Eigen::VectorXd shift_blocks(const Eigen::VectorXd& v, int block = 2,
                             TailPadding padding = TailPadding::kZero);

/// Runs f(0..n-1) on up to `workers` threads; sequential for workers ≤ 1.
void parallel_for(int n, int workers, const std::function<void(int)>& f);

}  // namespace bdr
