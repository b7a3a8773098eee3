#pragma once

#include <Eigen/Dense>

#include <vector>

#include "bdr/problem.hpp"
#include "bdr/qp.hpp"

namespace bdr {

/// Ψ(s) = min_u F(u, s) over (u, s) ∈ Z for fixed s.
struct PsiValue {
  double value = 0.0;
  Eigen::VectorXd u_star;
  /// Active rows of LocalProblem::constraint_matrix() (E rows first, then
  /// the 2N coupling rows).
  std::vector<int> active_set;
  /// ∇Ψ(s) = 2μs − y_g, where y_g are the multipliers of the coupling rows.
  Eigen::VectorXd gradient;
  QPSolution qp;
};

/// Evaluates Ψ for one local problem, reusing the factorization of 2H.
class PsiEvaluator {
 public:
  explicit PsiEvaluator(const LocalProblem& lp, QPSettings settings = {});

  /// Throws QPError when no u satisfies the constraints for this s.
  PsiValue operator()(const Eigen::VectorXd& s);

 private:
  const LocalProblem* lp_;
  DualActiveSetSolver solver_;
  Eigen::MatrixXd rows_;
};

PsiValue eval_psi(const LocalProblem& lp, const Eigen::VectorXd& s, QPSettings settings = {});

/// S = μI + P₂ᵀ(P₁H⁻¹P₁ᵀ)⁻¹P₂ over the active rows [P₁ P₂] of Z.
///
/// S is the quadratic-form matrix of Ψ inside a critical region, i.e.
/// Ψ(s + d) = Ψ(s) + ∇Ψ(s)ᵀd + dᵀSd, so ∇²Ψ = 2S.
struct LocalHessian {
  Eigen::MatrixXd S;
  Eigen::MatrixXd P1;  // kept active rows, u-part
  Eigen::MatrixXd P2;  // kept active rows, s-part
  std::vector<int> kept_rows;
  /// Null directions of P₁H⁻¹P₁ᵀ that were given curvature 1 / stiff_reg.
  int stiff_directions = 0;
};

/// Linearly dependent rows of [P₁ P₂] (pivoted QR, relative pivot tolerance
/// `prune_tol`) are dropped first. If P₁ is still rank deficient, s sits on
/// the boundary of dom Ψ; the corresponding eigenvalues of P₁H⁻¹P₁ᵀ are
/// replaced by stiff_reg·‖P₁H⁻¹P₁ᵀ‖, which makes S very stiff there.
LocalHessian local_hessian(const LocalProblem& lp, const std::vector<int>& active_set,
                           double prune_tol = 1e-10, double stiff_reg = 1e-6);

}  // namespace bdr
