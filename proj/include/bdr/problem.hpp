#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "bdr/model.hpp"
#include "bdr/qp.hpp"

namespace bdr {

/// Grid-side data shared by all buildings: the voltage prediction ṽ, the
/// voltage band [v_lo, v_hi], the price π, and each building's coupling
/// (G_i, F_i). Voltage at step k is v_k = Σ_i G_i F_i u_{i,k} + ṽ_k.
struct CouplingData {
  std::vector<double> G;
  std::vector<Eigen::RowVectorXd> F;
  Eigen::VectorXd v_tilde;
  double v_lo = 0.95;
  double v_hi = 1.05;
  Eigen::VectorXd pi;

  int buildings() const { return static_cast<int>(G.size()); }
  int horizon() const { return static_cast<int>(v_tilde.size()); }
  void validate() const;
};

/// Collects (G_i, F_i) from the models; π defaults to ones when empty.
CouplingData make_coupling(std::span<const BuildingModel> models, const Eigen::VectorXd& v_tilde,
                           double v_lo, double v_hi, Eigen::VectorXd pi = {});

/// One building's decoupled problem over z = (u, s), u ∈ ℝ^{N·nu}, s ∈ ℝ^{2N}:
///
///   F(z) = uᵀHu + 2hᵀu + price_termᵀu + μ‖s‖²
///   Z    = { (u, s) : E u ≤ e,  coupling_rows·u + coupling_offset − s ≤ 0 }
///
/// The coupling rows come in (upper, lower) pairs per step k, so s_k
/// occupies entries (2k, 2k+1) of s.
struct LocalProblem {
  CondensedQP qp;
  Eigen::MatrixXd coupling_rows;   // 2N × N·nu
  Eigen::VectorXd coupling_offset; // 2N
  Eigen::VectorXd price_term;      // N·nu
  double mu = 0.1;

  int horizon() const { return qp.horizon; }
  int dim_u() const { return static_cast<int>(qp.H.rows()); }
  int dim_s() const { return 2 * qp.horizon; }
  int dim_z() const { return dim_u() + dim_s(); }
  int num_inequalities() const { return static_cast<int>(qp.E.rows()) + dim_s(); }

  /// Matrix W with F(z) = zᵀWz + linear_term()ᵀz + const; W = blockdiag(H, μI).
  Eigen::MatrixXd quadratic_form() const;
  Eigen::VectorXd linear_term() const;
  /// Inequality description of Z as A z ≤ b. The coupling rows come last.
  Eigen::MatrixXd constraint_matrix() const;
  Eigen::VectorXd constraint_rhs() const;

  double objective(const Eigen::VectorXd& u, const Eigen::VectorXd& s) const;
  /// g(u, s), the 2N coupling constraint values (≤ 0 when feasible).
  Eigen::VectorXd coupling_values(const Eigen::VectorXd& u, const Eigen::VectorXd& s) const;
};

/// Builds the local problem for one building at the current state. `mu`
/// must be ≥ 0 and `num_buildings` ≥ 1. G and F are taken from the model.
LocalProblem build_local(const BuildingModel& model, const Eigen::VectorXd& x_hat,
                         const Eigen::VectorXd& w, const CouplingData& coupling,
                         int num_buildings, double mu);

/// Feasible auxiliary variables for given inputs: each building's share of
/// the aggregate voltage shift minus the mean share. Sums to zero.
std::vector<Eigen::VectorXd> recover_s(std::span<const Eigen::VectorXd> u,
                                       const CouplingData& coupling);

/// Voltage profile v_k = Σ_i G_i F_i u_{i,k} + ṽ_k.
Eigen::VectorXd voltage_profile(std::span<const Eigen::VectorXd> u, const CouplingData& coupling);

/// One QP over all buildings in the solver's ½zᵀPz + qᵀz convention.
struct CentralizedProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  /// Start of each building's block in the stacked variable.
  std::vector<int> offsets;
  std::vector<int> dims_u;
  /// True for the auxiliary-variable form (z_i = (u_i, s_i) with Σ s_i = 0);
  /// false for the form with the voltage eliminated (u only).
  bool has_auxiliary = true;
  int horizon = 0;

  int num_variables() const { return static_cast<int>(P.rows()); }
  int num_inequalities() const { return static_cast<int>(E.rows()); }
};

/// Auxiliary-variable form: Σ_i F_i(z_i) over z_i ∈ Z_i subject to Σ_i s_i = 0.
/// Requires μ > 0 on every problem to be strictly convex.
CentralizedProblem assemble_centralized(std::span<const LocalProblem> problems);

/// Voltage-eliminated form: Σ_i f̃_i(u_i) over u_i ∈ U_i subject to
/// v_lo ≤ Σ_i G_i F_i u_{i,k} + ṽ_k ≤ v_hi. Independent of μ.
CentralizedProblem assemble_eliminated(std::span<const LocalProblem> problems);

struct CentralizedSolution {
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> s;  // empty for the eliminated form
  /// Multiplier of Σ s_i = 0 with L = Σ F_i + λᵀ Σ s_i (auxiliary form only).
  Eigen::VectorXd lambda;
  QPSolution qp;
};

CentralizedSolution solve_centralized(const CentralizedProblem& problem, QPSettings settings = {});

}  // namespace bdr
