#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bdr {

enum class QPStatus { kOptimal, kInfeasible, kMaxIterations };

std::string_view to_string(QPStatus status);

/// Raised by callers that need an optimal solution and did not get one.
class QPError : public std::runtime_error {
 public:
  QPError(QPStatus status, const std::string& what) : std::runtime_error(what), status_(status) {}
  QPStatus status() const { return status_; }

 private:
  QPStatus status_;
};

struct QPSettings {
  /// Slack threshold below which an inequality row is reported active.
  double act_tol = 1e-7;
  /// Relative violation a row must exceed before the dual method adds it.
  double feas_tol = 1e-12;
  /// 0 selects 10 * (n + m).
  int max_iter = 0;
};

/// Result of min ½ zᵀHz + hᵀz  s.t.  E z ≤ e,  Aeq z = beq.
///
/// Multipliers follow L = ½zᵀHz + hᵀz + dualsᵀ(Ez − e) + eq_dualsᵀ(Aeq z − beq),
/// so `duals` are nonnegative at a KKT point.
struct QPSolution {
  QPStatus status = QPStatus::kOptimal;
  Eigen::VectorXd z_star;
  Eigen::VectorXd duals;
  Eigen::VectorXd eq_duals;
  /// Rows with slack ≤ act_tol, ascending. Weakly active rows are included.
  std::vector<int> active_set;
  double kkt_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;

  bool ok() const { return status == QPStatus::kOptimal; }
};

/// Infinity-norm KKT residual (stationarity, primal feasibility,
/// complementarity and dual feasibility, whichever is largest).
double kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& h,
                    const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                    const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                    const Eigen::VectorXd& z, const Eigen::VectorXd& duals,
                    const Eigen::VectorXd& eq_duals);

/// Goldfarb–Idnani dual active-set method for strictly convex QPs.
///
/// The Hessian is factorized once at construction, so one instance can be
/// reused for many right-hand sides and constraint sets that share H. An
/// instance keeps per-call workspace and must not be shared between threads.
class DualActiveSetSolver {
 public:
  /// Throws std::invalid_argument when H is not square, symmetric and
  /// positive definite.
  explicit DualActiveSetSolver(const Eigen::MatrixXd& H, QPSettings settings = {});

  QPSolution solve(const Eigen::VectorXd& h, const Eigen::MatrixXd& E,
                   const Eigen::VectorXd& e);
  QPSolution solve(const Eigen::VectorXd& h, const Eigen::MatrixXd& E,
                   const Eigen::VectorXd& e, const Eigen::MatrixXd& Aeq,
                   const Eigen::VectorXd& beq);

  Eigen::Index dim() const { return H_.rows(); }
  const QPSettings& settings() const { return settings_; }

 private:
  bool add_constraint(Eigen::VectorXd& d, int& iq, double& r_norm);
  void delete_constraint(std::vector<int>& active, Eigen::VectorXd& u, int me,
                         int& iq, int row);
  Eigen::VectorXd normal(int k, const Eigen::MatrixXd& E,
                         const Eigen::MatrixXd& Aeq) const;

  Eigen::MatrixXd H_;
  Eigen::MatrixXd J0_;  // L^{-T} where H = L Lᵀ
  QPSettings settings_;

  // Workspace.
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
};

/// One-shot convenience wrapper around DualActiveSetSolver.
QPSolution solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& h,
                    const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                    const Eigen::MatrixXd& Aeq = Eigen::MatrixXd(),
                    const Eigen::VectorXd& beq = Eigen::VectorXd(),
                    QPSettings settings = {});

}  // namespace bdr
