#include "bdr/admm.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bdr {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(std::string("admm: ") + what);
}

Eigen::VectorXd inv_sqrt_or_one(const Eigen::VectorXd& norms) {
  Eigen::VectorXd out(norms.size());
  for (Eigen::Index i = 0; i < norms.size(); ++i) out(i) = norms(i) > 0.0 ? 1.0 / std::sqrt(norms(i)) : 1.0;
  return out;
}

bool near_one(const Eigen::VectorXd& norms, double tol) {
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (norms(i) > 0.0 && std::abs(norms(i) - 1.0) > tol) return false;
  }
  return true;
}

}  // namespace

RuizResult ruiz_equilibrate(const Eigen::MatrixXd& E, const Eigen::VectorXd& e, int iters,
                            double tol) {
  require(E.rows() == e.size(), "E and e disagree in rows");
  require(E.size() > 0 && E.cwiseAbs().maxCoeff() > 0.0, "E must be nonzero");
  RuizResult out;
  out.E = E;
  out.row_scale = Eigen::VectorXd::Ones(E.rows());
  out.col_scale = Eigen::VectorXd::Ones(E.cols());
  for (int k = 0; k < iters; ++k) {
    const Eigen::VectorXd rn = out.E.cwiseAbs().rowwise().maxCoeff();
    const Eigen::VectorXd cn = out.E.cwiseAbs().colwise().maxCoeff().transpose();
    if (near_one(rn, tol) && near_one(cn, tol)) break;
    const Eigen::VectorXd r = inv_sqrt_or_one(rn);
    const Eigen::VectorXd c = inv_sqrt_or_one(cn);
    out.E = r.asDiagonal() * out.E * c.asDiagonal();
    out.row_scale = out.row_scale.cwiseProduct(r);
    out.col_scale = out.col_scale.cwiseProduct(c);
    out.iterations = k + 1;
  }
  out.e = out.row_scale.cwiseProduct(e);
  return out;
}

DistributedResult admm_solve(std::span<const LocalProblem> problems, const AdmmConfig& config,
                             const ConsensusState* init) {
  require(!problems.empty(), "at least one local problem is required");
  require(config.rho > 0.0, "rho must be positive");
  require(config.epsilon > 0.0, "epsilon must be positive");
  require(config.max_iter >= 1, "max_iter must be at least 1");
  const int M = static_cast<int>(problems.size());
  const int ns = problems.front().dim_s();
  for (const LocalProblem& lp : problems) require(lp.dim_s() == ns, "inconsistent horizons");

  ConsensusState st = init ? *init : cold_state(problems);
  require(st.buildings() == M, "initial state has wrong building count");
  st.Sigma.assign(M, Eigen::MatrixXd::Identity(ns, ns));
  st.validate();

  const Eigen::MatrixXd rhoI = config.rho * Eigen::MatrixXd::Identity(ns, ns);
  std::vector<LocalStepSolver> solvers;
  solvers.reserve(M);
  for (const LocalProblem& lp : problems) {
    if (config.equilibrate && lp.qp.E.rows() > 0) {
      const RuizResult rz = ruiz_equilibrate(lp.qp.E, lp.qp.e, config.ruiz_iters, config.ruiz_tol);
      solvers.emplace_back(lp, rhoI, config.qp, rz.col_scale, rz.row_scale);
    } else {
      solvers.emplace_back(lp, rhoI, config.qp);
    }
  }

  DistributedResult best;
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<LocalStep> steps(M);
  std::vector<std::vector<int>> previous_active;

  for (int it = 1; it <= config.max_iter; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(M, config.workers, [&](int i) { steps[i] = solvers[i](st.lambda, st.s[i]); });

    TraceRow row;
    row.iter = it;
    double sq = 0.0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(ns);
    for (int i = 0; i < M; ++i) {
      sq += (st.s[i] - steps[i].xi_s).squaredNorm();
      mean += steps[i].xi_s;
      if (!previous_active.empty()) {
        row.active_set_changes += symmetric_difference_size(previous_active[i], steps[i].active_set);
      }
    }
    mean /= M;
    row.residual_s = std::sqrt(sq);
    row.bytes_up = static_cast<long long>(M) * ns * sizeof(double);
    row.bytes_down = static_cast<long long>(ns) * sizeof(double);
    previous_active.assign(M, {});
    for (int i = 0; i < M; ++i) previous_active[i] = steps[i].active_set;

    if (row.residual_s < best_residual) {
      best_residual = row.residual_s;
      best.u.resize(M);
      best.xi_s.resize(M);
      for (int i = 0; i < M; ++i) {
        best.u[i] = steps[i].xi_u;
        best.xi_s[i] = steps[i].xi_s;
      }
      best.s = st.s;
      best.lambda = st.lambda;
      best.active_sets = previous_active;
    }

    const bool done = row.residual_s <= config.epsilon;
    if (!done) {
      for (int i = 0; i < M; ++i) st.s[i] = steps[i].xi_s - mean;
      const Eigen::VectorXd dl = config.rho * mean;
      st.lambda += dl;
      row.lambda_delta = dl.norm();
      ++st.iteration;
    }
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(ns);
    for (const Eigen::VectorXd& s : st.s) sum += s;
    row.consensus_violation = sum.cwiseAbs().maxCoeff();
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    best.trace.rows.push_back(row);
    if (config.on_iteration) config.on_iteration(row);
    if (done) {
      best.status = SolveStatus::kConverged;
      break;
    }
  }
  return best;
}

}  // namespace bdr
