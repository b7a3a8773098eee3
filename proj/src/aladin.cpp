#include "bdr/aladin.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "bdr/value_function.hpp"

namespace bdr {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(std::string("aladin: ") + what);
}

Eigen::VectorXd family_sum(std::span<const Eigen::VectorXd> v) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(v.front().size());
  for (const Eigen::VectorXd& x : v) sum += x;
  return sum;
}

double family_scale(std::span<const Eigen::VectorXd> v) {
  double scale = 1.0;
  for (const Eigen::VectorXd& x : v) scale = std::max(scale, x.cwiseAbs().maxCoeff());
  return scale;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& A) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("aladin: Sigma must be positive definite");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
  return 0.5 * (inv + inv.transpose());
}

void check_problems(std::span<const LocalProblem> problems) {
  require(!problems.empty(), "at least one local problem is required");
  const int N = problems.front().horizon();
  for (const LocalProblem& lp : problems) require(lp.horizon() == N, "inconsistent horizons");
}

}  // namespace

void ConsensusState::validate(double tol) const {
  require(!s.empty(), "state has no buildings");
  require(Sigma.size() == s.size(), "one Sigma per building is required");
  const Eigen::Index n = s.front().size();
  require(lambda.size() == n, "lambda has wrong length");
  for (size_t i = 0; i < s.size(); ++i) {
    require(s[i].size() == n, "s blocks must share their length");
    require(Sigma[i].rows() == n && Sigma[i].cols() == n, "Sigma has wrong size");
    Eigen::LLT<Eigen::MatrixXd> llt(Sigma[i]);
    require(llt.info() == Eigen::Success, "Sigma must be positive definite");
  }
  require(family_sum(s).cwiseAbs().maxCoeff() <= tol * family_scale(s), "s must sum to zero");
}

ConsensusState cold_state(std::span<const LocalProblem> problems) {
  check_problems(problems);
  const int ns = problems.front().dim_s();
  ConsensusState st;
  st.s.assign(problems.size(), Eigen::VectorXd::Zero(ns));
  st.lambda = Eigen::VectorXd::Zero(ns);
  st.Sigma.assign(problems.size(), Eigen::MatrixXd::Identity(ns, ns));
  return st;
}

void parallel_for(int n, int workers, const std::function<void(int)>& f) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&]() {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(workers, n); ++t) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Local step

LocalStepSolver::LocalStepSolver(const LocalProblem& lp, const Eigen::MatrixXd& Sigma,
                                 QPSettings settings, Eigen::VectorXd u_scale,
                                 Eigen::VectorXd e_row_scale)
    : lp_(&lp), Sigma_(Sigma) {
  const int nu = lp.dim_u();
  const int ns = lp.dim_s();
  const int m = static_cast<int>(lp.qp.E.rows());
  require(Sigma.rows() == ns && Sigma.cols() == ns, "Sigma must be 2N x 2N");
  u_scale_ = u_scale.size() == 0 ? Eigen::VectorXd::Ones(nu) : std::move(u_scale);
  if (e_row_scale.size() == 0) e_row_scale = Eigen::VectorXd::Ones(m);
  require(u_scale_.size() == nu && e_row_scale.size() == m, "scalings have wrong size");

  const auto D = u_scale_.asDiagonal();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nu + ns, nu + ns);
  P.topLeftCorner(nu, nu) = D * (2.0 * lp.qp.H) * D;
  P.bottomRightCorner(ns, ns) = 2.0 * lp.mu * Eigen::MatrixXd::Identity(ns, ns) + Sigma;
  P = 0.5 * (P + P.transpose());
  solver_ = std::make_unique<DualActiveSetSolver>(P, settings);

  q_u_ = D * (2.0 * lp.qp.h + lp.price_term);
  A_ = Eigen::MatrixXd::Zero(m + ns, nu + ns);
  A_.topLeftCorner(m, nu) = e_row_scale.asDiagonal() * lp.qp.E * D;
  A_.bottomLeftCorner(ns, nu) = lp.coupling_rows * D;
  A_.bottomRightCorner(ns, ns) = -Eigen::MatrixXd::Identity(ns, ns);
  b_.resize(m + ns);
  b_.head(m) = e_row_scale.cwiseProduct(lp.qp.e);
  b_.tail(ns) = -lp.coupling_offset;
}

LocalStep LocalStepSolver::operator()(const Eigen::VectorXd& lambda, const Eigen::VectorXd& s) {
  const int nu = lp_->dim_u();
  const int ns = lp_->dim_s();
  require(lambda.size() == ns && s.size() == ns, "lambda and s must have length 2N");
  Eigen::VectorXd q(nu + ns);
  q.head(nu) = q_u_;
  q.tail(ns) = lambda - Sigma_ * s;
  LocalStep out;
  out.qp = solver_->solve(q, A_, b_);
  if (!out.qp.ok()) {
    throw QPError(out.qp.status, "local step: " + std::string(to_string(out.qp.status)));
  }
  out.xi_u = u_scale_.cwiseProduct(out.qp.z_star.head(nu));
  out.xi_s = out.qp.z_star.tail(ns);
  out.active_set = out.qp.active_set;
  return out;
}

LocalStep local_step(const LocalProblem& lp, const Eigen::VectorXd& lambda,
                     const Eigen::VectorXd& s, const Eigen::MatrixXd& Sigma,
                     QPSettings settings) {
  LocalStepSolver solver(lp, Sigma, settings);
  return solver(lambda, s);
}

// ---------------------------------------------------------------------------
// Consensus step

ConsensusOperator::ConsensusOperator(std::vector<Eigen::MatrixXd> Sigma, double cond_limit) {
  require(!Sigma.empty(), "at least one Sigma is required");
  const Eigen::Index n = Sigma.front().rows();
  Lambda_ = Eigen::MatrixXd::Zero(n, n);
  for (const Eigen::MatrixXd& S : Sigma) {
    require(S.rows() == n && S.cols() == n, "Sigma blocks must share their size");
    Sigma_inv_.push_back(spd_inverse(S));
    Lambda_ += Sigma_inv_.back();
  }
  ldlt_.compute(Lambda_);
  iterative_ = ldlt_.info() != Eigen::Success || ldlt_.rcond() * cond_limit < 1.0;
}

Eigen::VectorXd ConsensusOperator::solve_lambda_system(const Eigen::VectorXd& rhs) const {
  if (!iterative_) return ldlt_.solve(rhs);
  Eigen::ConjugateGradient<Eigen::MatrixXd, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-15);
  cg.setMaxIterations(10 * static_cast<int>(rhs.size()) + 100);
  cg.compute(Lambda_);
  return cg.solve(rhs);
}

Eigen::VectorXd ConsensusOperator::delta_lambda(std::span<const Eigen::VectorXd> xi_s) const {
  require(xi_s.size() == Sigma_inv_.size(), "one proposal per building is required");
  return solve_lambda_system(2.0 * family_sum(xi_s));
}

ConsensusUpdate ConsensusOperator::operator()(std::span<const Eigen::VectorXd> xi_s,
                                              std::span<const Eigen::VectorXd> s) const {
  const size_t M = Sigma_inv_.size();
  require(xi_s.size() == M && s.size() == M, "one block per building is required");
  const Eigen::VectorXd sum_s = family_sum(s);
  require(sum_s.cwiseAbs().maxCoeff() <= 1e-8 * family_scale(s), "s must sum to zero");

  ConsensusUpdate out;
  out.used_iterative = iterative_;
  out.delta_lambda = delta_lambda(xi_s);
  out.s_plus.resize(M);
  for (size_t i = 0; i < M; ++i) {
    out.s_plus[i] = 2.0 * xi_s[i] - s[i] - Sigma_inv_[i] * out.delta_lambda;
  }
  // One refinement pass against round-off in the Λ solve.
  const Eigen::VectorXd r = family_sum(out.s_plus);
  const Eigen::VectorXd d = solve_lambda_system(r);
  out.delta_lambda += d;
  for (size_t i = 0; i < M; ++i) out.s_plus[i] -= Sigma_inv_[i] * d;
  return out;
}

ConsensusUpdate consensus_step(std::span<const Eigen::VectorXd> xi_s,
                               std::span<const Eigen::VectorXd> s,
                               const std::vector<Eigen::MatrixXd>& Sigma) {
  return ConsensusOperator(Sigma)(xi_s, s);
}

// ---------------------------------------------------------------------------
// Algorithm 1

DistributedResult aladin_solve(std::span<const LocalProblem> problems, const AladinConfig& config,
                               const ConsensusState* init) {
  check_problems(problems);
  require(config.epsilon > 0.0, "epsilon must be positive");
  require(config.max_iter >= 1, "max_iter must be at least 1");
  const int M = static_cast<int>(problems.size());
  const int ns = problems.front().dim_s();

  ConsensusState st = init ? *init : cold_state(problems);
  require(st.buildings() == M, "initial state has wrong building count");
  if (config.sigma_mode == SigmaMode::kIdentity) {
    st.Sigma.assign(M, Eigen::MatrixXd::Identity(ns, ns));
  }
  st.validate();

  std::vector<LocalStepSolver> solvers;
  solvers.reserve(M);
  for (int i = 0; i < M; ++i) solvers.emplace_back(problems[i], st.Sigma[i], config.qp);
  const ConsensusOperator consensus(st.Sigma);

  DistributedResult best;
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<LocalStep> steps(M);
  std::vector<std::vector<int>> previous_active;
  std::vector<Eigen::VectorXd> xi(M);

  for (int it = 1; it <= config.max_iter; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(M, config.workers, [&](int i) { steps[i] = solvers[i](st.lambda, st.s[i]); });

    TraceRow row;
    row.iter = it;
    double sq = 0.0;
    for (int i = 0; i < M; ++i) {
      xi[i] = steps[i].xi_s;
      sq += (st.s[i] - xi[i]).squaredNorm();
      if (!previous_active.empty()) {
        row.active_set_changes += symmetric_difference_size(previous_active[i], steps[i].active_set);
      }
    }
    row.residual_s = std::sqrt(sq);
    row.bytes_up = static_cast<long long>(M) * ns * sizeof(double);
    row.bytes_down = static_cast<long long>(ns) * sizeof(double);
    previous_active.assign(M, {});
    for (int i = 0; i < M; ++i) previous_active[i] = steps[i].active_set;

    if (row.residual_s < best_residual) {
      best_residual = row.residual_s;
      best.u.resize(M);
      best.xi_s = xi;
      best.s = st.s;
      best.lambda = st.lambda;
      best.active_sets = previous_active;
      for (int i = 0; i < M; ++i) best.u[i] = steps[i].xi_u;
    }

    const bool done = row.residual_s <= config.epsilon;
    if (!done) {
      ConsensusUpdate upd = consensus(xi, st.s);
      st.lambda += upd.delta_lambda;
      st.s = std::move(upd.s_plus);
      row.lambda_delta = upd.delta_lambda.norm();
      ++st.iteration;
    }
    row.consensus_violation = family_sum(st.s).cwiseAbs().maxCoeff();
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

// ---------------------------------------------------------------------------
// Online variant and warm start

OnlineState online_step(std::span<const LocalProblem> problems, const OnlineState& state,
                        QPSettings settings) {
  check_problems(problems);
  const int M = static_cast<int>(problems.size());
  const ConsensusState& cs = state.consensus;
  require(cs.buildings() == M && static_cast<int>(state.xi_s.size()) == M,
          "state has wrong building count");
  require(state.delta_lambda.size() == cs.lambda.size(), "delta_lambda has wrong length");
  const ConsensusOperator consensus(cs.Sigma);

  OnlineState next;
  next.consensus.Sigma = cs.Sigma;
  next.consensus.iteration = cs.iteration + 1;
  next.consensus.lambda = cs.lambda + state.delta_lambda;
  next.consensus.s.resize(M);
  next.xi_s.resize(M);
  for (int i = 0; i < M; ++i) {
    next.consensus.s[i] =
        2.0 * state.xi_s[i] - cs.s[i] - consensus.sigma_inverse(i) * state.delta_lambda;
    LocalStep step = local_step(problems[i], next.consensus.lambda, next.consensus.s[i],
                                cs.Sigma[i], settings);
    next.xi_s[i] = step.xi_s;
  }
  next.delta_lambda = consensus.delta_lambda(next.xi_s);
  return next;
}

Eigen::VectorXd shift_blocks(const Eigen::VectorXd& v, int block, TailPadding padding) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  if (v.size() > block) {
    out.head(v.size() - block) = v.tail(v.size() - block);
    if (padding == TailPadding::kRepeatLast) out.tail(block) = v.tail(block);
  }
  return out;
}

namespace {

Eigen::MatrixXd shift_matrix(const Eigen::MatrixXd& S, double mu, int block = 2) {
  const Eigen::Index n = S.rows();
  Eigen::MatrixXd out = mu * Eigen::MatrixXd::Identity(n, n);
  if (n > block) out.topLeftCorner(n - block, n - block) = S.bottomRightCorner(n - block, n - block);
  return out;
}

}  // namespace

ConsensusState warm_start(const DistributedResult& previous,
                          std::span<const LocalProblem> problems_now, SigmaMode mode,
                          std::span<const LocalProblem> problems_before, QPSettings settings,
                          TailPadding padding, double edge_tol) {
  check_problems(problems_now);
  const int M = static_cast<int>(problems_now.size());
  const int ns = problems_now.front().dim_s();
  require(static_cast<int>(previous.s.size()) == M, "previous solution has wrong building count");
  ConsensusState st;
  st.lambda = shift_blocks(previous.lambda, 2, padding);
  st.s.resize(M);
  st.Sigma.resize(M);
  for (int i = 0; i < M; ++i) {
    require(previous.s[i].size() == ns, "previous s has wrong length");
    st.s[i] = shift_blocks(previous.s[i], 2, padding);
    if (mode == SigmaMode::kIdentity) {
      st.Sigma[i] = Eigen::MatrixXd::Identity(ns, ns);
      continue;
    }
    const LocalProblem& lp = problems_now[i];
    // Curvature is read off at the shifted local minimizer ξ rather than at
    // s: ξ lies exactly on the faces of dom Ψ, the averaged s only nearly.
    // The last block of the old window is distorted by the horizon end, so
    // the two newest blocks both copy the old second-to-last block.
    const Eigen::VectorXd& xi_prev =
        previous.xi_s.size() == previous.s.size() && previous.xi_s[i].size() == ns ? previous.xi_s[i]
                                                                                  : previous.s[i];
    Eigen::VectorXd s_hess = shift_blocks(xi_prev);
    if (ns >= 6) {
      s_hess.segment(ns - 4, 2) = xi_prev.segment(ns - 4, 2);
      s_hess.tail(2) = xi_prev.segment(ns - 4, 2);
    } else if (ns >= 4) {
      s_hess.tail(2) = xi_prev.tail(2);
    }
    try {
      PsiValue psi;
      Eigen::VectorXd at = s_hess;
      try {
        psi = eval_psi(lp, s_hess, settings);
      } catch (const QPError&) {
        // The shifted point can fall outside dom Ψ when several faces are
        // tight. One local step from the shifted (λ, s) lands inside it.
        at = local_step(lp, st.lambda, st.s[i], Eigen::MatrixXd::Identity(ns, ns), settings).xi_s;
        psi = eval_psi(lp, at, settings);
      }
      // A pair within edge_tol of the edge s¹_k + s²_k = o¹_k + o²_k of
      // dom Ψ is counted as on it. The previous solve is only ε-accurate,
      // and a Σ that misses the stiff edge direction converges very slowly.
      std::vector<int> active = psi.active_set;
      if (edge_tol > 0) {
        const int base = static_cast<int>(lp.qp.E.rows());
        for (int k = 0; 2 * k + 1 < ns; ++k) {
          const double gap = at(2 * k) + at(2 * k + 1) - lp.coupling_offset(2 * k) -
                             lp.coupling_offset(2 * k + 1);
          if (gap <= edge_tol) {
            active.push_back(base + 2 * k);
            active.push_back(base + 2 * k + 1);
          }
        }
        std::sort(active.begin(), active.end());
        active.erase(std::unique(active.begin(), active.end()), active.end());
      }
      st.Sigma[i] = 2.0 * local_hessian(lp, active).S;
    } catch (const QPError&) {
      if (static_cast<int>(problems_before.size()) == M &&
          static_cast<int>(previous.active_sets.size()) == M) {
        const Eigen::MatrixXd S = local_hessian(problems_before[i], previous.active_sets[i]).S;
        st.Sigma[i] = 2.0 * shift_matrix(S, lp.mu);
      } else {
        st.Sigma[i] = 2.0 * lp.mu * Eigen::MatrixXd::Identity(ns, ns);
      }
    }
  }
  return st;
}

}  // namespace bdr
