#include "bdr/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bdr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

std::string_view to_string(QPStatus status) {
  switch (status) {
    case QPStatus::kOptimal:
      return "optimal";
    case QPStatus::kInfeasible:
      return "infeasible";
    case QPStatus::kMaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

double kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& h,
                    const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                    const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                    const Eigen::VectorXd& z, const Eigen::VectorXd& duals,
                    const Eigen::VectorXd& eq_duals) {
  Eigen::VectorXd grad = H * z + h;
  if (E.rows() > 0) grad += E.transpose() * duals;
  if (Aeq.rows() > 0) grad += Aeq.transpose() * eq_duals;
  double res = grad.lpNorm<Eigen::Infinity>();
  if (E.rows() > 0) {
    const Eigen::VectorXd slack = e - E * z;
    for (Eigen::Index j = 0; j < slack.size(); ++j) {
      res = std::max(res, -slack(j));
      res = std::max(res, -duals(j));
      res = std::max(res, std::abs(duals(j) * slack(j)));
    }
  }
  if (Aeq.rows() > 0) res = std::max(res, (Aeq * z - beq).lpNorm<Eigen::Infinity>());
  return res;
}

DualActiveSetSolver::DualActiveSetSolver(const Eigen::MatrixXd& H, QPSettings settings)
    : H_(H), settings_(settings) {
  if (H.rows() != H.cols() || H.rows() == 0) {
    throw std::invalid_argument("qp: Hessian must be square and nonempty");
  }
  if ((H - H.transpose()).lpNorm<Eigen::Infinity>() >
      1e-10 * std::max(1.0, H.lpNorm<Eigen::Infinity>())) {
    throw std::invalid_argument("qp: Hessian is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("qp: Hessian is not positive definite");
  }
  const Eigen::Index n = H.rows();
  // J0 = L^{-T}, so that H^{-1} = J0 J0ᵀ.
  J0_ = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
}

Eigen::VectorXd DualActiveSetSolver::normal(int k, const Eigen::MatrixXd& E,
                                            const Eigen::MatrixXd& Aeq) const {
  // Inequality rows are stored as E z ≤ e, i.e. (−E_k) z + e_k ≥ 0.
  if (k >= 0) return -E.row(k).transpose();
  return Aeq.row(-k - 1).transpose();
}

bool DualActiveSetSolver::add_constraint(Eigen::VectorXd& d, int& iq, double& r_norm) {
  const Eigen::Index n = d.size();
  // Givens rotations zero d(iq+1:n) and carry the same rotation into J.
  for (Eigen::Index j = n - 1; j >= iq + 1; --j) {
    double cc = d(j - 1);
    double ss = d(j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d(j) = 0.0;
    ss /= h;
    cc /= h;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d(j - 1) = -h;
    } else {
      d(j - 1) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t1 = J_(k, j - 1);
      const double t2 = J_(k, j);
      J_(k, j - 1) = t1 * cc + t2 * ss;
      J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
    }
  }
  ++iq;
  R_.col(iq - 1).head(iq) = d.head(iq);
  if (std::abs(d(iq - 1)) <= kEps * r_norm) return false;
  r_norm = std::max(r_norm, std::abs(d(iq - 1)));
  return true;
}

void DualActiveSetSolver::delete_constraint(std::vector<int>& active, Eigen::VectorXd& u,
                                            int me, int& iq, int row) {
  const Eigen::Index n = J_.rows();
  int qq = -1;
  for (int i = me; i < iq; ++i) {
    if (active[i] == row) {
      qq = i;
      break;
    }
  }
  if (qq < 0) throw std::logic_error("qp: deleting a constraint that is not active");

  for (int i = qq; i < iq - 1; ++i) {
    active[i] = active[i + 1];
    u(i) = u(i + 1);
    R_.col(i) = R_.col(i + 1);
  }
  active[iq - 1] = active[iq];
  u(iq - 1) = u(iq);
  active[iq] = 0;
  u(iq) = 0.0;
  R_.col(iq - 1).head(iq).setZero();
  --iq;
  if (iq == 0) return;

  // Restore upper-triangular R with rotations, mirrored in J.
  for (int j = qq; j < iq; ++j) {
    double cc = R_(j, j);
    double ss = R_(j + 1, j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    cc /= h;
    ss /= h;
    R_(j + 1, j) = 0.0;
    if (cc < 0.0) {
      R_(j, j) = -h;
      cc = -cc;
      ss = -ss;
    } else {
      R_(j, j) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = j + 1; k < iq; ++k) {
      const double t1 = R_(j, k);
      const double t2 = R_(j + 1, k);
      R_(j, k) = t1 * cc + t2 * ss;
      R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t1 = J_(k, j);
      const double t2 = J_(k, j + 1);
      J_(k, j) = t1 * cc + t2 * ss;
      J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
    }
  }
}

QPSolution DualActiveSetSolver::solve(const Eigen::VectorXd& h, const Eigen::MatrixXd& E,
                                      const Eigen::VectorXd& e) {
  return solve(h, E, e, Eigen::MatrixXd(0, dim()), Eigen::VectorXd(0));
}

QPSolution DualActiveSetSolver::solve(const Eigen::VectorXd& h, const Eigen::MatrixXd& E,
                                      const Eigen::VectorXd& e, const Eigen::MatrixXd& Aeq,
                                      const Eigen::VectorXd& beq) {
  const Eigen::Index n = dim();
  const int m = static_cast<int>(E.rows());
  const int me = static_cast<int>(Aeq.rows());
  if (h.size() != n) throw std::invalid_argument("qp: linear term has wrong size");
  if (m > 0 && (E.cols() != n || e.size() != m)) {
    throw std::invalid_argument("qp: inequality block has inconsistent dimensions");
  }
  if (me > 0 && (Aeq.cols() != n || beq.size() != me)) {
    throw std::invalid_argument("qp: equality block has inconsistent dimensions");
  }
  if (me > n) throw std::invalid_argument("qp: more equality rows than variables");

  const int max_iter = settings_.max_iter > 0 ? settings_.max_iter : 10 * (static_cast<int>(n) + m + me);

  J_ = J0_;
  R_.setZero(n, n);
  double r_norm = 1.0;
  int iq = 0;

  std::vector<int> active(static_cast<size_t>(m + me + 1), 0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m + me + 1);
  Eigen::VectorXd d(n), z(n), r = Eigen::VectorXd::Zero(m + me + 1);

  // Unconstrained minimizer.
  Eigen::VectorXd x = -(J0_ * (J0_.transpose() * h));

  QPSolution sol;
  sol.duals = Eigen::VectorXd::Zero(m);
  sol.eq_duals = Eigen::VectorXd::Zero(me);

  auto compute_step = [&](const Eigen::VectorXd& np) {
    d.noalias() = J_.transpose() * np;
    z.noalias() = J_.rightCols(n - iq) * d.tail(n - iq);
    if (iq > 0) {
      r.head(iq) = R_.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
    }
  };

  for (int i = 0; i < me; ++i) {
    const Eigen::VectorXd np = Aeq.row(i).transpose();
    compute_step(np);
    double t2 = 0.0;
    if (z.squaredNorm() > kEps) t2 = (beq(i) - np.dot(x)) / z.dot(np);
    x += t2 * z;
    u(iq) = t2;
    if (iq > 0) u.head(iq) -= t2 * r.head(iq);
    active[iq] = -i - 1;
    if (!add_constraint(d, iq, r_norm)) {
      throw std::invalid_argument("qp: equality constraints are linearly dependent");
    }
  }

  Eigen::VectorXd row_norm(m);
  for (int i = 0; i < m; ++i) row_norm(i) = std::max(E.row(i).lpNorm<Eigen::Infinity>(), kEps);

  std::vector<int> iai(static_cast<size_t>(m));
  std::vector<char> allowed(static_cast<size_t>(m), 1);
  for (int i = 0; i < m; ++i) iai[i] = i;

  Eigen::VectorXd slack(m);
  Eigen::VectorXd x_old;
  Eigen::VectorXd u_old;
  std::vector<int> active_old;
  int iq_old = 0;

  // Rebuilds J and R for a known independent active set after a failed add.
  auto rebuild = [&]() {
    J_ = J0_;
    R_.setZero(n, n);
    r_norm = 1.0;
    iq = 0;
    for (int k = 0; k < iq_old; ++k) {
      d.noalias() = J_.transpose() * normal(active_old[k], E, Aeq);
      active[iq] = active_old[k];
      add_constraint(d, iq, r_norm);
    }
    u.head(iq_old) = u_old.head(iq_old);
    x = x_old;
  };

  // Most violated row relative to its scale, or -1.
  auto pick_violated = [&]() {
    int best = -1;
    double best_v = 0.0;
    const double xs = x.lpNorm<Eigen::Infinity>();
    for (int i = 0; i < m; ++i) {
      if (iai[i] == -1 || !allowed[i]) continue;
      const double scale = std::max({1.0, std::abs(e(i)), row_norm(i) * xs});
      const double v = slack(i) / scale;
      if (v < -settings_.feas_tol && v < best_v) {
        best_v = v;
        best = i;
      }
    }
    return best;
  };

  int iter = 0;
  bool done = false;
  while (!done) {
    // Step 1: evaluate the inequality slacks.
    if (++iter > max_iter) {
      sol.status = QPStatus::kMaxIterations;
      break;
    }
    for (int k = me; k < iq; ++k) iai[active[k]] = -1;
    if (m > 0) slack.noalias() = e - E * x;
    std::fill(allowed.begin(), allowed.end(), 1);
    x_old = x;
    u_old = u;
    active_old = active;
    iq_old = iq;

    bool restart = true;
    while (restart) {
      restart = false;
      // Step 2: choose a violated constraint.
      const int ip = pick_violated();
      if (ip < 0) {
        done = true;
        break;
      }
      const Eigen::VectorXd np = normal(ip, E, Aeq);
      u(iq) = 0.0;
      active[iq] = ip;

      // Step 2a: determine the step direction, partial and full step lengths.
      while (true) {
        compute_step(np);
        int l = -1;
        double t1 = kInf;
        for (int k = me; k < iq; ++k) {
          if (r(k) > 0.0 && u(k) / r(k) < t1) {
            t1 = u(k) / r(k);
            l = active[k];
          }
        }
        double t2 = kInf;
        if (z.squaredNorm() > kEps) t2 = -slack(ip) / z.dot(np);
        const double t = std::min(t1, t2);

        if (t >= kInf) {
          sol.status = QPStatus::kInfeasible;
          done = true;
          break;
        }
        if (t2 >= kInf) {
          // Dual step only.
          if (iq > 0) u.head(iq) -= t * r.head(iq);
          u(iq) += t;
          iai[l] = l;
          delete_constraint(active, u, me, iq, l);
          continue;
        }

        x += t * z;
        if (iq > 0) u.head(iq) -= t * r.head(iq);
        u(iq) += t;

        if (t == t2) {
          if (!add_constraint(d, iq, r_norm)) {
            allowed[ip] = 0;
            rebuild();
            for (int i = 0; i < m; ++i) iai[i] = i;
            for (int k = me; k < iq; ++k) iai[active[k]] = -1;
            restart = true;
            break;
          }
          iai[ip] = -1;
          break;
        }

        // Partial step: drop the blocking constraint and retry.
        iai[l] = l;
        delete_constraint(active, u, me, iq, l);
        slack(ip) = e(ip) - E.row(ip).dot(x);
      }
    }
    if (sol.status != QPStatus::kOptimal) break;
  }

  sol.iterations = iter;
  sol.z_star = x;
  for (int k = 0; k < iq; ++k) {
    if (active[k] >= 0) {
      sol.duals(active[k]) = u(k);
    } else {
      sol.eq_duals(-active[k] - 1) = -u(k);
    }
  }
  sol.objective = 0.5 * x.dot(H_ * x) + h.dot(x);
  if (m > 0) {
    slack.noalias() = e - E * x;
    for (int i = 0; i < m; ++i) {
      if (slack(i) <= settings_.act_tol) sol.active_set.push_back(i);
    }
  }
  sol.kkt_residual = kkt_residual(H_, h, E, e, Aeq, beq, x, sol.duals, sol.eq_duals);
  return sol;
}

QPSolution solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& h,
                    const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                    const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                    QPSettings settings) {
  DualActiveSetSolver solver(H, settings);
  const Eigen::MatrixXd eq = Aeq.rows() > 0 ? Aeq : Eigen::MatrixXd(0, H.rows());
  const Eigen::VectorXd beq_v = Aeq.rows() > 0 ? beq : Eigen::VectorXd(0);
  const Eigen::MatrixXd in = E.rows() > 0 ? E : Eigen::MatrixXd(0, H.rows());
  const Eigen::VectorXd e_v = E.rows() > 0 ? e : Eigen::VectorXd(0);
  return solver.solve(h, in, e_v, eq, beq_v);
}

}  // namespace bdr
