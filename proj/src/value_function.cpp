#include "bdr/value_function.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace bdr {

PsiEvaluator::PsiEvaluator(const LocalProblem& lp, QPSettings settings)
    : lp_(&lp), solver_(2.0 * lp.qp.H, settings) {
  const int m = static_cast<int>(lp.qp.E.rows());
  rows_.resize(m + lp.dim_s(), lp.dim_u());
  rows_.topRows(m) = lp.qp.E;
  rows_.bottomRows(lp.dim_s()) = lp.coupling_rows;
}

PsiValue PsiEvaluator::operator()(const Eigen::VectorXd& s) {
  const LocalProblem& lp = *lp_;
  if (s.size() != lp.dim_s()) throw std::invalid_argument("eval_psi: s must have length 2N");
  const int m = static_cast<int>(lp.qp.E.rows());
  Eigen::VectorXd rhs(m + lp.dim_s());
  rhs.head(m) = lp.qp.e;
  rhs.tail(lp.dim_s()) = s - lp.coupling_offset;

  PsiValue out;
  out.qp = solver_.solve(2.0 * lp.qp.h + lp.price_term, rows_, rhs);
  if (!out.qp.ok()) {
    throw QPError(out.qp.status,
                  "eval_psi: local QP " + std::string(to_string(out.qp.status)));
  }
  out.u_star = out.qp.z_star;
  out.value = out.qp.objective + lp.mu * s.squaredNorm();
  out.active_set = out.qp.active_set;
  out.gradient = 2.0 * lp.mu * s - out.qp.duals.tail(lp.dim_s());
  return out;
}

PsiValue eval_psi(const LocalProblem& lp, const Eigen::VectorXd& s, QPSettings settings) {
  PsiEvaluator eval(lp, settings);
  return eval(s);
}

LocalHessian local_hessian(const LocalProblem& lp, const std::vector<int>& active_set,
                           double prune_tol, double stiff_reg) {
  const int m = static_cast<int>(lp.qp.E.rows());
  const int nu = lp.dim_u();
  const int ns = lp.dim_s();
  const int na = static_cast<int>(active_set.size());

  LocalHessian out;
  out.S = lp.mu * Eigen::MatrixXd::Identity(ns, ns);
  if (na == 0) {
    out.P1.resize(0, nu);
    out.P2.resize(0, ns);
    return out;
  }

  Eigen::MatrixXd P1(na, nu);
  Eigen::MatrixXd P2 = Eigen::MatrixXd::Zero(na, ns);
  for (int r = 0; r < na; ++r) {
    const int row = active_set[r];
    if (row < 0 || row >= m + ns) throw std::invalid_argument("local_hessian: row out of range");
    if (row < m) {
      P1.row(r) = lp.qp.E.row(row);
    } else {
      P1.row(r) = lp.coupling_rows.row(row - m);
      P2(r, row - m) = -1.0;
    }
  }

  // Drop rows of [P₁ P₂] that are linear combinations of others.
  Eigen::MatrixXd P(na, nu + ns);
  P << P1, P2;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(P.transpose());
  qr.setThreshold(prune_tol);
  const int rank = static_cast<int>(qr.rank());
  std::vector<int> keep;
  for (int j = 0; j < rank; ++j) keep.push_back(qr.colsPermutation().indices()(j));
  std::sort(keep.begin(), keep.end());

  out.P1.resize(rank, nu);
  out.P2.resize(rank, ns);
  for (int j = 0; j < rank; ++j) {
    out.P1.row(j) = P1.row(keep[j]);
    out.P2.row(j) = P2.row(keep[j]);
    out.kept_rows.push_back(active_set[keep[j]]);
  }
  if (rank == 0) return out;

  Eigen::LLT<Eigen::MatrixXd> hllt(lp.qp.H);
  Eigen::MatrixXd K = out.P1 * hllt.solve(out.P1.transpose());
  K = 0.5 * (K + K.transpose());
  // K is singular when P₁ alone is rank deficient. Those directions pin s
  // to the boundary of dom Ψ; they get curvature 1 / (stiff_reg · ‖K‖).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  const double kmax = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv(rank);
  for (int j = 0; j < rank; ++j) {
    const double k = es.eigenvalues()(j);
    inv(j) = 1.0 / (k > prune_tol * kmax ? k : stiff_reg * kmax);
    if (!(k > prune_tol * kmax)) ++out.stiff_directions;
  }
  const Eigen::MatrixXd VtP2 = es.eigenvectors().transpose() * out.P2;
  out.S += VtP2.transpose() * inv.asDiagonal() * VtP2;
  out.S = 0.5 * (out.S + out.S.transpose());
  return out;
}

}  // namespace bdr
