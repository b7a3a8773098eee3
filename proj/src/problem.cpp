#include "bdr/problem.hpp"

#include <stdexcept>
#include <string>

namespace bdr {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(std::string("problem: ") + what);
}

}  // namespace

void CouplingData::validate() const {
  require(!G.empty(), "at least one building is required");
  require(F.size() == G.size(), "G and F must have one entry per building");
  require(v_tilde.size() >= 1, "v_tilde must be nonempty");
  require(pi.size() == v_tilde.size(), "pi and v_tilde must have length N");
  require(v_lo < v_hi, "v_lo < v_hi must hold");
}

CouplingData make_coupling(std::span<const BuildingModel> models, const Eigen::VectorXd& v_tilde,
                           double v_lo, double v_hi, Eigen::VectorXd pi) {
  CouplingData c;
  for (const BuildingModel& m : models) {
    c.G.push_back(m.G);
    c.F.push_back(m.F);
  }
  c.v_tilde = v_tilde;
  c.v_lo = v_lo;
  c.v_hi = v_hi;
  c.pi = pi.size() == 0 ? Eigen::VectorXd::Ones(v_tilde.size()) : std::move(pi);
  c.validate();
  return c;
}

Eigen::MatrixXd LocalProblem::quadratic_form() const {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(dim_z(), dim_z());
  W.topLeftCorner(dim_u(), dim_u()) = qp.H;
  W.bottomRightCorner(dim_s(), dim_s()).diagonal().setConstant(mu);
  return W;
}

Eigen::VectorXd LocalProblem::linear_term() const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim_z());
  c.head(dim_u()) = 2.0 * qp.h + price_term;
  return c;
}

Eigen::MatrixXd LocalProblem::constraint_matrix() const {
  const int m = static_cast<int>(qp.E.rows());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + dim_s(), dim_z());
  A.topLeftCorner(m, dim_u()) = qp.E;
  A.bottomLeftCorner(dim_s(), dim_u()) = coupling_rows;
  A.bottomRightCorner(dim_s(), dim_s()) = -Eigen::MatrixXd::Identity(dim_s(), dim_s());
  return A;
}

Eigen::VectorXd LocalProblem::constraint_rhs() const {
  Eigen::VectorXd b(num_inequalities());
  b.head(qp.E.rows()) = qp.e;
  b.tail(dim_s()) = -coupling_offset;
  return b;
}

double LocalProblem::objective(const Eigen::VectorXd& u, const Eigen::VectorXd& s) const {
  return u.dot(qp.H * u) + (2.0 * qp.h + price_term).dot(u) + mu * s.squaredNorm();
}

Eigen::VectorXd LocalProblem::coupling_values(const Eigen::VectorXd& u,
                                              const Eigen::VectorXd& s) const {
  return coupling_rows * u + coupling_offset - s;
}

LocalProblem build_local(const BuildingModel& model, const Eigen::VectorXd& x_hat,
                         const Eigen::VectorXd& w, const CouplingData& coupling,
                         int num_buildings, double mu) {
  require(mu >= 0.0, "mu must be nonnegative");
  require(num_buildings >= 1, "at least one building is required");
  require(coupling.v_lo < coupling.v_hi, "v_lo < v_hi must hold");
  const int N = static_cast<int>(coupling.v_tilde.size());
  require(N >= 1, "v_tilde must be nonempty");
  require(coupling.pi.size() == N, "pi must have length N");
  require(model.F.size() == model.nu(), "F must be 1 x nu");

  LocalProblem lp;
  lp.qp = condense(model, x_hat, w, N);
  lp.mu = mu;
  const int nu = model.nu();
  const Eigen::RowVectorXd gf = model.G * model.F;
  lp.coupling_rows = Eigen::MatrixXd::Zero(2 * N, N * nu);
  lp.coupling_offset.resize(2 * N);
  lp.price_term.resize(N * nu);
  for (int k = 0; k < N; ++k) {
    lp.coupling_rows.block(2 * k, k * nu, 1, nu) = gf;
    lp.coupling_rows.block(2 * k + 1, k * nu, 1, nu) = -gf;
    lp.coupling_offset(2 * k) = (coupling.v_tilde(k) - coupling.v_hi) / num_buildings;
    lp.coupling_offset(2 * k + 1) = (coupling.v_lo - coupling.v_tilde(k)) / num_buildings;
    lp.price_term.segment(k * nu, nu) = coupling.pi(k) * model.F.transpose();
  }
  return lp;
}

std::vector<Eigen::VectorXd> recover_s(std::span<const Eigen::VectorXd> u,
                                       const CouplingData& coupling) {
  const int M = coupling.buildings();
  const int N = coupling.horizon();
  require(static_cast<int>(u.size()) == M, "one input trajectory per building is required");
  Eigen::MatrixXd share(M, N);  // G_i F_i u_{i,k}
  for (int i = 0; i < M; ++i) {
    const int nu = static_cast<int>(coupling.F[i].size());
    require(u[i].size() == static_cast<Eigen::Index>(N) * nu, "input trajectory has wrong length");
    for (int k = 0; k < N; ++k) {
      share(i, k) = coupling.G[i] * coupling.F[i].dot(u[i].segment(k * nu, nu));
    }
  }
  const Eigen::RowVectorXd mean = share.colwise().mean();
  std::vector<Eigen::VectorXd> s(static_cast<size_t>(M), Eigen::VectorXd(2 * N));
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < N; ++k) {
      s[i](2 * k) = share(i, k) - mean(k);
      s[i](2 * k + 1) = -share(i, k) + mean(k);
    }
  }
  return s;
}

Eigen::VectorXd voltage_profile(std::span<const Eigen::VectorXd> u, const CouplingData& coupling) {
  const int M = coupling.buildings();
  const int N = coupling.horizon();
  require(static_cast<int>(u.size()) == M, "one input trajectory per building is required");
  Eigen::VectorXd v = coupling.v_tilde;
  for (int i = 0; i < M; ++i) {
    const int nu = static_cast<int>(coupling.F[i].size());
    require(u[i].size() >= static_cast<Eigen::Index>(N) * nu, "input trajectory too short");
    for (int k = 0; k < N; ++k) v(k) += coupling.G[i] * coupling.F[i].dot(u[i].segment(k * nu, nu));
  }
  return v;
}

CentralizedProblem assemble_centralized(std::span<const LocalProblem> problems) {
  require(!problems.empty(), "at least one local problem is required");
  const int N = problems.front().horizon();
  int n = 0;
  int m = 0;
  for (const LocalProblem& lp : problems) {
    require(lp.horizon() == N, "all local problems must share the horizon");
    n += lp.dim_z();
    m += lp.num_inequalities();
  }
  CentralizedProblem cp;
  cp.horizon = N;
  cp.has_auxiliary = true;
  cp.P = Eigen::MatrixXd::Zero(n, n);
  cp.q = Eigen::VectorXd::Zero(n);
  cp.E = Eigen::MatrixXd::Zero(m, n);
  cp.e = Eigen::VectorXd::Zero(m);
  cp.Aeq = Eigen::MatrixXd::Zero(2 * N, n);
  cp.beq = Eigen::VectorXd::Zero(2 * N);
  int col = 0;
  int row = 0;
  for (const LocalProblem& lp : problems) {
    cp.offsets.push_back(col);
    cp.dims_u.push_back(lp.dim_u());
    cp.P.block(col, col, lp.dim_z(), lp.dim_z()) = 2.0 * lp.quadratic_form();
    cp.q.segment(col, lp.dim_z()) = lp.linear_term();
    cp.E.block(row, col, lp.num_inequalities(), lp.dim_z()) = lp.constraint_matrix();
    cp.e.segment(row, lp.num_inequalities()) = lp.constraint_rhs();
    cp.Aeq.block(0, col + lp.dim_u(), 2 * N, 2 * N).setIdentity();
    col += lp.dim_z();
    row += lp.num_inequalities();
  }
  return cp;
}

CentralizedProblem assemble_eliminated(std::span<const LocalProblem> problems) {
  require(!problems.empty(), "at least one local problem is required");
  const int N = problems.front().horizon();
  int n = 0;
  int m = 2 * N;
  for (const LocalProblem& lp : problems) {
    require(lp.horizon() == N, "all local problems must share the horizon");
    n += lp.dim_u();
    m += static_cast<int>(lp.qp.E.rows());
  }
  CentralizedProblem cp;
  cp.horizon = N;
  cp.has_auxiliary = false;
  cp.P = Eigen::MatrixXd::Zero(n, n);
  cp.q = Eigen::VectorXd::Zero(n);
  cp.E = Eigen::MatrixXd::Zero(m, n);
  cp.e = Eigen::VectorXd::Zero(m);
  cp.Aeq = Eigen::MatrixXd(0, n);
  cp.beq = Eigen::VectorXd(0);
  int col = 0;
  int row = 0;
  Eigen::VectorXd band = Eigen::VectorXd::Zero(2 * N);
  for (const LocalProblem& lp : problems) {
    const int du = lp.dim_u();
    const int mi = static_cast<int>(lp.qp.E.rows());
    cp.offsets.push_back(col);
    cp.dims_u.push_back(du);
    cp.P.block(col, col, du, du) = 2.0 * lp.qp.H;
    cp.q.segment(col, du) = 2.0 * lp.qp.h + lp.price_term;
    cp.E.block(row, col, mi, du) = lp.qp.E;
    cp.e.segment(row, mi) = lp.qp.e;
    // Summing the per-building coupling rows and offsets gives the voltage band.
    cp.E.block(m - 2 * N, col, 2 * N, du) = lp.coupling_rows;
    band -= lp.coupling_offset;
    col += du;
    row += mi;
  }
  cp.e.tail(2 * N) = band;
  return cp;
}

CentralizedSolution solve_centralized(const CentralizedProblem& problem, QPSettings settings) {
  CentralizedSolution out;
  out.qp = solve_qp(problem.P, problem.q, problem.E, problem.e, problem.Aeq, problem.beq, settings);
  const int N = problem.horizon;
  for (size_t i = 0; i < problem.offsets.size(); ++i) {
    const int off = problem.offsets[i];
    out.u.push_back(out.qp.z_star.segment(off, problem.dims_u[i]));
    if (problem.has_auxiliary) out.s.push_back(out.qp.z_star.segment(off + problem.dims_u[i], 2 * N));
  }
  if (problem.has_auxiliary) out.lambda = out.qp.eq_duals;
  return out;
}

}  // namespace bdr
