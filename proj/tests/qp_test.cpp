#include "bdr/qp.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "gtest/gtest.h"

namespace bdr {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct RandomQp {
  MatrixXd H;
  VectorXd h;
  MatrixXd E;
  VectorXd e;
};

RandomQp make_random_qp(int n, int m, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> normal;
  auto randn = [&](Eigen::Index r, Eigen::Index c) {
    return MatrixXd::NullaryExpr(r, c, [&]() { return normal(gen); });
  };
  RandomQp qp;
  const MatrixXd L = randn(n, n);
  qp.H = L * L.transpose() + 0.5 * MatrixXd::Identity(n, n);
  qp.h = 5.0 * randn(n, 1);
  qp.E = randn(m, n);
  // Feasible by construction: a random interior point with positive slack.
  const VectorXd z0 = 0.2 * randn(n, 1);
  qp.e = qp.E * z0 + randn(m, 1).cwiseAbs() * 0.5;
  return qp;
}

// Accelerated projected gradient on the dual, max_{y>=0} -½(h+Eᵀy)ᵀH⁻¹(h+Eᵀy) - eᵀy.
// Independent of the active-set machinery; used as a first-order reference.
VectorXd dual_projected_gradient(const RandomQp& qp, int iters) {
  const Eigen::LLT<MatrixXd> llt(qp.H);
  const MatrixXd Hinv_Et = llt.solve(qp.E.transpose());
  const MatrixXd Q = qp.E * Hinv_Et;  // dual Hessian
  const VectorXd c = -(qp.E * llt.solve(qp.h)) - qp.e;
  const double lip = Eigen::SelfAdjointEigenSolver<MatrixXd>(Q).eigenvalues().maxCoeff();
  VectorXd y = VectorXd::Zero(qp.E.rows());
  VectorXd w = y;
  double t = 1.0;
  for (int k = 0; k < iters; ++k) {
    // Minimize ½yᵀQy - cᵀy over y >= 0.
    const VectorXd grad = Q * w - c;
    const VectorXd y_next = (w - grad / lip).cwiseMax(0.0);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    w = y_next + ((t - 1.0) / t_next) * (y_next - y);
    y = y_next;
    t = t_next;
  }
  return -llt.solve(qp.h + qp.E.transpose() * y);
}

TEST(SolveQpTest, InteriorUnconstrainedOptimum) {
  const MatrixXd H = MatrixXd::Identity(3, 3);
  const VectorXd h = VectorXd::Zero(3);
  MatrixXd E(4, 3);
  E << 1, 0, 0, 0, 1, 0, -1, -1, 0, 0, 0, 1;
  const VectorXd e = VectorXd::Constant(4, 0.5);
  const QPSolution sol = solve_qp(H, h, E, e);
  ASSERT_TRUE(sol.ok());
  EXPECT_LT(sol.z_star.norm(), 1e-14);
  EXPECT_TRUE(sol.active_set.empty());
}

TEST(SolveQpTest, ScalarActiveBoundHasDualTwo) {
  // min z^2 - 2z  s.t.  z <= 0, written as ½ zᵀ(2)z + (-2)z.
  const MatrixXd H = MatrixXd::Constant(1, 1, 2.0);
  const VectorXd h = VectorXd::Constant(1, -2.0);
  const MatrixXd E = MatrixXd::Constant(1, 1, 1.0);
  const VectorXd e = VectorXd::Zero(1);
  const QPSolution sol = solve_qp(H, h, E, e);
  ASSERT_TRUE(sol.ok());
  EXPECT_NEAR(sol.z_star(0), 0.0, 1e-14);
  EXPECT_NEAR(sol.duals(0), 2.0, 1e-14);
  ASSERT_EQ(sol.active_set.size(), 1u);
  EXPECT_EQ(sol.active_set[0], 0);
}

TEST(SolveQpTest, ReportsInfeasibility) {
  const MatrixXd H = MatrixXd::Identity(1, 1);
  const VectorXd h = VectorXd::Zero(1);
  MatrixXd E(2, 1);
  E << 1, -1;
  VectorXd e(2);
  e << -1, -1;  // z <= -1 and z >= 1
  const QPSolution sol = solve_qp(H, h, E, e);
  EXPECT_EQ(sol.status, QPStatus::kInfeasible);
}

TEST(SolveQpTest, RejectsIndefiniteHessian) {
  MatrixXd H(2, 2);
  H << 1, 0, 0, -1;
  EXPECT_THROW(DualActiveSetSolver solver(H), std::invalid_argument);
}

TEST(SolveQpTest, RejectsMismatchedDimensions) {
  const MatrixXd H = MatrixXd::Identity(2, 2);
  EXPECT_THROW(solve_qp(H, VectorXd::Zero(3), MatrixXd(0, 2), VectorXd(0)),
               std::invalid_argument);
  EXPECT_THROW(solve_qp(H, VectorXd::Zero(2), MatrixXd::Ones(1, 3), VectorXd::Ones(1)),
               std::invalid_argument);
}

TEST(SolveQpTest, EqualityAndInequality) {
  // min ½|z|² s.t. z0 + z1 = 2, z0 <= 0.5  ->  z = (0.5, 1.5)
  const MatrixXd H = MatrixXd::Identity(2, 2);
  const VectorXd h = VectorXd::Zero(2);
  MatrixXd E(1, 2);
  E << 1, 0;
  const VectorXd e = VectorXd::Constant(1, 0.5);
  MatrixXd Aeq(1, 2);
  Aeq << 1, 1;
  const VectorXd beq = VectorXd::Constant(1, 2.0);
  const QPSolution sol = solve_qp(H, h, E, e, Aeq, beq);
  ASSERT_TRUE(sol.ok());
  EXPECT_NEAR(sol.z_star(0), 0.5, 1e-13);
  EXPECT_NEAR(sol.z_star(1), 1.5, 1e-13);
  // Stationarity: z + Eᵀy + Aeqᵀν = 0 → ν = -1.5, y = 1.
  EXPECT_NEAR(sol.eq_duals(0), -1.5, 1e-13);
  EXPECT_NEAR(sol.duals(0), 1.0, 1e-13);
  EXPECT_LE(sol.kkt_residual, 1e-12);
}

TEST(SolveQpTest, DegenerateDuplicatedRows) {
  // Three copies of the same active row plus a dependent combination.
  const MatrixXd H = MatrixXd::Identity(2, 2);
  const VectorXd h = (VectorXd(2) << -2, -2).finished();
  MatrixXd E(4, 2);
  E << 1, 1, 1, 1, 2, 2, 1, 0;
  VectorXd e(4);
  e << 1, 1, 2, 0.5;
  const QPSolution sol = solve_qp(H, h, E, e);
  ASSERT_TRUE(sol.ok());
  EXPECT_NEAR(sol.z_star(0), 0.5, 1e-12);
  EXPECT_NEAR(sol.z_star(1), 0.5, 1e-12);
  EXPECT_LE(sol.kkt_residual, 1e-9);
  EXPECT_EQ(sol.active_set.size(), 4u);
}

TEST(SolveQpTest, MatchesDualProjectedGradientReference) {
  const RandomQp qp = make_random_qp(20, 40, 7);
  const QPSolution sol = solve_qp(qp.H, qp.h, qp.E, qp.e);
  ASSERT_TRUE(sol.ok());
  const VectorXd z_ref = dual_projected_gradient(qp, 200000);
  const double f_ref = 0.5 * z_ref.dot(qp.H * z_ref) + qp.h.dot(z_ref);
  EXPECT_NEAR(sol.objective, f_ref, 1e-6 * std::max(1.0, std::abs(f_ref)));
  EXPECT_LE((sol.z_star - z_ref).lpNorm<Eigen::Infinity>(), 1e-5);
  EXPECT_FALSE(sol.active_set.empty());
}

TEST(SolveQpTest, RandomInstancesSatisfyKkt) {
  for (unsigned seed = 0; seed < 40; ++seed) {
    const int n = 5 + static_cast<int>(seed % 30);
    const RandomQp qp = make_random_qp(n, 3 * n, 100 + seed);
    const QPSolution sol = solve_qp(qp.H, qp.h, qp.E, qp.e);
    ASSERT_TRUE(sol.ok()) << "seed " << seed;
    EXPECT_LE(sol.kkt_residual, 1e-9) << "seed " << seed;
    EXPECT_GE(sol.duals.minCoeff(), 0.0);
    // Active set is exactly the rows with slack below act_tol.
    const VectorXd slack = qp.e - qp.E * sol.z_star;
    for (int j = 0; j < slack.size(); ++j) {
      const bool listed = std::binary_search(sol.active_set.begin(), sol.active_set.end(), j);
      EXPECT_EQ(listed, slack(j) <= 1e-7);
    }
  }
}

TEST(SolveQpTest, ShuffledConstraintOrderGivesSameObjective) {
  const RandomQp qp = make_random_qp(30, 90, 11);
  std::vector<int> perm(90);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(3));
  MatrixXd E(90, 30);
  VectorXd e(90);
  for (int i = 0; i < 90; ++i) {
    E.row(i) = qp.E.row(perm[i]);
    e(i) = qp.e(perm[i]);
  }
  const QPSolution a = solve_qp(qp.H, qp.h, qp.E, qp.e);
  const QPSolution b = solve_qp(qp.H, qp.h, E, e);
  ASSERT_TRUE(a.ok());
  ASSERT_TRUE(b.ok());
  EXPECT_NEAR(a.objective, b.objective, 1e-8 * std::max(1.0, std::abs(a.objective)));
}

TEST(SolveQpTest, SolverInstanceIsReusable) {
  const RandomQp qp = make_random_qp(12, 30, 5);
  DualActiveSetSolver solver(qp.H);
  const QPSolution first = solver.solve(qp.h, qp.E, qp.e);
  const QPSolution second = solver.solve(-qp.h, qp.E, qp.e);
  const QPSolution again = solver.solve(qp.h, qp.E, qp.e);
  ASSERT_TRUE(first.ok() && second.ok() && again.ok());
  EXPECT_EQ(first.z_star, again.z_star);
  EXPECT_GT((first.z_star - second.z_star).norm(), 1e-3);
}

}  // namespace
}  // namespace bdr
