#include "bdr/admm.hpp"

#include <random>

#include "gtest/gtest.h"
#include "test_instances.hpp"

namespace bdr {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::Instance;

TEST(Ruiz, UnitNormsAreAFixedPoint) {
  MatrixXd E(3, 3);
  E << 1, 0.5, 0, -0.2, 1, 0.3, 0, -1, -1;
  const VectorXd e = VectorXd::Ones(3);
  const RuizResult r = ruiz_equilibrate(E, e);
  EXPECT_TRUE(r.row_scale.isOnes());
  EXPECT_TRUE(r.col_scale.isOnes());
  EXPECT_EQ(r.E, E);
  EXPECT_EQ(r.e, e);
}

TEST(Ruiz, DiagonalExample) {
  const MatrixXd E = (MatrixXd(2, 2) << 4, 0, 0, 1).finished();
  const RuizResult r = ruiz_equilibrate(E, VectorXd::Ones(2), 1);
  EXPECT_TRUE(r.row_scale.isApprox((VectorXd(2) << 0.5, 1.0).finished()));
  EXPECT_TRUE(r.col_scale.isApprox((VectorXd(2) << 0.5, 1.0).finished()));
  EXPECT_TRUE(r.E.isApprox(MatrixXd::Identity(2, 2)));
  EXPECT_TRUE(r.e.isApprox((VectorXd(2) << 0.5, 1.0).finished()));
}

TEST(Ruiz, ZeroRowKeepsUnitScale) {
  const MatrixXd E = (MatrixXd(2, 2) << 0, 0, 3, 0.1).finished();
  const RuizResult r = ruiz_equilibrate(E, VectorXd::Ones(2));
  EXPECT_EQ(r.row_scale(0), 1.0);
  EXPECT_TRUE(r.row_scale.allFinite());
  EXPECT_TRUE(r.col_scale.allFinite());
}

TEST(Ruiz, RandomMatricesBecomeBalanced) {
  std::mt19937_64 gen(4);
  std::lognormal_distribution<double> L(0.0, 2.0);
  std::bernoulli_distribution sign(0.5);
  const double tol = 1e-3;
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd E = MatrixXd::NullaryExpr(12, 6, [&] { return (sign(gen) ? 1 : -1) * L(gen); });
    const RuizResult r = ruiz_equilibrate(E, VectorXd::Ones(12), 50, tol);
    const VectorXd rows = r.E.rowwise().lpNorm<Eigen::Infinity>();
    EXPECT_LE(rows.maxCoeff() / rows.minCoeff(), 1 + 10 * tol) << "trial " << trial;
  }
}

TEST(Ruiz, ScaledSetMatchesOriginal) {
  const BuildingModel m = synth_building(BuildingKind::kSmall, 9);
  const OperatingPoint op = steady_operating_point(m, 0.5 * m.u_hi);
  const int N = 14;
  VectorXd w(N * m.nx());
  for (int k = 0; k < N; ++k) w.segment(k * m.nx(), m.nx()) = op.w_ss;
  const CondensedQP qp = condense(m, op.x_ss, w, N);
  const RuizResult r = ruiz_equilibrate(qp.E, qp.e);

  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int inside = 0;
  for (int t = 0; t < 1000; ++t) {
    // Points around the nominal input so that both outcomes occur.
    VectorXd u(qp.dim());
    for (int k = 0; k < N; ++k)
      for (int j = 0; j < m.nu(); ++j)
        u(k * m.nu() + j) = op.u_nom(j) * (0.9 + 0.2 * U(gen)) + 0.02 * (U(gen) - 0.5);
    const bool a = ((qp.E * u - qp.e).array() <= 0).all();
    const VectorXd ut = u.cwiseQuotient(r.col_scale);
    const bool b = ((r.E * ut - r.e).array() <= 1e-12 * r.e.cwiseAbs().maxCoeff()).all();
    EXPECT_EQ(a, b);
    inside += a;
  }
  EXPECT_GT(inside, 0);
  EXPECT_LT(inside, 1000);
}

TEST(AdmmSolve, SingleBuildingConvergesInOneIteration) {
  BuildingModel m = testing::scalar_building(0.5, 1.0, -0.01);
  const std::vector<BuildingModel> models{m};
  const CouplingData c = make_coupling(models, VectorXd::Constant(4, 1.0), 0.95, 1.05);
  const std::vector<LocalProblem> lp{
      build_local(m, VectorXd::Zero(1), VectorXd::Zero(4), c, 1, 0.1)};
  const DistributedResult r = admm_solve(lp, AdmmConfig{});
  EXPECT_TRUE(r.converged());
  EXPECT_EQ(r.iterations(), 1);
}

TEST(AdmmSolve, ToyMatchesCentralizedOracle) {
  const Instance inst = testing::toy_two(0.1, 3);
  AdmmConfig cfg;
  cfg.epsilon = 1e-6;
  const DistributedResult r = admm_solve(inst.problems, cfg);
  ASSERT_TRUE(r.converged());
  const CentralizedSolution opt = solve_centralized(assemble_centralized(inst.problems));
  for (int i = 0; i < 2; ++i) EXPECT_LT((r.u[i] - opt.u[i]).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(AdmmSolve, ProjectionKeepsZeroSumAndMessageSizes) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = testing::random_instance(3, 5, 40 + seed);
    const DistributedResult r = admm_solve(inst.problems, AdmmConfig{});
    ASSERT_TRUE(r.converged());
    for (const TraceRow& row : r.trace.rows) {
      EXPECT_LE(row.consensus_violation, 1e-10);
      EXPECT_EQ(row.bytes_up, 3LL * 10 * 8);
      EXPECT_EQ(row.bytes_down, 10LL * 8);
    }
  }
}

TEST(AdmmSolve, AgreesWithAladinAndOracle) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Instance inst = testing::random_instance(2, 2 + 3 * (seed % 3), 500 + seed);
    AdmmConfig dc;
    dc.epsilon = 1e-8;
    AladinConfig ac;
    ac.epsilon = 1e-8;
    ac.max_iter = 5000;
    const DistributedResult d = admm_solve(inst.problems, dc);
    const DistributedResult a = aladin_solve(inst.problems, ac);
    ASSERT_TRUE(d.converged());
    ASSERT_TRUE(a.converged());
    const CentralizedSolution opt = solve_centralized(assemble_centralized(inst.problems));
    for (int i = 0; i < 2; ++i) {
      EXPECT_LT((d.u[i] - a.u[i]).cwiseAbs().maxCoeff(), 1e-4);
      EXPECT_LT((d.u[i] - opt.u[i]).cwiseAbs().maxCoeff(), 1e-6);
    }
    EXPECT_LT((d.lambda - a.lambda).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(AdmmSolve, EquilibrationDoesNotMoveTheSolution) {
  const Instance inst = testing::random_instance(3, 5, 77);
  AdmmConfig cfg;
  cfg.epsilon = 1e-8;
  const DistributedResult a = admm_solve(inst.problems, cfg);
  cfg.equilibrate = false;
  const DistributedResult b = admm_solve(inst.problems, cfg);
  ASSERT_TRUE(a.converged() && b.converged());
  for (int i = 0; i < 3; ++i) EXPECT_LT((a.u[i] - b.u[i]).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(AdmmSolve, RejectsNonPositiveRho) {
  const Instance inst = testing::toy_two();
  AdmmConfig cfg;
  cfg.rho = 0.0;
  EXPECT_THROW(admm_solve(inst.problems, cfg), std::invalid_argument);
}

}  // namespace
}  // namespace bdr
