#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "netinfer/model.hpp"
#include "netinfer/oracle.hpp"
#include "test_support.hpp"

using namespace netinfer;
using netinfer::testing::chain_population;

namespace {
Eigen::MatrixXd chain_covariates() {
  Eigen::MatrixXd x(3, 1);
  x << 1, 0, 1;
  return x;
}
}  // namespace

TEST(Enumeration, ProbabilitiesSumToOne) {
  std::mt19937_64 g(1);
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 4);
  const Population pop = netinfer::testing::random_population(4, 0.4, g);
  const Eigen::MatrixXd x = netinfer::testing::random_covariates(4, 1, g);
  const auto e = oracle::enumerate_joint(spec, pop, x, netinfer::testing::random_theta(spec.n_params(), 1.0, g));
  double tot = 0.0;
  for (std::uint32_t s = 0; s < e.states(); ++s) tot += e.probability(s);
  EXPECT_NEAR(tot, 1.0, 1e-12);
  EXPECT_EQ(e.bits(), 10);
}

TEST(Enumeration, ZeroThetaIsUniform) {
  const ModelSpec spec = make_directed_application(3);
  const Population pop = chain_population();
  const auto e = oracle::enumerate_joint(spec, pop, Eigen::MatrixXd::Zero(3, 4), Eigen::VectorXd::Zero(spec.n_params()));
  EXPECT_EQ(e.bits(), 9);
  for (std::uint32_t s = 0; s < e.states(); ++s) EXPECT_NEAR(e.probability(s), 1.0 / 512.0, 1e-15);
}

TEST(Enumeration, RejectsLargeOrNonBernoulliModels) {
  const Population pop = isolated_population(7);
  EXPECT_THROW(oracle::enumerate_joint(make_undirected_example(ResponseFamily::bernoulli(), 7), pop,
                                       Eigen::MatrixXd::Zero(7, 1), Eigen::VectorXd::Zero(13)),
               ValidationError);
  const Population small = chain_population();
  EXPECT_THROW(oracle::enumerate_joint(make_undirected_example(ResponseFamily::poisson(), 3), small,
                                       Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(9)),
               ValidationError);
}

TEST(Enumeration, EncodeDecodeRoundTrip) {
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 4);
  const auto e = oracle::enumerate_joint(spec, isolated_population(4), Eigen::MatrixXd::Zero(4, 1),
                                         Eigen::VectorXd::Zero(10));
  for (std::uint32_t s = 0; s < e.states(); s += 37) {
    const ChainState st = e.decode(s);
    EXPECT_EQ(e.encode(st.y, st.z), s);
  }
}

// Hand expansion of the joint on one state pair of the chain layout.
TEST(Enumeration, HandExpandedLogOdds) {
  const Population pop = chain_population();
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 3);
  Eigen::VectorXd theta(9);
  theta << -0.4, 0.3, -0.8, 0.5, -1.1, 0.9, 0.6, -0.35, 0.45;
  const auto e = oracle::enumerate_joint(spec, pop, chain_covariates(), theta);
  Eigen::VectorXd y(3);
  y << 1, 0, 1;
  Network z(3, false);
  z.set_edge(0, 1, true);
  z.set_edge(1, 2, true);
  const std::uint32_t s = e.encode(y, z);
  // z_13 (slot 1): alpha_1 + alpha_3 + gamma_zz * 1 + gamma_xyz (x1 y3 + x3 y1) + gamma_yyz y1 y3
  const double z13 = -0.4 - 0.8 + 0.6 * 1.0 - 0.35 * (1.0 + 1.0) + 0.45 * 1.0;
  EXPECT_NEAR(oracle::exact_log_odds(e, 3 + 1, s), z13, 1e-12);
  // y_2 (bit 1): alpha_y + beta x2 + gamma_xyz (x1 z12 + x3 z23) + gamma_yyz (y1 z12 + y3 z23)
  const double y2 = -1.1 + 0.0 - 0.35 * 2.0 + 0.45 * 2.0;
  EXPECT_NEAR(oracle::exact_log_odds(e, 1, s), y2, 1e-12);
}

TEST(Enumeration, ReciprocityEntersWithFullWeight) {
  const ModelSpec spec = make_directed_application(3);
  const Population pop = isolated_population(3);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(spec.n_params());
  theta[spec.layout().index_of("gamma_zz.1")] = 1.0;
  const auto e = oracle::enumerate_joint(spec, pop, Eigen::MatrixXd::Zero(3, 4), theta);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
  Network z(3, true);
  z.set_edge(1, 0, true);
  // slot of (0,1) is 0; the mutual dyad adds z01 z10 / 2 twice to the joint exponent
  EXPECT_NEAR(oracle::exact_log_odds(e, 3 + 0, e.encode(y, z)), 1.0, 1e-14);
  Dataset d{Eigen::MatrixXd::Zero(3, 4), y, z};
  EXPECT_NEAR(eta_connection(spec, pop, d, theta, 0, 1), 1.0, 1e-14);
}

TEST(Enumeration, ConditionalsMatchModelLinearPredictors) {
  std::mt19937_64 g(99);
  for (int trial = 0; trial < 20; ++trial) {
    const bool directed = trial % 2 == 1;
    const int n = directed ? 3 : 4;
    const ModelSpec spec = directed ? make_directed_application(n) : make_undirected_example(ResponseFamily::bernoulli(), n);
    const Population pop = netinfer::testing::random_population(n, 0.4, g);
    const Eigen::MatrixXd x = netinfer::testing::random_covariates(n, directed ? 4 : 1, g);
    const Eigen::VectorXd theta = netinfer::testing::random_theta(spec.n_params(), 1.5, g);
    const auto e = oracle::enumerate_joint(spec, pop, x, theta);
    std::uniform_int_distribution<std::uint32_t> pick(0, e.states() - 1);
    for (int rep = 0; rep < 5; ++rep) {
      const std::uint32_t s = pick(g);
      const ChainState st = e.decode(s);
      const Dataset d{x, st.y, st.z};
      for (int i = 0; i < n; ++i) {
        EXPECT_NEAR(oracle::exact_log_odds(e, i, s), eta_response(spec, pop, d, theta, i), 1e-12);
      }
      for (std::size_t k = 0; k < e.slots.size(); ++k) {
        auto [i, j] = e.slots[k];
        EXPECT_NEAR(oracle::exact_log_odds(e, n + static_cast<int>(k), s), eta_connection(spec, pop, d, theta, i, j), 1e-12);
      }
    }
  }
}

TEST(Enumeration, ConditionalsSumToOne) {
  std::mt19937_64 g(8);
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 3);
  const auto e = oracle::enumerate_joint(spec, chain_population(), chain_covariates(),
                                         netinfer::testing::random_theta(9, 1.0, g));
  for (std::uint32_t s = 0; s < e.states(); ++s) {
    for (int c = 0; c < e.bits(); ++c) {
      const double p1 = oracle::exact_conditional(e, c, s);
      const double p0 = oracle::exact_conditional(e, c, s ^ (std::uint32_t{1} << c));
      EXPECT_NEAR(p1 + (1.0 - p0), 1.0 + (p1 - p0), 1e-15);
      EXPECT_GE(p1, 0.0);
      EXPECT_LE(p1, 1.0);
    }
  }
}

TEST(Enumeration, IndependenceSubmodelConditionalIgnoresRest) {
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 3);
  Eigen::VectorXd theta(9);
  theta << -0.5, 0.2, 0.1, 0.4, 0.3, -0.7, 0.0, 0.0, 0.0;
  const auto e = oracle::enumerate_joint(spec, chain_population(), chain_covariates(), theta);
  for (int c = 0; c < e.bits(); ++c) {
    const double ref = oracle::exact_conditional(e, c, 0);
    for (std::uint32_t s = 0; s < e.states(); ++s) EXPECT_NEAR(oracle::exact_conditional(e, c, s), ref, 1e-14);
  }
}

TEST(Enumeration, LogNormalizerIsConvex) {
  std::mt19937_64 g(4);
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 3);
  const Population pop = chain_population();
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd a = netinfer::testing::random_theta(9, 2.0, g);
    const Eigen::VectorXd b = netinfer::testing::random_theta(9, 2.0, g);
    const double t = std::uniform_real_distribution<double>(0.0, 1.0)(g);
    const double la = oracle::enumerate_joint(spec, pop, chain_covariates(), a).log_phi;
    const double lb = oracle::enumerate_joint(spec, pop, chain_covariates(), b).log_phi;
    const double lm = oracle::enumerate_joint(spec, pop, chain_covariates(), t * a + (1 - t) * b).log_phi;
    EXPECT_LE(lm, t * la + (1 - t) * lb + 1e-10);
  }
}

TEST(GaussianConditional, NoSpilloverGivesIndependentResponses) {
  const Population pop = chain_population();
  Network z(3, false);
  z.set_edge(0, 1, true);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(9);
  theta[4] = 0.5;
  theta[5] = 2.0;
  const auto gc = oracle::gaussian_conditional_params(pop, chain_covariates(), z, theta, 1.7);
  EXPECT_TRUE(gc.mean.isApprox(Eigen::Vector3d(2.5, 0.5, 2.5), 1e-14));
  EXPECT_TRUE(gc.cov.isApprox(1.7 * Eigen::Matrix3d::Identity(), 1e-14));
}

TEST(GaussianConditional, TwoUnitInverse) {
  const Population pop = complete_population(2);
  Network z(2, false);
  z.set_edge(0, 1, true);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(8);
  theta[7] = 0.5;
  const auto gc = oracle::gaussian_conditional_params(pop, Eigen::MatrixXd::Zero(2, 1), z, theta, 1.0);
  Eigen::Matrix2d expect;
  expect << 4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0;
  EXPECT_TRUE(gc.cov.isApprox(expect, 1e-14));
}

TEST(GaussianConditional, RejectsIndefiniteSystem) {
  const Population pop = complete_population(2);
  Network z(2, false);
  z.set_edge(0, 1, true);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(8);
  theta[7] = 1.5;
  EXPECT_THROW(oracle::gaussian_conditional_params(pop, Eigen::MatrixXd::Zero(2, 1), z, theta, 1.0), ValidationError);
}

TEST(FiniteDifferences, LinearAndQuadratic) {
  Eigen::Vector3d a(1.5, -2.0, 0.25);
  auto lin = [&](const Eigen::VectorXd& t) { return a.dot(t) + 3.0; };
  const Eigen::Vector3d t0(0.3, -4.0, 12.0);
  EXPECT_TRUE(oracle::fd_gradient(lin, t0).isApprox(a, 1e-9));
  EXPECT_TRUE(oracle::fd_hessian(lin, t0).isZero(1e-6));
  Eigen::Matrix3d Q;
  Q << 2, 0.5, -1, 0.5, 3, 0.2, -1, 0.2, 1;
  auto quad = [&](const Eigen::VectorXd& t) { return 0.5 * t.dot(Q * t) + a.dot(t); };
  EXPECT_TRUE(oracle::fd_hessian(quad, t0).isApprox(Q, 1e-6));
  auto grad = [&](const Eigen::VectorXd& t) -> Eigen::VectorXd { return Q * t + a; };
  EXPECT_TRUE(oracle::fd_jacobian(grad, t0).isApprox(Q, 1e-9));
  auto expo = [](const Eigen::VectorXd& t) -> Eigen::VectorXd { return t.array().exp().matrix(); };
  const Eigen::Vector3d t1(0.5, -1.0, 2.0);
  const Eigen::MatrixXd exact = t1.array().exp().matrix().asDiagonal();
  const double plain = (oracle::fd_jacobian(expo, t1, 1e-2) - exact).cwiseAbs().maxCoeff();
  const double extrapolated = (oracle::fd_jacobian_richardson(expo, t1, 1e-2) - exact).cwiseAbs().maxCoeff();
  EXPECT_LT(extrapolated, 1e-3 * plain);
  auto bad = [](const Eigen::VectorXd&) { return std::nan(""); };
  EXPECT_THROW(oracle::fd_gradient(bad, t0), NumericalError);
}
