#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "netinfer/glm.hpp"
#include "netinfer/inference.hpp"
#include "netinfer/optimizer.hpp"
#include "netinfer/oracle.hpp"
#include "test_support.hpp"

using namespace netinfer;

namespace {

/// Responses on (1, x) only: every conditional is independent of the rest.
ModelSpec responses_only(int n) {
  ModelSpec m("responses-only", ResponseFamily::bernoulli(), false, n);
  m.add(std::make_shared<terms::ResponseIntercept>("alpha_y"));
  m.add(std::make_shared<terms::ResponseSlope>(0, "beta_xy"));
  m.set_required_covariates(1);
  return m;
}

}  // namespace

TEST(Intervals, NormalQuantileAndDegenerateCase) {
  const auto iv = confidence_intervals(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 0.95);
  EXPECT_NEAR(iv[0].lo, -1.959964, 1e-6);
  EXPECT_NEAR(iv[0].hi, 1.959964, 1e-6);
  const auto point = confidence_intervals(Eigen::VectorXd::Zero(2), Eigen::Vector2d(0.3, -1.0), 0.9);
  EXPECT_EQ(point[1].lo, -1.0);
  EXPECT_EQ(point[1].hi, -1.0);
  EXPECT_TRUE(point[0].contains(0.3));
}

TEST(Intervals, WidenWithLevel) {
  const Eigen::VectorXd se = Eigen::Vector3d(0.5, 1.0, 2.0);
  const Eigen::VectorXd th = Eigen::Vector3d(1.0, -1.0, 0.0);
  double prev = 0.0;
  for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    const auto iv = confidence_intervals(se, th, level);
    EXPECT_GT(iv[2].hi - iv[2].lo, prev);
    prev = iv[2].hi - iv[2].lo;
  }
  EXPECT_THROW(confidence_intervals(se, th, 1.0), ValidationError);
  EXPECT_THROW(confidence_intervals(se, th, 0.0), ValidationError);
  EXPECT_THROW(confidence_intervals(Eigen::VectorXd::Ones(2), th, 0.9), ValidationError);
}

TEST(Sandwich, IdentityBlocksAndRidge) {
  const CovEstimate c = sandwich_from(2.0 * Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3), 10);
  EXPECT_TRUE(c.sandwich.isApprox(0.25 * Eigen::MatrixXd::Identity(3, 3), 1e-15));
  EXPECT_FALSE(c.ridge_used);
  EXPECT_NEAR(c.se[1], 0.5, 1e-15);
  Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(2, 2);
  const CovEstimate r = sandwich_from(singular, Eigen::MatrixXd::Identity(2, 2), 10);
  EXPECT_TRUE(r.ridge_used);
  EXPECT_TRUE(r.sandwich.isApprox(r.sandwich.transpose(), 0.0));
  EXPECT_GE(r.se.minCoeff(), 0.0);
}

TEST(Sandwich, SampleCovarianceMatchesDefinition) {
  Eigen::MatrixXd g(3, 2);
  g << 1, 2, 3, 4, 5, 9;
  const Eigen::MatrixXd c = sample_covariance(g);
  EXPECT_NEAR(c(0, 0), 4.0, 1e-14);
  EXPECT_NEAR(c(0, 1), 7.0, 1e-14);
  EXPECT_NEAR(c(1, 1), 13.0, 1e-13);
  EXPECT_THROW(sample_covariance(g.topRows(1)), ValidationError);
}

TEST(Godambe, IndependenceSubmodelMatchesGlmInformation) {
  const int n = 200;
  const ModelSpec spec = responses_only(n);
  const Population pop = isolated_population(n);
  CounterRng rng(8);
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform();
  GibbsConfig gc;
  gc.burn_in = 5;
  gc.seed = 2;
  const Dataset d = simulate(spec, pop, x, Eigen::Vector2d(-0.5, 1.5), gc, 1).front();
  const FitResult fr = fit(spec, pop, d, Eigen::VectorXd());
  ASSERT_TRUE(fr.converged);
  GodambeOptions go;
  go.draws = 1000;
  go.seed = 4;
  const CovEstimate cov = godambe_cov(spec, pop, d, fr.theta_hat, go);
  Eigen::MatrixXd X(n, 2);
  X.col(0).setOnes();
  X.col(1) = x.col(0);
  const GlmFit g = fit_glm(X, d.responses, spec.family());
  EXPECT_LT((fr.theta_hat - g.coef).cwiseAbs().maxCoeff(), 1e-6);
  const Eigen::MatrixXd inv_info = g.information.inverse();
  for (int k = 0; k < 2; ++k) {
    EXPECT_LT(std::abs(cov.sandwich(k, k) / inv_info(k, k) - 1.0), 0.10) << k;
  }
  EXPECT_TRUE(cov.neg_hessian.isApprox(g.information, 1e-8));
}

TEST(Godambe, GradientCovarianceMatchesEnumeration) {
  std::mt19937_64 g(5);
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 3);
  const Population pop = netinfer::testing::chain_population();
  const Eigen::MatrixXd x = netinfer::testing::random_covariates(3, 1, g);
  const Eigen::VectorXd theta = netinfer::testing::random_theta(spec.n_params(), 0.8, g);
  const auto e = oracle::enumerate_joint(spec, pop, x, theta);
  const int p = spec.n_params();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(p, p);
  for (std::uint32_t s = 0; s < e.states(); ++s) {
    const ChainState st = e.decode(s);
    const Eigen::VectorXd grad = gradient(spec, pop, Dataset{x, st.y, st.z}, theta);
    mean += e.probability(s) * grad;
    second += e.probability(s) * grad * grad.transpose();
  }
  // the pseudo-likelihood score has mean zero under the model
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd exact = second - mean * mean.transpose();
  Eigen::VectorXd fourth = Eigen::VectorXd::Zero(p);
  for (std::uint32_t s = 0; s < e.states(); ++s) {
    const ChainState st = e.decode(s);
    const Eigen::VectorXd c = gradient(spec, pop, Dataset{x, st.y, st.z}, theta) - mean;
    fourth += e.probability(s) * c.array().pow(4).matrix();
  }

  const ChainState start = e.decode(0);
  GodambeOptions go;
  go.draws = 40000;
  go.thin = 10;
  go.burn_in = 100;
  go.seed = 6;
  const CovEstimate cov = godambe_cov(spec, pop, Dataset{x, start.y, start.z}, theta, go);
  for (int k = 0; k < p; ++k) {
    const double mc_se = std::sqrt((fourth[k] - exact(k, k) * exact(k, k)) / go.draws);
    EXPECT_NEAR(cov.gradient_cov(k, k), exact(k, k), 5.0 * mc_se + 1e-12) << spec.layout().names[k];
  }
}

TEST(Godambe, DoublingDrawsIsStable) {
  const int n = 100;
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), n);
  const Population pop = make_subpopulation_neighborhoods(n);
  CounterRng rng(9);
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform();
  Eigen::VectorXd theta(n + 6);
  theta.head(n).setConstant(-0.8);
  theta.tail(6) << 0.3, -1.0, 1.0, 0.2, 0.1, 0.1;
  GibbsConfig gc;
  gc.burn_in = 300;
  gc.seed = 10;
  const Dataset d = simulate(spec, pop, x, theta, gc, 1).front();
  GodambeOptions go;
  go.draws = 200;
  go.seed = 1;
  const CovEstimate a = godambe_cov(spec, pop, d, theta, go);
  go.draws = 400;
  go.seed = 2;
  const CovEstimate b = godambe_cov(spec, pop, d, theta, go);
  for (int k = n; k < n + 6; ++k) {
    EXPECT_LT(std::abs(b.se[k] / a.se[k] - 1.0), 4.0 * std::sqrt(1.0 / (2.0 * 200))) << k;
  }
  go.draws = 200;
  go.seed = 1;
  const CovEstimate again = godambe_cov(spec, pop, d, theta, go);
  EXPECT_EQ(again.sandwich, a.sandwich);
  go.threads = 3;
  const CovEstimate threaded = godambe_cov(spec, pop, d, theta, go);
  EXPECT_EQ(threaded.sandwich, a.sandwich);
}

TEST(Godambe, IndependentChainsAgreeWithSingleChain) {
  const int n = 40;
  const ModelSpec spec = responses_only(n);
  const Population pop = isolated_population(n);
  CounterRng rng(12);
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform();
  const Dataset d{x, Eigen::VectorXd::Zero(n), Network(n, false)};
  const Eigen::VectorXd theta = Eigen::Vector2d(0.2, -0.4);
  GodambeOptions go;
  go.draws = 3000;
  go.burn_in = 3;
  go.independent_chains = true;
  const CovEstimate ind = godambe_cov(spec, pop, d, theta, go);
  go.independent_chains = false;
  go.burn_in = 10;
  go.thin = 1;
  const CovEstimate one = godambe_cov(spec, pop, d, theta, go);
  EXPECT_LT((ind.gradient_cov - one.gradient_cov).cwiseAbs().maxCoeff(), 0.1 * one.gradient_cov.cwiseAbs().maxCoeff());
}

TEST(Godambe, RejectsBadInput) {
  const ModelSpec spec = responses_only(5);
  const Population pop = isolated_population(5);
  const Dataset d{Eigen::MatrixXd::Zero(5, 1), Eigen::VectorXd::Zero(5), Network(5, false)};
  GodambeOptions go;
  go.draws = 1;
  EXPECT_THROW(godambe_cov(spec, pop, d, Eigen::VectorXd::Zero(2), go), ValidationError);
  go.draws = 10;
  EXPECT_THROW(godambe_cov(spec, pop, d, Eigen::VectorXd::Zero(3), go), ValidationError);
}

TEST(Godambe, NaiveCovarianceIsInverseHessian) {
  Eigen::MatrixXd H(2, 2);
  H << 4, 1, 1, 3;
  EXPECT_TRUE((naive_covariance(H) * H).isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-14));
}
