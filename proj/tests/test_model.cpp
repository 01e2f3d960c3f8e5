#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "netinfer/model.hpp"
#include "netinfer/oracle.hpp"
#include "netinfer/sampler.hpp"
#include "test_support.hpp"

using namespace netinfer;
using netinfer::testing::chain_population;

TEST(Population, OverlapThroughSharedMember) {
  const Population pop = chain_population();
  EXPECT_EQ(pop.overlap_indicator(0, 2), 1);
  EXPECT_EQ(pop.overlap_pairs().size(), 3U);
}

TEST(Population, DisjointNeighborhoodsDoNotOverlap) {
  const Population pop({{0}, {1}});
  EXPECT_EQ(pop.overlap_indicator(0, 1), 0);
  EXPECT_TRUE(pop.overlap_pairs().empty());
}

TEST(Population, SingleSubpopulationOverlapsEverywhere) {
  const Population pop = make_subpopulation_neighborhoods(50);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      if (i != j) {
        EXPECT_EQ(pop.overlap_indicator(i, j), 1);
      }
    }
  }
  EXPECT_EQ(pop.overlap_pairs().size(), 50U * 49U / 2U);
}

TEST(Population, OverlapPairsMatchBruteForce) {
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Population pop = netinfer::testing::random_population(9, 0.15, g);
    std::size_t count = 0;
    for (int i = 0; i < 9; ++i) {
      for (int j = i + 1; j < 9; ++j) {
        bool any = false;
        for (int k : pop.neighborhood(i)) {
          for (int l : pop.neighborhood(j)) any = any || k == l;
        }
        EXPECT_EQ(pop.overlaps(i, j), any);
        count += any ? 1 : 0;
      }
    }
    EXPECT_EQ(pop.overlap_pairs().size(), count);
  }
}

TEST(Population, RejectsInvalidInput) {
  EXPECT_THROW(Population({{1}, {1}}), ValidationError);
  EXPECT_THROW(Population({{0, 5}, {1}}), ValidationError);
  const Population pop = chain_population();
  EXPECT_THROW((void)pop.overlap_indicator(0, 0), ValidationError);
  EXPECT_THROW((void)pop.overlap_indicator(0, 3), ValidationError);
  EXPECT_THROW((void)pop.overlap_indicator(-1, 1), ValidationError);
}

TEST(Network, UndirectedIsSymmetricAndRejectsSelfLoops) {
  Network z(4, false);
  z.set_edge(2, 1, true);
  EXPECT_TRUE(z.has_edge(1, 2));
  EXPECT_EQ(z.edge_count(), 1);
  EXPECT_THROW(z.set_edge(3, 3, true), ValidationError);
  ASSERT_EQ(z.edges().size(), 1U);
  EXPECT_EQ(z.edges()[0], std::make_pair(1, 2));
}

TEST(Network, DirectedKeepsTranspose) {
  Network z(3, true);
  z.set_edge(0, 2, true);
  EXPECT_FALSE(z.has_edge(2, 0));
  EXPECT_EQ(z.in_degree(2), 1);
  EXPECT_EQ(z.out_degree(0), 1);
}

TEST(TwoPath, ChainConfiguration) {
  const Population pop = chain_population();
  Network z(3, false);
  z.set_edge(0, 1, true);
  z.set_edge(1, 2, true);
  EXPECT_EQ(two_path_indicator(pop, z, 0, 2), 1);
  EXPECT_EQ(two_path_indicator(pop, Network(3, false), 0, 2), 0);
}

TEST(TwoPath, MatchesExhaustiveSearch) {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 50; ++trial) {
    const bool directed = trial % 2 == 1;
    const Population pop = netinfer::testing::random_population(6, 0.5, g);
    const Network z = netinfer::testing::random_network(6, directed, 0.5, g);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        if (i == j) continue;
        int expect = 0;
        for (int k = 0; k < 6; ++k) {
          if (k != i && k != j && pop.in_neighborhood(i, k) && pop.in_neighborhood(j, k) && z(i, k) && z(k, j)) expect = 1;
        }
        EXPECT_EQ(two_path_indicator(pop, z, i, j), expect);
      }
    }
  }
}

TEST(TransitiveChange, EmptyNetworkIsZero) {
  const Population pop = isolated_population(5);
  EXPECT_EQ(change_statistic_transitive(pop, Network(5, false), 0, 3), 0);
}

namespace {
int brute_change(const Population& pop, Network z, int i, int j) {
  z.set_edge(i, j, true);
  const int hi = oracle::brute_transitive_statistic(pop.neighborhoods(), oracle::to_matrix(z), z.directed());
  z.set_edge(i, j, false);
  const int lo = oracle::brute_transitive_statistic(pop.neighborhoods(), oracle::to_matrix(z), z.directed());
  return hi - lo;
}
}  // namespace

TEST(TransitiveChange, ChainConfigurationMatchesGlobalDifference) {
  const Population pop = chain_population();
  Network z(3, false);
  z.set_edge(0, 1, true);
  z.set_edge(1, 2, true);
  EXPECT_EQ(change_statistic_transitive(pop, z, 0, 2), brute_change(pop, z, 0, 2));
  // only the pair's own two-path through unit 2; 3 is outside N_1, so no other pair gains a witness
  EXPECT_EQ(change_statistic_transitive(pop, z, 0, 2), 1);
}

TEST(TransitiveChange, MatchesGlobalDifferenceOnRandomGraphs) {
  std::mt19937_64 g(17);
  for (int trial = 0; trial < 100; ++trial) {
    for (bool directed : {false, true}) {
      const int n = trial % 3 == 0 ? 8 : 6;
      const Population pop = netinfer::testing::random_population(n, 0.4, g);
      Network z = netinfer::testing::random_network(n, directed, 0.45, g);
      std::uniform_int_distribution<int> pick(0, n - 1);
      int i = pick(g);
      int j = pick(g);
      while (j == i) j = pick(g);
      if (trial % 2 == 0) z.set_edge(i, j, true);
      EXPECT_EQ(change_statistic_transitive(pop, z, i, j), brute_change(pop, z, i, j))
          << "trial " << trial << " directed " << directed;
    }
  }
}

TEST(Family, CumulantAndMean) {
  EXPECT_DOUBLE_EQ(mean(ResponseFamily::bernoulli(), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(mean(ResponseFamily::gaussian(2.0), -3.7), -3.7);
  EXPECT_DOUBLE_EQ(cumulant(ResponseFamily::poisson(), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(mean(ResponseFamily::poisson(), 0.0), 1.0);
  EXPECT_NEAR(cumulant(ResponseFamily::bernoulli(), 800.0), 800.0, 1e-12);
  EXPECT_NEAR(cumulant(ResponseFamily::bernoulli(), -800.0), 0.0, 1e-300);
  EXPECT_THROW((void)cumulant(ResponseFamily::poisson(), 400.0), NumericalError);
  EXPECT_THROW((void)ResponseFamily::gaussian(0.0), ValidationError);
}

TEST(Family, MeanIsDerivativeOfCumulant) {
  for (auto fam : {ResponseFamily::bernoulli(), ResponseFamily::poisson(), ResponseFamily::gaussian(1.0)}) {
    for (double eta : {-5.0, -1.3, -0.2, 0.4, 2.2, 6.0}) {
      const double h = 1e-5 * std::max(1.0, std::abs(eta));
      const double fd = (cumulant(fam, eta + h) - cumulant(fam, eta - h)) / (2.0 * h);
      EXPECT_NEAR(fd, mean(fam, eta), 1e-7 * std::abs(mean(fam, eta))) << family_name(fam.kind) << " " << eta;
    }
  }
}

TEST(Model, LayoutPutsNuisanceFirst) {
  const ModelSpec u = make_undirected_example(ResponseFamily::bernoulli(), 10);
  EXPECT_EQ(u.n_params(), 16);
  EXPECT_EQ(u.layout().n_nuisance, 10);
  EXPECT_EQ(u.layout().index_of("lambda"), 10);
  EXPECT_EQ(u.layout().index_of("gamma_yyz"), 15);
  const ModelSpec d = make_directed_application(10);
  EXPECT_EQ(d.layout().n_nuisance, 19);
  EXPECT_EQ(d.n_params(), 19 + 13);
  EXPECT_EQ(d.layout().index_of("alpha_y"), 19);
  EXPECT_EQ(d.layout().index_of("gamma_xyz"), 31);
  EXPECT_THROW((void)d.layout().index_of("alpha_in.10"), ValidationError);
}

TEST(Model, ResponseEtaHandExample) {
  const Population pop = chain_population();
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 3);
  Dataset d{Eigen::MatrixXd(3, 1), Eigen::VectorXd(3), Network(3, false)};
  d.covariates << 1, 0, 1;
  d.responses << 0, 1, 0;
  d.network.set_edge(0, 1, true);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(9);
  theta[4] = -2.0;
  theta[5] = 2.0;
  theta[7] = 0.1;
  theta[8] = 0.1;
  EXPECT_NEAR(eta_response(spec, pop, d, theta, 0), 0.1, 1e-15);
  // interaction weights zero: alpha_y + beta x_i
  theta[7] = theta[8] = 0.0;
  EXPECT_NEAR(eta_response(spec, pop, d, theta, 0), 0.0, 1e-15);
  EXPECT_NEAR(eta_response(spec, pop, d, theta, 1), -2.0, 1e-15);
}

TEST(Model, ConnectionEtaNonOverlapHandExample) {
  const int n = 100;
  const Population pop = isolated_population(n);
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), n);
  Dataset d{Eigen::MatrixXd::Zero(n, 1), Eigen::VectorXd::Zero(n), Network(n, false)};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n + 6);
  theta.head(n).setConstant(-1.4);
  theta[n] = 0.3;
  for (int k = n + 1; k < n + 6; ++k) theta[k] = 0.7;
  EXPECT_NEAR(eta_connection(spec, pop, d, theta, 3, 7), -2.8 - 0.3 * std::log(100.0), 1e-12);
  EXPECT_NEAR(eta_connection(spec, pop, d, theta, 3, 7), -4.18155, 1e-5);
  EXPECT_EQ(eta_connection(spec, pop, d, Eigen::VectorXd::Zero(n + 6), 3, 7), 0.0);
  EXPECT_THROW((void)eta_connection(spec, pop, d, theta, 3, 3), ValidationError);
  EXPECT_THROW((void)eta_connection(spec, pop, d, Eigen::VectorXd::Zero(5), 3, 4), ValidationError);
}

TEST(Model, ConnectionEtaOverlapAddsInteractions) {
  const Population pop = chain_population();
  const ModelSpec spec = make_undirected_example(ResponseFamily::gaussian(2.0), 3);
  Dataset d{Eigen::MatrixXd(3, 1), Eigen::VectorXd(3), Network(3, false)};
  d.covariates << 0.5, 1.0, 0.25;
  d.responses << 1.0, -2.0, 3.0;
  d.network.set_edge(0, 1, true);
  d.network.set_edge(1, 2, true);
  Eigen::VectorXd theta(9);
  theta << -1.0, -0.5, 0.2, 0.3, 0.1, 0.4, 0.7, -0.2, 0.05;
  const double y0 = 0.5;
  const double y2 = 1.5;
  const double delta = 1.0;
  const double expect = -1.0 + 0.2 + 0.7 * delta + (-0.2) * (0.5 * y2 + 0.25 * y0) + 0.05 * y0 * y2;
  EXPECT_NEAR(eta_connection(spec, pop, d, theta, 0, 2), expect, 1e-14);
}

TEST(Model, SufficientStatisticsOfEmptyState) {
  const Population pop = chain_population();
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 3);
  Dataset d{Eigen::MatrixXd::Ones(3, 1), Eigen::VectorXd::Zero(3), Network(3, false)};
  EXPECT_TRUE(sufficient_statistics(spec, pop, d).isZero(0.0));
}

TEST(Model, SufficientStatisticsChainHandCount) {
  const Population pop = chain_population();
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), 3);
  Dataset d{Eigen::MatrixXd(3, 1), Eigen::VectorXd(3), Network(3, false)};
  d.covariates << 1, 0, 1;
  d.responses << 1, 1, 0;
  d.network.set_edge(0, 1, true);
  d.network.set_edge(1, 2, true);
  d.network.set_edge(0, 2, true);
  Eigen::VectorXd expect(9);
  // degrees 2,2,2; no non-overlap pairs; alpha_y = 2; beta = 1; only (1,3) has a
  // witness inside N_1 ∩ N_3 = {2}; x_i y_j + x_j y_i summed = (1+0)+(0+1)+(0+1) = 3; y_i y_j = 1.
  expect << 2, 2, 2, 0, 2, 1, 1, 3, 1;
  EXPECT_TRUE(sufficient_statistics(spec, pop, d).isApprox(expect, 1e-15)) << sufficient_statistics(spec, pop, d).transpose();
}

TEST(Model, SufficientStatisticsMatchReference) {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 40; ++trial) {
    const bool directed = trial % 2 == 1;
    const int n = 5;
    const Population pop = netinfer::testing::random_population(n, 0.3, g);
    const ModelSpec spec = directed ? make_directed_application(n)
                                    : make_undirected_example(ResponseFamily::gaussian(1.5), n);
    Dataset d{netinfer::testing::random_covariates(n, directed ? 4 : 1, g),
              netinfer::testing::random_responses(spec.family(), n, g),
              netinfer::testing::random_network(n, directed, 0.5, g)};
    const Eigen::VectorXd ystar = d.responses / spec.family().psi;
    const Eigen::VectorXd ref = oracle::brute_statistics(spec.id(), pop.neighborhoods(), d.covariates, ystar,
                                                         oracle::to_matrix(d.network));
    EXPECT_TRUE(sufficient_statistics(spec, pop, d).isApprox(ref, 1e-13)) << "trial " << trial;
  }
}

// Change statistics and affine response coefficients must equal differences of
// the global statistic, for every term of both models.
TEST(Model, DesignsAreDifferencesOfGlobalStatistics) {
  std::mt19937_64 g(23);
  for (int trial = 0; trial < 30; ++trial) {
    const bool directed = trial % 2 == 1;
    const int n = 4 + trial % 5;
    const Population pop = netinfer::testing::random_population(n, 0.35, g);
    const ModelSpec spec = directed ? make_directed_application(n)
                                    : make_undirected_example(ResponseFamily::gaussian(0.7), n);
    Dataset d{netinfer::testing::random_covariates(n, directed ? 4 : 1, g),
              netinfer::testing::random_responses(spec.family(), n, g),
              netinfer::testing::random_network(n, directed, 0.5, g)};
    const Eigen::VectorXd ystar = scaled_responses(spec, d.responses);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        Dataset hi = d;
        Dataset lo = d;
        hi.network.set_edge(i, j, true);
        lo.network.set_edge(i, j, false);
        const ModelState s = make_state(pop, d, ystar);
        Contributions c;
        connection_design(spec, s, i, j, c);
        const Eigen::VectorXd diff = sufficient_statistics(spec, pop, hi) - sufficient_statistics(spec, pop, lo);
        EXPECT_TRUE(c.to_dense(spec.n_params()).isApprox(diff, 1e-12) || (diff.isZero(1e-12) && c.entries().empty()))
            << "pair " << i << "," << j << " trial " << trial;
      }
      Dataset at0 = d;
      at0.responses[i] = 0.0;
      const Eigen::VectorXd diff = sufficient_statistics(spec, pop, d) - sufficient_statistics(spec, pop, at0);
      const ModelState s = make_state(pop, d, ystar);
      Contributions c;
      response_design(spec, s, i, c);
      EXPECT_TRUE((c.to_dense(spec.n_params()) * ystar[i] - diff).isZero(1e-12)) << "unit " << i << " trial " << trial;
    }
  }
}

TEST(Model, ValidationRejectsMismatchedData) {
  const Population pop = chain_population();
  const ModelSpec spec = make_directed_application(3);
  Dataset d{Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(3), Network(3, true)};
  EXPECT_THROW(validate_dataset(spec, pop, d), ValidationError);  // needs four covariates
  d.covariates = Eigen::MatrixXd::Zero(3, 4);
  EXPECT_NO_THROW(validate_dataset(spec, pop, d));
  d.responses[1] = 0.5;
  EXPECT_THROW(validate_dataset(spec, pop, d), ValidationError);
  d.responses[1] = 1.0;
  d.network = Network(3, false);
  EXPECT_THROW(validate_dataset(spec, pop, d), ValidationError);
  EXPECT_THROW(make_model("nope", ResponseFamily::bernoulli(), 3), ValidationError);
  EXPECT_THROW(make_model(kDirectedApplicationId, ResponseFamily::poisson(), 3), ValidationError);
}
