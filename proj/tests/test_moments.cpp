#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hccrm/generator.hpp"
#include "hccrm/moments.hpp"
#include "support.hpp"

using namespace hccrm;
using hccrm::testing::summarize;

namespace {

struct Empirical {
  hccrm::testing::Summary interactions, edges, nodes;
};

Empirical replicate_counts(const GgpHyper& h, const CcrmHyper& c, const KernelParams& k, double T, int n,
                           std::uint64_t base, double eps = kDefaultSamplingEps) {
  std::vector<double> i, e, v;
  GeneratorOptions opt;
  opt.eps = eps;
  for (int r = 0; r < n; ++r) {
    const auto counts = network_counts(generate(h, c, k, T, base + static_cast<std::uint64_t>(r), opt));
    i.push_back(counts.interactions);
    e.push_back(counts.edges);
    v.push_back(counts.nodes);
  }
  return {summarize(i), summarize(e), summarize(v)};
}

}  // namespace

TEST(ExpectedInteractions, Examples) {
  const GgpHyper h{5.0, 0.0, 1.0};
  const auto c = CcrmHyper::uniform(1, 1.0, 1.0);
  EXPECT_NEAR(expected_interactions(h, c, {0.0, 2.0}, 10.0), 25.0 * 10.0, 1e-10);
  // 25 * (2*10 - (1 - e^-10)).
  EXPECT_NEAR(expected_interactions(h, c, {1.0, 2.0}, 10.0), 25.0 * (19.0 + std::exp(-10.0)), 1e-9);
  EXPECT_NEAR(expected_interactions(h, c, {1.0, 2.0}, 10.0), 475.0011, 1e-4);
  EXPECT_EQ(expected_interactions(h, c, {1.0, 2.0}, 0.0), 0.0);
  EXPECT_THROW(expected_interactions(h, c, {2.0, 2.0}, 10.0), std::invalid_argument);
}

TEST(ExpectedInteractions, MatchesGeneratedNetworks) {
  const GgpHyper h{5.0, 0.0, 1.0};
  const auto c = CcrmHyper::uniform(1, 1.0, 1.0);
  const KernelParams k{1.0, 2.0};
  const auto emp = replicate_counts(h, c, k, 10.0, 400, 1000, 1e-6);
  EXPECT_NEAR(emp.interactions.mean, expected_interactions(h, c, k, 10.0), 3.0 * emp.interactions.se);
}

TEST(ExpectedInteractions, MatchesGeneratedNetworksTwoCommunities) {
  const GgpHyper h{4.0, -0.5, 2.0};
  const CcrmHyper c{{0.5, 2.0}, {1.0, 3.0}};
  const KernelParams k{0.85, 3.0};
  const auto emp = replicate_counts(h, c, k, 8.0, 1500, 5000);
  EXPECT_NEAR(emp.interactions.mean, expected_interactions(h, c, k, 8.0), 3.0 * emp.interactions.se);
}

TEST(ExpectedEdgesNodes, ZeroHorizon) {
  const GgpHyper h{3.0, 0.2, 1.0};
  const auto c = CcrmHyper::uniform(2, 1.0, 1.0);
  EXPECT_EQ(expected_edges(h, c, 0.0).value, 0.0);
  EXPECT_EQ(expected_nodes(h, c, 0.0).value, 0.0);
  EXPECT_EQ(expected_edges(h, CcrmHyper::uniform(1, 1.0, 1.0), 0.0).value, 0.0);
}

TEST(ExpectedEdges, AlphaDoublingQuadruples) {
  const auto c = CcrmHyper::uniform(1, 1.0, 1.0);
  for (double sigma : {-0.5, 0.0, 0.4}) {
    const double e1 = expected_edges({1.5, sigma, 1.0}, c, 4.0).value;
    const double e2 = expected_edges({3.0, sigma, 1.0}, c, 4.0).value;
    EXPECT_NEAR(e2 / e1, 4.0, 1e-12);
  }
}

TEST(ExpectedEdgesNodes, SmallInstanceMatchesGenerator) {
  // sigma < 0 makes the generator exact (no truncation).
  const GgpHyper h{3.0, -0.5, 1.0};
  const auto c = CcrmHyper::uniform(1, 1.0, 1.0);
  const auto emp = replicate_counts(h, c, {1.0, 2.0}, 5.0, 2000, 77);
  const auto e = expected_edges(h, c, 5.0);
  const auto v = expected_nodes(h, c, 5.0);
  EXPECT_EQ(e.method, MomentMethod::quadrature);
  EXPECT_NEAR(emp.edges.mean, e.value, 3.0 * emp.edges.se);
  EXPECT_NEAR(emp.nodes.mean, v.value, 3.0 * emp.nodes.se);
}

TEST(ExpectedEdgesNodes, TwoCommunitiesMatchGenerator) {
  const GgpHyper h{4.0, -0.5, 1.0};
  const CcrmHyper c{{1.0, 0.5}, {1.0, 2.0}};
  MomentOptions opt;
  opt.samples = 40000;
  const auto e = expected_edges(h, c, 6.0, opt);
  const auto v = expected_nodes(h, c, 6.0, opt);
  EXPECT_EQ(e.method, MomentMethod::monte_carlo);
  const auto emp = replicate_counts(h, c, {0.5, 2.0}, 6.0, 2000, 313);
  EXPECT_NEAR(emp.edges.mean, e.value, 3.0 * std::hypot(emp.edges.se, e.stderr_));
  EXPECT_NEAR(emp.nodes.mean, v.value, 3.0 * std::hypot(emp.nodes.se, v.stderr_));
}

TEST(ExpectedEdgesNodes, QuadratureAgreesWithMonteCarlo) {
  MomentOptions mc;
  mc.method = MomentMethod::monte_carlo;
  mc.samples = 40000;
  mc.seed = 19;
  for (const GgpHyper& h : {GgpHyper{3.0, -0.5, 1.0}, GgpHyper{2.0, 0.0, 1.0}, GgpHyper{2.0, 0.5, 2.0}}) {
    for (const auto& c : {CcrmHyper::uniform(1, 1.0, 1.0), CcrmHyper::uniform(1, 0.3, 2.0)}) {
      const auto eq = expected_edges(h, c, 5.0);
      const auto em = expected_edges(h, c, 5.0, mc);
      EXPECT_NEAR(eq.value, em.value, 3.0 * em.stderr_ + em.truncation_bound) << "sigma=" << h.sigma;
      const auto vq = expected_nodes(h, c, 5.0);
      const auto vm = expected_nodes(h, c, 5.0, mc);
      EXPECT_NEAR(vq.value, vm.value, 3.0 * vm.stderr_ + vm.truncation_bound) << "sigma=" << h.sigma;
    }
  }
}

TEST(ExpectedEdgesNodes, EdgesMatchDirectDoubleIntegral) {
  // Nested Simpson oracle with a = b = 1: psi(t) = int (1 - 1/(1 + t w)) rho0(dw),
  // then E[E] = alpha^2/2 int int psi(2T w0 beta) e^(-beta) dbeta rho0(dw0).
  const double alpha = 3.0, T = 5.0;
  auto rho0 = [](double w) { return std::pow(w, -0.5) * std::exp(-w) / std::tgamma(1.5); };
  auto psi = [&](double t) {
    return hccrm::testing::simpson_log([&](double w) { return (1.0 - 1.0 / (1.0 + t * w)) * rho0(w); }, 1e-14, 60.0, 4000);
  };
  auto inner = [&](double w0) {
    return hccrm::testing::simpson([&](double b) { return psi(2.0 * T * w0 * b) * std::exp(-b); }, 0.0, 40.0, 400);
  };
  const double oracle = 0.5 * alpha * alpha * hccrm::testing::simpson_log([&](double w0) { return inner(w0) * rho0(w0); }, 1e-12, 50.0, 200);
  const double value = expected_edges({alpha, -0.5, 1.0}, CcrmHyper::uniform(1, 1.0, 1.0), T).value;
  EXPECT_NEAR(value / oracle, 1.0, 2e-3);
}

TEST(ExpectedNodes, LinearInAlphaWhenFiniteActivity) {
  const auto c = CcrmHyper::uniform(1, 1.0, 1.0);
  std::vector<double> la, lv;
  for (double alpha : {2.0, 4.0, 8.0, 16.0}) {
    la.push_back(std::log(alpha));
    lv.push_back(std::log(expected_nodes({alpha, -0.5, 1.0}, c, 200.0).value));
  }
  // The approach to alpha * total mass is slow (deficit ~ alpha^(-1/2)), hence the long horizon.
  EXPECT_NEAR(fit_slope(la, lv).slope, 1.0, 0.1);
}

TEST(Moments, MonotoneInAlphaAndHorizon) {
  const auto c = CcrmHyper::uniform(1, 0.5, 1.0);
  const KernelParams k{0.5, 1.0};
  for (double sigma : {-0.5, 0.3}) {
    double prev_i = -1.0, prev_e = -1.0, prev_v = -1.0;
    for (double alpha : {0.5, 2.0, 4.0}) {
      const GgpHyper h{alpha, sigma, 1.0};
      const double i = expected_interactions(h, c, k, 3.0);
      const double e = expected_edges(h, c, 3.0).value;
      const double v = expected_nodes(h, c, 3.0).value;
      EXPECT_GT(i, prev_i);
      EXPECT_GT(e, prev_e);
      EXPECT_GT(v, prev_v);
      prev_i = i, prev_e = e, prev_v = v;
    }
    prev_i = prev_e = prev_v = -1.0;
    for (double T : {0.5, 2.0, 8.0}) {
      const GgpHyper h{2.0, sigma, 1.0};
      const double i = expected_interactions(h, c, k, T);
      const double e = expected_edges(h, c, T).value;
      const double v = expected_nodes(h, c, T).value;
      EXPECT_GT(i, prev_i);
      EXPECT_GT(e, prev_e);
      EXPECT_GT(v, prev_v);
      prev_i = i, prev_e = e, prev_v = v;
    }
  }
}

TEST(FitSlope, ExactLineAndDegenerateGrid) {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, y{1.0, 3.0, 5.0, 7.0};
  const auto f = fit_slope(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.ci_low, 2.0, 1e-12);
  const std::vector<double> flat{1.0, 1.0};
  EXPECT_THROW(fit_slope(flat, flat), std::invalid_argument);
}

TEST(Sparsity, FiniteActivityIsDense) {
  const std::vector<double> grid{4.0, 8.0, 16.0, 32.0};
  const auto r = sparsity_diagnostic({1.0, -0.5, 1.0}, CcrmHyper::uniform(1, 1.0, 1.0), {0.0, 1.0}, 200.0,
                                     GridAxis::alpha, grid, 6, 3);
  EXPECT_TRUE(r.dense) << "slope " << r.edges_vs_nodes.slope;
  EXPECT_NEAR(r.edges_vs_nodes.slope, 2.0, 0.25);
}

TEST(Sparsity, InfiniteActivityIsSparse) {
  const std::vector<double> grid{2.0, 4.0, 8.0, 16.0, 32.0};
  GeneratorOptions gen;
  gen.eps = 1e-4;
  const auto r = sparsity_diagnostic({1.0, 0.5, 1.0}, CcrmHyper::uniform(1, 1.0, 1.0), {0.0, 1.0}, 1.0,
                                     GridAxis::alpha, grid, 4, 5, gen);
  EXPECT_FALSE(r.dense) << "slope " << r.edges_vs_nodes.slope << " ci_high " << r.edges_vs_nodes.ci_high;
  EXPECT_LT(r.edges_vs_nodes.ci_high, 2.0);
}

TEST(Sparsity, InteractionsLinearInHorizon) {
  const std::vector<double> grid{5.0, 10.0, 20.0, 40.0};
  const auto r = sparsity_diagnostic({10.0, -0.5, 1.0}, CcrmHyper::uniform(1, 1.0, 1.0), {0.5, 2.0}, 1.0,
                                     GridAxis::horizon, grid, 200, 9);
  EXPECT_NEAR(r.interactions_vs_grid.slope, 1.0, 0.1);
}

TEST(Sparsity, RejectsDegenerateGrids) {
  const std::vector<double> one{2.0}, unsorted{4.0, 2.0};
  const GgpHyper h{1.0, -0.5, 1.0};
  const auto c = CcrmHyper::uniform(1, 1.0, 1.0);
  EXPECT_THROW(sparsity_diagnostic(h, c, {0.0, 1.0}, 1.0, GridAxis::alpha, one, 2, 1), std::invalid_argument);
  EXPECT_THROW(sparsity_diagnostic(h, c, {0.0, 1.0}, 1.0, GridAxis::alpha, unsorted, 2, 1), std::invalid_argument);
}
