#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hccrm/hawkes_pair.hpp"
#include "support.hpp"

using namespace hccrm;
using hccrm::testing::naive_direction_loglik;
using hccrm::testing::summarize;

namespace {

std::vector<double> sorted_uniform(std::mt19937_64& rng, std::size_t n, double T) {
  std::uniform_real_distribution<double> u(0.0, T);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(IntensityAt, Examples) {
  const PairHistory empty({}, {}, 10.0);
  EXPECT_DOUBLE_EQ(intensity_at(0.5, empty, Direction::forward, 0.25, {1.0, 2.0}), 0.25);

  const PairHistory one({}, {1.0}, 10.0);
  EXPECT_NEAR(intensity_at(2.0, one, Direction::forward, 0.25, {1.0, 2.0}), 0.25 + std::exp(-2.0), 1e-15);
  EXPECT_NEAR(intensity_at(2.0, one, Direction::forward, 0.25, {1.0, 2.0}), 0.38534, 1e-5);
  // The opposite direction is not excited by its own events.
  EXPECT_DOUBLE_EQ(intensity_at(2.0, one, Direction::backward, 0.25, {1.0, 2.0}), 0.25);

  std::mt19937_64 rng(4);
  const PairHistory busy(sorted_uniform(rng, 50, 10.0), sorted_uniform(rng, 50, 10.0), 10.0);
  for (double t : {0.0, 1.3, 7.7, 10.0}) {
    EXPECT_DOUBLE_EQ(intensity_at(t, busy, Direction::forward, 0.7, {0.0, 2.0}), 0.7);
  }
}

TEST(IntensityAt, RejectsTimeOutsideWindow) {
  const PairHistory h({1.0}, {}, 5.0);
  EXPECT_THROW(intensity_at(-0.1, h, Direction::forward, 1.0, {0.5, 1.0}), std::invalid_argument);
  EXPECT_THROW(intensity_at(5.1, h, Direction::forward, 1.0, {0.5, 1.0}), std::invalid_argument);
}

TEST(IntensityAt, JumpOfSizeEtaAtOppositeEvents) {
  const KernelParams k{0.8, 1.5};
  const PairHistory h({0.5, 2.0}, {1.0, 3.0}, 5.0);
  for (double u : h.backward()) {
    const double at = intensity_at(u, h, Direction::forward, 0.3, k);
    const double after = intensity_at(std::nextafter(u, 10.0), h, Direction::forward, 0.3, k);
    // Left-continuous at the event itself, jump of eta just after.
    EXPECT_NEAR(after - at, k.eta, 1e-12);
    const double before = intensity_at(u - 1e-9, h, Direction::forward, 0.3, k);
    EXPECT_NEAR(at, before, 1e-8);
  }
}

TEST(Compensator, Examples) {
  const PairHistory empty({}, {}, 10.0);
  EXPECT_DOUBLE_EQ(compensator(empty, Direction::forward, 0.25, {1.0, 2.0}, 10.0), 2.5);

  const PairHistory one({}, {0.0}, 60.0);
  EXPECT_NEAR(compensator(one, Direction::forward, 0.0, {1.0, 2.0}, 50.0), 0.5, 1e-10);
  // Independent oracle: Simpson on the intensity (the event at 0 counts for t > 0).
  const double oracle = hccrm::testing::simpson(
      [](double t) { return t > 0.0 ? std::exp(-2.0 * t) : 1.0; }, 0.0, 50.0, 200000);
  EXPECT_NEAR(oracle, 0.5, 1e-10);

  std::mt19937_64 rng(8);
  const PairHistory busy(sorted_uniform(rng, 30, 10.0), sorted_uniform(rng, 30, 10.0), 10.0);
  for (double t : {0.0, 2.5, 10.0}) {
    EXPECT_NEAR(compensator(busy, Direction::backward, 0.4, {0.0, 3.0}, t), 0.4 * t, 1e-14);
  }
}

TEST(Compensator, MatchesIntegralOfIntensity) {
  std::mt19937_64 rng(12);
  const PairHistory h(sorted_uniform(rng, 12, 8.0), sorted_uniform(rng, 9, 8.0), 8.0);
  const KernelParams k{0.9, 1.7};
  const double num = hccrm::testing::simpson(
      [&](double t) { return intensity_at(t, h, Direction::forward, 0.35, k); }, 0.0, 8.0, 400000);
  EXPECT_NEAR(compensator(h, Direction::forward, 0.35, k, 8.0), num, 1e-4);
}

TEST(Compensator, NondecreasingFromZero) {
  std::mt19937_64 rng(13);
  const PairHistory h(sorted_uniform(rng, 40, 20.0), sorted_uniform(rng, 40, 20.0), 20.0);
  const KernelParams k{1.2, 2.0};
  EXPECT_EQ(compensator(h, Direction::forward, 0.1, k, 0.0), 0.0);
  double prev = 0.0;
  for (int n = 1; n <= 2000; ++n) {
    const double c = compensator(h, Direction::forward, 0.1, k, 20.0 * n / 2000.0);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(LoglikPair, Examples) {
  const PairHistory empty({}, {}, 10.0);
  EXPECT_NEAR(loglik_pair(empty, PairRate::symmetric(0.3), {0.5, 1.0}), -6.0, 1e-14);

  const PairHistory one({1.0}, {}, 2.0);
  EXPECT_NEAR(loglik_pair(one, {0.5, 0.5}, {0.0, 1.0}), std::log(0.5) - 2.0, 1e-14);
  EXPECT_NEAR(loglik_pair(one, {0.5, 0.5}, {0.0, 1.0}), -2.69315, 1e-5);
}

TEST(LoglikPair, ZeroIntensityIsNegativeInfinity) {
  const PairHistory h({1.0}, {}, 2.0);
  EXPECT_EQ(loglik_pair(h, {0.0, 0.5}, {1.0, 2.0}), -std::numeric_limits<double>::infinity());
  // A prior opposite event keeps the forward intensity positive at mu_ij = 0.
  const PairHistory g({1.0}, {0.5}, 2.0);
  EXPECT_TRUE(std::isinf(loglik_pair(g, {0.0, 0.0}, {1.0, 2.0})));  // backward event at 0.5 has zero rate
  EXPECT_TRUE(std::isfinite(loglik_pair(g, {0.0, 0.5}, {1.0, 2.0})));
}

TEST(LoglikPair, RejectsUnsortedHistory) {
  EXPECT_THROW(PairHistory({2.0, 1.0}, {}, 3.0), std::invalid_argument);
  EXPECT_THROW(PairHistory({}, {4.0}, 3.0), std::invalid_argument);
}

TEST(LoglikPair, RecursionMatchesNaiveDoubleSum) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (std::size_t n : {0u, 1u, 7u, 1000u, 10000u}) {
    const double T = 50.0;
    auto f = sorted_uniform(rng, n / 2, T);
    auto b = sorted_uniform(rng, n - n / 2, T);
    const double mu_f = u(rng), mu_b = u(rng);
    const KernelParams k{u(rng), u(rng) + 2.0};
    const PairHistory h(f, b, T);
    const double naive = naive_direction_loglik(f, b, mu_f, k.eta, k.delta, T) +
                         naive_direction_loglik(b, f, mu_b, k.eta, k.delta, T);
    EXPECT_NEAR(loglik_pair(h, {mu_f, mu_b}, k), naive, 1e-10 * std::max(1.0, std::abs(naive) / 1e4)) << "n=" << n;
  }
}

TEST(LoglikPair, TiesDoNotExcite) {
  // A backward event at the same instant as a forward event does not excite it.
  const PairHistory h({1.0}, {1.0}, 2.0);
  const KernelParams k{1.0, 2.0};
  const double expected = 2.0 * std::log(0.5) - 2.0 * (0.5 * 2.0) - 2.0 * (0.5 * -std::expm1(-2.0));
  EXPECT_NEAR(loglik_pair(h, PairRate::symmetric(0.5), k), expected, 1e-14);
  EXPECT_NEAR(loglik_pair(h, PairRate::symmetric(0.5), k),
              naive_direction_loglik(h.forward(), h.backward(), 0.5, 1.0, 2.0, 2.0) +
                  naive_direction_loglik(h.backward(), h.forward(), 0.5, 1.0, 2.0, 2.0),
              1e-14);
}

TEST(SimulatePair, PoissonWhenNoExcitation) {
  Rng rng(1);
  std::vector<double> totals;
  for (int r = 0; r < 4000; ++r) {
    totals.push_back(static_cast<double>(simulate_pair(PairRate::symmetric(0.25), {0.0, 1.0}, 100.0, rng).size()));
  }
  const auto s = summarize(totals);
  EXPECT_NEAR(s.mean, 50.0, 3.0 * s.se);
  // Dispersion: var/mean ~ 1 with sd sqrt(2/(n-1)) under the Poisson null.
  const double dispersion = s.sd * s.sd / s.mean;
  EXPECT_NEAR(dispersion, 1.0, 3.0 * std::sqrt(2.0 / 3999.0));
}

TEST(SimulatePair, MeanCountMatchesExpectedCount) {
  const KernelParams k{1.0, 2.0};
  const double oracle = expected_count(0.25, k, 10.0);
  EXPECT_NEAR(oracle, 0.25 * (19.0 + std::exp(-10.0)), 1e-12);
  Rng rng(2);
  std::vector<double> fwd, bwd;
  for (int r = 0; r < 10000; ++r) {
    const auto h = simulate_pair(PairRate::symmetric(0.25), k, 10.0, rng);
    fwd.push_back(static_cast<double>(h.forward().size()));
    bwd.push_back(static_cast<double>(h.backward().size()));
  }
  const auto sf = summarize(fwd), sb = summarize(bwd);
  EXPECT_NEAR(sf.mean, oracle, 3.0 * sf.se);
  EXPECT_NEAR(sb.mean, oracle, 3.0 * sb.se);
}

TEST(SimulatePair, ZeroBaseRateGivesEmptyHistory) {
  Rng rng(3);
  for (int r = 0; r < 200; ++r) EXPECT_EQ(simulate_pair({0.0, 0.0}, {0.9, 1.0}, 50.0, rng).size(), 0u);
}

TEST(SimulatePair, TimeRescalingIsUnitExponential) {
  Rng rng(4);
  const KernelParams k{1.0, 2.0};
  const PairRate rates{0.3, 0.6};
  const double T = 2500.0;
  const auto h = simulate_pair(rates, k, T, rng);
  for (Direction d : {Direction::forward, Direction::backward}) {
    const auto& ts = h.times(d);
    ASSERT_GT(ts.size(), 1000u);
    std::vector<double> gaps;
    double prev = 0.0;
    for (std::size_t n = 0; n < 1000; ++n) {
      const double c = compensator(h, d, rate_of(rates, d), k, ts[n]);
      gaps.push_back(c - prev);
      prev = c;
    }
    const double p = hccrm::testing::ks_pvalue(gaps, [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); });
    EXPECT_GT(p, 0.01);
  }
}

TEST(SimulatePair, StationarityAndHorizonErrors) {
  Rng rng(5);
  EXPECT_THROW(simulate_pair(PairRate::symmetric(1.0), {1.0, 1.0}, 10.0, rng), std::invalid_argument);
  EXPECT_THROW(simulate_pair(PairRate::symmetric(1.0), {0.5, 1.0}, 0.0, rng), std::invalid_argument);
  EXPECT_NO_THROW(simulate_pair(PairRate::symmetric(0.1), {1.5, 1.0}, 5.0, rng, true));
}

TEST(ExpectedCount, Examples) {
  EXPECT_NEAR(expected_count(0.25, {0.0, 2.0}, 10.0), 2.5, 1e-14);
  EXPECT_NEAR(expected_count(0.25, {1.0, 2.0}, 10.0), 4.7500113, 1e-7);
  EXPECT_THROW(expected_count(1.0, {1.0, 1.0}, 10.0), std::invalid_argument);
}
