#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "support.hpp"

using namespace corrmap;
using namespace testing_support;

TEST(Cholesky, ReconstructsAndHandlesRankDeficiency) {
  const auto c = equicorrelation(5, 0.4);
  const auto l = cholesky_psd(c);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += l(i, k) * l(j, k);
      EXPECT_NEAR(s, c(i, j), 1e-14);
    }
  const auto ones = cholesky_psd(equicorrelation(3, 1.0));
  EXPECT_EQ(ones(1, 1), 0.0);
  EXPECT_EQ(ones(2, 0), 1.0);
  SquareMatrix bad = SquareMatrix::identity(3);
  bad(0, 1) = bad(1, 0) = 0.9;
  bad(0, 2) = bad(2, 0) = 0.9;
  bad(1, 2) = bad(2, 1) = -0.9;
  EXPECT_THROW(cholesky_psd(bad), numerical_error);
}

TEST(Diffusion, PerfectCorrelationSharedTimesGivesIdenticalSeries) {
  auto spec = DiffusionSpec::equicorrelated(2, 1.0, 2e-4, 0.1, 3600.0, 5);
  spec.shared_observation_times = true;
  const auto ticks = simulate_asynchronous_ticks(spec);
  ASSERT_EQ(ticks[0].size(), ticks[1].size());
  for (std::size_t m = 0; m < ticks[0].size(); ++m) {
    EXPECT_EQ(ticks[0][m].time, ticks[1][m].time);
    EXPECT_EQ(ticks[0][m].price, ticks[1][m].price);
  }
}

TEST(Diffusion, ZeroVolatilityIsConstant) {
  const auto ticks = simulate_asynchronous_ticks(DiffusionSpec::equicorrelated(3, 0.5, 0.0, 0.2, 600.0, 1));
  for (const auto& s : ticks)
    for (const auto& t : s.ticks()) EXPECT_EQ(t.price, 100.0);
}

TEST(Diffusion, SameSeedBitIdentical) {
  const auto spec = DiffusionSpec::equicorrelated(3, 0.3, 1e-4, 0.1, 7200.0, 99);
  const auto a = simulate_asynchronous_ticks(spec), b = simulate_asynchronous_ticks(spec);
  for (std::size_t s = 0; s < 3; ++s) {
    ASSERT_EQ(a[s].size(), b[s].size());
    for (std::size_t m = 0; m < a[s].size(); ++m) {
      EXPECT_EQ(a[s][m].time, b[s][m].time);
      EXPECT_EQ(a[s][m].price, b[s][m].price);
    }
  }
  auto other = spec;
  other.seed = 100;
  EXPECT_NE(simulate_asynchronous_ticks(other)[0][1].time, a[0][1].time);
}

TEST(Diffusion, PoissonCountsProperty) {
  const double mean = 0.1 * 6 * 3600.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto spec = DiffusionSpec::equicorrelated(2, 0.0, 1e-4, 0.1, 6 * 3600.0, seed);
    spec.observe_at_start = false;
    for (const auto& s : simulate_asynchronous_ticks(spec))
      EXPECT_NEAR(static_cast<double>(s.size()), mean, 3.0 * std::sqrt(mean));
  }
}

TEST(Diffusion, IncrementVarianceProperty) {
  // 10^4 one-second increments of the latent path, read off from a dense
  // shared observation grid.
  const double vol = 3e-3;
  double ss = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; count < 10000; ++seed) {
    auto spec = DiffusionSpec::equicorrelated(1, 0.0, vol, 1.0, 2000.0, seed);
    const auto s = simulate_asynchronous_ticks(spec)[0];
    for (std::size_t m = 1; m < s.size() && count < 10000; ++m, ++count) {
      const double dt = std::chrono::duration<double>(s[m].time - s[m - 1].time).count();
      const double dx = std::log(s[m].price / s[m - 1].price);
      ss += dx * dx / dt;
    }
  }
  // E[dx^2 / dt] = vol^2; the standardized mean has sd vol^2 sqrt(2/n)
  EXPECT_NEAR(ss / 10000.0, vol * vol, 4.0 * vol * vol * std::sqrt(2.0 / 10000.0));
}

TEST(Diffusion, SpecValidation) {
  auto spec = DiffusionSpec::equicorrelated(2, 0.5, 1e-4, 0.1, 60.0, 1);
  spec.observation_rate[1] = 0.0;
  EXPECT_THROW(simulate_asynchronous_ticks(spec), validation_error);
  spec = DiffusionSpec::equicorrelated(2, 0.5, 1e-4, 0.1, 0.0, 1);
  EXPECT_THROW(simulate_asynchronous_ticks(spec), validation_error);
}

TEST(PlantedPanel, IndependentCase) {
  const std::size_t T = 400;
  const auto p = simulate_planted_panel(15, 2, T, {0.0, 0.0}, 6);
  for (std::size_t k = 0; k < 2; ++k)
    EXPECT_NEAR(average_pairwise_correlation(binwise_correlation(p, k)), 0.0, 3.0 / std::sqrt(T));
}

TEST(PlantedPanel, StrongCorrelationRecovered) {
  const auto p = simulate_planted_panel(15, 1, 500, {0.9}, 7);
  EXPECT_NEAR(average_pairwise_correlation(binwise_correlation(p, 0)), 0.9, 0.05);
}

TEST(PlantedPanel, RisingProfileGivesRisingMarketMode) {
  std::vector<double> rho(12);
  for (std::size_t k = 0; k < 12; ++k) rho[k] = 0.1 + 0.6 * static_cast<double>(k) / 11.0;
  const auto p = simulate_planted_panel(30, 12, 60, rho, 8);
  std::vector<double> l1;
  for (std::size_t k = 0; k < 12; ++k) l1.push_back(market_mode_strength(eigendecompose(binwise_correlation(p, k))));
  EXPECT_GT(spearman_with_index(l1), 0.9);
  EXPECT_THROW(simulate_planted_panel(3, 2, 5, {0.1}, 1), validation_error);
  EXPECT_THROW(simulate_planted_panel(3, 1, 5, {1.0}, 1), validation_error);
}

TEST(IntradayTicks, ContinuousAcrossBinsAndInsideSessions) {
  using namespace std::chrono;
  const BinGrid grid(hours{10}, hours{12}, minutes{30}, consecutive_days(year{2011} / March / 1, 2));
  IntradaySynthSpec spec{default_symbols(3), grid, {0.2, 0.4, 0.6, 0.8}, 1e-4, 0.05, 50.0, 3};
  const auto ticks = simulate_intraday_ticks(spec);
  ASSERT_EQ(ticks.size(), 3u);
  for (const auto& s : ticks) {
    EXPECT_EQ(s[0].time, grid.boundary(0, 0));
    EXPECT_EQ(s[0].price, 50.0);
    for (const auto& t : s.ticks()) {
      const auto d = date_of(t.time);
      const auto off = t.time - start_of_day(d);
      EXPECT_GE(off, hours{10});
      EXPECT_LE(off, hours{12});
    }
  }
  const auto again = simulate_intraday_ticks(spec);
  for (std::size_t a = 0; a < 3; ++a) {
    ASSERT_EQ(again[a].size(), ticks[a].size());
    for (std::size_t m = 0; m < ticks[a].size(); ++m) EXPECT_EQ(again[a][m].price, ticks[a][m].price);
  }
  // every bin of every day has its anchors
  const auto p = bin_panel(ticks, grid);
  for (double v : p.values()) EXPECT_FALSE(is_missing(v));
}

TEST(DailyReturns, SwitchingCorrelation) {
  std::vector<double> rho(600, 0.2);
  for (std::size_t t = 300; t < 600; ++t) rho[t] = 0.8;
  const auto r = simulate_daily_returns(10, rho, 0.01, 4);
  std::vector<std::vector<double>> before(10), after(10);
  for (std::size_t i = 0; i < 10; ++i) {
    before[i].assign(r[i].begin(), r[i].begin() + 300);
    after[i].assign(r[i].begin() + 300, r[i].end());
  }
  const auto b = pearson_windowed(before, default_symbols(10), WindowSpec(300, 300)).front();
  const auto a = pearson_windowed(after, default_symbols(10), WindowSpec(300, 300)).front();
  EXPECT_NEAR(average_pairwise_correlation(b), 0.2, 0.1);
  EXPECT_NEAR(average_pairwise_correlation(a), 0.8, 0.1);
}
