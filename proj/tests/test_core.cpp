#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace corrmap;
using namespace std::chrono;
using testing_support::at_seconds;

namespace {

const Date kDay1 = year{2011} / March / 1;
const Date kDay2 = year{2011} / March / 2;

Timestamp at(Date d, Duration offset) { return start_of_day(d) + offset; }

BinGrid two_bin_grid(std::vector<Date> days) {
  return BinGrid(hours{10}, hours{11}, minutes{30}, std::move(days));
}

// Linear scan for the last tick of day `d` at or before `t`.
double last_tick_before(const TickSeries& s, Date d, Timestamp t) {
  double out = kMissing;
  for (const auto& tk : s.ticks())
    if (tk.time <= t && tk.time >= start_of_day(d)) out = std::log(tk.price);
  return out;
}

}  // namespace

TEST(LogPrices, UnitPricesGiveZero) {
  std::vector<Tick> ticks{{at_seconds(0), 1.0}, {at_seconds(1), 1.0}};
  const auto lp = log_price_series(ticks);
  EXPECT_EQ(lp[0].value, 0.0);
  EXPECT_EQ(lp[1].value, 0.0);
}

TEST(LogPrices, PowersOfE) {
  std::vector<Tick> ticks{{at_seconds(0), std::numbers::e}, {at_seconds(1), std::numbers::e * std::numbers::e}};
  const auto lp = log_price_series(ticks);
  EXPECT_NEAR(lp[0].value, 1.0, 1e-15);
  EXPECT_NEAR(lp[1].value, 2.0, 1e-15);
}

TEST(LogPrices, ZeroPriceRejectedWithIndex) {
  std::vector<Tick> ticks{{at_seconds(0), 1.0}, {at_seconds(1), 0.0}};
  try {
    log_price_series(ticks);
    FAIL();
  } catch (const validation_error& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
  EXPECT_THROW(TickSeries("A", ticks), validation_error);
}

TEST(TickSeries, RejectsNonIncreasingTimes) {
  std::vector<Tick> ticks{{at_seconds(5), 1.0}, {at_seconds(5), 1.1}};
  EXPECT_THROW(TickSeries("A", ticks), validation_error);
}

TEST(TickSeries, SliceAndLookup) {
  TickSeries s("A", {{at_seconds(1), 1.0}, {at_seconds(2), 2.0}, {at_seconds(3), 3.0}});
  EXPECT_EQ(s.slice(at_seconds(2), at_seconds(3)).size(), 2u);
  EXPECT_EQ(s.slice(at_seconds(4), at_seconds(9)).size(), 0u);
  EXPECT_EQ(s.last_at_or_before(at_seconds(0.5)), -1);
  EXPECT_EQ(s.last_at_or_before(at_seconds(2)), 1);
  EXPECT_EQ(s.last_at_or_before(at_seconds(2.5)), 1);
}

TEST(BinGrid, Validation) {
  EXPECT_THROW(BinGrid(hours{10}, hours{16}, minutes{7}, {kDay1}), validation_error);
  EXPECT_THROW(BinGrid(hours{10}, hours{10}, minutes{5}, {kDay1}), validation_error);
  EXPECT_THROW(BinGrid(hours{10}, hours{16}, minutes{0}, {kDay1}), validation_error);
  EXPECT_THROW(BinGrid(hours{10}, hours{16}, minutes{5}, {kDay2, kDay1}), validation_error);
  const BinGrid g(hours{10}, hours{16}, minutes{5}, {kDay1, kDay2});
  EXPECT_EQ(g.bins(), 72u);
  EXPECT_EQ(g.days(), 2u);
  EXPECT_EQ(g.boundary(1, 0), at(kDay2, hours{10}));
  EXPECT_EQ(g.coarsened(6).bins(), 12u);
}

TEST(BinPanel, ConstantPriceGivesZeroReturns) {
  TickSeries s("A", {{at(kDay1, hours{9}), 42.0}, {at(kDay1, minutes{620}), 42.0}});
  const auto p = bin_panel({s}, two_bin_grid({kDay1}));
  EXPECT_EQ(p(0, 0, 0), 0.0);
  EXPECT_EQ(p(0, 1, 0), 0.0);
}

TEST(BinPanel, NoTickBeforeBinStartIsMissing) {
  // first tick of the day arrives during bin 0
  TickSeries s("A", {{at(kDay1, minutes{610}), 10.0}, {at(kDay1, minutes{650}), 11.0}});
  const auto p = bin_panel({s}, two_bin_grid({kDay1}));
  EXPECT_TRUE(p.missing(0, 0, 0));
  EXPECT_NEAR(p(0, 1, 0), std::log(11.0 / 10.0), 1e-15);
}

TEST(BinPanel, AnchorsDoNotCrossDays) {
  TickSeries s("A", {{at(kDay1, minutes{650}), 10.0}, {at(kDay2, minutes{620}), 12.0}});
  const auto p = bin_panel({s}, two_bin_grid({kDay1, kDay2}));
  EXPECT_TRUE(p.missing(0, 0, 1));
  EXPECT_FALSE(p.missing(0, 1, 1));
  EXPECT_NEAR(p(0, 1, 1), 0.0, 0.0);
}

TEST(BinPanel, MatchesLastTickScanAndShape) {
  std::mt19937_64 g(11);
  std::vector<TickSeries> series;
  const std::vector<Date> days{kDay1, kDay2};
  for (int a = 0; a < 3; ++a) {
    std::vector<Tick> ticks;
    std::uniform_real_distribution<double> gap(1.0, 400.0);
    std::normal_distribution<double> z(0.0, 0.001);
    double lp = std::log(20.0);
    for (const auto& d : days)
      for (double s = 9.5 * 3600 + gap(g); s < 16.5 * 3600; s += gap(g)) {
        lp += z(g);
        ticks.push_back({start_of_day(d) + seconds_to_duration(s), std::exp(lp)});
      }
    series.emplace_back("S" + std::to_string(a), std::move(ticks));
  }
  const BinGrid grid(hours{10}, hours{16}, minutes{5}, days);
  const auto p = bin_panel(series, grid);
  ASSERT_EQ(p.stocks(), 3u);
  ASSERT_EQ(p.bins(), 72u);
  ASSERT_EQ(p.days(), 2u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 2; ++t) {
      double sum = 0.0;
      for (std::size_t k = 0; k < 72; ++k) {
        const double expect = last_tick_before(series[i], days[t], grid.boundary(t, k + 1)) -
                               last_tick_before(series[i], days[t], grid.boundary(t, k));
        EXPECT_EQ(p(i, k, t), expect);
        sum += p(i, k, t);
      }
      // telescoping
      const double whole = last_tick_before(series[i], days[t], grid.boundary(t, 72)) -
                           last_tick_before(series[i], days[t], grid.boundary(t, 0));
      EXPECT_NEAR(sum, whole, 1e-12);
    }

  // re-binning 5-minute into 30-minute returns
  const BinGrid coarse(hours{10}, hours{16}, minutes{30}, days);
  const auto direct = bin_panel(series, coarse);
  const auto summed = aggregate_bins(p, 6);
  ASSERT_TRUE(summed.grid() == coarse);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 12; ++k)
      for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(summed(i, k, t), direct(i, k, t), 1e-12);
}

TEST(BinPanel, ErrorPaths) {
  EXPECT_THROW(bin_panel(std::vector<TickSeries>{}, two_bin_grid({kDay1})), validation_error);
  TickSeries s("A", {{at(kDay1, hours{9}), 1.0}});
  EXPECT_THROW(bin_panel({s}, two_bin_grid({})), insufficient_data);
  EXPECT_THROW(aggregate_bins(bin_panel({s}, two_bin_grid({kDay1})), 3), validation_error);
}

TEST(BinnedReturnPanel, ShapeChecked) {
  EXPECT_THROW(BinnedReturnPanel({"A"}, two_bin_grid({kDay1}), std::vector<double>(3)),
               validation_error);
  EXPECT_THROW(BinnedReturnPanel({}, two_bin_grid({kDay1}), {}), validation_error);
}

TEST(CorrelationMatrix, ClipsAndValidates) {
  SquareMatrix m(2);
  m(0, 1) = m(1, 0) = 1.0 + 1e-12;
  EXPECT_EQ(CorrelationMatrix({"A", "B"}, m, Estimator::pearson_daily)(0, 1), 1.0);
  m(0, 1) = m(1, 0) = 1.1;
  EXPECT_THROW(CorrelationMatrix({"A", "B"}, m, Estimator::pearson_daily), numerical_error);
  m(0, 1) = 0.2;
  m(1, 0) = 0.3;
  EXPECT_THROW(CorrelationMatrix({"A", "B"}, m, Estimator::pearson_daily), validation_error);
}

TEST(DistanceMatrix, Validates) {
  SquareMatrix d(2);
  d(0, 1) = d(1, 0) = 2.5;
  EXPECT_THROW(DistanceMatrix({"A", "B"}, d), validation_error);
  d(0, 1) = d(1, 0) = 1.0;
  d(0, 0) = 0.1;
  EXPECT_THROW(DistanceMatrix({"A", "B"}, d), validation_error);
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
  Rng a(5, 1, 2), b(5, 1, 2), c(5, 2, 1);
  for (int n = 0; n < 100; ++n) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
  Rng u(3);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double z = u.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
  double e = 0.0;
  for (int k = 0; k < n; ++k) e += u.exponential(4.0);
  EXPECT_NEAR(e / n, 0.25, 0.005);
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  std::vector<double> one(1000), many(1000);
  parallel_for(1000, [&](std::size_t i) { one[i] = std::sin(static_cast<double>(i)); }, 1);
  parallel_for(1000, [&](std::size_t i) { many[i] = std::sin(static_cast<double>(i)); }, 4);
  EXPECT_EQ(one, many);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 3) throw numerical_error("x"); }, 3),
               numerical_error);
}
