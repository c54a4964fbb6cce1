#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace corrmap;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("corrmap_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<TickSeries> synthetic_ticks(std::size_t n, std::size_t days, std::vector<double> rho,
                                        std::uint64_t seed, double rate = 0.05) {
  using namespace std::chrono;
  const auto K = rho.size();
  const BinGrid grid(hours{10}, hours{10} + minutes{30} * static_cast<int>(K), minutes{30},
                     consecutive_days(year{2011} / March / 1, days));
  return simulate_intraday_ticks({default_symbols(n), grid, std::move(rho), 1e-4, rate, 100.0, seed});
}

PipelineConfig intraday_config(std::size_t K, Mode mode = Mode::intraday_ticks) {
  using namespace std::chrono;
  PipelineConfig cfg;
  cfg.mode = mode;
  cfg.session_start = hours{10};
  cfg.session_end = hours{10} + minutes{30} * static_cast<int>(K);
  cfg.bin_width = minutes{30};
  cfg.seed = 3;
  cfg.threads = 2;
  return cfg;
}

DailyPrices daily_prices(std::size_t n, const std::vector<double>& rho, std::uint64_t seed) {
  using namespace std::chrono;
  const auto r = simulate_daily_returns(n, rho, 0.01, seed);
  return prices_from_returns(default_symbols(n), consecutive_days(year{2000} / 1 / 1, rho.size() + 1), r);
}

}  // namespace

TEST(Config, ValidationBeforeComputation) {
  auto cfg = intraday_config(4);
  cfg.bin_width = std::chrono::minutes{7};
  EXPECT_THROW(cfg.validate(), validation_error);
  // rejected even with input that would fail later
  EXPECT_THROW(run_intraday_pipeline({}, cfg), validation_error);

  auto est = intraday_config(4);
  est.estimator = Estimator::pearson_daily;
  EXPECT_THROW(est.validate(), validation_error);
  PipelineConfig daily;
  daily.mode = Mode::daily;
  daily.window = 1;
  EXPECT_THROW(daily.validate(), validation_error);
}

TEST(Config, JsonOverridesAndHash) {
  PipelineConfig cfg;
  apply_config_json(cfg, json::parse(R"({"mode": "daily", "window": 60, "step": 20, "clean": true,
      "seed": 9, "inputs": ["a.csv"], "output_dir": "x", "schedule": {"cooling_factor": 0.9}})"));
  EXPECT_EQ(cfg.mode, Mode::daily);
  EXPECT_EQ(cfg.window, 60u);
  EXPECT_EQ(cfg.resolved_step(), 20u);
  EXPECT_TRUE(cfg.clean);
  EXPECT_EQ(cfg.schedule.cooling_factor, 0.9);
  EXPECT_EQ(cfg.resolved_estimator(), Estimator::pearson_daily);

  auto moved = cfg;
  moved.output_dir = "elsewhere";
  moved.inputs = {"b.csv"};
  EXPECT_EQ(moved.hash(), cfg.hash());
  moved.seed = 10;
  EXPECT_NE(moved.hash(), cfg.hash());
  EXPECT_EQ(cfg.hash().size(), 16u);
  EXPECT_THROW(apply_config_json(cfg, json::parse(R"({"mode": "weekly"})")), validation_error);
}

TEST(IntradayPipeline, WritesArtifactsWithProvenance) {
  const auto ticks = synthetic_ticks(5, 3, {0.3, 0.5, 0.7, 0.5}, 1);
  auto cfg = intraday_config(4);
  const auto dir = scratch("intraday");
  ArtifactWriter writer(dir, Provenance{cfg.hash(), cfg.seed});
  const auto res = run_intraday_pipeline(ticks, cfg, &writer);
  EXPECT_EQ(res.grid.days(), 3u);
  EXPECT_EQ(res.maps_avg_corr.size(), 4u);
  EXPECT_EQ(res.maps_avg_coords.size(), 4u);
  EXPECT_EQ(res.spectrum.size(), 4u);
  EXPECT_EQ(res.avg_correlation_sd.size(), 4u);

  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["config_hash"], cfg.hash());
  ASSERT_FALSE(manifest["artifacts"].empty());
  const std::string comment = "# config_hash=" + cfg.hash() + " seed=3";
  for (const auto& a : manifest["artifacts"]) {
    const auto path = dir / a["path"].get<std::string>();
    ASSERT_TRUE(fs::exists(path)) << path;
    EXPECT_EQ(a["config_hash"], cfg.hash());
    const auto text = slurp(path);
    if (path.extension() == ".csv") {
      EXPECT_EQ(text.substr(0, comment.size()), comment) << path;
    } else {
      EXPECT_EQ(json::parse(text)["provenance"]["config_hash"], cfg.hash()) << path;
    }
  }
  for (const char* f : {"dispersion.csv", "spectrum.csv", "avg_correlation.csv", "panel.json",
                        "mean_distance_avg_corr.csv", "mean_distance_avg_coords.csv",
                        "maps/avg_corr/bin_00.json", "maps/avg_coords/bin_03.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_NE(slurp(dir / "avg_correlation.csv").find("bin,mean,std,lower,upper"), std::string::npos);
  EXPECT_NE(slurp(dir / "mean_distance_avg_corr.csv").find("bin,value"), std::string::npos);
}

TEST(IntradayPipeline, ByteIdenticalReruns) {
  const auto ticks = synthetic_ticks(4, 2, {0.2, 0.6}, 5);
  const auto cfg = intraday_config(2);
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  ArtifactWriter wa(a, Provenance{cfg.hash(), cfg.seed}), wb(b, Provenance{cfg.hash(), cfg.seed});
  run_intraday_pipeline(ticks, cfg, &wa);
  auto single = cfg;
  single.threads = 1;  // thread count must not change the output
  run_intraday_pipeline(ticks, single, &wb);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 10u);
}

TEST(IntradayPipeline, SingleDayOmitsBands) {
  const auto ticks = synthetic_ticks(4, 1, {0.4, 0.4, 0.4}, 2);
  const auto cfg = intraday_config(3);
  const auto dir = scratch("single_day");
  ArtifactWriter writer(dir, Provenance{cfg.hash(), cfg.seed});
  const auto res = run_intraday_pipeline(ticks, cfg, &writer);
  EXPECT_TRUE(res.avg_correlation_sd.empty());
  EXPECT_TRUE(res.spectrum.empty());
  EXPECT_FALSE(res.skipped.empty());
  EXPECT_EQ(res.avg_correlation.size(), 3u);
  EXPECT_EQ(res.maps_avg_corr.size(), 3u);
  EXPECT_NE(slurp(dir / "avg_correlation.csv").find("bin,mean\n"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "spectrum.csv"));
}

TEST(IntradayPipeline, FlatCorrelationGivesFlatDistances) {
  const std::vector<double> flat(6, 0.5);
  std::vector<double> rising(6);
  for (std::size_t k = 0; k < 6; ++k) rising[k] = 0.1 + 0.14 * static_cast<double>(k);
  auto cfg = intraday_config(6);
  const auto f = run_intraday_pipeline(synthetic_ticks(10, 4, flat, 7, 0.1), cfg);
  const auto r = run_intraday_pipeline(synthetic_ticks(10, 4, rising, 7, 0.1), cfg);
  auto range = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  EXPECT_LT(range(f.mean_distance_avg_corr), 0.5 * range(r.mean_distance_avg_corr));
  EXPECT_LT(spearman_with_index(r.mean_distance_avg_corr), -0.9);
  EXPECT_GT(spearman_with_index(r.avg_correlation), 0.9);
}

TEST(IntradayPipeline, BinnedModeAndThreeWayConsistency) {
  std::vector<double> rising(6);
  for (std::size_t k = 0; k < 6; ++k) rising[k] = 0.1 + 0.12 * static_cast<double>(k);
  const auto ticks = synthetic_ticks(12, 60, rising, 4, 0.1);
  const auto res = run_intraday_pipeline(ticks, intraday_config(6, Mode::intraday_binned));
  std::vector<double> l1;
  for (const auto& row : res.spectrum) l1.push_back(row[0]);
  EXPECT_GT(spearman_with_index(l1), 0.9);
  EXPECT_GT(spearman_with_index(res.avg_correlation), 0.9);
  EXPECT_LT(spearman_with_index(res.mean_distance_avg_corr), -0.9);
  EXPECT_TRUE(res.maps_avg_coords.empty());
}

TEST(IntradayPipeline, InsufficientData) {
  const auto ticks = synthetic_ticks(1, 2, {0.4, 0.4}, 2);
  EXPECT_THROW(run_intraday_pipeline(ticks, intraday_config(2)), insufficient_data);
  // ticks outside the session only
  auto cfg = intraday_config(2);
  cfg.session_start = std::chrono::hours{14};
  cfg.session_end = std::chrono::hours{15};
  EXPECT_THROW(run_intraday_pipeline(synthetic_ticks(3, 2, {0.4, 0.4}, 2), cfg), insufficient_data);
}

TEST(DailyPipeline, OneWindowOneMap) {
  PipelineConfig cfg;
  cfg.mode = Mode::daily;
  cfg.window = 60;
  const auto res = run_daily_pipeline(daily_prices(6, std::vector<double>(60, 0.3), 1), cfg);
  ASSERT_EQ(res.windows.size(), 1u);
  EXPECT_EQ(res.windows[0].map.size(), 6u);
  cfg.window = 61;
  EXPECT_THROW(run_daily_pipeline(daily_prices(6, std::vector<double>(60, 0.3), 1), cfg), insufficient_data);
}

TEST(DailyPipeline, DuplicatedSymbolsCoincide) {
  auto prices = daily_prices(6, std::vector<double>(120, 0.3), 2);
  prices.symbols.push_back("COPY");
  prices.closes.push_back(prices.closes[2]);
  PipelineConfig cfg;
  cfg.mode = Mode::daily;
  cfg.window = 60;
  const auto res = run_daily_pipeline(prices, cfg);
  ASSERT_EQ(res.windows.size(), 2u);
  for (const auto& w : res.windows) {
    const double dx = w.map.at(2, 0) - w.map.at(6, 0), dy = w.map.at(2, 1) - w.map.at(6, 1);
    EXPECT_LT(std::hypot(dx, dy), 1e-2);
  }
}

TEST(DailyPipeline, RegimeSwitchLowersMeanDistance) {
  std::vector<double> rho(600, 0.2);
  for (std::size_t t = 300; t < 600; ++t) rho[t] = 0.8;
  PipelineConfig cfg;
  cfg.mode = Mode::daily;
  cfg.window = 60;
  cfg.clean = true;
  const auto res = run_daily_pipeline(daily_prices(15, rho, 3), cfg);
  ASSERT_EQ(res.windows.size(), 10u);
  double before = 0.0, after = 0.0;
  for (std::size_t w = 0; w < 5; ++w) before += res.windows[w].mean_distance / 5.0;
  for (std::size_t w = 5; w < 10; ++w) after += res.windows[w].mean_distance / 5.0;
  EXPECT_LT(after, 0.6 * before);
}

TEST(DailyPipeline, MissingDataPolicies) {
  auto prices = daily_prices(5, std::vector<double>(80, 0.3), 4);
  prices.closes[1][10] = kMissing;  // breaks returns 9 and 10 of window 0
  PipelineConfig cfg;
  cfg.mode = Mode::daily;
  cfg.window = 40;
  const auto dropped = run_daily_pipeline(prices, cfg);
  ASSERT_EQ(dropped.windows.size(), 2u);
  EXPECT_EQ(dropped.windows[0].map.size(), 4u);
  EXPECT_EQ(dropped.windows[1].map.size(), 5u);
  EXPECT_FALSE(dropped.diagnostics.empty());

  cfg.missing = MissingPolicy::skip_window;
  const auto skipped = run_daily_pipeline(prices, cfg);
  ASSERT_EQ(skipped.windows.size(), 1u);
  EXPECT_EQ(skipped.windows[0].end, prices.dates[80]);
  EXPECT_EQ(skipped.skipped.size(), 1u);
}

TEST(DailyPipeline, WritesDateKeyedSeries) {
  PipelineConfig cfg;
  cfg.mode = Mode::daily;
  cfg.window = 30;
  const auto prices = daily_prices(5, std::vector<double>(90, 0.4), 6);
  const auto dir = scratch("daily");
  ArtifactWriter writer(dir, Provenance{cfg.hash(), cfg.seed});
  run_daily_pipeline(prices, cfg, &writer);
  const auto text = slurp(dir / "mean_distance.csv");
  EXPECT_NE(text.find("date,value\n" + format_date(prices.dates[30]) + ","), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "windows" / format_date(prices.dates[90]) / "correlation.json"));
  EXPECT_TRUE(fs::exists(dir / "maps" / (format_date(prices.dates[60]) + ".json")));
}
