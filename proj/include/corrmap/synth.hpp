#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "corrmap/core.hpp"
#include "corrmap/error.hpp"
#include "corrmap/matrix.hpp"
#include "corrmap/random.hpp"

namespace corrmap {

// Lower-triangular L with L L^T = c for a symmetric positive semi-definite
// matrix. Zero pivots (rank deficiency, e.g. rho = 1) give zero columns.
inline SquareMatrix cholesky_psd(const SquareMatrix& c, double tolerance = 1e-12) {
  const std::size_t n = c.size();
  SquareMatrix l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = c(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (diag < -tolerance) throw numerical_error("correlation matrix is not positive semi-definite");
    const double pivot = diag > tolerance ? std::sqrt(diag) : 0.0;
    l(j, j) = pivot;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = c(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (pivot == 0.0) {
        if (std::abs(s) > 1e-9) throw numerical_error("correlation matrix is not positive semi-definite");
        l(i, j) = 0.0;
      } else {
        l(i, j) = s / pivot;
      }
    }
  }
  return l;
}

inline SquareMatrix equicorrelation(std::size_t n, double rho) {
  SquareMatrix c(n, rho);
  for (std::size_t i = 0; i < n; ++i) c(i, i) = 1.0;
  return c;
}

// Constant-coefficient correlated diffusions dX = mu dt + sigma dW observed
// at independent Poisson times. Time unit is the second.
struct DiffusionSpec {
  std::vector<std::string> symbols;
  std::vector<double> drift;             // per second
  std::vector<double> volatility;        // per sqrt(second)
  SquareMatrix correlation;              // of the driving Brownian motions
  double session_length = 0.0;           // seconds
  std::vector<double> observation_rate;  // events per second
  std::uint64_t seed = 0;
  Timestamp session_start{};
  double initial_price = 100.0;
  // All assets observed at asset 0's Poisson times.
  bool shared_observation_times = false;
  // Every asset also has an observation at the session start.
  bool observe_at_start = true;

  std::size_t assets() const { return symbols.size(); }

  void validate() const {
    const std::size_t n = assets();
    if (n == 0) throw validation_error("diffusion spec needs at least one asset");
    if (drift.size() != n || volatility.size() != n || observation_rate.size() != n ||
        correlation.size() != n)
      throw validation_error("diffusion spec fields must all have one entry per asset");
    if (!(session_length > 0.0)) throw validation_error("session length must be positive");
    for (std::size_t a = 0; a < n; ++a) {
      if (!(volatility[a] >= 0.0)) throw validation_error("volatility must be non-negative");
      if (!(observation_rate[a] > 0.0)) throw validation_error("observation rate must be positive");
      if (correlation(a, a) != 1.0) throw validation_error("correlation diagonal must be 1");
      for (std::size_t b = 0; b < n; ++b)
        if (correlation(a, b) != correlation(b, a))
          throw validation_error("correlation must be symmetric");
    }
    if (!(initial_price > 0.0)) throw validation_error("initial price must be positive");
  }

  static DiffusionSpec equicorrelated(std::size_t n, double rho, double volatility,
                                      double rate, double session_seconds, std::uint64_t seed) {
    DiffusionSpec s;
    s.symbols = default_symbols(n);
    s.drift.assign(n, 0.0);
    s.volatility.assign(n, volatility);
    s.correlation = equicorrelation(n, rho);
    s.session_length = session_seconds;
    s.observation_rate.assign(n, rate);
    s.seed = seed;
    return s;
  }
};

// Random streams per asset: observation times and Brownian increments.
inline constexpr std::uint64_t kObservationStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;

struct SimulatedPaths {
  std::vector<TickSeries> ticks;
  std::vector<double> final_log_price;  // latent value at the session end
};

// Simulates latent log-prices on the union of all observation times (plus
// the session end) with exact Gaussian increments, and reports each asset at
// its own times only. `start_log_price` continues a previous segment; empty
// means log(initial_price) for every asset.
inline SimulatedPaths simulate_paths(const DiffusionSpec& spec,
                                     const std::vector<double>& start_log_price = {}) {
  spec.validate();
  const std::size_t n = spec.assets();
  const SquareMatrix chol = cholesky_psd(spec.correlation);
  const auto length_ns = static_cast<std::int64_t>(std::llround(spec.session_length * 1e9));

  auto poisson_times = [&](std::size_t asset) {
    Rng rng(spec.seed, asset, kObservationStream);
    std::vector<std::int64_t> times;
    if (spec.observe_at_start) times.push_back(0);
    double t = 0.0;
    while (true) {
      t += rng.exponential(spec.observation_rate[asset]);
      const auto ns = static_cast<std::int64_t>(std::llround(t * 1e9));
      if (ns > length_ns) break;
      if (ns <= 0 || (!times.empty() && ns <= times.back())) continue;
      times.push_back(ns);
    }
    return times;
  };
  std::vector<std::vector<std::int64_t>> obs(n);
  for (std::size_t a = 0; a < n; ++a)
    obs[a] = (spec.shared_observation_times && a > 0) ? obs[0] : poisson_times(a);

  std::vector<std::int64_t> grid{0, length_ns};
  for (const auto& o : obs) grid.insert(grid.end(), o.begin(), o.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<Rng> noise;
  noise.reserve(n);
  for (std::size_t a = 0; a < n; ++a) noise.emplace_back(spec.seed, a, kNoiseStream);

  // x is the log-price relative to initial_price, so an unmoved path
  // reports exactly initial_price
  const double log_initial = std::log(spec.initial_price);
  std::vector<double> x(n, 0.0);
  if (!start_log_price.empty())
    for (std::size_t a = 0; a < n; ++a) x[a] = start_log_price.at(a) - log_initial;
  std::vector<std::vector<Tick>> out(n);
  std::vector<std::size_t> cursor(n, 0);
  std::vector<double> z(n);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (g > 0) {
      const double dt = static_cast<double>(grid[g] - grid[g - 1]) * 1e-9;
      const double sqdt = std::sqrt(dt);
      for (std::size_t a = 0; a < n; ++a) z[a] = noise[a].normal();
      for (std::size_t a = 0; a < n; ++a) {
        double w = 0.0;
        for (std::size_t b = 0; b <= a; ++b) w += chol(a, b) * z[b];
        x[a] += spec.drift[a] * dt + spec.volatility[a] * sqdt * w;
      }
    }
    for (std::size_t a = 0; a < n; ++a)
      if (cursor[a] < obs[a].size() && obs[a][cursor[a]] == grid[g]) {
        out[a].push_back({spec.session_start + Duration{grid[g]}, spec.initial_price * std::exp(x[a])});
        ++cursor[a];
      }
  }

  SimulatedPaths paths;
  for (std::size_t a = 0; a < n; ++a) paths.ticks.emplace_back(spec.symbols[a], std::move(out[a]));
  for (double& v : x) v += log_initial;
  paths.final_log_price = x;
  return paths;
}

inline std::vector<TickSeries> simulate_asynchronous_ticks(const DiffusionSpec& spec) {
  return simulate_paths(spec).ticks;
}

// Multi-day intraday ticks with an equicorrelation that may change from bin
// to bin. Each bin is an independent constant-coefficient segment that
// continues the previous segment's latent price; days continue the previous
// close. Observations exist only inside sessions.
struct IntradaySynthSpec {
  std::vector<std::string> symbols;
  BinGrid grid;
  std::vector<double> rho_of_bin;  // one per bin
  double volatility = 1e-4;        // per sqrt(second)
  double observation_rate = 0.1;   // per second
  double initial_price = 100.0;
  std::uint64_t seed = 0;
};

inline std::vector<TickSeries> simulate_intraday_ticks(const IntradaySynthSpec& spec) {
  const std::size_t n = spec.symbols.size();
  const std::size_t K = spec.grid.bins();
  if (n == 0) throw validation_error("synthetic session needs at least one symbol");
  if (spec.rho_of_bin.size() != K) throw validation_error("rho_of_bin needs one value per bin");
  std::vector<std::vector<Tick>> all(n);
  std::vector<double> level(n, std::log(spec.initial_price));
  const double width = std::chrono::duration<double>(spec.grid.bin_width()).count();
  for (std::size_t t = 0; t < spec.grid.days(); ++t)
    for (std::size_t k = 0; k < K; ++k) {
      DiffusionSpec seg = DiffusionSpec::equicorrelated(n, spec.rho_of_bin[k], spec.volatility,
                                                        spec.observation_rate, width,
                                                        stream_seed(spec.seed, t, k));
      seg.symbols = spec.symbols;
      seg.session_start = spec.grid.boundary(t, k);
      seg.observe_at_start = (k == 0);
      seg.initial_price = spec.initial_price;
      auto paths = simulate_paths(seg, level);
      level = paths.final_log_price;
      for (std::size_t a = 0; a < n; ++a) {
        const auto ticks = paths.ticks[a].ticks();
        all[a].insert(all[a].end(), ticks.begin(), ticks.end());
      }
    }
  std::vector<TickSeries> out;
  for (std::size_t a = 0; a < n; ++a) out.emplace_back(spec.symbols[a], std::move(all[a]));
  return out;
}

// Consecutive calendar days starting at `first`.
inline std::vector<Date> consecutive_days(Date first, std::size_t count) {
  std::vector<Date> out;
  const std::chrono::sys_days start{first};
  for (std::size_t t = 0; t < count; ++t)
    out.emplace_back(start + std::chrono::days{static_cast<int>(t)});
  return out;
}

// One-factor panel: r_i(k;t) = sqrt(rho(k)) f(k;t) + sqrt(1 - rho(k)) e_i(k;t)
// with standard normal f and e, so the population correlation in bin k is
// rho(k). Asset i draws from stream i + 1, the factor from stream 0.
inline BinnedReturnPanel simulate_planted_panel(const std::vector<std::string>& symbols,
                                                const BinGrid& grid,
                                                const std::vector<double>& rho_of_k,
                                                std::uint64_t seed) {
  const std::size_t K = grid.bins(), T = grid.days();
  if (rho_of_k.size() != K) throw validation_error("rho_of_k needs one value per bin");
  for (double r : rho_of_k)
    if (!(r >= 0.0 && r < 1.0)) throw validation_error("planted correlation must lie in [0, 1)");
  std::vector<double> factor(K * T);
  Rng frng(seed, 0);
  for (double& f : factor) f = frng.normal();
  BinnedReturnPanel panel(symbols, grid);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    Rng rng(seed, i + 1);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t t = 0; t < T; ++t)
        panel.at(i, k, t) = std::sqrt(rho_of_k[k]) * factor[k * T + t] +
                            std::sqrt(1.0 - rho_of_k[k]) * rng.normal();
  }
  return panel;
}

// Convenience grid for planted panels: K five-minute bins from 10:00, T
// consecutive days from 2011-03-01.
inline BinGrid planted_grid(std::size_t K, std::size_t T) {
  using namespace std::chrono;
  return BinGrid(hours{10}, hours{10} + minutes{5} * static_cast<int>(K), minutes{5},
                 consecutive_days(year{2011} / March / 1, T));
}

inline BinnedReturnPanel simulate_planted_panel(std::size_t n_assets, std::size_t K,
                                                std::size_t T,
                                                const std::vector<double>& rho_of_k,
                                                std::uint64_t seed) {
  return simulate_planted_panel(default_symbols(n_assets), planted_grid(K, T), rho_of_k, seed);
}

// Daily log returns, equicorrelated with a per-day correlation rho_of_day
// and common volatility. Returns one vector per asset.
inline std::vector<std::vector<double>> simulate_daily_returns(
    std::size_t n_assets, const std::vector<double>& rho_of_day, double volatility,
    std::uint64_t seed) {
  const std::size_t T = rho_of_day.size();
  Rng frng(seed, 0);
  std::vector<double> factor(T);
  for (double& f : factor) f = frng.normal();
  std::vector<std::vector<double>> out(n_assets, std::vector<double>(T));
  for (std::size_t i = 0; i < n_assets; ++i) {
    Rng rng(seed, i + 1);
    for (std::size_t t = 0; t < T; ++t) {
      const double rho = rho_of_day[t];
      if (!(rho >= 0.0 && rho <= 1.0)) throw validation_error("daily correlation must lie in [0, 1]");
      out[i][t] = volatility * (std::sqrt(rho) * factor[t] + std::sqrt(1.0 - rho) * rng.normal());
    }
  }
  return out;
}

}  // namespace corrmap
