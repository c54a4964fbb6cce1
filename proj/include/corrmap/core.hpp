#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrmap/error.hpp"
#include "corrmap/matrix.hpp"

namespace corrmap {

using Duration = std::chrono::nanoseconds;
using Timestamp = std::chrono::sys_time<Duration>;
using Date = std::chrono::year_month_day;

inline Timestamp timestamp_from_ns(std::int64_t ns) { return Timestamp{Duration{ns}}; }
inline std::int64_t to_ns(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp start_of_day(Date d) { return Timestamp{std::chrono::sys_days{d}}; }
inline Date date_of(Timestamp t) { return Date{std::chrono::floor<std::chrono::days>(t)}; }

inline Duration seconds_to_duration(double seconds) {
  return Duration{static_cast<std::int64_t>(std::llround(seconds * 1e9))};
}

struct Tick {
  Timestamp time;
  double price;
};

struct LogPrice {
  Timestamp time;
  double value;
};

// Natural log of each price. Rejects non-positive or non-finite prices,
// naming the offending index.
inline std::vector<LogPrice> log_price_series(std::span<const Tick> ticks) {
  std::vector<LogPrice> out;
  out.reserve(ticks.size());
  for (std::size_t m = 0; m < ticks.size(); ++m) {
    const double p = ticks[m].price;
    if (!(p > 0.0) || !std::isfinite(p))
      throw validation_error("non-positive price " + std::to_string(p) + " at index " +
                             std::to_string(m));
    out.push_back({ticks[m].time, std::log(p)});
  }
  return out;
}

// One instrument's irregular observations: strictly increasing timestamps,
// strictly positive prices.
class TickSeries {
 public:
  TickSeries() = default;

  TickSeries(std::string symbol, std::vector<Tick> ticks)
      : symbol_(std::move(symbol)), ticks_(std::move(ticks)) {
    for (std::size_t m = 0; m < ticks_.size(); ++m) {
      const double p = ticks_[m].price;
      if (!(p > 0.0) || !std::isfinite(p))
        throw validation_error(symbol_ + ": non-positive price " + std::to_string(p) +
                               " at index " + std::to_string(m));
      if (m > 0 && !(ticks_[m - 1].time < ticks_[m].time))
        throw validation_error(symbol_ + ": timestamps not strictly increasing at index " +
                               std::to_string(m));
    }
  }

  const std::string& symbol() const { return symbol_; }
  std::span<const Tick> ticks() const { return ticks_; }
  std::size_t size() const { return ticks_.size(); }
  bool empty() const { return ticks_.empty(); }
  const Tick& operator[](std::size_t m) const { return ticks_[m]; }

  Timestamp first_time() const { return ticks_.front().time; }
  Timestamp last_time() const { return ticks_.back().time; }

  // Observations with time in the closed range [from, to].
  TickSeries slice(Timestamp from, Timestamp to) const {
    auto lo = std::lower_bound(ticks_.begin(), ticks_.end(), from,
                               [](const Tick& t, Timestamp v) { return t.time < v; });
    auto hi = std::upper_bound(ticks_.begin(), ticks_.end(), to,
                               [](Timestamp v, const Tick& t) { return v < t.time; });
    TickSeries out;
    out.symbol_ = symbol_;
    if (lo < hi) out.ticks_.assign(lo, hi);
    return out;
  }

  // Index of the last observation at or before `t`, or -1 if none.
  std::ptrdiff_t last_at_or_before(Timestamp t) const {
    auto it = std::upper_bound(ticks_.begin(), ticks_.end(), t,
                               [](Timestamp v, const Tick& tk) { return v < tk.time; });
    return static_cast<std::ptrdiff_t>(it - ticks_.begin()) - 1;
  }

 private:
  std::string symbol_;
  std::vector<Tick> ticks_;
};

inline std::vector<LogPrice> log_price_series(const TickSeries& ticks) {
  return log_price_series(ticks.ticks());
}

// Intraday session split into K equal bins, repeated over trading days.
// Times of day are offsets from midnight UTC.
class BinGrid {
 public:
  BinGrid() = default;

  BinGrid(Duration session_start, Duration session_end, Duration bin_width,
          std::vector<Date> trading_days)
      : session_start_(session_start),
        session_end_(session_end),
        bin_width_(bin_width),
        days_(std::move(trading_days)) {
    if (bin_width_ <= Duration::zero()) throw validation_error("bin width must be positive");
    if (session_end_ <= session_start_)
      throw validation_error("session end must be after session start (K would be 0)");
    if ((session_end_ - session_start_) % bin_width_ != Duration::zero())
      throw validation_error("bin width does not divide the session length");
    for (std::size_t t = 1; t < days_.size(); ++t)
      if (!(days_[t - 1] < days_[t]))
        throw validation_error("trading days must be strictly increasing");
    for (const auto& d : days_)
      if (!d.ok()) throw validation_error("invalid trading date");
  }

  Duration session_start() const { return session_start_; }
  Duration session_end() const { return session_end_; }
  Duration bin_width() const { return bin_width_; }
  const std::vector<Date>& trading_days() const { return days_; }

  std::size_t bins() const {
    return static_cast<std::size_t>((session_end_ - session_start_) / bin_width_);
  }
  std::size_t days() const { return days_.size(); }

  // Boundary k in 0..K of day t; bin k covers (boundary(t,k), boundary(t,k+1)].
  Timestamp boundary(std::size_t t, std::size_t k) const {
    return start_of_day(days_[t]) + session_start_ + static_cast<std::int64_t>(k) * bin_width_;
  }

  BinGrid coarsened(std::size_t factor) const {
    return BinGrid(session_start_, session_end_, bin_width_ * static_cast<std::int64_t>(factor),
                   days_);
  }

  friend bool operator==(const BinGrid&, const BinGrid&) = default;

 private:
  Duration session_start_{};
  Duration session_end_{};
  Duration bin_width_{1};
  std::vector<Date> days_;
};

// Returns r[i][k][t] for N symbols, K bins, T days. NaN marks a missing cell.
class BinnedReturnPanel {
 public:
  BinnedReturnPanel() = default;

  BinnedReturnPanel(std::vector<std::string> symbols, BinGrid grid, std::vector<double> returns)
      : symbols_(std::move(symbols)), grid_(std::move(grid)), returns_(std::move(returns)) {
    if (symbols_.empty()) throw validation_error("panel needs at least one symbol");
    if (returns_.size() != symbols_.size() * grid_.bins() * grid_.days())
      throw validation_error("panel data does not have N x K x T entries");
  }

  // All-missing panel of the right shape.
  BinnedReturnPanel(std::vector<std::string> symbols, BinGrid grid)
      : BinnedReturnPanel(symbols, grid,
                          std::vector<double>(symbols.size() * grid.bins() * grid.days(),
                                              kMissing)) {}

  std::size_t stocks() const { return symbols_.size(); }
  std::size_t bins() const { return grid_.bins(); }
  std::size_t days() const { return grid_.days(); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const BinGrid& grid() const { return grid_; }
  std::span<const double> values() const { return returns_; }

  double operator()(std::size_t i, std::size_t k, std::size_t t) const {
    return returns_[index(i, k, t)];
  }
  double& at(std::size_t i, std::size_t k, std::size_t t) { return returns_[index(i, k, t)]; }

  bool missing(std::size_t i, std::size_t k, std::size_t t) const {
    return is_missing((*this)(i, k, t));
  }

  std::size_t index(std::size_t i, std::size_t k, std::size_t t) const {
    return (i * bins() + k) * days() + t;
  }

 private:
  std::vector<std::string> symbols_;
  BinGrid grid_;
  std::vector<double> returns_;
};

// Previous-tick log returns on the grid. Anchors are the last tick of the
// same calendar day at or before each bin boundary; a bin whose start or end
// anchor does not exist is missing. Returns never span two days.
inline BinnedReturnPanel bin_panel(std::span<const TickSeries> series, const BinGrid& grid) {
  if (series.empty()) throw validation_error("bin_panel: empty symbol list");
  if (grid.days() == 0) throw insufficient_data("bin_panel: grid has no trading days");
  std::vector<std::string> symbols;
  for (const auto& s : series) symbols.push_back(s.symbol());
  BinnedReturnPanel panel(symbols, grid);

  const std::size_t K = grid.bins();
  std::vector<double> anchors(K + 1);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& ticks = series[i];
    const auto logs = log_price_series(ticks);
    for (std::size_t t = 0; t < grid.days(); ++t) {
      const Timestamp midnight = start_of_day(grid.trading_days()[t]);
      for (std::size_t k = 0; k <= K; ++k) {
        const auto m = ticks.last_at_or_before(grid.boundary(t, k));
        anchors[k] = (m >= 0 && ticks[static_cast<std::size_t>(m)].time >= midnight)
                         ? logs[static_cast<std::size_t>(m)].value
                         : kMissing;
      }
      for (std::size_t k = 0; k < K; ++k) panel.at(i, k, t) = anchors[k + 1] - anchors[k];
    }
  }
  return panel;
}

inline BinnedReturnPanel bin_panel(const std::vector<TickSeries>& series, const BinGrid& grid) {
  return bin_panel(std::span<const TickSeries>(series), grid);
}

// Sums `factor` consecutive bins, e.g. 5-minute into 30-minute returns.
// The aggregate is missing if any constituent is.
inline BinnedReturnPanel aggregate_bins(const BinnedReturnPanel& panel, std::size_t factor) {
  if (factor == 0 || panel.bins() % factor != 0)
    throw validation_error("aggregation factor must divide the number of bins");
  BinnedReturnPanel out(panel.symbols(), panel.grid().coarsened(factor));
  for (std::size_t i = 0; i < panel.stocks(); ++i)
    for (std::size_t k = 0; k < out.bins(); ++k)
      for (std::size_t t = 0; t < panel.days(); ++t) {
        double sum = 0.0;
        for (std::size_t j = 0; j < factor; ++j) sum += panel(i, k * factor + j, t);
        out.at(i, k, t) = sum;
      }
  return out;
}

}  // namespace corrmap
