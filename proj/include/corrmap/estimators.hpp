#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrmap/core.hpp"
#include "corrmap/error.hpp"
#include "corrmap/matrix.hpp"
#include "corrmap/parallel.hpp"

namespace corrmap {

// ---------------------------------------------------------------------------
// Temporal moments per (stock, bin): averages over days.
// ---------------------------------------------------------------------------

struct BinMoments {
  std::size_t stocks = 0;
  std::size_t bins = 0;
  std::vector<double> mu;     // N x K, NaN if no observed day
  std::vector<double> sigma;  // N x K, NaN if fewer than two observed days

  double mean(std::size_t i, std::size_t k) const { return mu[i * bins + k]; }
  double volatility(std::size_t i, std::size_t k) const { return sigma[i * bins + k]; }

  // Cross-sectional average of sigma_i(k) over stocks with a defined value.
  std::vector<double> average_volatility() const {
    std::vector<double> out(bins, kMissing);
    for (std::size_t k = 0; k < bins; ++k) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < stocks; ++i)
        if (!is_missing(volatility(i, k))) {
          sum += volatility(i, k);
          ++n;
        }
      if (n > 0) out[k] = sum / static_cast<double>(n);
    }
    return out;
  }
};

namespace detail {

// A spread below this fraction of the largest magnitude is rounding noise
// from a constant sample, e.g. mean(0.01, 0.01, 0.01) != 0.01 in binary.
inline constexpr double kFlatTolerance = 1e-13;

// Population mean and standard deviation of the non-missing values.
struct MeanSd {
  double mean = kMissing;
  double sd = kMissing;
  std::size_t count = 0;
};

template <typename Range>
MeanSd population_moments(const Range& values) {
  MeanSd out;
  double sum = 0.0, max_abs = 0.0;
  for (double v : values)
    if (!is_missing(v)) {
      sum += v;
      max_abs = std::max(max_abs, std::abs(v));
      ++out.count;
    }
  if (out.count == 0) return out;
  out.mean = sum / static_cast<double>(out.count);
  if (out.count < 2) return out;
  double ss = 0.0;
  for (double v : values)
    if (!is_missing(v)) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(out.count));
  if (out.sd <= kFlatTolerance * max_abs) out.sd = 0.0;
  return out;
}

}  // namespace detail

// mu_i(k) = <r_i(k;t)>, sigma_i^2(k) = <r^2> - mu^2 over observed days.
inline BinMoments temporal_moments(const BinnedReturnPanel& panel) {
  BinMoments out;
  out.stocks = panel.stocks();
  out.bins = panel.bins();
  out.mu.assign(out.stocks * out.bins, kMissing);
  out.sigma.assign(out.stocks * out.bins, kMissing);
  std::vector<double> column(panel.days());
  for (std::size_t i = 0; i < panel.stocks(); ++i)
    for (std::size_t k = 0; k < panel.bins(); ++k) {
      for (std::size_t t = 0; t < panel.days(); ++t) column[t] = panel(i, k, t);
      const auto m = detail::population_moments(column);
      out.mu[i * out.bins + k] = m.mean;
      out.sigma[i * out.bins + k] = m.sd;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-sectional dispersion per (bin, day): averages over stocks.
// ---------------------------------------------------------------------------

struct DispersionSeries {
  std::size_t bins = 0;
  std::size_t days = 0;
  std::vector<double> mu_d;     // K x T
  std::vector<double> sigma_d;  // K x T

  double mean(std::size_t k, std::size_t t) const { return mu_d[k * days + t]; }
  double dispersion(std::size_t k, std::size_t t) const { return sigma_d[k * days + t]; }

  // <sigma_d(k;t)> over days with a defined dispersion.
  std::vector<double> mean_dispersion() const { return day_average(sigma_d, false); }

  // <|mu_d(k;t)|>, the index-volatility proxy.
  std::vector<double> mean_abs_index_return() const { return day_average(mu_d, true); }

 private:
  std::vector<double> day_average(const std::vector<double>& src, bool absolute) const {
    std::vector<double> out(bins, kMissing);
    for (std::size_t k = 0; k < bins; ++k) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t t = 0; t < days; ++t) {
        const double v = src[k * days + t];
        if (is_missing(v)) continue;
        sum += absolute ? std::abs(v) : v;
        ++n;
      }
      if (n > 0) out[k] = sum / static_cast<double>(n);
    }
    return out;
  }
};

inline DispersionSeries dispersion(const BinnedReturnPanel& panel) {
  DispersionSeries out;
  out.bins = panel.bins();
  out.days = panel.days();
  out.mu_d.assign(out.bins * out.days, kMissing);
  out.sigma_d.assign(out.bins * out.days, kMissing);
  std::vector<double> cross(panel.stocks());
  for (std::size_t k = 0; k < panel.bins(); ++k)
    for (std::size_t t = 0; t < panel.days(); ++t) {
      for (std::size_t i = 0; i < panel.stocks(); ++i) cross[i] = panel(i, k, t);
      const auto m = detail::population_moments(cross);
      out.mu_d[k * out.days + t] = m.mean;
      out.sigma_d[k * out.days + t] = m.sd;
    }
  return out;
}

// r_hat_i(k;t) = r_i(k;t) / sigma_d(k;t). Cells whose dispersion is zero or
// undefined become missing and are counted in the diagnostics.
inline BinnedReturnPanel normalize_panel(const BinnedReturnPanel& panel,
                                         const DispersionSeries& disp,
                                         Diagnostics* diag = nullptr) {
  if (disp.bins != panel.bins() || disp.days != panel.days())
    throw validation_error("dispersion series does not match panel shape");
  std::vector<double> out(panel.values().begin(), panel.values().end());
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < panel.stocks(); ++i)
    for (std::size_t k = 0; k < panel.bins(); ++k)
      for (std::size_t t = 0; t < panel.days(); ++t) {
        double& r = out[panel.index(i, k, t)];
        if (is_missing(r)) continue;
        const double s = disp.dispersion(k, t);
        if (is_missing(s) || s == 0.0) {
          r = kMissing;
          ++dropped;
        } else {
          r /= s;
        }
      }
  if (dropped > 0) {
    note(diag, "normalize_panel: " + std::to_string(dropped) +
                   " cells with zero or undefined dispersion marked missing");
    if (diag) diag->dropped_cells += dropped;
  }
  return BinnedReturnPanel(panel.symbols(), panel.grid(), std::move(out));
}

// ---------------------------------------------------------------------------
// Pearson correlation over pairwise-complete samples.
// ---------------------------------------------------------------------------

struct PairwiseCorrelation {
  double rho = kMissing;
  std::size_t support = 0;
};

// Population-convention Pearson coefficient of the samples where both a and
// b are present. Undefined (NaN) with fewer than two common samples or a
// zero variance.
inline PairwiseCorrelation pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw validation_error("pearson: series lengths differ");
  PairwiseCorrelation out;
  double sa = 0.0, sb = 0.0, ma_abs = 0.0, mb_abs = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (!is_missing(a[t]) && !is_missing(b[t])) {
      sa += a[t];
      sb += b[t];
      ma_abs = std::max(ma_abs, std::abs(a[t]));
      mb_abs = std::max(mb_abs, std::abs(b[t]));
      ++out.support;
    }
  if (out.support < 2) return out;
  const double n = static_cast<double>(out.support);
  const double ma = sa / n, mb = sb / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (!is_missing(a[t]) && !is_missing(b[t])) {
      const double da = a[t] - ma, db = b[t] - mb;
      cov += da * db;
      va += da * da;
      vb += db * db;
    }
  const double flat = detail::kFlatTolerance * detail::kFlatTolerance * n;
  if (va <= flat * ma_abs * ma_abs || vb <= flat * mb_abs * mb_abs) return out;
  out.rho = clip_correlation(cov / (std::sqrt(va) * std::sqrt(vb)));
  return out;
}

namespace detail {

inline CorrelationMatrix pearson_matrix(const std::vector<std::vector<double>>& series,
                                        const std::vector<std::string>& symbols,
                                        Estimator tag, const std::string& context,
                                        Diagnostics* diag) {
  const std::size_t n = series.size();
  SquareMatrix values(n, kMissing);
  CountMatrix support(n);
  std::vector<bool> flat(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = population_moments(series[i]);
    flat[i] = !(m.sd > 0.0);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto pc = pearson(series[i], series[j]);
      values(i, j) = values(j, i) = pc.rho;
      support(i, j) = support(j, i) = pc.support;
    }
  for (std::size_t i = 0; i < n; ++i) {
    support(i, i) = 0;
    for (double v : series[i])
      if (!is_missing(v)) ++support(i, i);
    if (flat[i]) note(diag, context + ": " + symbols[i] + " has zero variance; row undefined");
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (!flat[i] && !flat[j] && is_missing(values(i, j)))
        note(diag, context + ": pair " + symbols[i] + "/" + symbols[j] +
                       " has fewer than two common samples");
  return CorrelationMatrix(symbols, std::move(values), tag, std::move(support));
}

}  // namespace detail

// rho_ij(k) across days for bin k of a normalized panel.
inline CorrelationMatrix binwise_correlation(const BinnedReturnPanel& norm_panel, std::size_t k,
                                             Diagnostics* diag = nullptr) {
  if (k >= norm_panel.bins()) throw validation_error("bin index out of range");
  std::vector<std::vector<double>> series(norm_panel.stocks(),
                                          std::vector<double>(norm_panel.days()));
  for (std::size_t i = 0; i < norm_panel.stocks(); ++i)
    for (std::size_t t = 0; t < norm_panel.days(); ++t) series[i][t] = norm_panel(i, k, t);
  return detail::pearson_matrix(series, norm_panel.symbols(), Estimator::pearson_binned,
                                "bin " + std::to_string(k), diag);
}

struct WindowSpec {
  std::size_t width = 0;  // trading days per window
  std::size_t step = 0;   // displacement between consecutive windows

  WindowSpec(std::size_t width_days, std::size_t step_days) : width(width_days), step(step_days) {
    if (width < 2) throw validation_error("window width must be at least 2 days");
    if (step < 1) throw validation_error("window step must be at least 1 day");
  }

  std::size_t count(std::size_t total) const {
    return total < width ? 0 : (total - width) / step + 1;
  }
};

// Pearson matrices over windows [w*step, w*step + width) of equal-length
// daily return series (one vector per symbol).
inline std::vector<CorrelationMatrix> pearson_windowed(
    const std::vector<std::vector<double>>& daily_returns, const std::vector<std::string>& symbols,
    const WindowSpec& spec, Diagnostics* diag = nullptr) {
  if (daily_returns.size() != symbols.size())
    throw validation_error("pearson_windowed: one return series per symbol required");
  if (daily_returns.empty()) throw validation_error("pearson_windowed: no symbols");
  const std::size_t total = daily_returns.front().size();
  for (const auto& s : daily_returns)
    if (s.size() != total) throw validation_error("pearson_windowed: series lengths differ");
  const std::size_t windows = spec.count(total);
  if (windows == 0)
    throw insufficient_data("pearson_windowed: " + std::to_string(total) +
                            " returns is shorter than the window width " +
                            std::to_string(spec.width));
  std::vector<CorrelationMatrix> out;
  out.reserve(windows);
  std::vector<std::vector<double>> slice(symbols.size());
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t begin = w * spec.step;
    for (std::size_t i = 0; i < symbols.size(); ++i)
      slice[i].assign(daily_returns[i].begin() + static_cast<std::ptrdiff_t>(begin),
                      daily_returns[i].begin() + static_cast<std::ptrdiff_t>(begin + spec.width));
    out.push_back(detail::pearson_matrix(slice, symbols, Estimator::pearson_daily,
                                         "window " + std::to_string(w), diag));
  }
  return out;
}

// Mean of the strictly-upper-triangle entries; undefined entries are skipped
// and reported. NaN if nothing is defined.
inline double average_pairwise_correlation(const CorrelationMatrix& m,
                                           Diagnostics* diag = nullptr) {
  const std::size_t n = m.size();
  if (n < 2) throw validation_error("average_pairwise_correlation needs N >= 2");
  double sum = 0.0;
  std::size_t count = 0, skipped = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (is_missing(m(i, j))) {
        ++skipped;
        continue;
      }
      sum += m(i, j);
      ++count;
    }
  if (skipped > 0)
    note(diag, "average_pairwise_correlation: " + std::to_string(skipped) +
                   " undefined entries excluded");
  return count > 0 ? sum / static_cast<double>(count) : kMissing;
}

// ---------------------------------------------------------------------------
// Tick-level covariance estimators.
// ---------------------------------------------------------------------------

struct CovarianceEstimate {
  double covariance = 0.0;
  double correlation = kMissing;  // NaN if either series has zero variation
  std::size_t support = 0;        // number of increment products summed
};

// Previous-tick samples of both series on a regular grid starting at the
// later first observation and ending at or before the earlier last one.
inline CovarianceEstimate realized_covariance(const TickSeries& x, const TickSeries& y,
                                              Duration sample_interval) {
  if (sample_interval <= Duration::zero())
    throw validation_error("realized_covariance: sample interval must be positive");
  if (x.empty() || y.empty()) throw insufficient_data("realized_covariance: empty series");
  const Timestamp start = std::max(x.first_time(), y.first_time());
  const Timestamp end = std::min(x.last_time(), y.last_time());
  if (end < start || (end - start) < sample_interval)
    throw insufficient_data("realized_covariance: fewer than 2 grid points for " + x.symbol() +
                            "/" + y.symbol());
  const auto lx = log_price_series(x);
  const auto ly = log_price_series(y);
  std::size_t ix = 0, iy = 0;
  auto sample = [](const std::vector<LogPrice>& logs, std::size_t& cursor, Timestamp g) {
    while (cursor + 1 < logs.size() && logs[cursor + 1].time <= g) ++cursor;
    return logs[cursor].value;
  };
  CovarianceEstimate out;
  double px = sample(lx, ix, start), py = sample(ly, iy, start);
  double vx = 0.0, vy = 0.0;
  for (Timestamp g = start + sample_interval; g <= end; g += sample_interval) {
    const double nx = sample(lx, ix, g), ny = sample(ly, iy, g);
    const double dx = nx - px, dy = ny - py;
    out.covariance += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
    ++out.support;
    px = nx;
    py = ny;
  }
  if (vx > 0.0 && vy > 0.0) out.correlation = out.covariance / std::sqrt(vx * vy);
  return out;
}

// Hayashi-Yoshida: sums r^X_i r^Y_j over every pair of increment intervals
// (t_{i-1}, t_i] and (s_{j-1}, s_j] that overlap. The overlaps partition the
// time line, so a merge over both interval sequences visits each
// overlapping pair once, in chronological order. That order is the same for
// (x, y) and (y, x) and for the nested double loop, which keeps results
// bit-identical across all three.
//
// The correlation is not clipped: it is an estimator, not a Pearson
// coefficient, and may leave [-1, 1] on short samples.
inline CovarianceEstimate hayashi_yoshida(const TickSeries& x, const TickSeries& y) {
  if (x.size() < 2 || y.size() < 2)
    throw insufficient_data("hayashi_yoshida: " + (x.size() < 2 ? x.symbol() : y.symbol()) +
                            " has fewer than 2 observations");
  const auto lx = log_price_series(x);
  const auto ly = log_price_series(y);
  const std::size_t n = lx.size(), m = ly.size();

  CovarianceEstimate out;
  std::size_t i = 1, j = 1;
  while (i < n && j < m) {
    if (lx[i].time <= ly[j - 1].time) {
      ++i;
      continue;
    }
    if (ly[j].time <= lx[i - 1].time) {
      ++j;
      continue;
    }
    out.covariance += (lx[i].value - lx[i - 1].value) * (ly[j].value - ly[j - 1].value);
    ++out.support;
    if (lx[i].time < ly[j].time) {
      ++i;
    } else if (ly[j].time < lx[i].time) {
      ++j;
    } else {
      ++i;
      ++j;
    }
  }

  double vx = 0.0, vy = 0.0;
  for (std::size_t a = 1; a < n; ++a) vx += (lx[a].value - lx[a - 1].value) * (lx[a].value - lx[a - 1].value);
  for (std::size_t b = 1; b < m; ++b) vy += (ly[b].value - ly[b - 1].value) * (ly[b].value - ly[b - 1].value);
  if (vx > 0.0 && vy > 0.0) out.correlation = out.covariance / std::sqrt(vx * vy);
  return out;
}

// Pairwise tick-level correlation matrix (HY or realized). Pairs are
// independent and evaluated in parallel. Estimates outside [-1, 1] are
// clamped and noted; undefined pairs stay NaN.
inline CorrelationMatrix tick_correlation_matrix(std::span<const TickSeries> series,
                                                 Estimator estimator,
                                                 Duration sample_interval = Duration::zero(),
                                                 Diagnostics* diag = nullptr,
                                                 unsigned threads = 1) {
  if (estimator != Estimator::hayashi_yoshida && estimator != Estimator::realized)
    throw validation_error("tick_correlation_matrix supports hayashi-yoshida and realized only");
  const std::size_t n = series.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<CovarianceEstimate> est(pairs.size());
  std::vector<std::string> errors(pairs.size());
  parallel_for(
      pairs.size(),
      [&](std::size_t p) {
        const auto& x = series[pairs[p].first];
        const auto& y = series[pairs[p].second];
        try {
          est[p] = estimator == Estimator::hayashi_yoshida
                       ? hayashi_yoshida(x, y)
                       : realized_covariance(x, y, sample_interval);
        } catch (const insufficient_data& e) {
          errors[p] = e.what();
        }
      },
      threads);

  std::vector<std::string> symbols;
  for (const auto& s : series) symbols.push_back(s.symbol());
  SquareMatrix values(n, kMissing);
  CountMatrix support(n);
  std::size_t clipped = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    if (!errors[p].empty()) {
      note(diag, errors[p]);
      continue;
    }
    double rho = est[p].correlation;
    if (is_missing(rho)) {
      note(diag, symbols[i] + "/" + symbols[j] + ": zero variation, correlation undefined");
    } else if (std::abs(rho) > 1.0) {
      rho = std::clamp(rho, -1.0, 1.0);
      ++clipped;
    }
    values(i, j) = values(j, i) = rho;
    support(i, j) = support(j, i) = est[p].support;
  }
  for (std::size_t i = 0; i < n; ++i) support(i, i) = series[i].size();
  if (clipped > 0)
    note(diag, std::to_string(clipped) + " " + std::string(to_string(estimator)) +
                   " estimates outside [-1, 1] clamped");
  return CorrelationMatrix(std::move(symbols), std::move(values), estimator, std::move(support));
}

}  // namespace corrmap
