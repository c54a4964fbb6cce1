#pragma once

// Hand-rolled generators and independent oracles shared by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corrmap/corrmap.hpp"

namespace testing_support {

using namespace corrmap;

inline Timestamp at_seconds(double s) { return timestamp_from_ns(static_cast<std::int64_t>(std::llround(s * 1e9))); }

// Random tick series: strictly increasing integer-second times in [0, span]
// and a lognormal random walk.
inline TickSeries random_ticks(std::mt19937_64& g, std::size_t count, std::int64_t span_s,
                               const std::string& name) {
  std::uniform_int_distribution<std::int64_t> t(0, span_s);
  std::vector<std::int64_t> times;
  while (times.size() < count) {
    times.push_back(t(g));
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
  }
  std::normal_distribution<double> z(0.0, 0.01);
  double lp = std::log(100.0);
  std::vector<Tick> ticks;
  for (auto s : times) {
    lp += z(g);
    ticks.push_back({timestamp_from_ns(s * 1'000'000'000), std::exp(lp)});
  }
  return TickSeries(name, std::move(ticks));
}

// Pair of series observed at the same regular times.
inline std::pair<TickSeries, TickSeries> synchronous_pair(std::mt19937_64& g, std::size_t count) {
  std::normal_distribution<double> z(0.0, 0.01);
  double a = std::log(50.0), b = std::log(80.0);
  std::vector<Tick> x, y;
  for (std::size_t m = 0; m < count; ++m) {
    const double c = z(g), d = z(g);
    a += c;
    b += 0.6 * c + 0.8 * d;
    const auto t = timestamp_from_ns(static_cast<std::int64_t>(m) * 1'000'000'000);
    x.push_back({t, std::exp(a)});
    y.push_back({t, std::exp(b)});
  }
  return {TickSeries("X", std::move(x)), TickSeries("Y", std::move(y))};
}

// O(n m) Hayashi-Yoshida: every pair of overlapping increment intervals.
inline double brute_force_hy_covariance(const TickSeries& x, const TickSeries& y) {
  double cov = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    for (std::size_t j = 1; j < y.size(); ++j) {
      const bool overlap = x[i - 1].time < y[j].time && y[j - 1].time < x[i].time;
      if (overlap)
        cov += (std::log(x[i].price) - std::log(x[i - 1].price)) *
               (std::log(y[j].price) - std::log(y[j - 1].price));
    }
  return cov;
}

// Random correlation matrix from normalized Gram products of random vectors.
inline SquareMatrix random_correlation(std::mt19937_64& g, std::size_t n, std::size_t dims) {
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> v(n, std::vector<double>(dims));
  for (auto& row : v) {
    double norm = 0.0;
    for (double& x : row) {
      x = z(g);
      norm += x * x;
    }
    for (double& x : row) x /= std::sqrt(norm);
  }
  SquareMatrix c(n);
  for (std::size_t i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dims; ++k) s += v[i][k] * v[j][k];
      c(i, j) = c(j, i) = s;
    }
  }
  return c;
}

inline Eigen::MatrixXd to_eigen(const SquareMatrix& m) {
  Eigen::MatrixXd out(m.size(), m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) out(i, j) = m(i, j);
  return out;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t a = 0; a < idx.size();) {
    std::size_t b = a;
    while (b + 1 < idx.size() && v[idx[b + 1]] == v[idx[a]]) ++b;
    for (std::size_t c = a; c <= b; ++c) r[idx[c]] = 0.5 * static_cast<double>(a + b);
    a = b + 1;
  }
  return r;
}

inline double spearman_with_index(const std::vector<double>& v) {
  std::vector<double> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0.0);
  const auto a = ranks(v), b = ranks(idx);
  return pearson(a, b).rho;
}

// Random points uniformly in the unit disk.
inline EmbeddingMap planted_configuration(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  EmbeddingMap m;
  m.symbols = default_symbols(n);
  while (m.coords.size() < 2 * n) {
    const double x = u(g), y = u(g);
    if (x * x + y * y <= 1.0) {
      m.coords.push_back(x);
      m.coords.push_back(y);
    }
  }
  return m;
}

inline DistanceMatrix distances_of(const EmbeddingMap& m) {
  SquareMatrix d(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m.dim; ++k) s += (m.at(i, k) - m.at(j, k)) * (m.at(i, k) - m.at(j, k));
      d(i, j) = d(j, i) = std::sqrt(s);
    }
  return DistanceMatrix(m.symbols, d);
}

inline double diameter(const EmbeddingMap& m) {
  const auto d = distances_of(m);
  double best = 0.0;
  for (double v : d.values().data()) best = std::max(best, v);
  return best;
}

inline double mean_point_norm(const EmbeddingMap& m) { return mean_distance_from_center(m); }

}  // namespace testing_support
