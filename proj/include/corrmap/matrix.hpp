#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corrmap/error.hpp"

namespace corrmap {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// Dense row-major n x n matrix.
template <typename T>
class Square {
 public:
  Square() = default;
  explicit Square(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}

  static Square identity(std::size_t n) {
    Square m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t size() const { return n_; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  std::span<const T> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  friend bool operator==(const Square&, const Square&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

using SquareMatrix = Square<double>;
using CountMatrix = Square<std::size_t>;

inline double max_abs_difference(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.size() != b.size()) throw validation_error("matrix dimensions differ");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k)
    worst = std::max(worst, std::abs(a.data()[k] - b.data()[k]));
  return worst;
}

enum class Estimator { pearson_binned, pearson_daily, realized, hayashi_yoshida };

inline std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::pearson_binned: return "pearson-binned";
    case Estimator::pearson_daily: return "pearson-daily";
    case Estimator::realized: return "realized";
    case Estimator::hayashi_yoshida: return "hayashi-yoshida";
  }
  return "unknown";
}

inline Estimator estimator_from_string(std::string_view s) {
  for (auto e : {Estimator::pearson_binned, Estimator::pearson_daily, Estimator::realized,
                 Estimator::hayashi_yoshida})
    if (to_string(e) == s) return e;
  throw validation_error("unknown estimator '" + std::string(s) + "'");
}

// Overshoot beyond [-1, 1] that is silently absorbed by clipping.
inline constexpr double kClipTolerance = 1e-9;

// Clips a correlation estimate to [-1, 1]. NaN passes through. Overshoot
// larger than kClipTolerance indicates a bug upstream and throws.
inline double clip_correlation(double rho) {
  if (is_missing(rho)) return rho;
  if (std::abs(rho) > 1.0 + kClipTolerance)
    throw numerical_error("correlation " + std::to_string(rho) + " outside [-1, 1]");
  return std::clamp(rho, -1.0, 1.0);
}

// Symmetric N x N correlation matrix with unit diagonal. Off-diagonal
// entries may be NaN where the estimator could not define them.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;

  CorrelationMatrix(std::vector<std::string> symbols, SquareMatrix values, Estimator estimator,
                    CountMatrix support = {}, bool averaged = false)
      : symbols_(std::move(symbols)),
        values_(std::move(values)),
        support_(std::move(support)),
        estimator_(estimator),
        averaged_(averaged) {
    const std::size_t n = symbols_.size();
    if (values_.size() != n) throw validation_error("correlation matrix size does not match symbols");
    if (support_.size() == 0) support_ = CountMatrix(n);
    if (support_.size() != n) throw validation_error("support matrix size does not match symbols");
    for (std::size_t i = 0; i < n; ++i) {
      values_(i, i) = 1.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double a = values_(i, j), b = values_(j, i);
        if (is_missing(a) != is_missing(b) || (!is_missing(a) && std::abs(a - b) > 1e-12))
          throw validation_error("correlation matrix is not symmetric at (" + std::to_string(i) +
                                 ", " + std::to_string(j) + ")");
        const double v = clip_correlation(a);
        values_(i, j) = v;
        values_(j, i) = v;
      }
    }
  }

  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const SquareMatrix& values() const { return values_; }
  const CountMatrix& support() const { return support_; }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  Estimator estimator() const { return estimator_; }
  bool averaged() const { return averaged_; }

  std::string tag() const {
    std::string t(to_string(estimator_));
    return averaged_ ? t + "+averaged" : t;
  }

  bool has_undefined() const {
    for (double v : values_.data())
      if (is_missing(v)) return true;
    return false;
  }

 private:
  std::vector<std::string> symbols_;
  SquareMatrix values_;
  CountMatrix support_;
  Estimator estimator_ = Estimator::pearson_daily;
  bool averaged_ = false;
};

// Symmetric N x N distance matrix, zero diagonal, entries in [0, 2].
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  DistanceMatrix(std::vector<std::string> symbols, SquareMatrix values)
      : symbols_(std::move(symbols)), values_(std::move(values)) {
    const std::size_t n = symbols_.size();
    if (values_.size() != n) throw validation_error("distance matrix size does not match symbols");
    for (std::size_t i = 0; i < n; ++i) {
      if (values_(i, i) != 0.0) throw validation_error("distance matrix diagonal must be zero");
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = values_(i, j);
        if (!(v >= 0.0 && v <= 2.0))
          throw validation_error("distance " + std::to_string(v) + " outside [0, 2]");
        if (v != values_(j, i)) throw validation_error("distance matrix is not symmetric");
      }
    }
  }

  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const SquareMatrix& values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }

 private:
  std::vector<std::string> symbols_;
  SquareMatrix values_;
};

inline std::vector<std::string> default_symbols(std::size_t n, std::string_view prefix = "S") {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(prefix) + std::to_string(i));
  return out;
}

}  // namespace corrmap
