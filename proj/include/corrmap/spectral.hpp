#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "corrmap/error.hpp"
#include "corrmap/estimators.hpp"
#include "corrmap/matrix.hpp"
#include "corrmap/parallel.hpp"

namespace corrmap {

// Full spectrum of a correlation matrix. Eigenvalues are descending and
// column k of `eigenvectors` belongs to eigenvalues[k]; each eigenvector is
// signed so that its largest-magnitude component is positive.
struct EigenSpectrum {
  std::vector<std::string> symbols;
  std::vector<double> eigenvalues;
  SquareMatrix eigenvectors;
  Estimator source = Estimator::pearson_daily;
  bool averaged = false;

  std::size_t size() const { return eigenvalues.size(); }

  // V diag(lambda) V^T
  SquareMatrix reconstruct() const { return reconstruct(eigenvalues); }

  SquareMatrix reconstruct(const std::vector<double>& lambda) const {
    const std::size_t n = size();
    SquareMatrix out(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          s += eigenvectors(i, k) * lambda[k] * eigenvectors(j, k);
        out(i, j) = out(j, i) = s;
      }
    return out;
  }
};

struct JacobiResult {
  std::vector<double> eigenvalues;  // unsorted, diagonal of the rotated matrix
  SquareMatrix eigenvectors;        // columns
  std::size_t sweeps = 0;
};

// Cyclic Jacobi rotations on a symmetric matrix. Stops once the
// off-diagonal Frobenius norm falls below `tolerance`.
inline JacobiResult jacobi_eigen(SquareMatrix a, double tolerance = 1e-12,
                                 std::size_t max_sweeps = 100) {
  const std::size_t n = a.size();
  JacobiResult out;
  out.eigenvectors = SquareMatrix::identity(n);
  SquareMatrix& v = out.eigenvectors;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  while (off_norm() >= tolerance) {
    if (out.sweeps++ == max_sweeps)
      throw numerical_error("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) +
                            " sweeps");
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                    : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  out.eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.eigenvalues[i] = a(i, i);
  return out;
}

// Symmetric eigendecomposition, sorted descending with the sign convention.
inline EigenSpectrum eigendecompose(const SquareMatrix& m, std::vector<std::string> symbols) {
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (is_missing(m(i, j))) throw validation_error("eigendecompose: undefined entries present");
      if (std::abs(m(i, j) - m(j, i)) > 1e-12)
        throw validation_error("eigendecompose: matrix is not symmetric");
    }
  auto raw = jacobi_eigen(m);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return raw.eigenvalues[x] > raw.eigenvalues[y];
  });

  EigenSpectrum out;
  out.symbols = std::move(symbols);
  out.eigenvalues.resize(n);
  out.eigenvectors = SquareMatrix(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = raw.eigenvalues[src];
    std::size_t big = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(raw.eigenvectors(i, src)) > std::abs(raw.eigenvectors(big, src))) big = i;
    const double sign = raw.eigenvectors(big, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = sign * raw.eigenvectors(i, src);
  }
  return out;
}

inline EigenSpectrum eigendecompose(const CorrelationMatrix& m) {
  if (m.has_undefined()) throw validation_error("eigendecompose: undefined entries present");
  auto out = eigendecompose(m.values(), m.symbols());
  out.source = m.estimator();
  out.averaged = m.averaged();
  return out;
}

// lambda_1 / N, a proxy for the average pairwise correlation.
inline double market_mode_strength(const EigenSpectrum& spec) {
  if (spec.size() == 0) throw validation_error("market_mode_strength: empty spectrum");
  return spec.eigenvalues.front() / static_cast<double>(spec.size());
}

// Top `top` normalized eigenvalues lambda_i(k)/N for every bin of a raw
// return panel, after dispersion normalization. Bins are independent and
// run in parallel; a bin whose matrix has undefined entries throws,
// naming the bin.
inline std::vector<std::vector<double>> binwise_spectrum_series(const BinnedReturnPanel& panel,
                                                                std::size_t top = 7,
                                                                Diagnostics* diag = nullptr,
                                                                unsigned threads = 1) {
  Diagnostics local;
  const auto norm = normalize_panel(panel, dispersion(panel), &local);
  const std::size_t n = panel.stocks();
  const std::size_t keep = std::min(top, n);
  std::vector<std::vector<double>> out(panel.bins());
  std::vector<Diagnostics> per_bin(panel.bins());
  parallel_for(
      panel.bins(),
      [&](std::size_t k) {
        const auto c = binwise_correlation(norm, k, &per_bin[k]);
        if (c.has_undefined())
          throw insufficient_data("spectrum: bin " + std::to_string(k) +
                                  " has undefined correlations");
        const auto spec = eigendecompose(c);
        out[k].assign(spec.eigenvalues.begin(),
                      spec.eigenvalues.begin() + static_cast<std::ptrdiff_t>(keep));
        for (double& v : out[k]) v /= static_cast<double>(n);
      },
      threads);
  if (diag) {
    for (auto& m : local.messages) diag->note(m);
    diag->dropped_cells += local.dropped_cells;
    for (auto& d : per_bin)
      for (auto& m : d.messages) diag->note(m);
  }
  return out;
}

// Marchenko-Pastur clipping: eigenvalues below (1 + sqrt(q))^2, q = N/T,
// are replaced by their mean (which preserves the trace), then the matrix is
// rebuilt and rescaled to unit diagonal.
inline CorrelationMatrix clean_spectrum(const EigenSpectrum& spec, double q) {
  if (!(q > 0.0)) throw validation_error("clean_spectrum: q = N/T must be positive");
  const double edge = (1.0 + std::sqrt(q)) * (1.0 + std::sqrt(q));
  std::vector<double> lambda = spec.eigenvalues;
  double noise_sum = 0.0;
  std::size_t noise_count = 0;
  for (double l : lambda)
    if (l < edge) {
      noise_sum += l;
      ++noise_count;
    }
  if (noise_count > 0) {
    const double avg = noise_sum / static_cast<double>(noise_count);
    for (double& l : lambda)
      if (l < edge) l = avg;
  }
  SquareMatrix m = spec.reconstruct(lambda);
  const std::size_t n = m.size();
  std::vector<double> scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(m(i, i) > 0.0)) throw numerical_error("clean_spectrum: non-positive rebuilt variance");
    scale[i] = 1.0 / std::sqrt(m(i, i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i)) * scale[i] * scale[j];
      m(i, j) = m(j, i) = v;
    }
  }
  return CorrelationMatrix(spec.symbols, std::move(m), spec.source, {}, spec.averaged);
}

}  // namespace corrmap
