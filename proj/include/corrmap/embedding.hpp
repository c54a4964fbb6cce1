#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "corrmap/error.hpp"
#include "corrmap/matrix.hpp"
#include "corrmap/random.hpp"

namespace corrmap {

// d_ij = sqrt(2 (1 - rho_ij)). Entries must be defined and inside [-1, 1]
// up to kClipTolerance.
inline DistanceMatrix to_distance(const CorrelationMatrix& m) {
  const std::size_t n = m.size();
  SquareMatrix d(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double rho = m(i, j);
      if (is_missing(rho))
        throw validation_error("to_distance: undefined correlation for " + m.symbols()[i] + "/" +
                               m.symbols()[j]);
      if (std::abs(rho) > 1.0 + kClipTolerance)
        throw validation_error("to_distance: correlation outside [-1, 1]");
      d(i, j) = d(j, i) = std::sqrt(2.0 * (1.0 - std::clamp(rho, -1.0, 1.0)));
    }
  return DistanceMatrix(m.symbols(), std::move(d));
}

// A warm start is already near a minimum. Reheating it to the cold-start
// temperature lets the walk drift to a different, near-degenerate minimum,
// so warm runs start this much cooler.
inline constexpr double kWarmStartHeat = 1e-4;

// Simulated annealing parameters. Zero-valued fields are resolved from the
// problem when an embedding starts (see resolved()).
struct AnnealingSchedule {
  double initial_temperature = 0.0;      // default: initial cost / N, times kWarmStartHeat when warm
  double cooling_factor = 0.95;
  std::size_t steps_per_temperature = 0; // default: 100 N
  double min_temperature = 0.0;          // default: 1e-6 * initial_temperature
  double proposal_scale = 0.0;           // default: 0.25 * mean target distance

  AnnealingSchedule resolved(double initial_cost, std::size_t n, double distance_scale,
                             bool warm = false) const {
    AnnealingSchedule s = *this;
    if (s.initial_temperature <= 0.0)
      s.initial_temperature = (warm ? kWarmStartHeat : 1.0) * initial_cost / static_cast<double>(n);
    if (s.steps_per_temperature == 0) s.steps_per_temperature = 100 * n;
    if (s.min_temperature <= 0.0) s.min_temperature = 1e-6 * s.initial_temperature;
    if (s.proposal_scale <= 0.0) s.proposal_scale = 0.25 * distance_scale;
    return s;
  }

  void validate() const {
    if (!(cooling_factor > 0.0 && cooling_factor < 1.0))
      throw validation_error("cooling factor must lie in (0, 1)");
    if (initial_temperature < 0.0 || min_temperature < 0.0 || proposal_scale < 0.0)
      throw validation_error("annealing parameters must be non-negative");
    if (initial_temperature > 0.0 && min_temperature > 0.0 &&
        !(initial_temperature > min_temperature))
      throw validation_error("initial temperature must exceed the minimum temperature");
  }

  friend bool operator==(const AnnealingSchedule&, const AnnealingSchedule&) = default;
};

// N points in R^D, row-major, plus how they were produced.
struct EmbeddingMap {
  std::vector<std::string> symbols;
  std::size_t dim = 2;
  std::vector<double> coords;
  double stress = 0.0;
  std::uint64_t seed = 0;
  double penalty_weight = 0.0;
  AnnealingSchedule schedule;

  std::size_t size() const { return symbols.size(); }
  std::span<const double> point(std::size_t i) const { return {coords.data() + i * dim, dim}; }
  double& at(std::size_t i, std::size_t axis) { return coords[i * dim + axis]; }
  double at(std::size_t i, std::size_t axis) const { return coords[i * dim + axis]; }
};

namespace detail {

inline double euclidean(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline void check_shape(std::span<const double> coords, std::size_t dim, std::size_t n) {
  if (dim < 1) throw validation_error("embedding dimension must be at least 1");
  if (coords.size() != n * dim) throw validation_error("coordinate count does not match N x D");
}

inline double mean_offdiagonal(const DistanceMatrix& d, bool squared) {
  const std::size_t n = d.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s += squared ? d(i, j) * d(i, j) : d(i, j);
  return n > 1 ? s / (0.5 * static_cast<double>(n * (n - 1))) : 0.0;
}

}  // namespace detail

// Sum over i < j of (|x_i - x_j| - d_ij)^2.
inline double stress(std::span<const double> coords, std::size_t dim, const DistanceMatrix& d) {
  const std::size_t n = d.size();
  detail::check_shape(coords, dim, n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double e = detail::euclidean(&coords[i * dim], &coords[j * dim], dim) - d(i, j);
      s += e * e;
    }
  return s;
}

inline double stress(const EmbeddingMap& map, const DistanceMatrix& d) {
  return stress(map.coords, map.dim, d);
}

// "Small penalty" for deviating from a warm start: 1% of the mean squared
// target distance.
inline double default_penalty_weight(const DistanceMatrix& d) {
  return 0.01 * detail::mean_offdiagonal(d, true);
}

// Translates the map so its centroid is the origin. A map whose centroid is
// already zero up to rounding is returned unchanged.
inline EmbeddingMap center(EmbeddingMap map) {
  const std::size_t n = map.size();
  if (n == 0) return map;
  std::vector<double> mean(map.dim, 0.0);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < map.dim; ++k) {
      mean[k] += map.at(i, k);
      scale = std::max(scale, std::abs(map.at(i, k)));
    }
  bool centered = true;
  for (double& m : mean) {
    m /= static_cast<double>(n);
    if (std::abs(m) > 1e-15 * scale) centered = false;
  }
  if (centered) return map;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < map.dim; ++k) map.at(i, k) -= mean[k];
  return map;
}

// (1/N) sum_i |x_i|
inline double mean_distance_from_center(const EmbeddingMap& map) {
  if (map.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    double r = 0.0;
    for (std::size_t k = 0; k < map.dim; ++k) r += map.at(i, k) * map.at(i, k);
    s += std::sqrt(r);
  }
  return s / static_cast<double>(map.size());
}

namespace detail {

// Annealing state: coordinates, cached pairwise embedded distances and the
// current cost (stress + penalty).
class StressAnnealer {
 public:
  StressAnnealer(const DistanceMatrix& target, std::size_t dim, std::vector<double> start,
                 std::vector<double> anchor, double penalty_weight)
      : d_(target),
        n_(target.size()),
        dim_(dim),
        x_(std::move(start)),
        anchor_(std::move(anchor)),
        weight_(anchor_.empty() ? 0.0 : penalty_weight),
        e_(n_),
        trial_(n_),
        moved_(dim) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        e_(i, j) = e_(j, i) = euclidean(&x_[i * dim_], &x_[j * dim_], dim_);
    cost_ = full_cost();
  }

  double cost() const { return cost_; }
  const std::vector<double>& coords() const { return x_; }

  double full_cost() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double r = e_(i, j) - d_(i, j);
        s += r * r;
      }
    if (weight_ > 0.0)
      for (std::size_t i = 0; i < n_; ++i) s += weight_ * anchor_gap(i, &x_[i * dim_]);
    return s;
  }

  // Cost change from moving point i to moved_, filling trial_ distances.
  double propose_delta(std::size_t i) {
    double delta = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      const double e_new = euclidean(moved_.data(), &x_[j * dim_], dim_);
      trial_[j] = e_new;
      const double r_new = e_new - d_(i, j), r_old = e_(i, j) - d_(i, j);
      delta += r_new * r_new - r_old * r_old;
    }
    if (weight_ > 0.0)
      delta += weight_ * (anchor_gap(i, moved_.data()) - anchor_gap(i, &x_[i * dim_]));
    return delta;
  }

  void accept(std::size_t i, double delta) {
    for (std::size_t k = 0; k < dim_; ++k) x_[i * dim_ + k] = moved_[k];
    for (std::size_t j = 0; j < n_; ++j)
      if (j != i) e_(i, j) = e_(j, i) = trial_[j];
    cost_ += delta;
  }

  std::vector<double>& moved() { return moved_; }
  double coord(std::size_t i, std::size_t k) const { return x_[i * dim_ + k]; }

  // Drops accumulated rounding from incremental updates.
  void resync() { cost_ = full_cost(); }

 private:
  double anchor_gap(std::size_t i, const double* p) const {
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double g = p[k] - anchor_[i * dim_ + k];
      s += g * g;
    }
    return s;
  }

  const DistanceMatrix& d_;
  std::size_t n_, dim_;
  std::vector<double> x_;
  std::vector<double> anchor_;
  double weight_;
  SquareMatrix e_;
  std::vector<double> trial_;
  std::vector<double> moved_;
  double cost_ = 0.0;
};

// Zero-temperature coordinate pattern search: try +-h on every axis of every
// point, keep strict improvements, halve h after a sweep without one.
inline void greedy_polish(StressAnnealer& state, std::size_t n, std::size_t dim, double h,
                          double h_min, std::size_t max_sweeps = 20000) {
  for (std::size_t sweep = 0; sweep < max_sweeps && h >= h_min; ++sweep) {
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < dim; ++k)
        for (double dir : {1.0, -1.0}) {
          auto& m = state.moved();
          for (std::size_t a = 0; a < dim; ++a) m[a] = state.coord(i, a);
          m[k] += dir * h;
          const double delta = state.propose_delta(i);
          if (delta < 0.0) {
            state.accept(i, delta);
            improved = true;
            break;
          }
        }
    if (!improved) h *= 0.5;
  }
  state.resync();
}

}  // namespace detail

// Metric MDS by simulated annealing on the stress. With a warm start the
// cost gains penalty_weight * sum_i |x_i - init_i|^2. The best state seen is
// polished greedily and centered. A warm start is kept unchanged unless the
// run improves its cost by a meaningful margin (1e-6 relative plus 1e-12 of
// the total squared target distance), so an already converged map is a
// fixed point. Deterministic in (d, schedule, init, penalty_weight, seed).
inline EmbeddingMap mds_embed(const DistanceMatrix& d, const AnnealingSchedule& schedule,
                              const EmbeddingMap* init, double penalty_weight,
                              std::uint64_t seed, std::size_t dim = 2) {
  const std::size_t n = d.size();
  if (n < 2) throw validation_error("mds_embed needs at least 2 points");
  if (dim < 1) throw validation_error("mds_embed needs dimension D >= 1");
  if (penalty_weight < 0.0) throw validation_error("penalty weight must be non-negative");
  schedule.validate();

  const double scale = detail::mean_offdiagonal(d, false);
  Rng rng(seed);
  std::vector<double> start(n * dim);
  std::vector<double> anchor;
  if (init) {
    if (init->symbols != d.symbols()) throw validation_error("warm start has different symbols");
    if (init->dim != dim) throw validation_error("warm start has a different dimension");
    start = init->coords;
    anchor = init->coords;
  } else {
    for (double& v : start) v = rng.normal(0.0, scale > 0.0 ? scale : 1.0);
  }

  detail::StressAnnealer state(d, dim, start, anchor, penalty_weight);
  const double initial_cost = state.cost();
  const AnnealingSchedule plan = schedule.resolved(initial_cost, n, scale > 0.0 ? scale : 1.0, init != nullptr);

  std::vector<double> best = state.coords();
  double best_cost = initial_cost;
  if (plan.initial_temperature > 0.0) {
    plan.validate();
    std::size_t levels = 0;
    for (double temp = plan.initial_temperature; temp > plan.min_temperature;
         temp *= plan.cooling_factor, ++levels) {
      const double step = plan.proposal_scale * std::sqrt(temp / plan.initial_temperature);
      for (std::size_t s = 0; s < plan.steps_per_temperature; ++s) {
        const auto i = static_cast<std::size_t>(rng.next_u64() % n);
        auto& m = state.moved();
        for (std::size_t k = 0; k < dim; ++k) m[k] = state.coord(i, k) + step * rng.normal();
        const double delta = state.propose_delta(i);
        if (delta <= 0.0 || rng.uniform() < std::exp(-delta / temp)) {
          state.accept(i, delta);
          if (state.cost() < best_cost) {
            best_cost = state.cost();
            best = state.coords();
          }
        }
      }
      if (levels % 16 == 15) state.resync();
    }
  }

  detail::StressAnnealer polished(d, dim, best, anchor, penalty_weight);
  const double h0 = plan.proposal_scale * std::sqrt(plan.min_temperature /
                                                    std::max(plan.initial_temperature, 1e-300));
  detail::greedy_polish(polished, n, dim, std::max(h0, 1e-6 * plan.proposal_scale),
                        1e-12 * (scale > 0.0 ? scale : 1.0));

  EmbeddingMap out;
  out.symbols = d.symbols();
  out.dim = dim;
  out.seed = seed;
  out.penalty_weight = init ? penalty_weight : 0.0;
  out.schedule = plan;
  const double total_sq = detail::mean_offdiagonal(d, true) * 0.5 * static_cast<double>(n * (n - 1));
  const double margin = 1e-6 * initial_cost + 1e-12 * total_sq;
  if (init && !(polished.cost() < initial_cost - margin)) {
    out.coords = init->coords;
  } else {
    out.coords = polished.coords();
  }
  out = center(std::move(out));
  out.stress = stress(out, d);
  return out;
}

// Warm-started sequence: the first map starts at random, each later map
// starts from its predecessor with the deviation penalty active.
inline std::vector<EmbeddingMap> chain_embed(const std::vector<DistanceMatrix>& sequence,
                                             const AnnealingSchedule& schedule,
                                             double penalty_weight, std::uint64_t seed,
                                             std::size_t dim = 2) {
  if (sequence.empty()) throw validation_error("chain_embed: empty sequence");
  for (const auto& d : sequence)
    if (d.symbols() != sequence.front().symbols())
      throw validation_error("chain_embed: symbol sets differ across the sequence");
  std::vector<EmbeddingMap> maps;
  maps.reserve(sequence.size());
  maps.push_back(mds_embed(sequence.front(), schedule, nullptr, penalty_weight, seed, dim));
  for (std::size_t s = 1; s < sequence.size(); ++s)
    maps.push_back(mds_embed(sequence[s], schedule, &maps.back(), penalty_weight, seed, dim));
  return maps;
}

// Per-symbol mean of coordinates over maps (e.g. the same bin on T days),
// then centered.
inline EmbeddingMap average_coords_across_days(const std::vector<EmbeddingMap>& maps) {
  if (maps.empty()) throw validation_error("average_coords_across_days: no maps");
  EmbeddingMap out = maps.front();
  for (const auto& m : maps)
    if (m.symbols != out.symbols || m.dim != out.dim)
      throw validation_error("average_coords_across_days: maps differ in symbols or dimension");
  std::fill(out.coords.begin(), out.coords.end(), 0.0);
  for (const auto& m : maps)
    for (std::size_t c = 0; c < out.coords.size(); ++c) out.coords[c] += m.coords[c];
  for (double& v : out.coords) v /= static_cast<double>(maps.size());
  out.stress = 0.0;
  return center(std::move(out));
}

// Entrywise mean over matrices of the same symbols; undefined entries are
// skipped (NaN only if undefined everywhere). Tagged as averaged.
inline CorrelationMatrix average_correlations_across_days(
    const std::vector<CorrelationMatrix>& matrices) {
  if (matrices.empty()) throw validation_error("average_correlations_across_days: no matrices");
  const auto& first = matrices.front();
  const std::size_t n = first.size();
  for (const auto& m : matrices)
    if (m.symbols() != first.symbols())
      throw validation_error("average_correlations_across_days: symbol mismatch");
  SquareMatrix values(n, kMissing);
  CountMatrix support(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      std::size_t c = 0, sup = 0;
      for (const auto& m : matrices) {
        sup += m.support()(i, j);
        if (is_missing(m(i, j))) continue;
        s += m(i, j);
        ++c;
      }
      values(i, j) = values(j, i) = c > 0 ? s / static_cast<double>(c) : kMissing;
      support(i, j) = support(j, i) = sup;
    }
  return CorrelationMatrix(first.symbols(), std::move(values), first.estimator(),
                           std::move(support), true);
}

// Best rigid motion (translation + orthogonal transform) of `moving` onto
// `reference`; returns the transformed coordinates.
inline std::vector<double> procrustes_align(const EmbeddingMap& reference,
                                            const EmbeddingMap& moving) {
  if (reference.size() != moving.size() || reference.dim != moving.dim)
    throw validation_error("procrustes_align: maps differ in shape");
  const auto n = static_cast<Eigen::Index>(reference.size());
  const auto dim = static_cast<Eigen::Index>(reference.dim);
  Eigen::MatrixXd a(n, dim), b(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < dim; ++k) {
      a(i, k) = reference.at(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
      b(i, k) = moving.at(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
    }
  const Eigen::RowVectorXd ma = a.colwise().mean(), mb = b.colwise().mean();
  a.rowwise() -= ma;
  b.rowwise() -= mb;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.transpose() * a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd rotation = svd.matrixU() * svd.matrixV().transpose();
  Eigen::MatrixXd aligned = b * rotation;
  aligned.rowwise() += ma;
  std::vector<double> out(static_cast<std::size_t>(n * dim));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < dim; ++k) out[static_cast<std::size_t>(i * dim + k)] = aligned(i, k);
  return out;
}

// Root mean squared point displacement between two coordinate sets.
inline double rms_point_difference(std::span<const double> a, std::span<const double> b,
                                   std::size_t dim) {
  if (a.size() != b.size() || dim == 0 || a.size() % dim != 0)
    throw validation_error("rms_point_difference: shapes differ");
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(s / static_cast<double>(a.size() / dim));
}

// RMS difference after aligning `moving` onto `reference`.
inline double aligned_rms_difference(const EmbeddingMap& reference, const EmbeddingMap& moving) {
  return rms_point_difference(reference.coords, procrustes_align(reference, moving),
                              reference.dim);
}

}  // namespace corrmap
