// Plants a rising intraday correlation profile and prints, per bin, the
// market-mode strength, the average correlation and the MDS mean distance.

#include <cstdio>
#include <vector>

#include "corrmap/corrmap.hpp"

int main() {
  using namespace corrmap;
  const std::size_t N = 30, K = 8, T = 40;
  std::vector<double> rho(K);
  for (std::size_t k = 0; k < K; ++k) rho[k] = 0.1 + 0.6 * static_cast<double>(k) / (K - 1);
  const auto panel = simulate_planted_panel(N, K, T, rho, 7);
  const auto norm = normalize_panel(panel, dispersion(panel));

  std::vector<DistanceMatrix> chain;
  std::vector<double> strength, avg;
  for (std::size_t k = 0; k < K; ++k) {
    const auto c = binwise_correlation(norm, k);
    strength.push_back(market_mode_strength(eigendecompose(c)));
    avg.push_back(average_pairwise_correlation(c));
    chain.push_back(to_distance(c));
  }
  const auto maps = chain_embed(chain, {}, default_penalty_weight(chain.front()), 7);

  std::printf("bin  planted  lambda1/N  avg_corr  mean_dist\n");
  for (std::size_t k = 0; k < K; ++k)
    std::printf("%3zu  %7.3f  %9.4f  %8.4f  %9.4f\n", k, rho[k], strength[k], avg[k],
                mean_distance_from_center(maps[k]));
}
