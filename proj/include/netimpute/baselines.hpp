#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "netimpute/impute.hpp"

namespace netimpute {

// Imputation methods compared in the experiments. cd = complete data
// (no imputation), only meaningful in the downstream experiments.
enum class Method { cd, x, lr, lpca, x_lpca, ltwfe, x_ltwfe, x_ltwfe_sp };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct BaselineConfig {
    std::vector<int> rank_grid = {1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> k_grid = {10, 20, 40, 60};
    ImputeConfig impute;  // kernel/h-grid/seed knobs shared with the TWFE path
};

// Missing entries = clamped first-stage prediction.
ImputedNetwork impute_covariate_only(const PartialNetwork& pn, const CovariateSet& cov,
                                     FirstStage first_stage = FirstStage::automatic);
ImputedNetwork impute_covariate_only_precomputed(const PartialNetwork& pn, const Matrix& pi);

// Local TWFE on the raw adjacency (Pi = 0).
std::pair<ImputedNetwork, double> impute_ltwfe(const PartialNetwork& pn, const ImputeConfig& cfg);

// Spectral factors from A_SS, Nystrom loadings for unsampled rows, rank chosen
// by holdout on 10% of the observed cross-block entries. Returns the imputed
// network and the selected rank.
std::pair<ImputedNetwork, int> impute_lowrank(const PartialNetwork& pn,
                                              const std::vector<int>& rank_grid,
                                              std::uint64_t seed);

// Per-pair low-rank completion on the submatrix spanned by the k nearest
// sampled neighbors of each endpoint; (k, rank) chosen jointly on the same
// holdout scheme. A first-stage prediction matrix is required when with_x is
// set (the completion then runs on residuals and adds Pi back).
std::pair<ImputedNetwork, std::pair<int, int>> impute_local_pca(
    const PartialNetwork& pn, const PseudoDistanceTable& dist, const std::vector<int>& k_grid,
    const std::vector<int>& rank_grid, bool with_x, std::uint64_t seed,
    const Matrix& pi = Matrix());

}  // namespace netimpute
