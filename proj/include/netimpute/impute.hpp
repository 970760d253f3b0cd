#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "netimpute/distance.hpp"
#include "netimpute/dyadic.hpp"
#include "netimpute/types.hpp"

namespace netimpute {

enum class KernelFamily { epanechnikov, triangular, uniform };

struct KernelSpec {
    KernelFamily family = KernelFamily::epanechnikov;
    double h = 1.0;
};

// K(u) itself; callers evaluate K(d/h). The 1/h prefactor of K_h is omitted
// throughout: every estimator is a ratio of kernel sums, so it cancels.
double kernel_eval(const KernelSpec& spec, double u);

enum class FirstStage { automatic, local_linear, linear_projection };

struct ImputeConfig {
    KernelFamily kernel = KernelFamily::epanechnikov;
    std::vector<double> h_grid;        // empty = auto (8 geometric points on [q10, 2*q90] of d>0)
    int cv_pair_cap = 20000;           // max CV pairs, uniform seeded subsample beyond
    double undersmooth = 1.0;          // multiplier applied to the CV-selected h
    bool split = false;
    bool symmetrize = true;
    bool include_diagonal_refs = true; // ablation switch for the i'=j' terms in the double sum
    FirstStage first_stage = FirstStage::automatic;
    std::uint64_t seed = 0;
};

enum class Provenance : std::uint8_t { observed = 0, imputed = 1 };

struct ImputedNetwork {
    Matrix a_hat;                        // N x N, entries in [0,1], zero diagonal
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> provenance;
    int fallback_count = 0;              // missing dyads that fell back to clamped Pi
};

// Closed-form local TWFE prediction for one pair:
//   sum_j' w_j[j'] r_row_i[j'] / sum(w_j) + sum_i' w_i[i'] r_col_j[i'] / sum(w_i)
//   - w_i' R_refs w_j / (sum(w_i) sum(w_j))
// r_refs includes the diagonal reference pairs (A_ii = 0 enters the residuals).
// Throws NoNeighborsError when either weight sum is zero; `node_i`/`node_j`
// are only used for that report.
double twfe_impute_pair(const Matrix& r_refs, const Vector& r_row_i, const Vector& r_col_j,
                        const Vector& w_i, const Vector& w_j, int node_i = -1, int node_j = -1);

// Algorithm step 4: fill every dyad with both endpoints unsampled, truncate to
// [0,1], copy observed entries, zero the diagonal. pi_model may be null (the
// no-covariate variant). dist_rows/dist_cols must cover all unsampled nodes;
// their reference sets define the TWFE reference index set.
ImputedNetwork impute_missing(const PartialNetwork& pn, const PiModel* pi_model,
                              const CovariateSet* cov, const PseudoDistanceTable& dist_rows,
                              const PseudoDistanceTable& dist_cols, const KernelSpec& kernel,
                              bool symmetrize = true);

// Leave-one-out bandwidth selection over CV pairs (i in rows(dist) ∩ sampled,
// j unsampled), references excluding i. Pairs where a side has no kernel mass
// contribute the fallback prediction (clamped Pi, or 0 without covariates);
// an h where no pair has any TWFE prediction is excluded. Ties -> smaller h.
double cross_validate_h(const PartialNetwork& pn, const PiModel* pi_model,
                        const CovariateSet* cov, const PseudoDistanceTable& dist,
                        const std::vector<double>& h_grid, int cv_pair_cap, std::uint64_t seed,
                        KernelFamily kernel = KernelFamily::epanechnikov);

// 8 geometric points spanning [q10, 2*q90] of the positive distance entries.
std::vector<double> auto_h_grid(const PseudoDistanceTable& dist, int points = 8);

// Full pipeline: first stage -> distances (references S) -> CV -> impute with
// h* scaled by cfg.undersmooth. Returns the imputed network and h*.
std::pair<ImputedNetwork, double> impute_with_cv(const PartialNetwork& pn, const CovariateSet& cov,
                                                 const ImputeConfig& cfg);

// Sample-splitting variant: S split into equal halves (S1 gets the odd node),
// distances from S1 anchors, references and CV rows S2.
std::pair<ImputedNetwork, double> impute_split(const PartialNetwork& pn, const CovariateSet& cov,
                                               const ImputeConfig& cfg);

// Same pipelines on precomputed parts, so callers running several methods per
// network can share the first-stage matrix and the distance table. pi may be
// empty (no first stage); dist must have references = S and cover all nodes.
std::pair<ImputedNetwork, double> impute_with_cv_precomputed(const PartialNetwork& pn,
                                                             const Matrix& pi,
                                                             const PseudoDistanceTable& dist,
                                                             const ImputeConfig& cfg);
std::pair<ImputedNetwork, double> impute_split_precomputed(const PartialNetwork& pn,
                                                           const Matrix& pi,
                                                           const ImputeConfig& cfg);

}  // namespace netimpute
