#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "netimpute/baselines.hpp"
#include "netimpute/impute.hpp"
#include "netimpute/netmodel.hpp"

namespace netimpute {

enum class Experiment { imputation, centrality_degree, centrality_eigen, peer_effects };

std::string experiment_name(Experiment e);
Experiment parse_experiment(const std::string& name);

struct ExperimentConfig {
    Experiment experiment = Experiment::imputation;
    int n_nodes = 200;
    int m_networks = 40;                       // downstream experiments only
    Vector beta = (Vector(2) << -0.5, -0.5).finished();
    std::vector<double> phi_list = {0.2, 0.4};
    std::vector<Method> methods = {Method::x_ltwfe};
    int replications = 200;
    int rep_begin = 0;                         // replications cover [rep_begin, rep_begin + S)
    std::uint64_t seed = 0;
    int threads = 1;
    ImputeConfig impute;                       // TWFE knobs (h grid, undersmooth, ...)
    std::vector<int> rank_grid = {1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> k_grid = {10, 20, 40, 60};
};

// One (method, phi) cell. Per-replication values are retained (in replication
// order) so reports are exactly poolable across replication ranges.
struct McCell {
    Method method = Method::x_ltwfe;
    double phi = 0.0;
    std::vector<double> mse;   // imputation experiment: per-replication missing-block MSE
    Matrix coef;               // downstream experiments: S x n_coef estimates
    long fallback_total = 0;   // NoNeighbors fallbacks + non-converged power iterations
};

struct McReport {
    Experiment experiment = Experiment::imputation;
    int n_nodes = 0;
    int m_networks = 0;
    int replications = 0;
    Vector beta;
    std::uint64_t seed = 0;
    std::vector<std::string> coef_names;  // empty for the imputation experiment
    std::vector<double> coef_truth;
    std::vector<McCell> cells;
    double wall_seconds = 0.0;            // reported on stdout only, never in files
};

// Aggregation order: average MSE within replication, average across
// replications, then the square root.
double cell_rmse(const McCell& cell);
double cell_bias(const McCell& cell, int coef_idx, double truth);
double cell_std(const McCell& cell, int coef_idx);

// Per-replication squared-error mean over ordered missing pairs (i != j, both
// unsampled); rmse_missing_block is its square root for a single network.
double mse_missing_block(const Matrix& a_hat, const ProbabilityMatrix& p,
                         const std::vector<int>& sampled);
double rmse_missing_block(const ImputedNetwork& a_hat, const ProbabilityMatrix& p,
                          const std::vector<int>& sampled);

McReport run_imputation_experiment(const ExperimentConfig& cfg);
McReport run_centrality_experiment(const ExperimentConfig& cfg);
McReport run_peereffects_experiment(const ExperimentConfig& cfg);
McReport run_experiment(const ExperimentConfig& cfg);

// report rendering (deterministic; no timing)
std::string report_text_table(const McReport& report);
std::string report_csv(const McReport& report);

}  // namespace netimpute
