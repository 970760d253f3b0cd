#pragma once

#include <cstdint>
#include <vector>

#include "netimpute/types.hpp"

namespace netimpute {

struct NormalizedNetwork {
    Matrix g;                    // row-stochastic where the row has mass, else zero row
    std::vector<int> zero_rows;
};

NormalizedNetwork row_normalize(const Matrix& a);

// normalized degree: phi_i = (1/N) sum_j A_ij
Vector degree_centrality(const Matrix& a);

struct EigenCentrality {
    Vector phi;        // sqrt(N) * leading eigenvector, entry sum >= 0
    bool zero_matrix = false;
    bool converged = true;
    int iterations = 0;
};

// Power iteration for the dominant eigenpair of a symmetric nonnegative
// matrix. Throws NumericalError on non-convergence (suspected tiny spectral
// gap); an all-zero matrix returns the zero vector with a flag. The noexcept
// variant returns the final iterate with converged=false instead of throwing
// (the Monte Carlo harness never drops replications).
EigenCentrality eigenvector_centrality(const Matrix& a, double tol = 1e-10, int max_iter = 10000);
EigenCentrality eigenvector_centrality_noexcept(const Matrix& a, double tol = 1e-10,
                                                int max_iter = 10000);

struct CentralityEstimate {
    double alpha_c = 0.0;
    double alpha_1 = 0.0;
    double se_c = 0.0;
    double se_1 = 0.0;
    bool se_available = false;  // cluster-robust SEs need >= 2 networks
};

// Pooled OLS of y on (1, phi) across networks; cluster-robust sandwich with
// clusters = networks and small-sample factor M/(M-1).
CentralityEstimate centrality_ols(const std::vector<Vector>& y_per_network,
                                  const std::vector<Vector>& phi_per_network);

// Z = [1 | W | GW | G(GW)]
Matrix build_instruments(const NormalizedNetwork& g, const Matrix& w);

struct PeerNetworkData {
    Matrix g;  // row-normalized (imputed or true) network
    Matrix w;  // N x d_W
    Vector y;
};

struct PeerEffectsEstimate {
    Vector alpha;       // (alpha_C, alpha_Ybar, alpha_W..., alpha_Wbar...)
    Vector se_cluster;
    bool se_available = false;
    int n_networks = 0;
};

// GMM for Y = aC + aY G Y + W aW + GW aWbar + e with instruments Z and
// V = [1, GY, W, GW]: alpha = (Jbar' S Jbar)^-1 Jbar' S gbar with
// Jbar = (1/M) sum Z_m'V_m/N_m, gbar = (1/M) sum Z_m'Y_m/N_m. weight: empty
// matrix = identity. Cluster-robust variance from the per-network moments.
PeerEffectsEstimate peer_effects_gmm(const std::vector<PeerNetworkData>& data,
                                     const Matrix& weight = Matrix());

struct PeerCoefficients {
    double alpha_c = 0.0;
    double alpha_ybar = 0.0;
    Vector alpha_w;
    Vector alpha_wbar;
};

// Solves (I - aY G) Y = aC + W aW + GW aWbar + u_m + e directly.
Vector simulate_peer_outcomes(const NormalizedNetwork& g, const Matrix& w,
                              const PeerCoefficients& alpha, double u_m, const Vector& e);

// W_id = xi_id + X_id * xi_id / 2
Matrix peer_covariates(const CovariateSet& cov, const LatentSet& lat, std::uint64_t seed = 0);

}  // namespace netimpute
