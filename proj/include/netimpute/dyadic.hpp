#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "netimpute/types.hpp"

namespace netimpute {

enum class DyadFeatureMode { absolute_difference, squared_difference };

struct DyadFeatureSpec {
    DyadFeatureMode mode = DyadFeatureMode::squared_difference;
    int dim = 0;  // = d_X
};

Vector dyad_features(const DyadFeatureSpec& spec, const Vector& x_i, const Vector& x_j);

enum class PiKind { local_linear, linear_projection };

namespace detail {
struct LocalLinearData;  // bucketed training design, defined in dyadic.cpp
}

// First-stage dyadic regression of A_ij on omega(X_i, X_j) over observed dyads.
// linear-projection: OLS on (1, omega). local-linear: kernel-weighted least
// squares of A on (1, omega - omega0) at each query, product Epanechnikov
// weights, returning the intercept. Empty windows fall back to the global
// linear fit, singular local systems to the local constant; both are counted.
struct PiModel {
    PiKind kind = PiKind::linear_projection;
    DyadFeatureSpec spec;
    Vector coef;         // linear projection: intercept + d coefficients
    Vector bandwidth;    // local-linear: per-dimension bandwidths
    Vector global_coef;  // local-linear fallback fit
    std::shared_ptr<const detail::LocalLinearData> local;

    double predict_feature(const Vector& w) const;
};

// kind auto rule: local-linear when d_X <= 3, linear-projection otherwise.
PiKind default_pi_kind(int d_x);

// bandwidth: if given, used for every feature dimension (raw units); the
// default is the per-dimension rule of thumb sd(omega_d) * m^(-1/(4+d_X)).
// Dyads sharing a node are dependent, so the nominal dyad count m overstates
// the effective sample; the rule treats m as the sample size, the usual
// convention for dyadic regressions.
PiModel fit_pi(const PartialNetwork& pn, const CovariateSet& cov, const DyadFeatureSpec& spec,
               PiKind kind, std::optional<double> bandwidth = std::nullopt);

// Optional grid override of the rule-of-thumb: scores each multiplier of the
// per-dimension rule bandwidths on a seeded 10% dyad holdout and returns the
// winning multiplier (ties toward the smaller one). Feed the result through
// fit_pi's bandwidth argument scaled by the rule, or refit via the returned
// model.
struct PiBandwidthChoice {
    double multiplier = 1.0;
    PiModel model;  // fitted at the chosen bandwidths on all observed dyads
};
PiBandwidthChoice cv_pi_bandwidth(const PartialNetwork& pn, const CovariateSet& cov,
                                  const DyadFeatureSpec& spec,
                                  const std::vector<double>& multipliers, std::uint64_t seed);

double predict_pi(const PiModel& model, const CovariateSet& cov, int i, int j);

// Full symmetric N x N prediction matrix (diagonal = prediction at the zero
// feature vector, needed where the TWFE double sum touches A_ii = 0).
Matrix predict_pi_matrix(const PiModel& model, const CovariateSet& cov, int threads = 1);

// Residuals A_ij - Pi_ij over observed dyads:
//   r_ss: sampled x sampled (diagonal holds 0 - Pi_ii),
//   r_cs: unsampled x sampled.
struct ResidualTable {
    std::vector<int> sampled;
    std::vector<int> unsampled;
    Matrix r_ss;
    Matrix r_cs;
};

ResidualTable residual_matrix(const PartialNetwork& pn, const PiModel& model,
                              const CovariateSet& cov);

// Same, from a precomputed prediction matrix (pi may be empty for the
// no-covariate variant, in which case residuals are the raw entries).
ResidualTable residual_from_pi(const PartialNetwork& pn, const Matrix& pi);

}  // namespace netimpute
