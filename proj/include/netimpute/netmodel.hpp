#pragma once

#include <cstdint>
#include <utility>

#include "netimpute/types.hpp"

namespace netimpute {

// Simulation population: xi rows i.i.d. standard bivariate normal,
// X_id = (xi_i1 + xi_i2)/2 + eps_id with eps_id i.i.d. Uniform[-1,1], d = 1,2.
std::pair<CovariateSet, LatentSet> generate_population(int n_nodes, std::uint64_t seed);

ProbabilityMatrix probability_matrix(const CovariateSet& cov, const LatentSet& lat,
                                     const GraphonSpec& spec);

// Independent Bernoulli(P_ij) links on the upper triangle, mirrored.
Network sample_network(const ProbabilityMatrix& p, std::uint64_t seed);

// Uniform random subset S of size n_sampled; entry (i,j) observed iff i or j in S.
PartialNetwork egocentric_sample(const Network& net, int n_sampled, std::uint64_t seed);

}  // namespace netimpute
