#include "netimpute/netmodel.hpp"

#include <algorithm>
#include <cmath>

#include "netimpute/rng.hpp"

namespace netimpute {

Network make_network(Matrix adj) {
    Network net{static_cast<int>(adj.rows()), std::move(adj)};
    if (!network_valid(net)) throw ValidationError("adjacency matrix is not a valid 0/1 symmetric network");
    return net;
}

bool network_valid(const Network& net) {
    const Matrix& a = net.adj;
    if (a.rows() != a.cols() || a.rows() != net.n_nodes) return false;
    for (int i = 0; i < net.n_nodes; ++i) {
        if (a(i, i) != 0.0) return false;
        for (int j = i + 1; j < net.n_nodes; ++j) {
            const double v = a(i, j);
            if (v != 0.0 && v != 1.0) return false;
            if (v != a(j, i)) return false;
        }
    }
    return true;
}

std::vector<int> PartialNetwork::unsampled() const {
    std::vector<char> mask = sampled_mask();
    std::vector<int> out;
    out.reserve(base.n_nodes - static_cast<int>(sampled.size()));
    for (int i = 0; i < base.n_nodes; ++i)
        if (!mask[i]) out.push_back(i);
    return out;
}

std::vector<char> PartialNetwork::sampled_mask() const {
    std::vector<char> mask(base.n_nodes, 0);
    for (int s : sampled) mask[s] = 1;
    return mask;
}

bool PartialNetwork::observed(int i, int j) const {
    return std::binary_search(sampled.begin(), sampled.end(), i) ||
           std::binary_search(sampled.begin(), sampled.end(), j);
}

PartialNetwork make_partial_network(Network base, std::vector<int> sampled) {
    std::sort(sampled.begin(), sampled.end());
    if (!sampled.empty()) {
        if (sampled.front() < 0 || sampled.back() >= base.n_nodes)
            throw ValidationError("sampled node index out of range");
        for (std::size_t i = 1; i < sampled.size(); ++i)
            if (sampled[i] == sampled[i - 1]) throw ValidationError("duplicate sampled node id");
    }
    return PartialNetwork{std::move(base), std::move(sampled)};
}

std::pair<CovariateSet, LatentSet> generate_population(int n_nodes, std::uint64_t seed) {
    if (n_nodes < 2) throw ValidationError("generate_population: n_nodes must be >= 2");
    RngStream rng(seed, rng_purpose::population);
    Matrix xi(n_nodes, 2);
    Matrix x(n_nodes, 2);
    for (int i = 0; i < n_nodes; ++i) {
        xi(i, 0) = rng.normal();
        xi(i, 1) = rng.normal();
        const double common = 0.5 * (xi(i, 0) + xi(i, 1));
        x(i, 0) = common + rng.uniform(-1.0, 1.0);
        x(i, 1) = common + rng.uniform(-1.0, 1.0);
    }
    return {CovariateSet{std::move(x)}, LatentSet{std::move(xi)}};
}

ProbabilityMatrix probability_matrix(const CovariateSet& cov, const LatentSet& lat,
                                     const GraphonSpec& spec) {
    const int n = cov.n();
    if (lat.n() != n) throw ValidationError("probability_matrix: covariate/latent row mismatch");
    if (!spec.custom_index && spec.beta.size() != cov.dim())
        throw ValidationError("probability_matrix: beta length does not match covariate dimension");
    if (!spec.custom_index && lat.dim() < 2)
        throw ValidationError("probability_matrix: default graphon needs d_xi >= 2");

    Matrix p = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double idx;
            if (spec.custom_index) {
                idx = spec.custom_index(cov.x.row(i), lat.xi.row(i), cov.x.row(j), lat.xi.row(j));
            } else {
                idx = lat.xi(i, 0) + lat.xi(j, 0);
                const double d2 = lat.xi(i, 1) - lat.xi(j, 1);
                idx -= 0.125 * d2 * d2;
                for (int d = 0; d < cov.dim(); ++d) {
                    const double dx = cov.x(i, d) - cov.x(j, d);
                    idx += spec.beta(d) * dx * dx;
                }
            }
            const double f = logistic(idx);
            p(i, j) = f;
            p(j, i) = f;
        }
    }
    return ProbabilityMatrix{std::move(p)};
}

Network sample_network(const ProbabilityMatrix& p, std::uint64_t seed) {
    const int n = p.n();
    RngStream rng(seed, rng_purpose::links);
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double v = rng.bernoulli(p.p(i, j)) ? 1.0 : 0.0;
            a(i, j) = v;
            a(j, i) = v;
        }
    }
    return Network{n, std::move(a)};
}

PartialNetwork egocentric_sample(const Network& net, int n_sampled, std::uint64_t seed) {
    if (n_sampled < 2 || n_sampled >= net.n_nodes)
        throw ValidationError("egocentric_sample: need 2 <= n_sampled < n_nodes");
    RngStream rng(seed, rng_purpose::sampling);
    std::vector<int> s = rng.sample_indices(net.n_nodes, n_sampled);
    return PartialNetwork{net, std::move(s)};
}

}  // namespace netimpute
