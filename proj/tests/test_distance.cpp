#include <doctest.h>

#include <cmath>

#include "netimpute/distance.hpp"
#include "netimpute/netmodel.hpp"
#include "netimpute/rng.hpp"

using namespace netimpute;

namespace {

// reference implementation: literal triple loop over (target, reference, k)
Matrix distance_oracle(const Matrix& a, const std::vector<int>& anchors,
                       const std::vector<int>& targets, const std::vector<int>& refs) {
    Matrix d(targets.size(), refs.size());
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        for (std::size_t ri = 0; ri < refs.size(); ++ri) {
            const int t = targets[ti], r = refs[ri];
            double best = 0.0;
            for (int k = 0; k < a.rows(); ++k) {
                if (k == t || k == r) continue;
                double s = 0.0;
                for (const int l : anchors) s += a(k, l) * (a(t, l) - a(r, l));
                best = std::max(best, std::abs(s) / anchors.size());
            }
            d(ti, ri) = best;
        }
    }
    return d;
}

Network random_net(int n, double p, std::uint64_t seed) {
    Matrix m = Matrix::Constant(n, n, p);
    m.diagonal().setZero();
    return sample_network(ProbabilityMatrix{m}, seed);
}

std::vector<int> iota_vec(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return v;
}

}  // namespace

TEST_CASE("hand instance matches the triple-loop oracle exactly") {
    Matrix a = Matrix::Zero(5, 5);
    auto link = [&](int i, int j) { a(i, j) = a(j, i) = 1.0; };
    link(0, 1); link(0, 3); link(1, 2); link(2, 3); link(2, 4); link(3, 4);
    const PartialNetwork pn = make_partial_network(Network{5, a}, {0, 1, 2});
    const auto table = pseudo_distance(pn, iota_vec(5), pn.sampled);
    const Matrix expect = distance_oracle(a, pn.sampled, iota_vec(5), pn.sampled);
    for (int i = 0; i < table.d.rows(); ++i)
        for (int j = 0; j < table.d.cols(); ++j) CHECK(table.d(i, j) == expect(i, j));
}

TEST_CASE("random instances match the oracle exactly") {
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 8 + 3 * trial;
        const Network net = random_net(n, 0.4, 100 + trial);
        RngStream rng(trial, rng_purpose::sampling);
        const auto s = rng.sample_indices(n, n / 2);
        const PartialNetwork pn = make_partial_network(net, s);
        const auto table = pseudo_distance(pn, iota_vec(n), s);
        const Matrix expect = distance_oracle(net.adj, s, iota_vec(n), s);
        CHECK((table.d - expect).cwiseAbs().maxCoeff() == 0.0);
        // bounded by 1, self distance zero
        CHECK(table.d.maxCoeff() <= 1.0);
        CHECK(table.d.minCoeff() >= 0.0);
        for (std::size_t ri = 0; ri < s.size(); ++ri)
            CHECK(table.d(table.row_of(s[ri]), ri) == 0.0);
    }
}

TEST_CASE("identical observed rows give zero distance") {
    Matrix a = Matrix::Zero(6, 6);
    auto link = [&](int i, int j) { a(i, j) = a(j, i) = 1.0; };
    link(4, 0); link(4, 2); link(5, 0); link(5, 2);  // rows 4 and 5 identical on S
    link(0, 1);
    const PartialNetwork pn = make_partial_network(Network{6, a}, {0, 1, 2, 3});
    const auto table = pseudo_distance(pn, {4, 5}, {4, 5});
    CHECK(table.d(0, 1) == 0.0);
    CHECK(table.d(1, 0) == 0.0);
}

TEST_CASE("symmetry of the table") {
    const Network net = random_net(20, 0.35, 7);
    RngStream rng(7, rng_purpose::sampling);
    const auto s = rng.sample_indices(20, 9);
    const PartialNetwork pn = make_partial_network(net, s);
    const auto table = pseudo_distance(pn, s, s);
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            CHECK(table.d(i, j) == doctest::Approx(table.d(j, i)).epsilon(1e-15));
}

TEST_CASE("entries outside the anchor columns never matter") {
    const int n = 14;
    Network net = random_net(n, 0.4, 9);
    const std::vector<int> s = {0, 1, 2, 3, 4};
    const PartialNetwork pn = make_partial_network(net, s);
    const auto before = pseudo_distance(pn, iota_vec(n), s);
    // flip entries in the unobservable block (both endpoints unsampled);
    // no anchor column is touched, so the whole table is unchanged
    Network perturbed = net;
    perturbed.adj(9, 10) = 1.0 - perturbed.adj(9, 10);
    perturbed.adj(10, 9) = perturbed.adj(9, 10);
    perturbed.adj(12, 13) = 1.0 - perturbed.adj(12, 13);
    perturbed.adj(13, 12) = perturbed.adj(12, 13);
    const PartialNetwork pn2 = make_partial_network(perturbed, s);
    const auto after = pseudo_distance(pn2, iota_vec(n), s);
    CHECK((before.d - after.d).cwiseAbs().maxCoeff() == 0.0);

    // flipping an anchored entry changes only what the formula says it does:
    // the fast path still equals the literal oracle
    perturbed.adj(7, 2) = 1.0 - perturbed.adj(7, 2);
    perturbed.adj(2, 7) = perturbed.adj(7, 2);
    const PartialNetwork pn3 = make_partial_network(perturbed, s);
    const auto table3 = pseudo_distance(pn3, iota_vec(n), s);
    const Matrix expect = distance_oracle(perturbed.adj, s, iota_vec(n), s);
    CHECK((table3.d - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("split variant: explicit instance matches oracle; duplicates at zero") {
    Matrix a = Matrix::Zero(6, 6);
    auto link = [&](int i, int j) { a(i, j) = a(j, i) = 1.0; };
    link(0, 2); link(0, 4); link(1, 3); link(1, 5); link(0, 1); link(2, 3); link(4, 0);
    const PartialNetwork pn = make_partial_network(Network{6, a}, {0, 1, 2, 3});
    const std::vector<int> s1 = {0, 1}, s2 = {2, 3};
    const std::vector<int> targets = {2, 3, 4, 5};
    const auto table = pseudo_distance_split(pn, s1, s2, targets);
    CHECK(table.anchor_count == 2);
    const Matrix expect = distance_oracle(a, s1, targets, s2);
    CHECK((table.d - expect).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(pseudo_distance_split(pn, {0, 1}, {1, 2}, targets), ValidationError);
    CHECK_THROWS_AS(pseudo_distance_split(pn, {}, {2, 3}, targets), ValidationError);

    // degenerate split s1 = s2 = S reduces to the full-sample distance
    std::vector<int> all6 = {0, 1, 2, 3, 4, 5};
    const auto degen = pseudo_distance_split(pn, pn.sampled, pn.sampled, all6);
    const auto full = pseudo_distance(pn, all6, pn.sampled);
    CHECK((degen.d - full.d).cwiseAbs().maxCoeff() == 0.0);

    // duplicated rows stay at distance zero under any split
    Matrix b = Matrix::Zero(6, 6);
    b(4, 0) = b(0, 4) = 1.0;
    b(5, 0) = b(0, 5) = 1.0;
    const PartialNetwork pnb = make_partial_network(Network{6, b}, {0, 1, 2, 3});
    const auto tb = pseudo_distance_split(pnb, {0, 1}, {2, 3}, {4, 5});
    // rows 4 and 5 identical on anchors {0,1}: their distances to every
    // reference coincide
    CHECK((tb.d.row(0) - tb.d.row(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-block SBM: within-block distances separate from cross-block") {
    // population pseudo-distance: 0 within block, 0.18 across (block graphon
    // evaluated in closed form)
    const int n_nodes = 400, n_sampled = 200;
    int separated = 0;
    const int reps = 50;
    for (int rep = 0; rep < reps; ++rep) {
        const std::uint64_t seed = derive_seed(31, rep);
        Matrix p(n_nodes, n_nodes);
        for (int i = 0; i < n_nodes; ++i)
            for (int j = 0; j < n_nodes; ++j) {
                const bool same = (i < n_nodes / 2) == (j < n_nodes / 2);
                p(i, j) = same ? 0.8 : 0.2;
            }
        p.diagonal().setZero();
        const Network net = sample_network(ProbabilityMatrix{p}, seed);
        const PartialNetwork pn = egocentric_sample(net, n_sampled, seed);
        const auto table = pseudo_distance(pn, iota_vec(n_nodes), pn.sampled);
        double max_within = 0.0, min_cross = 1.0;
        for (int t = 0; t < n_nodes; ++t)
            for (std::size_t ri = 0; ri < pn.sampled.size(); ++ri) {
                const int r = pn.sampled[ri];
                if (r == t) continue;
                const bool same = (t < n_nodes / 2) == (r < n_nodes / 2);
                const double d = table.d(t, ri);
                if (same)
                    max_within = std::max(max_within, d);
                else
                    min_cross = std::min(min_cross, d);
            }
        if (max_within < min_cross) ++separated;
    }
    CHECK(separated >= static_cast<int>(0.95 * reps));
}

TEST_CASE("denoising: estimation error shrinks as the sample grows") {
    const int n_nodes = 500;
    const std::vector<int> ns = {100, 200, 400};
    std::vector<std::vector<double>> errs(ns.size());
    for (int rep = 0; rep < 20; ++rep) {
        const std::uint64_t seed = derive_seed(57, rep);
        Matrix p(n_nodes, n_nodes);
        for (int i = 0; i < n_nodes; ++i)
            for (int j = 0; j < n_nodes; ++j)
                p(i, j) = ((i < n_nodes / 2) == (j < n_nodes / 2)) ? 0.8 : 0.2;
        p.diagonal().setZero();
        const Network net = sample_network(ProbabilityMatrix{p}, seed);
        for (std::size_t k = 0; k < ns.size(); ++k) {
            const PartialNetwork pn = egocentric_sample(net, ns[k], derive_seed(seed, k));
            const auto table = pseudo_distance(pn, iota_vec(n_nodes), pn.sampled);
            double worst = 0.0;
            for (int t = 0; t < n_nodes; ++t)
                for (std::size_t ri = 0; ri < pn.sampled.size(); ++ri) {
                    const int r = pn.sampled[ri];
                    if (r == t) continue;
                    const bool same = (t < n_nodes / 2) == (r < n_nodes / 2);
                    const double pop = same ? 0.0 : 0.18;
                    worst = std::max(worst, std::abs(table.d(t, ri) - pop));
                }
            errs[k].push_back(worst);
        }
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(errs[0]) > median(errs[1]));
    CHECK(median(errs[1]) > median(errs[2]));
}

TEST_CASE("error paths") {
    const Network net = random_net(8, 0.4, 3);
    const PartialNetwork empty_s{net, {}};
    CHECK_THROWS_AS(pseudo_distance(empty_s, {0, 1}, {2}), ValidationError);
    const PartialNetwork pn = make_partial_network(net, {0, 1, 2});
    CHECK_THROWS_AS(pseudo_distance(pn, {0, 99}, {1}), ValidationError);
    CHECK_THROWS_AS(pseudo_distance(pn, {0}, {-1}), ValidationError);
}
