#include <doctest.h>

#include <cmath>
#include <random>

#include "netimpute/netmodel.hpp"
#include "netimpute/rng.hpp"

using namespace netimpute;

namespace {

double upper_mean(const Matrix& m) {
    double acc = 0.0;
    long cnt = 0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) {
            acc += m(i, j);
            ++cnt;
        }
    return acc / cnt;
}

double correlation(const Vector& a, const Vector& b) {
    const double ma = a.mean(), mb = b.mean();
    const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
    const double va = (a.array() - ma).square().sum();
    const double vb = (b.array() - mb).square().sum();
    return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("population moments match the design") {
    auto [cov, lat] = generate_population(10000, 11);
    for (int c = 0; c < 2; ++c) {
        CHECK(std::abs(lat.xi.col(c).mean()) < 0.05);
        const double var =
            (lat.xi.col(c).array() - lat.xi.col(c).mean()).square().sum() / (lat.n() - 1);
        CHECK(std::abs(var - 1.0) < 0.05);
    }
    // corr(X_1, xi_1) = 0.5 / sqrt(0.5 + 1/3); cross-checked against an
    // independent million-draw simulation with a different generator
    const double target = 0.5 / std::sqrt(0.5 + 1.0 / 3.0);
    std::mt19937_64 alt(12345);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const int m = 1000000;
    Vector x(m), xi1(m);
    for (int i = 0; i < m; ++i) {
        const double z1 = nd(alt), z2 = nd(alt);
        xi1(i) = z1;
        x(i) = 0.5 * (z1 + z2) + ud(alt);
    }
    CHECK(std::abs(correlation(x, xi1) - target) < 0.01);
    CHECK(std::abs(correlation(cov.x.col(0), lat.xi.col(0)) - target) < 0.03);
}

TEST_CASE("population generation is deterministic") {
    auto [c1, l1] = generate_population(2, 77);
    auto [c2, l2] = generate_population(2, 77);
    CHECK(c1.x == c2.x);
    CHECK(l1.xi == l2.xi);
    CHECK_THROWS_AS(generate_population(1, 0), ValidationError);
}

TEST_CASE("probability matrix: identical nodes give 1/2") {
    CovariateSet cov{Matrix::Zero(2, 2)};
    LatentSet lat{Matrix::Zero(2, 2)};
    GraphonSpec spec{(Vector(2) << -0.5, -0.5).finished(), nullptr};
    const auto p = probability_matrix(cov, lat, spec);
    CHECK(p.p(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.p(0, 0) == 0.0);
    CHECK(p.p(1, 0) == p.p(0, 1));
}

TEST_CASE("mean link probability at the two simulation designs") {
    auto [cov, lat] = generate_population(2000, 5);
    // expected densities frozen from two independent high-N simulations
    // (0.266 dense / 0.113 sparse)
    const auto p_dense =
        probability_matrix(cov, lat, GraphonSpec{(Vector(2) << -0.5, -0.5).finished(), nullptr});
    CHECK(upper_mean(p_dense.p) == doctest::Approx(0.266).epsilon(0.04));
    const auto p_sparse =
        probability_matrix(cov, lat, GraphonSpec{(Vector(2) << -2.0, -2.0).finished(), nullptr});
    CHECK(upper_mean(p_sparse.p) == doctest::Approx(0.113).epsilon(0.04));
    CHECK(std::abs(upper_mean(p_sparse.p) - 0.10) < 0.02);
}

TEST_CASE("probability matrix is permutation equivariant") {
    auto [cov, lat] = generate_population(40, 9);
    GraphonSpec spec{(Vector(2) << -0.5, -0.5).finished(), nullptr};
    const auto p = probability_matrix(cov, lat, spec);
    // reverse relabeling
    const int n = 40;
    Matrix xp(n, 2), xip(n, 2);
    for (int i = 0; i < n; ++i) {
        xp.row(i) = cov.x.row(n - 1 - i);
        xip.row(i) = lat.xi.row(n - 1 - i);
    }
    const auto pp = probability_matrix(CovariateSet{xp}, LatentSet{xip}, spec);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            CHECK(pp.p(n - 1 - i, n - 1 - j) == doctest::Approx(p.p(i, j)).epsilon(1e-14));
}

TEST_CASE("custom graphon index overrides the built-in form") {
    CovariateSet cov{Matrix::Zero(3, 1)};
    LatentSet lat{Matrix::Zero(3, 1)};
    GraphonSpec spec;
    spec.custom_index = [](const Eigen::RowVectorXd&, const Eigen::RowVectorXd&,
                           const Eigen::RowVectorXd&, const Eigen::RowVectorXd&) { return 0.0; };
    const auto p = probability_matrix(cov, lat, spec);
    CHECK(p.p(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("sampled networks: degenerate probabilities") {
    const int n = 12;
    Matrix zero = Matrix::Zero(n, n);
    const Network empty = sample_network(ProbabilityMatrix{zero}, 3);
    CHECK(empty.adj.cwiseAbs().maxCoeff() == 0.0);

    Matrix ones = Matrix::Constant(n, n, 1.0);
    ones.diagonal().setZero();
    const Network full = sample_network(ProbabilityMatrix{ones}, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) CHECK(full.adj(i, j) == (i == j ? 0.0 : 1.0));
    CHECK(network_valid(full));
}

TEST_CASE("edge density concentrates at mean(P)") {
    const int n = 500;
    Matrix p03 = Matrix::Constant(n, n, 0.3);
    p03.diagonal().setZero();
    const Network net = sample_network(ProbabilityMatrix{p03}, 17);
    CHECK(network_valid(net));
    const long dyads = static_cast<long>(n) * (n - 1) / 2;
    const double density = upper_mean(net.adj);
    const double sd = std::sqrt(0.3 * 0.7 / static_cast<double>(dyads));
    CHECK(std::abs(density - 0.3) < 3.0 * sd);
    CHECK(std::abs(density - 0.3) < 0.01);
}

TEST_CASE("egocentric sampling: block structure of figure-1 style instance") {
    // 6 nodes, sample {0,1}: missing entries are exactly the 4x4 block of
    // the remaining nodes
    Matrix adj = Matrix::Zero(6, 6);
    auto link = [&](int i, int j) { adj(i, j) = adj(j, i) = 1.0; };
    link(0, 2); link(0, 3); link(0, 4); link(1, 2); link(2, 4); link(2, 5); link(4, 5);
    const PartialNetwork pn = make_partial_network(Network{6, adj}, {0, 1});
    int missing = 0;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) {
            const bool obs = pn.observed(i, j);
            CHECK(obs == (i <= 1 || j <= 1));
            if (!obs) ++missing;
        }
    CHECK(missing == 4 * 3 / 2);
}

TEST_CASE("egocentric sampling: counts and invariants") {
    auto [cov, lat] = generate_population(30, 21);
    const auto p =
        probability_matrix(cov, lat, GraphonSpec{(Vector(2) << -0.5, -0.5).finished(), nullptr});
    const Network net = sample_network(p, 21);
    const PartialNetwork pn = egocentric_sample(net, 29, 4);
    int missing = 0;
    for (int i = 0; i < 30; ++i)
        for (int j = i + 1; j < 30; ++j)
            if (!pn.observed(i, j)) ++missing;
    CHECK(missing == 0);

    const PartialNetwork pn2 = egocentric_sample(net, 12, 4);
    missing = 0;
    for (int i = 0; i < 30; ++i)
        for (int j = i + 1; j < 30; ++j)
            if (!pn2.observed(i, j)) ++missing;
    CHECK(missing == (30 - 12) * (30 - 12 - 1) / 2);
    const auto mask = pn2.sampled_mask();
    for (int i = 0; i < 30; ++i)
        for (int j = i + 1; j < 30; ++j)
            CHECK(pn2.observed(i, j) == (mask[i] || mask[j]));

    CHECK_THROWS_AS(egocentric_sample(net, 30, 4), ValidationError);
    CHECK_THROWS_AS(egocentric_sample(net, 1, 4), ValidationError);
}

TEST_CASE("network validation") {
    Matrix bad = Matrix::Zero(3, 3);
    bad(0, 1) = 1.0;  // asymmetric
    CHECK_THROWS_AS(make_network(bad), ValidationError);
    bad(1, 0) = 1.0;
    CHECK(network_valid(make_network(bad)));
    bad(2, 2) = 1.0;  // self loop
    CHECK_FALSE(network_valid(Network{3, bad}));
    bad(2, 2) = 0.0;
    bad(1, 2) = bad(2, 1) = 0.5;  // non-binary
    CHECK_FALSE(network_valid(Network{3, bad}));
}
