#include <doctest.h>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "netimpute/dyadic.hpp"
#include "netimpute/netmodel.hpp"
#include "netimpute/rng.hpp"

using namespace netimpute;

namespace {

PartialNetwork synthetic_pn(int n, double density, std::uint64_t seed, int n_sampled) {
    Matrix p = Matrix::Constant(n, n, density);
    p.diagonal().setZero();
    Network net = sample_network(ProbabilityMatrix{p}, seed);
    return egocentric_sample(net, n_sampled, seed);
}

}  // namespace

TEST_CASE("dyad features") {
    DyadFeatureSpec abs_spec{DyadFeatureMode::absolute_difference, 2};
    const Vector a = (Vector(2) << 1.0, 3.0).finished();
    const Vector b = (Vector(2) << 4.0, 1.0).finished();
    const Vector w = dyad_features(abs_spec, a, b);
    CHECK(w(0) == 3.0);
    CHECK(w(1) == 2.0);
    CHECK(dyad_features(abs_spec, a, a).cwiseAbs().maxCoeff() == 0.0);

    DyadFeatureSpec sq_spec{DyadFeatureMode::squared_difference, 2};
    RngStream rng(3, rng_purpose::population);
    for (int t = 0; t < 100; ++t) {
        Vector x(2), y(2);
        for (int d = 0; d < 2; ++d) {
            x(d) = rng.normal();
            y(d) = rng.normal();
        }
        CHECK((dyad_features(sq_spec, x, y) - dyad_features(sq_spec, y, x)).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK((dyad_features(abs_spec, x, y) - dyad_features(abs_spec, y, x)).cwiseAbs().maxCoeff() ==
              0.0);
    }
    CHECK_THROWS_AS(dyad_features(abs_spec, Vector::Zero(3), Vector::Zero(2)), ValidationError);
}

TEST_CASE("constant response is fit exactly by both modes") {
    const int n = 20;
    Matrix adj = Matrix::Constant(n, n, 1.0);
    adj.diagonal().setZero();
    const PartialNetwork pn = make_partial_network(Network{n, adj}, {0, 1, 2, 3, 4, 5, 6, 7});
    auto [cov, lat] = generate_population(n, 5);
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, 2};
    for (const PiKind kind : {PiKind::linear_projection, PiKind::local_linear}) {
        const PiModel m = fit_pi(pn, cov, spec, kind);
        for (int t = 0; t < 10; ++t)
            CHECK(predict_pi(m, cov, t, t + 5) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("linear projection recovers an exact linear model") {
    const int n = 30;
    auto [cov, lat] = generate_population(n, 8);
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, 2};
    Matrix adj(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double w1 = (cov.x(i, 0) - cov.x(j, 0)) * (cov.x(i, 0) - cov.x(j, 0));
            const double w2 = (cov.x(i, 1) - cov.x(j, 1)) * (cov.x(i, 1) - cov.x(j, 1));
            adj(i, j) = 0.2 + 0.1 * w1 + 0.3 * w2;
        }
    adj.diagonal().setZero();  // diagonal dyads are never in the training set
    const PartialNetwork pn{Network{n, adj}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
    const PiModel m = fit_pi(pn, cov, spec, PiKind::linear_projection);
    CHECK(m.coef(0) == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(m.coef(1) == doctest::Approx(0.1).epsilon(1e-10));
    CHECK(m.coef(2) == doctest::Approx(0.3).epsilon(1e-10));
    // prediction at omega = (1,1)
    const Vector w11 = (Vector(2) << 1.0, 1.0).finished();
    CHECK(m.predict_feature(w11) == doctest::Approx(0.6).epsilon(1e-10));
}

TEST_CASE("local linear equals a hand-assembled weighted least squares") {
    // ~30 observed dyads; solve the kernel-weighted normal equations directly
    const int n = 10;
    const PartialNetwork pn = synthetic_pn(n, 0.5, 21, 5);
    auto [cov, lat] = generate_population(n, 21);
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, 2};
    const PiModel m = fit_pi(pn, cov, spec, PiKind::local_linear, 2.5);

    std::vector<std::array<double, 3>> train;  // w1, w2, y
    const auto mask = pn.sampled_mask();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (!mask[i] && !mask[j]) continue;
            const double w1 = std::pow(cov.x(i, 0) - cov.x(j, 0), 2);
            const double w2 = std::pow(cov.x(i, 1) - cov.x(j, 1), 2);
            train.push_back({w1, w2, pn.base.adj(i, j)});
        }
    RngStream rng(4, rng_purpose::population);
    for (int t = 0; t < 20; ++t) {
        const double q1 = rng.uniform(0.0, 3.0);
        const double q2 = rng.uniform(0.0, 3.0);
        Matrix ata = Matrix::Zero(3, 3);
        Vector atb = Vector::Zero(3);
        for (const auto& row : train) {
            const double u1 = (row[0] - q1) / m.bandwidth(0);
            const double u2 = (row[1] - q2) / m.bandwidth(1);
            const double k1 = std::abs(u1) <= 1.0 ? 0.75 * (1 - u1 * u1) : 0.0;
            const double k2 = std::abs(u2) <= 1.0 ? 0.75 * (1 - u2 * u2) : 0.0;
            const double w = k1 * k2;
            if (w <= 0.0) continue;
            Vector d(3);
            d << 1.0, row[0] - q1, row[1] - q2;
            ata += w * d * d.transpose();
            atb += w * row[2] * d;
        }
        const Vector sol = ata.fullPivLu().solve(atb);
        const Vector q = (Vector(2) << q1, q2).finished();
        CHECK(m.predict_feature(q) == doctest::Approx(sol(0)).epsilon(1e-10));
    }
}

TEST_CASE("prediction is symmetric in the node pair") {
    const int n = 24;
    const PartialNetwork pn = synthetic_pn(n, 0.4, 33, 10);
    auto [cov, lat] = generate_population(n, 33);
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, 2};
    RngStream rng(5, rng_purpose::sampling);
    for (const PiKind kind : {PiKind::linear_projection, PiKind::local_linear}) {
        const PiModel m = fit_pi(pn, cov, spec, kind);
        for (int t = 0; t < 100; ++t) {
            const int i = static_cast<int>(rng.uniform_int(n));
            const int j = static_cast<int>(rng.uniform_int(n));
            CHECK(predict_pi(m, cov, i, j) == predict_pi(m, cov, j, i));
        }
    }
}

TEST_CASE("huge bandwidth converges to the global linear fit") {
    const int n = 26;
    const PartialNetwork pn = synthetic_pn(n, 0.45, 55, 12);
    auto [cov, lat] = generate_population(n, 55);
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, 2};
    const PiModel global = fit_pi(pn, cov, spec, PiKind::linear_projection);
    double range = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            range = std::max(range, std::pow(cov.x(i, 0) - cov.x(j, 0), 2));
    const PiModel local = fit_pi(pn, cov, spec, PiKind::local_linear, 1e6 * range);
    RngStream rng(6, rng_purpose::sampling);
    for (int t = 0; t < 30; ++t) {
        const int i = static_cast<int>(rng.uniform_int(n));
        const int j = static_cast<int>(rng.uniform_int(n));
        if (i == j) continue;
        CHECK(predict_pi(local, cov, i, j) ==
              doctest::Approx(predict_pi(global, cov, i, j)).epsilon(1e-4));
    }
}

TEST_CASE("collinear features are reported by column") {
    const int n = 16;
    const PartialNetwork pn = synthetic_pn(n, 0.5, 66, 8);
    Matrix x(n, 2);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = i * 0.1;
        x(i, 1) = i * 0.2;  // omega2 = 4 * omega1 exactly
    }
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, 2};
    try {
        fit_pi(pn, CovariateSet{x}, spec, PiKind::linear_projection);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("omega[") != std::string::npos);
    }
}

TEST_CASE("residual table") {
    const int n = 18;
    auto [cov, lat] = generate_population(n, 44);
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, 2};
    // deterministic world: A = P exactly, P a linear function of omega
    Matrix adj(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double w1 = std::pow(cov.x(i, 0) - cov.x(j, 0), 2);
            const double w2 = std::pow(cov.x(i, 1) - cov.x(j, 1), 2);
            adj(i, j) = 0.4 + 0.01 * w1 + 0.02 * w2;
        }
    adj.diagonal().setZero();
    const PartialNetwork pn{Network{n, adj}, {0, 1, 2, 3, 4, 5, 6, 7}};
    const PiModel m = fit_pi(pn, cov, spec, PiKind::linear_projection);
    const ResidualTable table = residual_matrix(pn, m, cov);
    // perfect first stage: off-diagonal residuals vanish
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            if (i != j) CHECK(table.r_ss(i, j) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK((table.r_cs.cwiseAbs()).maxCoeff() < 1e-9);
    // diagonal holds 0 - Pi_ii
    CHECK(table.r_ss(2, 2) ==
          doctest::Approx(-predict_pi(m, cov, pn.sampled[2], pn.sampled[2])).epsilon(1e-12));

    // single dyad: A=1, Pi=0.3 -> residual 0.7
    Matrix pi_single = Matrix::Constant(2, 2, 0.3);
    Matrix adj_single = Matrix::Zero(2, 2);
    adj_single(0, 1) = adj_single(1, 0) = 1.0;
    const ResidualTable single =
        residual_from_pi(PartialNetwork{Network{2, adj_single}, {0}}, pi_single);
    CHECK(single.r_cs(0, 0) == doctest::Approx(0.7));

    // a noisy world: OLS residuals are orthogonal to the design
    const PartialNetwork pn2 = synthetic_pn(n, 0.4, 45, 8);
    const PiModel m2 = fit_pi(pn2, cov, spec, PiKind::linear_projection);
    double sum = 0.0;
    Vector dot = Vector::Zero(2);
    const auto mask = pn2.sampled_mask();
    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (!mask[i] && !mask[j]) continue;
            const double r = pn2.base.adj(i, j) - predict_pi(m2, cov, i, j);
            sum += r;
            for (int d = 0; d < 2; ++d) {
                const double w = std::pow(cov.x(i, d) - cov.x(j, d), 2);
                dot(d) += r * w;
                scale = std::max(scale, std::abs(w));
            }
        }
    CHECK(std::abs(sum) < 1e-8);
    CHECK(dot.cwiseAbs().maxCoeff() < 1e-6 * scale);
}

TEST_CASE("bandwidth grid override picks a sensible multiplier deterministically") {
    const int n = 60;
    const PartialNetwork pn = synthetic_pn(n, 0.4, 91, 24);
    auto [cov, lat] = generate_population(n, 91);
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, 2};
    const auto choice = cv_pi_bandwidth(pn, cov, spec, {0.5, 1.0, 2.0}, 7);
    CHECK((choice.multiplier == 0.5 || choice.multiplier == 1.0 || choice.multiplier == 2.0));
    const auto again = cv_pi_bandwidth(pn, cov, spec, {0.5, 1.0, 2.0}, 7);
    CHECK(choice.multiplier == again.multiplier);
    CHECK(choice.model.bandwidth == again.model.bandwidth);
    // the returned model predicts finitely everywhere
    for (int t = 0; t < 10; ++t)
        CHECK(std::isfinite(predict_pi(choice.model, cov, t, t + 11)));
    CHECK_THROWS_AS(cv_pi_bandwidth(pn, cov, spec, {}, 7), ValidationError);
}

TEST_CASE("default mode rule") {
    CHECK(default_pi_kind(2) == PiKind::local_linear);
    CHECK(default_pi_kind(3) == PiKind::local_linear);
    CHECK(default_pi_kind(4) == PiKind::linear_projection);
}
