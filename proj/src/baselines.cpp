#include "netimpute/baselines.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "netimpute/rng.hpp"

namespace netimpute {

std::string method_name(Method m) {
    switch (m) {
        case Method::cd: return "cd";
        case Method::x: return "x";
        case Method::lr: return "lr";
        case Method::lpca: return "lpca";
        case Method::x_lpca: return "x-lpca";
        case Method::ltwfe: return "ltwfe";
        case Method::x_ltwfe: return "x-ltwfe";
        case Method::x_ltwfe_sp: return "x-ltwfe-sp";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "cd") return Method::cd;
    if (name == "x") return Method::x;
    if (name == "lr") return Method::lr;
    if (name == "lpca") return Method::lpca;
    if (name == "x-lpca") return Method::x_lpca;
    if (name == "ltwfe") return Method::ltwfe;
    if (name == "x-ltwfe") return Method::x_ltwfe;
    if (name == "x-ltwfe-sp") return Method::x_ltwfe_sp;
    throw ValidationError("unknown imputation method: " + name);
}

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

ImputedNetwork from_filled(const PartialNetwork& pn, const Matrix& missing_block,
                           const std::vector<int>& unsampled, int fallbacks) {
    const int n = pn.n_total();
    ImputedNetwork out;
    out.a_hat = pn.base.adj;
    out.provenance.setConstant(n, n, static_cast<std::uint8_t>(Provenance::observed));
    out.fallback_count = fallbacks;
    const int q = static_cast<int>(unsampled.size());
    for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j) {
            const double v = clamp01(0.5 * (missing_block(i, j) + missing_block(j, i)));
            const int a = unsampled[i], b = unsampled[j];
            out.a_hat(a, b) = v;
            out.a_hat(b, a) = v;
            out.provenance(a, b) = static_cast<std::uint8_t>(Provenance::imputed);
            out.provenance(b, a) = static_cast<std::uint8_t>(Provenance::imputed);
        }
    out.a_hat.diagonal().setZero();
    return out;
}

// 10% holdout mask over the unsampled x sampled cross block
std::vector<char> holdout_mask(int rows, int cols, std::uint64_t seed) {
    RngStream rng(seed, rng_purpose::holdout);
    std::vector<char> mask(static_cast<std::size_t>(rows) * cols, 0);
    for (auto& m : mask) m = rng.bernoulli(0.10) ? 1 : 0;
    return mask;
}

struct SpectralBasis {
    Matrix u;      // n x r_max eigenvectors, ordered by |eigenvalue| desc
    Vector lam;    // matching eigenvalues
};

SpectralBasis spectral_basis(const Matrix& a_ss, int r_max) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a_ss);
    if (eig.info() != Eigen::Success)
        throw NumericalError("impute_lowrank: eigendecomposition failed");
    const int n = static_cast<int>(a_ss.rows());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const Vector& ev = eig.eigenvalues();
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(ev(a)) > std::abs(ev(b)); });
    SpectralBasis basis;
    basis.u.resize(n, r_max);
    basis.lam.resize(r_max);
    for (int k = 0; k < r_max; ++k) {
        basis.u.col(k) = eig.eigenvectors().col(order[k]);
        basis.lam(k) = ev(order[k]);
    }
    return basis;
}

}  // namespace

ImputedNetwork impute_covariate_only_precomputed(const PartialNetwork& pn, const Matrix& pi) {
    if (pi.size() == 0) throw ValidationError("impute_covariate_only: missing first stage");
    const std::vector<int> c = pn.unsampled();
    const int q = static_cast<int>(c.size());
    Matrix block(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) block(i, j) = clamp01(pi(c[i], c[j]));
    return from_filled(pn, block, c, 0);
}

ImputedNetwork impute_covariate_only(const PartialNetwork& pn, const CovariateSet& cov,
                                     FirstStage first_stage) {
    if (cov.dim() < 1) throw ValidationError("impute_covariate_only: needs d_X >= 1");
    const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, cov.dim()};
    PiKind kind = first_stage == FirstStage::local_linear       ? PiKind::local_linear
                  : first_stage == FirstStage::linear_projection ? PiKind::linear_projection
                                                                 : default_pi_kind(cov.dim());
    const PiModel model = fit_pi(pn, cov, spec, kind);
    return impute_covariate_only_precomputed(pn, predict_pi_matrix(model, cov));
}

std::pair<ImputedNetwork, double> impute_ltwfe(const PartialNetwork& pn, const ImputeConfig& cfg) {
    // identical pipeline with no covariates: the first stage is skipped and
    // the TWFE runs on the raw adjacency
    const CovariateSet empty{Matrix(pn.n_total(), 0)};
    return impute_with_cv(pn, empty, cfg);
}

std::pair<ImputedNetwork, int> impute_lowrank(const PartialNetwork& pn,
                                              const std::vector<int>& rank_grid,
                                              std::uint64_t seed) {
    const std::vector<int>& s = pn.sampled;
    const std::vector<int> c = pn.unsampled();
    const int n = static_cast<int>(s.size());
    const int q = static_cast<int>(c.size());
    if (rank_grid.empty()) throw ValidationError("impute_lowrank: empty rank grid");
    std::vector<int> ranks = rank_grid;
    std::sort(ranks.begin(), ranks.end());
    if (ranks.front() < 1) throw ValidationError("impute_lowrank: ranks must be positive");
    if (ranks.back() >= n) throw ValidationError("impute_lowrank: rank must be below |S|");

    Matrix a_ss(n, n), a_cs(q, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a_ss(i, j) = pn.base.adj(s[i], s[j]);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < n; ++j) a_cs(i, j) = pn.base.adj(c[i], s[j]);

    const int r_max = ranks.back();
    const SpectralBasis basis = spectral_basis(a_ss, r_max);
    const double lam_floor = 1e-12 * std::max(std::abs(basis.lam(0)), 1e-300);

    const std::vector<char> mask = holdout_mask(q, n, seed);
    int best_r = ranks.front();
    double best_err = std::numeric_limits<double>::infinity();
    for (const int r : ranks) {
        // factors F = U_r Lambda_r; per-row loadings by least squares on the
        // unmasked entries; validate on the masked ones
        Matrix f(n, r);
        for (int k = 0; k < r; ++k) f.col(k) = basis.u.col(k) * basis.lam(k);
        double err = 0.0;
        long cnt = 0;
        Matrix ftf(r, r);
        Vector fty(r), load(r);
        for (int i = 0; i < q; ++i) {
            bool any_masked = false;
            for (int j = 0; j < n; ++j)
                if (mask[static_cast<std::size_t>(i) * n + j]) { any_masked = true; break; }
            if (!any_masked) continue;
            ftf.setZero();
            fty.setZero();
            for (int j = 0; j < n; ++j) {
                if (mask[static_cast<std::size_t>(i) * n + j]) continue;
                ftf.selfadjointView<Eigen::Lower>().rankUpdate(f.row(j).transpose(), 1.0);
                fty += f.row(j).transpose() * a_cs(i, j);
            }
            ftf.triangularView<Eigen::Upper>() = ftf.transpose();
            Eigen::LDLT<Matrix> ldlt(ftf);
            if (ldlt.info() != Eigen::Success) continue;
            load = ldlt.solve(fty);
            for (int j = 0; j < n; ++j) {
                if (!mask[static_cast<std::size_t>(i) * n + j]) continue;
                const double pred = f.row(j) * load;
                const double e = a_cs(i, j) - pred;
                err += e * e;
                ++cnt;
            }
        }
        if (cnt == 0) continue;
        err /= static_cast<double>(cnt);
        if (err < best_err - 1e-12) {  // exact ties keep the smaller rank
            best_err = err;
            best_r = r;
        }
    }

    // final fit on all cross entries: Nystrom loadings L = A_cs U_r / lambda
    const int r = best_r;
    Matrix load(q, r);
    for (int k = 0; k < r; ++k) {
        const double lam = std::abs(basis.lam(k)) > lam_floor ? basis.lam(k) : lam_floor;
        load.col(k) = (a_cs * basis.u.col(k)) / lam;
    }
    Matrix rec(q, q);
    rec.setZero();
    for (int k = 0; k < r; ++k)
        rec += basis.lam(k) * (load.col(k) * load.col(k).transpose());
    ImputedNetwork out = from_filled(pn, rec, c, 0);
    return {std::move(out), best_r};
}

namespace {

// positions (into the reference list) of the k nearest references by
// pseudo-distance, excluding `exclude_node`, ties broken by reference id
std::vector<int> knn_positions(const PseudoDistanceTable& dist, int node, int k,
                               int exclude_node) {
    const int row = dist.row_of(node);
    if (row < 0) throw ValidationError("impute_local_pca: distance table does not cover node " +
                                       std::to_string(node));
    const int nr = static_cast<int>(dist.references.size());
    std::vector<int> order(nr);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = dist.d(row, a), db = dist.d(row, b);
        if (da != db) return da < db;
        return dist.references[a] < dist.references[b];
    });
    std::vector<int> out;
    out.reserve(k);
    for (const int pos : order) {
        if (dist.references[pos] == exclude_node) continue;
        out.push_back(pos);
        if (static_cast<int>(out.size()) == k) break;
    }
    return out;
}

// Rank-r completion of the (row, col) cell from the fully observed block
// B = values[rows x cols], outside row vector and (possibly partially
// observed) outside column vector. Uses the eigendecomposition of B'B.
struct LocalSolver {
    Matrix v;     // right singular vectors, by sigma desc
    Vector sig2;  // squared singular values
    Matrix b;

    LocalSolver(Matrix block) : b(std::move(block)) {
        const Matrix btb = b.transpose() * b;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(btb);
        if (eig.info() != Eigen::Success)
            throw NumericalError("impute_local_pca: local eigendecomposition failed");
        const int k = static_cast<int>(btb.rows());
        v.resize(k, k);
        sig2.resize(k);
        for (int i = 0; i < k; ++i) {  // ascending -> reverse
            v.col(i) = eig.eigenvectors().col(k - 1 - i);
            sig2(i) = std::max(eig.eigenvalues()(k - 1 - i), 0.0);
        }
    }

    int effective_rank(int r) const {
        const double floor = 1e-12 * std::max(sig2(0), 1e-300);
        int eff = 0;
        while (eff < r && eff < sig2.size() && sig2(eff) > floor) ++eff;
        return eff;
    }

    // full column observed: pred = row' V_r diag(1/sig2) V_r' B' col
    bool predict(const Vector& row_obs, const Vector& col_obs, int r, double* out) const {
        const int eff = effective_rank(r);
        if (eff == 0) return false;
        const Vector bt_col = b.transpose() * col_obs;
        double acc = 0.0;
        for (int t = 0; t < eff; ++t)
            acc += (row_obs.dot(v.col(t))) * (v.col(t).dot(bt_col)) / sig2(t);
        *out = acc;
        return true;
    }

    // column observed only on rows flagged in `obs`
    bool predict_partial(const Vector& row_obs, const Vector& col_obs,
                         const std::vector<char>& obs, int r, double* out) const {
        const int eff = effective_rank(r);
        if (eff == 0) return false;
        const int k = static_cast<int>(b.rows());
        // solve min || col_um - U_eff S y ||, with U S = B V
        Matrix us(k, eff);
        for (int t = 0; t < eff; ++t) us.col(t) = b * v.col(t);  // = sigma_t * u_t
        Matrix gram = Matrix::Zero(eff, eff);
        Vector rhs = Vector::Zero(eff);
        for (int i = 0; i < k; ++i) {
            if (!obs[i]) continue;
            gram.selfadjointView<Eigen::Lower>().rankUpdate(us.row(i).transpose(), 1.0);
            rhs += us.row(i).transpose() * col_obs(i);
        }
        gram.triangularView<Eigen::Upper>() = gram.transpose();
        Eigen::LDLT<Matrix> ldlt(gram);
        if (ldlt.info() != Eigen::Success) return false;
        const Vector y = ldlt.solve(rhs);
        // pred = row' V_eff y
        double acc = 0.0;
        for (int t = 0; t < eff; ++t) acc += row_obs.dot(v.col(t)) * y(t);
        *out = acc;
        return true;
    }
};

}  // namespace

std::pair<ImputedNetwork, std::pair<int, int>> impute_local_pca(
    const PartialNetwork& pn, const PseudoDistanceTable& dist, const std::vector<int>& k_grid,
    const std::vector<int>& rank_grid, bool with_x, std::uint64_t seed, const Matrix& pi) {
    const std::vector<int>& s = pn.sampled;
    const std::vector<int> c = pn.unsampled();
    const int n = static_cast<int>(s.size());
    const int q = static_cast<int>(c.size());
    if (k_grid.empty() || rank_grid.empty())
        throw ValidationError("impute_local_pca: empty tuning grid");
    if (with_x && pi.size() == 0)
        throw ValidationError("impute_local_pca: with_x requires a fitted first stage");

    const bool has_pi = with_x && pi.size() > 0;
    auto pi_at = [&](int i, int j) { return has_pi ? pi(i, j) : 0.0; };
    auto res_at = [&](int i, int j) { return pn.base.adj(i, j) - pi_at(i, j); };

    std::vector<int> ks;
    for (int k : k_grid)
        if (k >= 1 && k <= n) ks.push_back(k);
    if (ks.empty()) throw ValidationError("impute_local_pca: no k in grid is <= |S|");
    std::sort(ks.begin(), ks.end());
    std::vector<int> ranks = rank_grid;
    std::sort(ranks.begin(), ranks.end());

    const std::vector<char> mask = holdout_mask(q, n, seed);
    std::vector<std::pair<int, int>> held;
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < n; ++j)
            if (mask[static_cast<std::size_t>(i) * n + j]) held.emplace_back(i, j);

    int best_k = ks.front(), best_r = ranks.front();
    double best_err = std::numeric_limits<double>::infinity();
    for (const int k : ks) {
        std::vector<double> err(ranks.size(), 0.0);
        std::vector<long> cnt(ranks.size(), 0);
        for (const auto& [ci, sj] : held) {
            const int c_node = c[ci];
            const int s_node = s[sj];
            const auto ns = knn_positions(dist, s_node, k, s_node);
            const auto nc = knn_positions(dist, c_node, k, -1);
            if (static_cast<int>(ns.size()) < k || static_cast<int>(nc.size()) < k) continue;
            Matrix block(k, k);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) block(a, b) = res_at(s[ns[a]], s[nc[b]]);
            Vector row_obs(k);  // entries (s_node, N_c): sampled x sampled, never masked
            for (int b = 0; b < k; ++b) row_obs(b) = res_at(s_node, s[nc[b]]);
            Vector col_obs(k);
            std::vector<char> obs(k, 1);
            bool any = false;
            for (int a = 0; a < k; ++a) {  // entries (N_s, c_node): cross block, maskable
                col_obs(a) = res_at(s[ns[a]], c_node);
                if (mask[static_cast<std::size_t>(ci) * n + ns[a]]) obs[a] = 0;
                else any = true;
            }
            if (!any) continue;
            const LocalSolver solver(std::move(block));
            for (std::size_t t = 0; t < ranks.size(); ++t) {
                double pred;
                if (!solver.predict_partial(row_obs, col_obs, obs, ranks[t], &pred)) continue;
                pred = clamp01(pred + pi_at(s_node, c_node));
                const double e = pn.base.adj(s_node, c_node) - pred;
                err[t] += e * e;
                ++cnt[t];
            }
        }
        for (std::size_t t = 0; t < ranks.size(); ++t) {
            if (cnt[t] == 0) continue;
            const double e = err[t] / static_cast<double>(cnt[t]);
            if (e < best_err - 1e-12) {  // exact ties keep the smaller (k, rank)
                best_err = e;
                best_k = k;
                best_r = ranks[t];
            }
        }
    }

    const int k = best_k, r = best_r;
    std::vector<std::vector<int>> nn(q);
    for (int i = 0; i < q; ++i) nn[i] = knn_positions(dist, c[i], k, -1);
    Matrix filled = Matrix::Zero(q, q);
    int fallbacks = 0;
    for (int i = 0; i < q; ++i) {
        for (int j = i + 1; j < q; ++j) {
            Matrix block(k, k);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) block(a, b) = res_at(s[nn[i][a]], s[nn[j][b]]);
            Vector row_obs(k), col_obs(k);
            for (int b = 0; b < k; ++b) row_obs(b) = res_at(c[i], s[nn[j][b]]);
            for (int a = 0; a < k; ++a) col_obs(a) = res_at(s[nn[i][a]], c[j]);
            const LocalSolver solver(std::move(block));
            double pred;
            if (solver.predict(row_obs, col_obs, r, &pred)) {
                pred += pi_at(c[i], c[j]);
            } else {
                pred = clamp01(pi_at(c[i], c[j]));
                ++fallbacks;
            }
            filled(i, j) = pred;
            filled(j, i) = pred;
        }
    }
    ImputedNetwork out = from_filled(pn, filled, c, fallbacks);
    return {std::move(out), {best_k, best_r}};
}

}  // namespace netimpute
