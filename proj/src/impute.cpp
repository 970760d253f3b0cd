#include "netimpute/impute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "netimpute/rng.hpp"

namespace netimpute {

double kernel_eval(const KernelSpec& spec, double u) {
    if (spec.h <= 0.0) throw ValidationError("kernel_eval: bandwidth must be positive");
    const double a = std::abs(u);
    switch (spec.family) {
        case KernelFamily::epanechnikov:
            return a <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
        case KernelFamily::triangular:
            return a <= 1.0 ? 1.0 - a : 0.0;
        case KernelFamily::uniform:
            return a <= 1.0 ? 0.5 : 0.0;
    }
    return 0.0;
}

namespace {

double kernel_raw(KernelFamily family, double u) {
    const double a = std::abs(u);
    if (a > 1.0) return 0.0;
    switch (family) {
        case KernelFamily::epanechnikov: return 0.75 * (1.0 - u * u);
        case KernelFamily::triangular: return 1.0 - a;
        case KernelFamily::uniform: return 0.5;
    }
    return 0.0;
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

double quantile(std::vector<double>& v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

// Residual blocks bound to a reference list. refs must be sampled nodes; C is
// the unsampled set. pi may be empty (no-covariate variant).
struct Workspace {
    std::vector<int> refs;
    std::vector<int> unsampled;
    Matrix pi;    // full N x N or empty
    Matrix r_rr;  // refs x refs (diagonal = 0 - Pi_ii)
    Matrix r_rc;  // refs x C
    Matrix r_cr;  // C x refs
    Matrix a_rc;  // raw A(refs, C), the CV targets

    double pi_at(int i, int j) const { return pi.size() > 0 ? pi(i, j) : 0.0; }
};

Workspace make_workspace(const PartialNetwork& pn, const Matrix& pi, std::vector<int> refs) {
    Workspace w;
    w.refs = std::move(refs);
    w.unsampled = pn.unsampled();
    w.pi = pi;
    const int nr = static_cast<int>(w.refs.size());
    const int nc = static_cast<int>(w.unsampled.size());
    const Matrix& a = pn.base.adj;
    const bool has_pi = pi.size() > 0;
    w.r_rr.resize(nr, nr);
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nr; ++j)
            w.r_rr(i, j) = a(w.refs[i], w.refs[j]) - (has_pi ? pi(w.refs[i], w.refs[j]) : 0.0);
    w.r_rc.resize(nr, nc);
    w.a_rc.resize(nr, nc);
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nc; ++j) {
            const double av = a(w.refs[i], w.unsampled[j]);
            w.a_rc(i, j) = av;
            w.r_rc(i, j) = av - (has_pi ? pi(w.refs[i], w.unsampled[j]) : 0.0);
        }
    w.r_cr = w.r_rc.transpose();
    return w;
}

// weight matrix: row t = K(d(node_t, refs)/h) for each node in `nodes`
Matrix weight_rows(const PseudoDistanceTable& dist, const std::vector<int>& nodes,
                   KernelFamily family, double h) {
    const int nr = static_cast<int>(dist.references.size());
    Matrix w(nodes.size(), nr);
    const double inv_h = 1.0 / h;
    for (std::size_t t = 0; t < nodes.size(); ++t) {
        const int row = dist.row_of(nodes[t]);
        if (row < 0)
            throw ValidationError("distance table does not cover node " + std::to_string(nodes[t]));
        for (int r = 0; r < nr; ++r) w(t, r) = kernel_raw(family, dist.d(row, r) * inv_h);
    }
    return w;
}

struct CvScore {
    double total = 0.0;
    long scorable = 0;
};

// Score one bandwidth over the CV pairs. Pair (i,j): i indexes refs, j indexes
// the unsampled list; references exclude i on both sides. Pairs with no kernel
// mass contribute the fallback (clamped Pi) error.
CvScore cv_score_h(const Workspace& w, const PseudoDistanceTable& dist, KernelFamily family,
                   double h, const std::vector<std::pair<int, int>>& pairs,
                   bool include_diag_refs) {
    const int nr = static_cast<int>(w.refs.size());
    const Matrix u = weight_rows(dist, w.refs, family, h);       // nr x nr
    const Matrix v = weight_rows(dist, w.unsampled, family, h);  // q x nr
    const Vector sum_u = u.rowwise().sum();
    const Vector sum_v = v.rowwise().sum();
    const Matrix p1 = w.r_rr * v.transpose();                    // nr x q
    const Matrix g = u * w.r_rc;                                 // nr x q
    const Matrix w2 = u * p1;                                    // nr x q
    const Vector ru_diag = (u * w.r_rr).diagonal();
    const Vector r_diag = w.r_rr.diagonal();

    // optional ablation: remove i'=j' reference pairs from the double sum
    Matrix diag_num, diag_den;
    if (!include_diag_refs) {
        diag_num = u * r_diag.asDiagonal() * v.transpose();  // nr x q
        diag_den = u * v.transpose();                        // nr x q
    }

    CvScore score;
    for (const auto& [i, j] : pairs) {
        const double uii = u(i, i);
        const double vji = v(j, i);
        const double row_den = sum_v(j) - vji;
        const double col_den = sum_u(i) - uii;
        const double pi_ij = w.pi_at(w.refs[i], w.unsampled[j]);
        double pred;
        if (row_den > 0.0 && col_den > 0.0) {
            const double row_num = p1(i, j) - vji * w.r_rr(i, i);
            const double col_num = g(i, j) - uii * w.r_rc(i, j);
            double grand_num =
                w2(i, j) - uii * p1(i, j) - vji * ru_diag(i) + uii * vji * w.r_rr(i, i);
            double grand_den = row_den * col_den;
            if (!include_diag_refs) {
                grand_num -= diag_num(i, j) - uii * vji * w.r_rr(i, i);
                grand_den -= diag_den(i, j) - uii * vji;
                if (grand_den <= 0.0) {
                    pred = clamp01(pi_ij);
                    const double e = w.a_rc(i, j) - pred;
                    score.total += e * e;
                    continue;
                }
            }
            pred = row_num / row_den + col_num / col_den - grand_num / grand_den + pi_ij;
            ++score.scorable;
        } else {
            pred = clamp01(pi_ij);
        }
        const double e = w.a_rc(i, j) - pred;
        score.total += e * e;
    }
    return score;
}

std::vector<std::pair<int, int>> cv_pairs(int nr, int q, int cap, std::uint64_t seed) {
    const long total = static_cast<long>(nr) * q;
    std::vector<std::pair<int, int>> pairs;
    if (cap <= 0 || total <= cap) {
        pairs.reserve(total);
        for (int i = 0; i < nr; ++i)
            for (int j = 0; j < q; ++j) pairs.emplace_back(i, j);
        return pairs;
    }
    RngStream rng(seed, rng_purpose::cv_pairs);
    // partial Fisher-Yates over flat pair ids
    std::vector<long> ids(total);
    for (long k = 0; k < total; ++k) ids[k] = k;
    pairs.reserve(cap);
    for (int k = 0; k < cap; ++k) {
        const long j = k + static_cast<long>(rng.uniform_int(static_cast<std::uint64_t>(total - k)));
        std::swap(ids[k], ids[j]);
        pairs.emplace_back(static_cast<int>(ids[k] / q), static_cast<int>(ids[k] % q));
    }
    return pairs;
}

double select_h(const Workspace& w, const PseudoDistanceTable& dist, KernelFamily family,
                const std::vector<double>& grid, int cv_pair_cap, std::uint64_t seed,
                bool include_diag_refs) {
    if (grid.empty()) throw ValidationError("cross_validate_h: empty bandwidth grid");
    std::vector<double> hs = grid;
    std::sort(hs.begin(), hs.end());
    if (hs.front() <= 0.0) throw ValidationError("cross_validate_h: bandwidths must be positive");
    const auto pairs = cv_pairs(static_cast<int>(w.refs.size()),
                                static_cast<int>(w.unsampled.size()), cv_pair_cap, seed);
    if (pairs.empty()) throw NumericalError("cross_validate_h: no CV pairs available");
    double best_h = -1.0;
    double best_score = std::numeric_limits<double>::infinity();
    for (const double h : hs) {  // ascending: ties break toward smaller h
        const CvScore s = cv_score_h(w, dist, family, h, pairs, include_diag_refs);
        if (s.scorable == 0) continue;  // excluded: nothing scorable at this h
        if (s.total < best_score) {
            best_score = s.total;
            best_h = h;
        }
    }
    if (best_h < 0.0) throw NumericalError("cross_validate_h: every bandwidth was excluded");
    return best_h;
}

struct ImputeCore {
    Matrix values;  // q x q raw TWFE + Pi values (before truncation), diag unused
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> fell_back;
    int fallback_count = 0;
};

ImputeCore impute_core(const Workspace& w, const PseudoDistanceTable& dist_rows,
                       const PseudoDistanceTable& dist_cols, KernelFamily family, double h,
                       bool include_diag_refs) {
    const int q = static_cast<int>(w.unsampled.size());
    const Matrix vr = weight_rows(dist_rows, w.unsampled, family, h);  // q x nr (i side)
    const Matrix vc = weight_rows(dist_cols, w.unsampled, family, h);  // q x nr (j side)
    const Vector sum_r = vr.rowwise().sum();
    const Vector sum_c = vc.rowwise().sum();
    const Matrix rn_c = w.r_cr * vc.transpose();  // rn_c(i,j) = sum_j' vc(j,j') R(C_i, ref_j')
    const Matrix rn_r = w.r_cr * vr.transpose();
    const Matrix w2 = vr * w.r_rr * vc.transpose();  // w2(i,j) = vr_i' R vc_j
    Matrix diag_num, diag_den;
    if (!include_diag_refs) {
        diag_num = vr * w.r_rr.diagonal().asDiagonal() * vc.transpose();
        diag_den = vr * vc.transpose();
    }

    ImputeCore out;
    out.values.resize(q, q);
    out.fell_back.setZero(q, q);
    for (int i = 0; i < q; ++i) {
        for (int j = 0; j < q; ++j) {
            if (i == j) {
                out.values(i, j) = 0.0;
                continue;
            }
            const double pi_ij = w.pi_at(w.unsampled[i], w.unsampled[j]);
            double grand_den = sum_r(i) * sum_c(j);
            if (sum_r(i) > 0.0 && sum_c(j) > 0.0) {
                double grand_num = w2(i, j);
                if (!include_diag_refs) {
                    grand_num -= diag_num(i, j);
                    grand_den -= diag_den(i, j);
                }
                if (grand_den > 0.0) {
                    out.values(i, j) = rn_c(i, j) / sum_c(j) + rn_r(j, i) / sum_r(i) -
                                       grand_num / grand_den + pi_ij;
                    continue;
                }
            }
            out.values(i, j) = clamp01(pi_ij);
            out.fell_back(i, j) = 1;
            ++out.fallback_count;
        }
    }
    return out;
}

ImputedNetwork assemble(const PartialNetwork& pn, const Workspace& w, const ImputeCore& core,
                        bool symmetrize) {
    const int n = pn.n_total();
    const int q = static_cast<int>(w.unsampled.size());
    ImputedNetwork out;
    out.a_hat = pn.base.adj;
    out.provenance.setConstant(n, n, static_cast<std::uint8_t>(Provenance::observed));
    out.fallback_count = 0;
    for (int i = 0; i < q; ++i) {
        for (int j = i + 1; j < q; ++j) {
            // both orientations are identical by construction (the weights
            // depend only on the endpoints); averaging is a guard
            double v = symmetrize ? 0.5 * (core.values(i, j) + core.values(j, i))
                                  : core.values(i, j);
            v = clamp01(v);
            const int a = w.unsampled[i], b = w.unsampled[j];
            out.a_hat(a, b) = v;
            out.a_hat(b, a) = v;
            out.provenance(a, b) = static_cast<std::uint8_t>(Provenance::imputed);
            out.provenance(b, a) = static_cast<std::uint8_t>(Provenance::imputed);
            if (core.fell_back(i, j)) ++out.fallback_count;
        }
    }
    out.a_hat.diagonal().setZero();
    return out;
}

Matrix pipeline_pi(const PartialNetwork& pn, const CovariateSet* cov, const PiModel* model) {
    if (model == nullptr || cov == nullptr) return Matrix();
    return predict_pi_matrix(*model, *cov);
}

std::vector<int> all_nodes(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return v;
}

PiKind resolve_first_stage(FirstStage fs, int d_x) {
    switch (fs) {
        case FirstStage::local_linear: return PiKind::local_linear;
        case FirstStage::linear_projection: return PiKind::linear_projection;
        case FirstStage::automatic: return default_pi_kind(d_x);
    }
    return PiKind::linear_projection;
}

}  // namespace

double twfe_impute_pair(const Matrix& r_refs, const Vector& r_row_i, const Vector& r_col_j,
                        const Vector& w_i, const Vector& w_j, int node_i, int node_j) {
    const auto nr = r_refs.rows();
    if (r_refs.cols() != nr || r_row_i.size() != nr || r_col_j.size() != nr ||
        w_i.size() != nr || w_j.size() != nr)
        throw ValidationError("twfe_impute_pair: inconsistent reference dimensions");
    const double sum_i = w_i.sum();
    const double sum_j = w_j.sum();
    if (sum_i <= 0.0) throw NoNeighborsError(node_i);
    if (sum_j <= 0.0) throw NoNeighborsError(node_j);
    const double row_term = w_j.dot(r_row_i) / sum_j;
    const double col_term = w_i.dot(r_col_j) / sum_i;
    const double grand = w_i.dot(r_refs * w_j) / (sum_i * sum_j);
    return row_term + col_term - grand;
}

std::vector<double> auto_h_grid(const PseudoDistanceTable& dist, int points) {
    std::vector<double> pos;
    pos.reserve(dist.d.size());
    for (Eigen::Index k = 0; k < dist.d.size(); ++k) {
        const double v = dist.d.data()[k];
        if (v > 0.0) pos.push_back(v);
    }
    if (pos.empty()) return {1.0};
    std::vector<double> tmp = pos;
    const double lo = std::max(quantile(tmp, 0.10), 1e-12);
    const double hi = 2.0 * quantile(tmp, 0.90);
    if (hi <= lo) return {lo};
    std::vector<double> grid(points);
    const double ratio = std::log(hi / lo) / (points - 1);
    for (int k = 0; k < points; ++k) grid[k] = lo * std::exp(ratio * k);
    return grid;
}

double cross_validate_h(const PartialNetwork& pn, const PiModel* pi_model,
                        const CovariateSet* cov, const PseudoDistanceTable& dist,
                        const std::vector<double>& h_grid, int cv_pair_cap, std::uint64_t seed,
                        KernelFamily kernel) {
    const Matrix pi = pipeline_pi(pn, cov, pi_model);
    const Workspace w = make_workspace(pn, pi, dist.references);
    return select_h(w, dist, kernel, h_grid, cv_pair_cap, seed, true);
}

ImputedNetwork impute_missing(const PartialNetwork& pn, const PiModel* pi_model,
                              const CovariateSet* cov, const PseudoDistanceTable& dist_rows,
                              const PseudoDistanceTable& dist_cols, const KernelSpec& kernel,
                              bool symmetrize) {
    if (kernel.h <= 0.0) throw ValidationError("impute_missing: bandwidth must be positive");
    if (dist_rows.references != dist_cols.references)
        throw ValidationError("impute_missing: row/column tables use different reference sets");
    const Matrix pi = pipeline_pi(pn, cov, pi_model);
    const Workspace w = make_workspace(pn, pi, dist_rows.references);
    const ImputeCore core =
        impute_core(w, dist_rows, dist_cols, kernel.family, kernel.h, true);
    return assemble(pn, w, core, symmetrize);
}

std::pair<ImputedNetwork, double> impute_with_cv_precomputed(const PartialNetwork& pn,
                                                             const Matrix& pi,
                                                             const PseudoDistanceTable& dist,
                                                             const ImputeConfig& cfg) {
    if (dist.references != pn.sampled)
        throw ValidationError("impute_with_cv: distance table references must equal S");
    const std::vector<double> grid = cfg.h_grid.empty() ? auto_h_grid(dist) : cfg.h_grid;
    const Workspace w = make_workspace(pn, pi, pn.sampled);
    const double h_star =
        select_h(w, dist, cfg.kernel, grid, cfg.cv_pair_cap, cfg.seed, cfg.include_diagonal_refs);
    const double h_use = h_star * cfg.undersmooth;
    if (h_use <= 0.0) throw ValidationError("impute_with_cv: undersmooth multiplier must be positive");
    const ImputeCore core =
        impute_core(w, dist, dist, cfg.kernel, h_use, cfg.include_diagonal_refs);
    return {assemble(pn, w, core, cfg.symmetrize), h_star};
}

std::pair<ImputedNetwork, double> impute_with_cv(const PartialNetwork& pn,
                                                 const CovariateSet& cov,
                                                 const ImputeConfig& cfg) {
    const int d_x = cov.dim();
    Matrix pi;
    if (d_x > 0) {
        const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, d_x};
        const PiModel model = fit_pi(pn, cov, spec, resolve_first_stage(cfg.first_stage, d_x));
        pi = predict_pi_matrix(model, cov);
    }
    const auto dist = pseudo_distance(pn, all_nodes(pn.n_total()), pn.sampled);
    return impute_with_cv_precomputed(pn, pi, dist, cfg);
}

std::pair<ImputedNetwork, double> impute_split_precomputed(const PartialNetwork& pn,
                                                           const Matrix& pi,
                                                           const ImputeConfig& cfg) {
    const int n = pn.n_sampled();
    if (n < 4) throw ValidationError("impute_split: need |S| >= 4");
    std::vector<int> shuffled = pn.sampled;
    RngStream rng(cfg.seed, rng_purpose::split);
    rng.shuffle(shuffled);
    const int half = (n + 1) / 2;  // odd |S|: S1 gets the extra node
    std::vector<int> s1(shuffled.begin(), shuffled.begin() + half);
    std::vector<int> s2(shuffled.begin() + half, shuffled.end());
    std::sort(s1.begin(), s1.end());
    std::sort(s2.begin(), s2.end());

    std::vector<int> targets = s2;
    const std::vector<int> unsampled = pn.unsampled();
    targets.insert(targets.end(), unsampled.begin(), unsampled.end());
    std::sort(targets.begin(), targets.end());
    const auto dist = pseudo_distance_split(pn, s1, s2, targets);
    const std::vector<double> grid = cfg.h_grid.empty() ? auto_h_grid(dist) : cfg.h_grid;
    const Workspace w = make_workspace(pn, pi, s2);
    const double h_star =
        select_h(w, dist, cfg.kernel, grid, cfg.cv_pair_cap, cfg.seed, cfg.include_diagonal_refs);
    const double h_use = h_star * cfg.undersmooth;
    if (h_use <= 0.0) throw ValidationError("impute_split: undersmooth multiplier must be positive");
    const ImputeCore core =
        impute_core(w, dist, dist, cfg.kernel, h_use, cfg.include_diagonal_refs);
    return {assemble(pn, w, core, cfg.symmetrize), h_star};
}

std::pair<ImputedNetwork, double> impute_split(const PartialNetwork& pn, const CovariateSet& cov,
                                               const ImputeConfig& cfg) {
    Matrix pi;
    if (cov.dim() > 0) {
        const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, cov.dim()};
        const PiModel model = fit_pi(pn, cov, spec, resolve_first_stage(cfg.first_stage, cov.dim()));
        pi = predict_pi_matrix(model, cov);
    }
    return impute_split_precomputed(pn, pi, cfg);
}

}  // namespace netimpute
