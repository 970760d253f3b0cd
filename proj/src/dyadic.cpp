#include "netimpute/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "netimpute/parallel.hpp"
#include "netimpute/rng.hpp"

namespace netimpute {

Vector dyad_features(const DyadFeatureSpec& spec, const Vector& x_i, const Vector& x_j) {
    if (x_i.size() != spec.dim || x_j.size() != spec.dim)
        throw ValidationError("dyad_features: vector length does not match d_X");
    Vector w(spec.dim);
    for (int d = 0; d < spec.dim; ++d) {
        const double diff = x_i(d) - x_j(d);
        w(d) = spec.mode == DyadFeatureMode::absolute_difference ? std::abs(diff) : diff * diff;
    }
    return w;
}

PiKind default_pi_kind(int d_x) {
    return d_x <= 3 ? PiKind::local_linear : PiKind::linear_projection;
}

namespace detail {

// Training dyads bucketed on a per-dimension grid with cell width equal to the
// bandwidth, so a query touches at most 3 cells per dimension. Features and
// responses are stored contiguously per cell.
struct LocalLinearData {
    int dim = 0;
    long m = 0;
    double lo[3] = {0, 0, 0};
    double cell_w[3] = {1, 1, 1};
    int n_cells[3] = {1, 1, 1};
    std::vector<long> offsets;           // CSR offsets, size n_cells_total + 1
    std::vector<double> feat[3];         // per-point features, cell-contiguous
    std::vector<double> resp;

    long cell_id(const int* c) const {
        long id = c[0];
        for (int d = 1; d < dim; ++d) id = id * n_cells[d] + c[d];
        return id;
    }
};

}  // namespace detail

using detail::LocalLinearData;

namespace {

constexpr int kMaxCellsPerDim = 2048;

std::vector<std::pair<int, int>> observed_dyads(const PartialNetwork& pn) {
    const int n = pn.n_total();
    const std::vector<char> mask = pn.sampled_mask();
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (mask[i] || mask[j]) out.emplace_back(i, j);
    return out;
}

Vector ols_fit(const Matrix& design, const Vector& y) {
    const int p = static_cast<int>(design.cols());
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        // the permutation puts dependent columns last; report them
        const auto& perm = qr.colsPermutation().indices();
        std::string cols;
        for (int k = qr.rank(); k < p; ++k) {
            const int c = perm(k);
            if (!cols.empty()) cols += ", ";
            cols += c == 0 ? "intercept" : "omega[" + std::to_string(c - 1) + "]";
        }
        throw ValidationError("fit_pi: singular design, collinear columns: " + cols);
    }
    return qr.solve(y);
}

// Solve the (1+d) x (1+d) weighted normal equations by Gaussian elimination
// with partial pivoting. Returns false when numerically singular.
bool solve_small(double s[4][4], double t[4], int p, double* out) {
    int piv[4] = {0, 1, 2, 3};
    double scale = 0.0;
    for (int i = 0; i < p; ++i) scale = std::max(scale, std::abs(s[i][i]));
    if (scale <= 0.0) return false;
    for (int col = 0; col < p; ++col) {
        int best = col;
        for (int r = col + 1; r < p; ++r)
            if (std::abs(s[piv[r]][col]) > std::abs(s[piv[best]][col])) best = r;
        std::swap(piv[col], piv[best]);
        const double pv = s[piv[col]][col];
        if (std::abs(pv) < 1e-13 * scale) return false;
        for (int r = col + 1; r < p; ++r) {
            const double f = s[piv[r]][col] / pv;
            if (f == 0.0) continue;
            for (int c = col; c < p; ++c) s[piv[r]][c] -= f * s[piv[col]][c];
            t[piv[r]] -= f * t[piv[col]];
        }
    }
    for (int col = p - 1; col >= 0; --col) {
        double v = t[piv[col]];
        for (int c = col + 1; c < p; ++c) v -= s[piv[col]][c] * out[c];
        out[col] = v / s[piv[col]][col];
    }
    return true;
}

}  // namespace

double PiModel::predict_feature(const Vector& w) const {
    if (kind == PiKind::linear_projection) {
        double v = coef(0);
        for (int d = 0; d < spec.dim; ++d) v += coef(d + 1) * w(d);
        return v;
    }
    const LocalLinearData& dat = *local;
    const int dim = dat.dim;
    const int p = 1 + dim;
    double q[3] = {0, 0, 0};
    int c_lo[3] = {0, 0, 0}, c_hi[3] = {0, 0, 0};
    for (int d = 0; d < dim; ++d) {
        q[d] = w(d);
        const double b = bandwidth(d);
        c_lo[d] = std::max(0, static_cast<int>(std::floor((q[d] - b - dat.lo[d]) / dat.cell_w[d])));
        c_hi[d] = std::min(dat.n_cells[d] - 1,
                           static_cast<int>(std::floor((q[d] + b - dat.lo[d]) / dat.cell_w[d])));
    }
    double s[4][4] = {{0}};
    double t[4] = {0, 0, 0, 0};
    double inv_b[3] = {0, 0, 0};
    for (int d = 0; d < dim; ++d) inv_b[d] = 1.0 / bandwidth(d);

    if (dim == 2) {
        // hot path: lane-parallel branchless accumulation (order fixed, so the
        // result is identical across runs and thread counts)
        const double q1 = q[0], q2 = q[1];
        const double ib1 = inv_b[0], ib2 = inv_b[1];
        double s00 = 0, s10 = 0, s01 = 0, s20 = 0, s11 = 0, s02 = 0;
        double t0 = 0, t1 = 0, t2 = 0;
        const double* __restrict f1 = dat.feat[0].data();
        const double* __restrict f2 = dat.feat[1].data();
        const double* __restrict yy = dat.resp.data();
        for (int c1 = c_lo[0]; c1 <= c_hi[0]; ++c1) {
            for (int c2 = c_lo[1]; c2 <= c_hi[1]; ++c2) {
                const long id = static_cast<long>(c1) * dat.n_cells[1] + c2;
                const long begin = dat.offsets[id], end = dat.offsets[id + 1];
#pragma omp simd reduction(+ : s00, s10, s01, s20, s11, s02, t0, t1, t2)
                for (long pnt = begin; pnt < end; ++pnt) {
                    const double z1 = f1[pnt] - q1;
                    const double z2 = f2[pnt] - q2;
                    const double u1 = z1 * ib1;
                    const double u2 = z2 * ib2;
                    double a1 = 0.75 - 0.75 * u1 * u1;
                    double a2 = 0.75 - 0.75 * u2 * u2;
                    a1 = a1 > 0.0 ? a1 : 0.0;
                    a2 = a2 > 0.0 ? a2 : 0.0;
                    const double wk = a1 * a2;
                    const double y = yy[pnt];
                    const double wz1 = wk * z1;
                    const double wz2 = wk * z2;
                    s00 += wk;
                    s10 += wz1;
                    s01 += wz2;
                    s20 += wz1 * z1;
                    s11 += wz1 * z2;
                    s02 += wz2 * z2;
                    t0 += wk * y;
                    t1 += wz1 * y;
                    t2 += wz2 * y;
                }
            }
        }
        s[0][0] = s00;
        s[0][1] = s10;
        s[0][2] = s01;
        s[1][1] = s20;
        s[1][2] = s11;
        s[2][2] = s02;
        t[0] = t0;
        t[1] = t1;
        t[2] = t2;
    } else {
        int cell[3] = {c_lo[0], c_lo[1], c_lo[2]};
        bool any = c_lo[0] <= c_hi[0];
        for (int d = 1; d < dim; ++d) any = any && c_lo[d] <= c_hi[d];
        while (any) {
            const long id = dat.cell_id(cell);
            const long begin = dat.offsets[id], end = dat.offsets[id + 1];
            for (long pnt = begin; pnt < end; ++pnt) {
                double wk = 1.0;
                double z[3];
                for (int d = 0; d < dim; ++d) {
                    z[d] = dat.feat[d][pnt] - q[d];
                    const double u = z[d] * inv_b[d];
                    const double a = 1.0 - u * u;
                    wk *= a > 0.0 ? 0.75 * a : 0.0;
                }
                if (wk <= 0.0) continue;
                const double y = dat.resp[pnt];
                s[0][0] += wk;
                t[0] += wk * y;
                for (int d = 0; d < dim; ++d) {
                    const double wz = wk * z[d];
                    s[0][d + 1] += wz;
                    t[d + 1] += wz * y;
                    for (int e = d; e < dim; ++e) s[d + 1][e + 1] += wz * z[e];
                }
            }
            // advance the cell cursor over the query box
            int d = dim - 1;
            while (d >= 0) {
                if (++cell[d] <= c_hi[d]) break;
                cell[d] = c_lo[d];
                --d;
            }
            if (d < 0) break;
        }
    }

    const double s00 = s[0][0];
    if (s00 <= 0.0) {  // empty window
        double v = global_coef(0);
        for (int d = 0; d < dim; ++d) v += global_coef(d + 1) * w(d);
        return v;
    }
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < r; ++c) s[r][c] = s[c][r];
    double sol[4];
    double s_copy[4][4];
    std::memcpy(s_copy, s, sizeof(s));
    double t_copy[4];
    std::memcpy(t_copy, t, sizeof(t));
    if (solve_small(s_copy, t_copy, p, sol) && std::isfinite(sol[0])) return sol[0];
    return t[0] / s00;  // local constant when the local design is singular
}

namespace {

// core fitter: explicit per-dimension bandwidths override the rule of thumb,
// and exclude (parallel to the observed-dyad list) drops holdout dyads from
// the training design
PiModel fit_pi_core(const PartialNetwork& pn, const CovariateSet& cov,
                    const DyadFeatureSpec& spec, PiKind kind,
                    std::optional<double> bandwidth, const Vector* bandwidths,
                    const std::vector<char>* exclude) {
    if (cov.n() != pn.n_total()) throw ValidationError("fit_pi: covariate rows != network size");
    if (spec.dim != cov.dim()) throw ValidationError("fit_pi: feature spec dim != d_X");
    if (spec.dim == 0) throw ValidationError("fit_pi: d_X = 0, first stage not applicable");
    if (kind == PiKind::local_linear && spec.dim > 3)
        throw ValidationError("fit_pi: local-linear first stage supports d_X <= 3");

    auto dyads = observed_dyads(pn);
    if (exclude != nullptr) {
        if (exclude->size() != dyads.size())
            throw ValidationError("fit_pi: holdout mask length mismatch");
        std::vector<std::pair<int, int>> kept;
        kept.reserve(dyads.size());
        for (std::size_t k = 0; k < dyads.size(); ++k)
            if (!(*exclude)[k]) kept.push_back(dyads[k]);
        dyads.swap(kept);
    }
    const long m = static_cast<long>(dyads.size());
    if (m < spec.dim + 2) throw ValidationError("fit_pi: fewer observed dyads than d_X + 2");

    Matrix design(m, 1 + spec.dim);
    Vector y(m);
    for (long k = 0; k < m; ++k) {
        const auto [i, j] = dyads[k];
        design(k, 0) = 1.0;
        for (int d = 0; d < spec.dim; ++d) {
            const double diff = cov.x(i, d) - cov.x(j, d);
            design(k, d + 1) =
                spec.mode == DyadFeatureMode::absolute_difference ? std::abs(diff) : diff * diff;
        }
        y(k) = pn.base.adj(i, j);
    }

    PiModel model;
    model.spec = spec;
    model.kind = kind;
    if (kind == PiKind::linear_projection) {
        model.coef = ols_fit(design, y);
        return model;
    }

    model.global_coef = ols_fit(design, y);
    model.bandwidth.resize(spec.dim);
    const double rate = std::pow(static_cast<double>(m), -1.0 / (4.0 + spec.dim));
    for (int d = 0; d < spec.dim; ++d) {
        if (bandwidths != nullptr) {
            model.bandwidth(d) = (*bandwidths)(d);
        } else if (bandwidth) {
            model.bandwidth(d) = *bandwidth;
        } else {
            const double mean = design.col(d + 1).mean();
            const double sd =
                std::sqrt((design.col(d + 1).array() - mean).square().sum() / std::max<long>(m - 1, 1));
            model.bandwidth(d) = sd > 0.0 ? sd * rate : 1.0;
        }
        if (model.bandwidth(d) <= 0.0) throw ValidationError("fit_pi: bandwidth must be positive");
    }

    auto dat = std::make_shared<LocalLinearData>();
    dat->dim = spec.dim;
    dat->m = m;
    long total_cells = 1;
    for (int d = 0; d < spec.dim; ++d) {
        const double lo = design.col(d + 1).minCoeff();
        const double hi = design.col(d + 1).maxCoeff();
        dat->lo[d] = lo;
        const double range = std::max(hi - lo, 0.0);
        double cw = model.bandwidth(d);
        int nc = static_cast<int>(range / cw) + 1;
        if (nc > kMaxCellsPerDim) {
            nc = kMaxCellsPerDim;
            cw = range / nc * (1.0 + 1e-12) + 1e-300;
            nc += 1;
        }
        dat->cell_w[d] = cw;
        dat->n_cells[d] = nc;
        total_cells *= nc;
    }
    std::vector<long> ids(m);
    std::vector<long> counts(total_cells + 1, 0);
    for (long k = 0; k < m; ++k) {
        int c[3] = {0, 0, 0};
        for (int d = 0; d < spec.dim; ++d) {
            int idx = static_cast<int>((design(k, d + 1) - dat->lo[d]) / dat->cell_w[d]);
            c[d] = std::clamp(idx, 0, dat->n_cells[d] - 1);
        }
        ids[k] = dat->cell_id(c);
        ++counts[ids[k] + 1];
    }
    for (long c = 0; c < total_cells; ++c) counts[c + 1] += counts[c];
    dat->offsets = counts;
    for (int d = 0; d < spec.dim; ++d) dat->feat[d].resize(m);
    dat->resp.resize(m);
    std::vector<long> cursor(dat->offsets.begin(), dat->offsets.end() - 1);
    for (long k = 0; k < m; ++k) {
        const long pos = cursor[ids[k]]++;
        for (int d = 0; d < spec.dim; ++d) dat->feat[d][pos] = design(k, d + 1);
        dat->resp[pos] = y(k);
    }
    model.local = std::move(dat);
    return model;
}

}  // namespace

PiModel fit_pi(const PartialNetwork& pn, const CovariateSet& cov, const DyadFeatureSpec& spec,
               PiKind kind, std::optional<double> bandwidth) {
    return fit_pi_core(pn, cov, spec, kind, bandwidth, nullptr, nullptr);
}

double predict_pi(const PiModel& model, const CovariateSet& cov, int i, int j) {
    if (i < 0 || j < 0 || i >= cov.n() || j >= cov.n())
        throw ValidationError("predict_pi: node index out of range");
    Vector xi = cov.x.row(i).transpose();
    Vector xj = cov.x.row(j).transpose();
    return model.predict_feature(dyad_features(model.spec, xi, xj));
}

Matrix predict_pi_matrix(const PiModel& model, const CovariateSet& cov, int threads) {
    const int n = cov.n();
    Matrix pi(n, n);
    // omega(x_i, x_i) = 0 for both feature modes, so the diagonal is one query
    const double diag = model.predict_feature(Vector::Zero(model.spec.dim));
    pi.diagonal().setConstant(diag);
    parallel_for(n, threads, [&](int i) {
        Vector w(model.spec.dim);
        for (int j = i + 1; j < n; ++j) {
            for (int d = 0; d < model.spec.dim; ++d) {
                const double diff = cov.x(i, d) - cov.x(j, d);
                w(d) = model.spec.mode == DyadFeatureMode::absolute_difference ? std::abs(diff)
                                                                               : diff * diff;
            }
            pi(i, j) = model.predict_feature(w);
        }
    });
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pi(j, i) = pi(i, j);
    return pi;
}

ResidualTable residual_from_pi(const PartialNetwork& pn, const Matrix& pi) {
    const std::vector<int> s = pn.sampled;
    const std::vector<int> c = pn.unsampled();
    const int ns = static_cast<int>(s.size());
    const int nc = static_cast<int>(c.size());
    const bool has_pi = pi.size() > 0;
    ResidualTable table;
    table.sampled = s;
    table.unsampled = c;
    table.r_ss.resize(ns, ns);
    table.r_cs.resize(nc, ns);
    const Matrix& a = pn.base.adj;
    for (int bi = 0; bi < ns; ++bi)
        for (int bj = 0; bj < ns; ++bj)
            table.r_ss(bi, bj) = a(s[bi], s[bj]) - (has_pi ? pi(s[bi], s[bj]) : 0.0);
    for (int bi = 0; bi < nc; ++bi)
        for (int bj = 0; bj < ns; ++bj)
            table.r_cs(bi, bj) = a(c[bi], s[bj]) - (has_pi ? pi(c[bi], s[bj]) : 0.0);
    return table;
}

ResidualTable residual_matrix(const PartialNetwork& pn, const PiModel& model,
                              const CovariateSet& cov) {
    return residual_from_pi(pn, predict_pi_matrix(model, cov));
}

PiBandwidthChoice cv_pi_bandwidth(const PartialNetwork& pn, const CovariateSet& cov,
                                  const DyadFeatureSpec& spec,
                                  const std::vector<double>& multipliers, std::uint64_t seed) {
    if (multipliers.empty()) throw ValidationError("cv_pi_bandwidth: empty multiplier grid");
    std::vector<double> grid = multipliers;
    std::sort(grid.begin(), grid.end());
    if (grid.front() <= 0.0) throw ValidationError("cv_pi_bandwidth: multipliers must be positive");

    const auto dyads = observed_dyads(pn);
    RngStream rng(seed, rng_purpose::holdout);
    std::vector<char> held(dyads.size(), 0);
    long n_held = 0;
    for (std::size_t k = 0; k < dyads.size(); ++k)
        if (rng.bernoulli(0.10)) {
            held[k] = 1;
            ++n_held;
        }
    if (n_held == 0 || n_held == static_cast<long>(dyads.size()))
        throw ValidationError("cv_pi_bandwidth: degenerate holdout split");

    std::vector<std::pair<int, int>> held_pairs;
    for (std::size_t k = 0; k < dyads.size(); ++k)
        if (held[k]) held_pairs.push_back(dyads[k]);

    // rule-of-thumb scale from a fit on all observed dyads
    const PiModel rule = fit_pi(pn, cov, spec, PiKind::local_linear);

    double best_score = std::numeric_limits<double>::infinity();
    double best_mult = grid.front();
    for (const double mult : grid) {
        const Vector bw = rule.bandwidth * mult;
        const PiModel m = fit_pi_core(pn, cov, spec, PiKind::local_linear, std::nullopt, &bw, &held);
        double score = 0.0;
        for (const auto& [i, j] : held_pairs) {
            const double pred = predict_pi(m, cov, i, j);
            const double e = pn.base.adj(i, j) - pred;
            score += e * e;
        }
        if (score < best_score - 1e-12) {
            best_score = score;
            best_mult = mult;
        }
    }
    PiBandwidthChoice choice;
    choice.multiplier = best_mult;
    const Vector bw = rule.bandwidth * best_mult;
    choice.model = fit_pi_core(pn, cov, spec, PiKind::local_linear, std::nullopt, &bw, nullptr);
    return choice;
}

}  // namespace netimpute
