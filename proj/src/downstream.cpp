#include "netimpute/downstream.hpp"

#include <Eigen/LU>
#include <cmath>

namespace netimpute {

NormalizedNetwork row_normalize(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw ValidationError("row_normalize: matrix must be square");
    NormalizedNetwork out;
    out.g = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const double rs = a.row(i).sum();
        if (rs > 0.0)
            out.g.row(i) = a.row(i) / rs;
        else
            out.zero_rows.push_back(i);
    }
    return out;
}

Vector degree_centrality(const Matrix& a) {
    return a.rowwise().sum() / static_cast<double>(a.rows());
}

EigenCentrality eigenvector_centrality_noexcept(const Matrix& a, double tol, int max_iter) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw ValidationError("eigenvector_centrality: matrix must be square");
    EigenCentrality out;
    if (a.cwiseAbs().maxCoeff() == 0.0) {
        out.phi = Vector::Zero(n);
        out.zero_matrix = true;
        return out;
    }
    Vector v = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    Vector next(n);
    for (int it = 1; it <= max_iter; ++it) {
        next.noalias() = a * v;
        const double norm = next.norm();
        if (norm == 0.0) {
            // start vector in the null space; restart off-center
            v.setZero();
            v(it % n) = 1.0;
            continue;
        }
        next /= norm;
        const double diff = (next - v).cwiseAbs().maxCoeff();
        const double diff_flip = (next + v).cwiseAbs().maxCoeff();
        v = next;
        if (std::min(diff, diff_flip) < tol) {
            if (v.sum() < 0.0) v = -v;
            out.phi = std::sqrt(static_cast<double>(n)) * v;
            out.iterations = it;
            return out;
        }
    }
    if (v.sum() < 0.0) v = -v;
    out.phi = std::sqrt(static_cast<double>(n)) * v;
    out.iterations = max_iter;
    out.converged = false;
    return out;
}

EigenCentrality eigenvector_centrality(const Matrix& a, double tol, int max_iter) {
    EigenCentrality out = eigenvector_centrality_noexcept(a, tol, max_iter);
    if (!out.converged)
        throw NumericalError(
            "eigenvector_centrality: power iteration did not converge (spectral gap may be tiny)");
    return out;
}

CentralityEstimate centrality_ols(const std::vector<Vector>& y_per_network,
                                  const std::vector<Vector>& phi_per_network) {
    const int m = static_cast<int>(y_per_network.size());
    if (m == 0 || phi_per_network.size() != y_per_network.size())
        throw ValidationError("centrality_ols: inconsistent network lists");
    double s0 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (int k = 0; k < m; ++k) {
        if (y_per_network[k].size() != phi_per_network[k].size())
            throw ValidationError("centrality_ols: y/phi length mismatch in network " +
                                  std::to_string(k));
        const Vector& y = y_per_network[k];
        const Vector& x = phi_per_network[k];
        s0 += static_cast<double>(x.size());
        sx += x.sum();
        sxx += x.squaredNorm();
        sy += y.sum();
        sxy += x.dot(y);
    }
    const double det = s0 * sxx - sx * sx;
    if (std::abs(det) < 1e-14 * std::max(1.0, s0 * sxx))
        throw NumericalError("centrality_ols: degenerate design (constant centrality)");
    CentralityEstimate est;
    est.alpha_1 = (s0 * sxy - sx * sy) / det;
    est.alpha_c = (sy - sx * est.alpha_1) / s0;

    if (m >= 2) {
        // cluster-robust sandwich, clusters = networks
        Eigen::Matrix2d bread;
        bread << s0, sx, sx, sxx;
        const Eigen::Matrix2d bread_inv = bread.inverse();
        Eigen::Matrix2d meat = Eigen::Matrix2d::Zero();
        for (int k = 0; k < m; ++k) {
            const Vector& y = y_per_network[k];
            const Vector& x = phi_per_network[k];
            Eigen::Vector2d score = Eigen::Vector2d::Zero();
            for (int i = 0; i < x.size(); ++i) {
                const double e = y(i) - est.alpha_c - est.alpha_1 * x(i);
                score(0) += e;
                score(1) += x(i) * e;
            }
            meat += score * score.transpose();
        }
        const double ssc = static_cast<double>(m) / static_cast<double>(m - 1);
        const Eigen::Matrix2d vcov = ssc * bread_inv * meat * bread_inv;
        est.se_c = std::sqrt(std::max(vcov(0, 0), 0.0));
        est.se_1 = std::sqrt(std::max(vcov(1, 1), 0.0));
        est.se_available = true;
    }
    return est;
}

Matrix build_instruments(const NormalizedNetwork& g, const Matrix& w) {
    const int n = static_cast<int>(g.g.rows());
    if (w.rows() != n) throw ValidationError("build_instruments: W rows != network size");
    const int d = static_cast<int>(w.cols());
    Matrix z(n, 1 + 3 * d);
    z.col(0).setOnes();
    z.block(0, 1, n, d) = w;
    const Matrix gw = g.g * w;
    z.block(0, 1 + d, n, d) = gw;
    z.block(0, 1 + 2 * d, n, d) = g.g * gw;
    return z;
}

PeerEffectsEstimate peer_effects_gmm(const std::vector<PeerNetworkData>& data,
                                     const Matrix& weight) {
    const int m = static_cast<int>(data.size());
    if (m == 0) throw ValidationError("peer_effects_gmm: no networks");
    const int d = static_cast<int>(data[0].w.cols());
    const int p = 2 + 2 * d;      // alpha_C, alpha_Ybar, alpha_W, alpha_Wbar
    const int q = 1 + 3 * d;      // instrument count
    Matrix sigma;
    if (weight.size() == 0) {
        sigma = Matrix::Identity(q, q);
    } else {
        if (weight.rows() != q || weight.cols() != q)
            throw ValidationError("peer_effects_gmm: weight matrix must be q x q");
        sigma = weight;
    }

    Matrix jbar = Matrix::Zero(q, p);
    Vector gbar = Vector::Zero(q);
    std::vector<Matrix> j_m(m);
    std::vector<Vector> g_m(m);
    for (int k = 0; k < m; ++k) {
        const auto& net = data[k];
        const int n = static_cast<int>(net.g.rows());
        if (net.w.cols() != d) throw ValidationError("peer_effects_gmm: W dimension mismatch");
        if (net.w.rows() != n || net.y.size() != n)
            throw ValidationError("peer_effects_gmm: data dimension mismatch in network " +
                                  std::to_string(k));
        NormalizedNetwork gn{net.g, {}};
        const Matrix z = build_instruments(gn, net.w);
        Matrix v(n, p);
        v.col(0).setOnes();
        v.col(1) = net.g * net.y;
        v.block(0, 2, n, d) = net.w;
        v.block(0, 2 + d, n, d) = net.g * net.w;
        j_m[k] = z.transpose() * v / static_cast<double>(n);
        g_m[k] = z.transpose() * net.y / static_cast<double>(n);
        jbar += j_m[k];
        gbar += g_m[k];
    }
    jbar /= static_cast<double>(m);
    gbar /= static_cast<double>(m);

    const Matrix h = jbar.transpose() * sigma * jbar;
    Eigen::FullPivLU<Matrix> lu(h);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible())
        throw WeakIdentificationError(
            "peer_effects_gmm: aggregated moment Jacobian is singular (non-degeneracy fails)");
    PeerEffectsEstimate est;
    est.alpha = lu.solve(jbar.transpose() * sigma * gbar);
    est.n_networks = m;

    if (m >= 2) {
        const Matrix h_inv_js = lu.solve(jbar.transpose() * sigma);  // p x q
        Matrix meat = Matrix::Zero(q, q);
        for (int k = 0; k < m; ++k) {
            const Vector psi = g_m[k] - j_m[k] * est.alpha;
            meat += psi * psi.transpose();
        }
        const double ssc =
            static_cast<double>(m) / static_cast<double>(m - 1) / (static_cast<double>(m) * m);
        const Matrix vcov = ssc * h_inv_js * meat * h_inv_js.transpose();
        est.se_cluster.resize(p);
        for (int i = 0; i < p; ++i) est.se_cluster(i) = std::sqrt(std::max(vcov(i, i), 0.0));
        est.se_available = true;
    } else {
        est.se_cluster = Vector::Zero(p);
    }
    return est;
}

Vector simulate_peer_outcomes(const NormalizedNetwork& g, const Matrix& w,
                              const PeerCoefficients& alpha, double u_m, const Vector& e) {
    const int n = static_cast<int>(g.g.rows());
    if (w.rows() != n || e.size() != n)
        throw ValidationError("simulate_peer_outcomes: dimension mismatch");
    if (w.cols() != alpha.alpha_w.size() || w.cols() != alpha.alpha_wbar.size())
        throw ValidationError("simulate_peer_outcomes: coefficient dimension mismatch");
    Vector rhs = Vector::Constant(n, alpha.alpha_c + u_m) + e;
    rhs += w * alpha.alpha_w;
    rhs += g.g * (w * alpha.alpha_wbar);
    const Matrix lhs = Matrix::Identity(n, n) - alpha.alpha_ybar * g.g;
    return Eigen::PartialPivLU<Matrix>(lhs).solve(rhs);
}

Matrix peer_covariates(const CovariateSet& cov, const LatentSet& lat, std::uint64_t) {
    if (cov.n() != lat.n()) throw ValidationError("peer_covariates: row mismatch");
    const int d = std::min(cov.dim(), lat.dim());
    Matrix w(cov.n(), d);
    for (int i = 0; i < cov.n(); ++i)
        for (int k = 0; k < d; ++k)
            w(i, k) = lat.xi(i, k) + 0.5 * cov.x(i, k) * lat.xi(i, k);
    return w;
}

}  // namespace netimpute
