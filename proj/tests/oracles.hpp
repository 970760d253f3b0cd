#pragma once

// Test-side reference implementations, independent of the library paths they
// check: a dense least-squares minimizer of the local TWFE objective, a
// Jacobi eigensolver, and a pooled 2SLS estimator.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracles {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Minimizes sum over (i',j') in (refs+{i}) x (refs+{j}) \ {(i,j)} of
//   w_i[i'] w_j[j'] (R(i',j') - a_i' - b_j')^2
// by assembling the full normal equations (pseudo-inverse handles the
// additive-shift null space) and returns a_i + b_j. Weights at the target
// row/column use k0 = K(0).
inline double dense_twfe_pair(const Matrix& r_full, const std::vector<int>& refs, int i, int j,
                              const Vector& w_i, const Vector& w_j, double k0) {
    const int nr = static_cast<int>(refs.size());
    const int unknowns = 2 * nr + 2;  // a over refs+{i}, b over refs+{j}
    Matrix ata = Matrix::Zero(unknowns, unknowns);
    Vector atb = Vector::Zero(unknowns);
    auto row_id = [&](int a_idx) { return a_idx; };
    auto col_id = [&](int b_idx) { return nr + 1 + b_idx; };
    for (int a_idx = 0; a_idx <= nr; ++a_idx) {
        const int row_node = a_idx < nr ? refs[a_idx] : i;
        const double wa = a_idx < nr ? w_i(a_idx) : k0;
        for (int b_idx = 0; b_idx <= nr; ++b_idx) {
            const int col_node = b_idx < nr ? refs[b_idx] : j;
            if (a_idx == nr && b_idx == nr) continue;  // the pair being imputed
            const double w = wa * (b_idx < nr ? w_j(b_idx) : k0);
            if (w == 0.0) continue;
            const double y = r_full(row_node, col_node);
            const int ra = row_id(a_idx), cb = col_id(b_idx);
            ata(ra, ra) += w;
            ata(cb, cb) += w;
            ata(ra, cb) += w;
            ata(cb, ra) += w;
            atb(ra) += w * y;
            atb(cb) += w * y;
        }
    }
    const Vector sol = ata.completeOrthogonalDecomposition().solve(atb);
    return sol(row_id(nr)) + sol(col_id(nr));
}

// Classical Jacobi rotations for a symmetric matrix; returns eigenvalues
// (ascending) and eigenvectors as columns.
inline void jacobi_eigen(Matrix a, Vector* values, Matrix* vectors) {
    const int n = static_cast<int>(a.rows());
    Matrix v = Matrix::Identity(n, n);
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-26) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    // sort ascending by eigenvalue
    std::vector<int> order(n);
    for (int k = 0; k < n; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) < a(y, y); });
    values->resize(n);
    vectors->resize(n, n);
    for (int k = 0; k < n; ++k) {
        (*values)(k) = a(order[k], order[k]);
        vectors->col(k) = v.col(order[k]);
    }
}

// Pooled 2SLS on stacked networks: alpha = (V'Pz V)^{-1} V'Pz Y.
inline Vector pooled_2sls(const std::vector<Matrix>& z_list, const std::vector<Matrix>& v_list,
                          const std::vector<Vector>& y_list) {
    int rows = 0;
    for (const auto& z : z_list) rows += static_cast<int>(z.rows());
    const int q = static_cast<int>(z_list[0].cols());
    const int p = static_cast<int>(v_list[0].cols());
    Matrix z(rows, q), v(rows, p);
    Vector y(rows);
    int at = 0;
    for (std::size_t m = 0; m < z_list.size(); ++m) {
        const int n = static_cast<int>(z_list[m].rows());
        z.block(at, 0, n, q) = z_list[m];
        v.block(at, 0, n, p) = v_list[m];
        y.segment(at, n) = y_list[m];
        at += n;
    }
    const Matrix zz_inv = (z.transpose() * z).completeOrthogonalDecomposition().pseudoInverse();
    const Matrix vpz = v.transpose() * z * zz_inv * z.transpose();
    return (vpz * v).completeOrthogonalDecomposition().solve(vpz * y);
}

}  // namespace oracles
