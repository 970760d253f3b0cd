#include "netimpute/distance.hpp"

#include <algorithm>
#include <cmath>

namespace netimpute {

void PseudoDistanceTable::build_row_index(int n_total) {
    row_index_.assign(n_total, -1);
    for (int t = 0; t < static_cast<int>(targets.size()); ++t) row_index_[targets[t]] = t;
}

namespace {

PseudoDistanceTable compute(const PartialNetwork& pn, const std::vector<int>& anchors,
                            const std::vector<int>& targets, const std::vector<int>& references) {
    const int n_total = pn.n_total();
    const int n_a = static_cast<int>(anchors.size());
    if (n_a == 0) throw ValidationError("pseudo_distance: anchor set is empty");
    for (int t : targets)
        if (t < 0 || t >= n_total) throw ValidationError("pseudo_distance: target index out of range");
    for (int r : references)
        if (r < 0 || r >= n_total) throw ValidationError("pseudo_distance: reference index out of range");

    // All inner sums at once: B(k,i) = sum_{l in anchors} A(k,l) A(i,l).
    // Only anchor columns of A are touched, so every entry used is observed.
    Matrix m(n_total, n_a);
    for (int c = 0; c < n_a; ++c) m.col(c) = pn.base.adj.col(anchors[c]);
    Matrix b(n_total, n_total);
    b.noalias() = m * m.transpose();

    PseudoDistanceTable table;
    table.targets = targets;
    table.references = references;
    table.anchor_count = n_a;
    table.d.resize(targets.size(), references.size());
    const double n_anchor = static_cast<double>(n_a);

    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        const int t = targets[ti];
        for (std::size_t ri = 0; ri < references.size(); ++ri) {
            const int r = references[ri];
            if (r == t) {
                table.d(ti, ri) = 0.0;
                continue;
            }
            double best = 0.0;
            for (int k = 0; k < n_total; ++k) {
                if (k == t || k == r) continue;
                const double v = std::abs(b(k, t) - b(k, r));
                if (v > best) best = v;
            }
            table.d(ti, ri) = best / n_anchor;
        }
    }
    table.build_row_index(n_total);
    return table;
}

}  // namespace

PseudoDistanceTable pseudo_distance(const PartialNetwork& pn, const std::vector<int>& targets,
                                    const std::vector<int>& references) {
    if (pn.sampled.empty()) throw ValidationError("pseudo_distance: sampled set is empty");
    return compute(pn, pn.sampled, targets, references);
}

PseudoDistanceTable pseudo_distance_split(const PartialNetwork& pn, const std::vector<int>& s1,
                                          const std::vector<int>& s2,
                                          const std::vector<int>& targets) {
    if (s1.empty()) throw ValidationError("pseudo_distance_split: s1 is empty");
    std::vector<int> a = s1, b = s2;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) {  // identical halves degenerate to the full-sample formula
        for (int v : b)
            if (std::binary_search(a.begin(), a.end(), v))
                throw ValidationError("pseudo_distance_split: s1 and s2 overlap");
    }
    return compute(pn, s1, targets, s2);
}

}  // namespace netimpute
