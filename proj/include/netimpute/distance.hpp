#pragma once

#include <vector>

#include "netimpute/types.hpp"

namespace netimpute {

// Pseudo-distances d[t][r] between target and reference nodes, computed from
// the observed subnetwork. (Squared-Euclidean row distances and average-degree
// differences are simpler alternatives; they are not implemented because their
// own-noise terms do not vanish with the sample.)
//   d[t][r] = max_{k != t,r} | (1/|anchors|) sum_{l in anchors} A_kl (A_tl - A_rl) |
// where the anchor set is the inner-sum index set (S, or S1 under splitting).
struct PseudoDistanceTable {
    std::vector<int> targets;
    std::vector<int> references;
    Matrix d;          // |targets| x |references|
    int anchor_count = 0;

    // row in d for a node id, -1 if the node is not a target
    int row_of(int node) const {
        return node >= 0 && node < static_cast<int>(row_index_.size()) ? row_index_[node] : -1;
    }
    void build_row_index(int n_total);

  private:
    std::vector<int> row_index_;
};

PseudoDistanceTable pseudo_distance(const PartialNetwork& pn, const std::vector<int>& targets,
                                    const std::vector<int>& references);

// Sample-splitting variant: anchors = s1, references = s2.
PseudoDistanceTable pseudo_distance_split(const PartialNetwork& pn, const std::vector<int>& s1,
                                          const std::vector<int>& s2,
                                          const std::vector<int>& targets);

}  // namespace netimpute
