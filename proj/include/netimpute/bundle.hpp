#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netimpute/types.hpp"

namespace netimpute {

// On-disk dataset: comma-delimited files with a header row. Node ids are
// 0-based and every node appears exactly once in the covariate file (which
// fixes N). Links between two unsampled nodes are unobservable under the
// sampling design and are rejected with a warning count.
struct BundlePaths {
    std::string covariates;       // node,x1,...,xd (d may be 0)
    std::string edges;            // i,j
    std::string sampled;          // node
    std::string outcomes;         // node,y (optional, "" = absent)
    std::string w_covariates;     // node,w1,...,wd (optional)
};

struct DataBundle {
    int n_nodes = 0;
    Matrix covariates;            // N x d_X
    std::vector<std::pair<int, int>> edges;
    std::vector<int> sampled;
    std::optional<Vector> outcomes;
    std::optional<Matrix> w_covariates;
    int rejected_edges = 0;

    PartialNetwork to_partial() const;  // unobserved entries left at zero
    CovariateSet covariate_set() const { return CovariateSet{covariates}; }
};

DataBundle load_bundle(const BundlePaths& paths);

void save_bundle(const std::string& dir, const DataBundle& bundle);

// matrix files: N lines of comma-separated decimals, 17 significant digits
void save_matrix_csv(const std::string& path, const Matrix& m);
Matrix load_matrix_csv(const std::string& path);

void save_provenance_csv(const std::string& path,
                         const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& prov);

// flat key=value metadata / config files ('#' starts a comment line)
void save_key_values(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& kv);
std::map<std::string, std::string> load_key_values(const std::string& path);

std::string format_double(double v);  // %.17g
std::vector<double> parse_double_list(const std::string& csv);
std::vector<int> parse_int_list(const std::string& csv);

}  // namespace netimpute
