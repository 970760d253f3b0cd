#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace netimpute {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---- error taxonomy (maps to CLI exit codes 2/3/4) ----

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NoNeighborsError : NumericalError {
    int node;
    explicit NoNeighborsError(int node_id)
        : NumericalError("no reference node within bandwidth for node " + std::to_string(node_id)),
          node(node_id) {}
};

struct WeakIdentificationError : NumericalError {
    explicit WeakIdentificationError(const std::string& msg) : NumericalError(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---- domain types ----

// Symmetric unweighted network, zero diagonal. Constructed via make_network
// when the 0/1 invariants should be enforced; simulation tests may build the
// struct directly with real-valued entries to feed probability matrices
// through the imputers.
struct Network {
    int n_nodes = 0;
    Matrix adj;
};

Network make_network(Matrix adj);
bool network_valid(const Network& net);

struct PartialNetwork {
    Network base;               // entries valid only where observed
    std::vector<int> sampled;   // sorted node ids, |S| = n <= N

    int n_total() const { return base.n_nodes; }
    int n_sampled() const { return static_cast<int>(sampled.size()); }
    std::vector<int> unsampled() const;
    std::vector<char> sampled_mask() const;
    bool observed(int i, int j) const;
};

PartialNetwork make_partial_network(Network base, std::vector<int> sampled);

struct CovariateSet {
    Matrix x;  // N x d_X, d_X >= 0 (zero columns means no covariates)
    int n() const { return static_cast<int>(x.rows()); }
    int dim() const { return static_cast<int>(x.cols()); }
};

struct LatentSet {
    Matrix xi;  // N x d_xi, simulation-only
    int n() const { return static_cast<int>(xi.rows()); }
    int dim() const { return static_cast<int>(xi.cols()); }
};

// Link-formation index. The default form is the simulation design:
//   index = omega(X_i,X_j)'beta + xi_i1 + xi_j1 - (1/8)(xi_i2 - xi_j2)^2
// with omega the squared coordinate differences, and link probability
// logistic(index). A user-supplied index function overrides it.
struct GraphonSpec {
    Vector beta;
    using IndexFn = std::function<double(const Eigen::RowVectorXd& x_i, const Eigen::RowVectorXd& xi_i,
                                         const Eigen::RowVectorXd& x_j, const Eigen::RowVectorXd& xi_j)>;
    IndexFn custom_index;  // optional
};

struct ProbabilityMatrix {
    Matrix p;  // symmetric, zero diagonal, entries in [0,1]
    int n() const { return static_cast<int>(p.rows()); }
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace netimpute
