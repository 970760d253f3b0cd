#include "netimpute/montecarlo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "netimpute/downstream.hpp"
#include "netimpute/parallel.hpp"
#include "netimpute/rng.hpp"

namespace netimpute {

std::string experiment_name(Experiment e) {
    switch (e) {
        case Experiment::imputation: return "imputation";
        case Experiment::centrality_degree: return "centrality-degree";
        case Experiment::centrality_eigen: return "centrality-eigen";
        case Experiment::peer_effects: return "peer-effects";
    }
    return "?";
}

Experiment parse_experiment(const std::string& name) {
    if (name == "imputation") return Experiment::imputation;
    if (name == "centrality-degree") return Experiment::centrality_degree;
    if (name == "centrality-eigen") return Experiment::centrality_eigen;
    if (name == "peer-effects") return Experiment::peer_effects;
    throw ValidationError("unknown experiment: " + name);
}

double cell_rmse(const McCell& cell) {
    if (cell.mse.empty()) return std::nan("");
    double acc = 0.0;
    for (const double v : cell.mse) acc += v;
    return std::sqrt(acc / static_cast<double>(cell.mse.size()));
}

double cell_bias(const McCell& cell, int coef_idx, double truth) {
    const auto s = cell.coef.rows();
    if (s == 0) return std::nan("");
    return cell.coef.col(coef_idx).mean() - truth;
}

double cell_std(const McCell& cell, int coef_idx) {
    const auto s = cell.coef.rows();
    if (s < 2) return 0.0;
    const double mean = cell.coef.col(coef_idx).mean();
    return std::sqrt((cell.coef.col(coef_idx).array() - mean).square().sum() /
                     static_cast<double>(s - 1));
}

double mse_missing_block(const Matrix& a_hat, const ProbabilityMatrix& p,
                         const std::vector<int>& sampled) {
    const int n = p.n();
    if (a_hat.rows() != n || a_hat.cols() != n)
        throw ValidationError("mse_missing_block: dimension mismatch");
    std::vector<char> mask(n, 0);
    for (int s : sampled) mask[s] = 1;
    double acc = 0.0;
    long cnt = 0;
    for (int i = 0; i < n; ++i) {
        if (mask[i]) continue;
        for (int j = 0; j < n; ++j) {
            if (mask[j] || i == j) continue;
            const double e = a_hat(i, j) - p.p(i, j);
            acc += e * e;
            ++cnt;
        }
    }
    if (cnt == 0) throw ValidationError("mse_missing_block: no missing dyads");
    return acc / static_cast<double>(cnt);
}

double rmse_missing_block(const ImputedNetwork& a_hat, const ProbabilityMatrix& p,
                          const std::vector<int>& sampled) {
    return std::sqrt(mse_missing_block(a_hat.a_hat, p, sampled));
}

namespace {

bool needs_first_stage(Method m) {
    return m == Method::x || m == Method::x_lpca || m == Method::x_ltwfe ||
           m == Method::x_ltwfe_sp;
}

bool needs_distances(Method m) {
    return m == Method::lpca || m == Method::x_lpca || m == Method::ltwfe ||
           m == Method::x_ltwfe;
}

// Per-network state shared by the methods: the fitted first stage and the
// full-sample distance table are method-independent.
struct NetworkScratch {
    const PartialNetwork* pn = nullptr;
    const CovariateSet* cov = nullptr;
    bool pi_done = false;
    Matrix pi;
    bool dist_done = false;
    PseudoDistanceTable dist;

    const Matrix& ensure_pi(FirstStage first_stage) {
        if (!pi_done) {
            const int d_x = cov->dim();
            if (d_x > 0) {
                const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, d_x};
                PiKind kind = first_stage == FirstStage::local_linear ? PiKind::local_linear
                              : first_stage == FirstStage::linear_projection
                                  ? PiKind::linear_projection
                                  : default_pi_kind(d_x);
                const PiModel model = fit_pi(*pn, *cov, spec, kind);
                pi = predict_pi_matrix(model, *cov);
            }
            pi_done = true;
        }
        return pi;
    }

    const PseudoDistanceTable& ensure_dist() {
        if (!dist_done) {
            std::vector<int> targets(pn->n_total());
            for (int i = 0; i < pn->n_total(); ++i) targets[i] = i;
            dist = pseudo_distance(*pn, targets, pn->sampled);
            dist_done = true;
        }
        return dist;
    }
};

ImputedNetwork run_method(Method m, NetworkScratch& scratch, const ExperimentConfig& cfg,
                          std::uint64_t method_seed) {
    ImputeConfig icfg = cfg.impute;
    icfg.seed = method_seed;
    switch (m) {
        case Method::x:
            return impute_covariate_only_precomputed(*scratch.pn,
                                                     scratch.ensure_pi(icfg.first_stage));
        case Method::lr:
            return impute_lowrank(*scratch.pn, cfg.rank_grid, method_seed).first;
        case Method::lpca:
            return impute_local_pca(*scratch.pn, scratch.ensure_dist(), cfg.k_grid, cfg.rank_grid,
                                    false, method_seed)
                .first;
        case Method::x_lpca:
            return impute_local_pca(*scratch.pn, scratch.ensure_dist(), cfg.k_grid, cfg.rank_grid,
                                    true, method_seed, scratch.ensure_pi(icfg.first_stage))
                .first;
        case Method::ltwfe:
            return impute_with_cv_precomputed(*scratch.pn, Matrix(), scratch.ensure_dist(), icfg)
                .first;
        case Method::x_ltwfe:
            return impute_with_cv_precomputed(*scratch.pn, scratch.ensure_pi(icfg.first_stage),
                                              scratch.ensure_dist(), icfg)
                .first;
        case Method::x_ltwfe_sp:
            return impute_split_precomputed(*scratch.pn, scratch.ensure_pi(icfg.first_stage), icfg)
                .first;
        case Method::cd:
            throw ValidationError("complete-data is not an imputation method");
    }
    throw ValidationError("unhandled method");
}

int sampled_count(double phi, int n_nodes) {
    const int n = static_cast<int>(std::lround(phi * n_nodes));
    if (n < 2 || n >= n_nodes)
        throw ValidationError("sampling rate phi = " + std::to_string(phi) +
                              " gives an invalid sample size");
    return n;
}

void validate_common(const ExperimentConfig& cfg) {
    if (cfg.replications < 1) throw ValidationError("experiment: replications must be >= 1");
    if (cfg.phi_list.empty()) throw ValidationError("experiment: empty phi list");
    for (const double phi : cfg.phi_list)
        if (!(phi > 0.0 && phi < 1.0)) throw ValidationError("experiment: phi must be in (0,1)");
    if (cfg.methods.empty()) throw ValidationError("experiment: no methods requested");
}

}  // namespace

McReport run_imputation_experiment(const ExperimentConfig& cfg) {
    validate_common(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    McReport report;
    report.experiment = Experiment::imputation;
    report.n_nodes = cfg.n_nodes;
    report.m_networks = 1;
    report.replications = cfg.replications;
    report.beta = cfg.beta;
    report.seed = cfg.seed;

    const int s_reps = cfg.replications;
    const int n_methods = static_cast<int>(cfg.methods.size());
    for (std::size_t phi_idx = 0; phi_idx < cfg.phi_list.size(); ++phi_idx) {
        const double phi = cfg.phi_list[phi_idx];
        const int n_sampled = sampled_count(phi, cfg.n_nodes);
        const std::uint64_t cell_seed = derive_seed(cfg.seed, 1000 + phi_idx);
        Matrix mse(s_reps, n_methods);
        Matrix fallbacks(s_reps, n_methods);
        parallel_for(s_reps, cfg.threads, [&](int k) {
            const int rep = cfg.rep_begin + k;
            const std::uint64_t rep_seed = derive_seed(cell_seed, rep);
            auto [cov, lat] = generate_population(cfg.n_nodes, rep_seed);
            const GraphonSpec spec{cfg.beta, nullptr};
            const ProbabilityMatrix p = probability_matrix(cov, lat, spec);
            const Network net = sample_network(p, rep_seed);
            const PartialNetwork pn = egocentric_sample(net, n_sampled, rep_seed);
            NetworkScratch scratch;
            scratch.pn = &pn;
            scratch.cov = &cov;
            for (int mi = 0; mi < n_methods; ++mi) {
                const std::uint64_t method_seed = derive_seed(rep_seed, 7000 + mi);
                const ImputedNetwork imp =
                    run_method(cfg.methods[mi], scratch, cfg, method_seed);
                mse(k, mi) = mse_missing_block(imp.a_hat, p, pn.sampled);
                fallbacks(k, mi) = imp.fallback_count;
            }
        });
        for (int mi = 0; mi < n_methods; ++mi) {
            McCell cell;
            cell.method = cfg.methods[mi];
            cell.phi = phi;
            cell.mse.assign(mse.col(mi).data(), mse.col(mi).data() + s_reps);
            cell.fallback_total = static_cast<long>(fallbacks.col(mi).sum());
            report.cells.push_back(std::move(cell));
        }
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

namespace {

McReport run_downstream(const ExperimentConfig& cfg, bool peer_effects, bool eigen_centrality) {
    validate_common(cfg);
    if (cfg.m_networks < 1) throw ValidationError("experiment: m_networks must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    McReport report;
    report.experiment = peer_effects
                            ? Experiment::peer_effects
                            : (eigen_centrality ? Experiment::centrality_eigen
                                                : Experiment::centrality_degree);
    report.n_nodes = cfg.n_nodes;
    report.m_networks = cfg.m_networks;
    report.replications = cfg.replications;
    report.beta = cfg.beta;
    report.seed = cfg.seed;
    if (peer_effects) {
        report.coef_names = {"alpha_c", "alpha_ybar", "alpha_w1", "alpha_w2", "alpha_wbar1",
                             "alpha_wbar2"};
        report.coef_truth = {0.0, 0.5, 1.0, 1.0, 1.0, 1.0};
    } else {
        report.coef_names = {"alpha_c", "alpha_1"};
        report.coef_truth = {0.0, 0.5};
    }
    const int n_coef = static_cast<int>(report.coef_names.size());
    const int s_reps = cfg.replications;
    const int n_methods = static_cast<int>(cfg.methods.size());
    const int m_nets = cfg.m_networks;

    const PeerCoefficients truth{0.0, 0.5, (Vector(2) << 1.0, 1.0).finished(),
                                 (Vector(2) << 1.0, 1.0).finished()};

    for (std::size_t phi_idx = 0; phi_idx < cfg.phi_list.size(); ++phi_idx) {
        const double phi = cfg.phi_list[phi_idx];
        const int n_sampled = sampled_count(phi, cfg.n_nodes);
        const std::uint64_t cell_seed =
            derive_seed(cfg.seed, 2000 + 10 * phi_idx + (peer_effects ? 1 : 0) +
                                      (eigen_centrality ? 2 : 0));
        std::vector<Matrix> coef(n_methods, Matrix(s_reps, n_coef));
        Matrix fallbacks = Matrix::Zero(s_reps, n_methods);
        parallel_for(s_reps, cfg.threads, [&](int k) {
            const int rep = cfg.rep_begin + k;
            const std::uint64_t rep_seed = derive_seed(cell_seed, rep);
            // data for all M networks, shared by every method
            std::vector<PartialNetwork> pns;
            std::vector<CovariateSet> covs;
            std::vector<Network> nets;
            std::vector<Vector> outcomes;
            std::vector<Matrix> wmats;
            std::vector<Vector> phis_true;
            pns.reserve(m_nets);
            for (int m = 0; m < m_nets; ++m) {
                const std::uint64_t net_seed = derive_seed(rep_seed, m);
                auto [cov, lat] = generate_population(cfg.n_nodes, net_seed);
                const GraphonSpec gspec{cfg.beta, nullptr};
                const ProbabilityMatrix p = probability_matrix(cov, lat, gspec);
                Network net = sample_network(p, net_seed);
                PartialNetwork pn = egocentric_sample(net, n_sampled, net_seed);
                RngStream noise(net_seed, rng_purpose::outcome);
                if (peer_effects) {
                    const Matrix w = peer_covariates(cov, lat);
                    const NormalizedNetwork g = row_normalize(net.adj);
                    const double u_m = noise.normal(0.0, 0.2);  // Var(u) = 1/25
                    Vector e(cfg.n_nodes);
                    for (int i = 0; i < cfg.n_nodes; ++i) e(i) = noise.normal(0.0, 1.0);
                    outcomes.push_back(simulate_peer_outcomes(g, w, truth, u_m, e));
                    wmats.push_back(w);
                } else {
                    Vector phi_m;
                    if (eigen_centrality)
                        phi_m = eigenvector_centrality_noexcept(net.adj).phi;
                    else
                        phi_m = degree_centrality(net.adj);
                    const double u_m = noise.normal(0.0, 0.25);  // sd = 1/4
                    Vector y(cfg.n_nodes);
                    for (int i = 0; i < cfg.n_nodes; ++i)
                        y(i) = 0.5 * phi_m(i) + u_m + noise.normal(0.0, 0.25);
                    outcomes.push_back(std::move(y));
                    phis_true.push_back(std::move(phi_m));
                }
                nets.push_back(std::move(net));
                covs.push_back(std::move(cov));
                pns.push_back(std::move(pn));
            }
            for (int mi = 0; mi < n_methods; ++mi) {
                const Method method = cfg.methods[mi];
                long fb = 0;
                std::vector<Vector> phis_m;
                std::vector<PeerNetworkData> peer_data;
                for (int m = 0; m < m_nets; ++m) {
                    Matrix a_use;
                    if (method == Method::cd) {
                        a_use = nets[m].adj;
                    } else {
                        NetworkScratch scratch;
                        scratch.pn = &pns[m];
                        scratch.cov = &covs[m];
                        const std::uint64_t method_seed =
                            derive_seed(derive_seed(rep_seed, m), 7000 + mi);
                        ImputedNetwork imp = run_method(method, scratch, cfg, method_seed);
                        fb += imp.fallback_count;
                        a_use = std::move(imp.a_hat);
                    }
                    if (peer_effects) {
                        peer_data.push_back(
                            PeerNetworkData{row_normalize(a_use).g, wmats[m], outcomes[m]});
                    } else if (eigen_centrality) {
                        const EigenCentrality ec = eigenvector_centrality_noexcept(a_use);
                        if (!ec.converged) ++fb;
                        phis_m.push_back(ec.phi);
                    } else {
                        phis_m.push_back(degree_centrality(a_use));
                    }
                }
                if (peer_effects) {
                    const PeerEffectsEstimate est = peer_effects_gmm(peer_data);
                    for (int c = 0; c < n_coef; ++c) coef[mi](k, c) = est.alpha(c);
                } else {
                    const CentralityEstimate est = centrality_ols(outcomes, phis_m);
                    coef[mi](k, 0) = est.alpha_c;
                    coef[mi](k, 1) = est.alpha_1;
                }
                fallbacks(k, mi) = static_cast<double>(fb);
            }
        });
        for (int mi = 0; mi < n_methods; ++mi) {
            McCell cell;
            cell.method = cfg.methods[mi];
            cell.phi = phi;
            cell.coef = coef[mi];
            cell.fallback_total = static_cast<long>(fallbacks.col(mi).sum());
            report.cells.push_back(std::move(cell));
        }
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace

McReport run_centrality_experiment(const ExperimentConfig& cfg) {
    return run_downstream(cfg, false, cfg.experiment == Experiment::centrality_eigen);
}

McReport run_peereffects_experiment(const ExperimentConfig& cfg) {
    return run_downstream(cfg, true, false);
}

McReport run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.experiment) {
        case Experiment::imputation: return run_imputation_experiment(cfg);
        case Experiment::centrality_degree:
        case Experiment::centrality_eigen: return run_centrality_experiment(cfg);
        case Experiment::peer_effects: return run_peereffects_experiment(cfg);
    }
    throw ValidationError("unknown experiment");
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string report_text_table(const McReport& report) {
    std::ostringstream os;
    os << "experiment: " << experiment_name(report.experiment) << "\n";
    os << "N=" << report.n_nodes << " M=" << report.m_networks
       << " replications=" << report.replications << " seed=" << report.seed << "\n";
    if (report.experiment == Experiment::imputation) {
        os << "method        phi     rmse      fallbacks\n";
        for (const auto& cell : report.cells) {
            char line[128];
            std::snprintf(line, sizeof(line), "%-12s  %.2f    %.4f    %ld\n",
                          method_name(cell.method).c_str(), cell.phi, cell_rmse(cell),
                          cell.fallback_total);
            os << line;
        }
    } else {
        os << "method        phi     coef          bias       std\n";
        for (const auto& cell : report.cells) {
            for (std::size_t c = 0; c < report.coef_names.size(); ++c) {
                char line[160];
                std::snprintf(line, sizeof(line), "%-12s  %.2f    %-12s  %+.4f    %.4f\n",
                              method_name(cell.method).c_str(), cell.phi,
                              report.coef_names[c].c_str(),
                              cell_bias(cell, static_cast<int>(c), report.coef_truth[c]),
                              cell_std(cell, static_cast<int>(c)));
                os << line;
            }
        }
    }
    return os.str();
}

std::string report_csv(const McReport& report) {
    std::ostringstream os;
    if (report.experiment == Experiment::imputation) {
        os << "experiment,method,phi,statistic,value,replications,fallbacks\n";
        for (const auto& cell : report.cells) {
            os << experiment_name(report.experiment) << "," << method_name(cell.method) << ","
               << fmt(cell.phi) << ",rmse," << fmt(cell_rmse(cell)) << "," << cell.mse.size()
               << "," << cell.fallback_total << "\n";
        }
    } else {
        os << "experiment,method,phi,coefficient,bias,std,replications,fallbacks\n";
        for (const auto& cell : report.cells) {
            for (std::size_t c = 0; c < report.coef_names.size(); ++c) {
                os << experiment_name(report.experiment) << "," << method_name(cell.method)
                   << "," << fmt(cell.phi) << "," << report.coef_names[c] << ","
                   << fmt(cell_bias(cell, static_cast<int>(c), report.coef_truth[c])) << ","
                   << fmt(cell_std(cell, static_cast<int>(c))) << "," << cell.coef.rows() << ","
                   << cell.fallback_total << "\n";
            }
        }
    }
    return os.str();
}

}  // namespace netimpute
