#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "netimpute/bundle.hpp"
#include "netimpute/downstream.hpp"
#include "netimpute/montecarlo.hpp"
#include "netimpute/netmodel.hpp"
#include "netimpute/rng.hpp"

namespace fs = std::filesystem;
using namespace netimpute;

namespace {

struct KvDefaults {
    std::map<std::string, std::string> kv;

    void load(const std::string& path) {
        if (!path.empty()) kv = load_key_values(path);
    }
    template <typename T>
    void apply(const CLI::Option* opt, const std::string& key, T& value) const;
};

template <typename T>
void KvDefaults::apply(const CLI::Option* opt, const std::string& key, T& value) const {
    const auto it = kv.find(key);
    if (it == kv.end() || (opt != nullptr && opt->count() > 0)) return;  // CLI overrides file
    if constexpr (std::is_same_v<T, std::string>) {
        value = it->second;
    } else if constexpr (std::is_same_v<T, bool>) {
        value = it->second == "1" || it->second == "true";
    } else if constexpr (std::is_same_v<T, int>) {
        value = std::stoi(it->second);
    } else if constexpr (std::is_same_v<T, double>) {
        value = std::stod(it->second);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        value = std::stoull(it->second);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        value = parse_double_list(it->second);
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
        value = parse_int_list(it->second);
    }
}

KernelFamily parse_kernel(const std::string& name) {
    if (name == "epanechnikov") return KernelFamily::epanechnikov;
    if (name == "triangular") return KernelFamily::triangular;
    if (name == "uniform") return KernelFamily::uniform;
    throw ValidationError("unknown kernel: " + name);
}

FirstStage parse_first_stage(const std::string& name) {
    if (name == "auto") return FirstStage::automatic;
    if (name == "local-linear") return FirstStage::local_linear;
    if (name == "linear-projection") return FirstStage::linear_projection;
    throw ValidationError("unknown first stage: " + name);
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out);
}

struct ImputeOutcome {
    ImputedNetwork net;
    double h_star = -1.0;
    int rank = -1;
    int k_neighbors = -1;
};

ImputeOutcome run_imputation(const std::string& method_name_str, const PartialNetwork& pn,
                             const CovariateSet& cov, const ImputeConfig& icfg,
                             const std::vector<int>& rank_grid, const std::vector<int>& k_grid) {
    ImputeOutcome out;
    if (method_name_str == "sampled") {
        // observed entries as-is, unobserved dyads treated as zeros
        out.net.a_hat = pn.base.adj;
        out.net.provenance.setConstant(pn.n_total(), pn.n_total(),
                                       static_cast<std::uint8_t>(Provenance::observed));
        const auto c = pn.unsampled();
        for (std::size_t a = 0; a < c.size(); ++a)
            for (std::size_t b = 0; b < c.size(); ++b)
                if (a != b)
                    out.net.provenance(c[a], c[b]) = static_cast<std::uint8_t>(Provenance::imputed);
        return out;
    }
    const Method method = parse_method(method_name_str);
    switch (method) {
        case Method::x:
            out.net = impute_covariate_only(pn, cov, icfg.first_stage);
            return out;
        case Method::lr: {
            auto [net, rank] = impute_lowrank(pn, rank_grid, icfg.seed);
            out.net = std::move(net);
            out.rank = rank;
            return out;
        }
        case Method::lpca:
        case Method::x_lpca: {
            std::vector<int> targets(pn.n_total());
            for (int i = 0; i < pn.n_total(); ++i) targets[i] = i;
            const auto dist = pseudo_distance(pn, targets, pn.sampled);
            Matrix pi;
            if (method == Method::x_lpca) {
                const DyadFeatureSpec spec{DyadFeatureMode::squared_difference, cov.dim()};
                PiKind kind = icfg.first_stage == FirstStage::local_linear ? PiKind::local_linear
                              : icfg.first_stage == FirstStage::linear_projection
                                  ? PiKind::linear_projection
                                  : default_pi_kind(cov.dim());
                pi = predict_pi_matrix(fit_pi(pn, cov, spec, kind), cov);
            }
            auto [net, kr] =
                impute_local_pca(pn, dist, k_grid, rank_grid, method == Method::x_lpca,
                                 icfg.seed, pi);
            out.net = std::move(net);
            out.k_neighbors = kr.first;
            out.rank = kr.second;
            return out;
        }
        case Method::ltwfe: {
            auto [net, h] = impute_ltwfe(pn, icfg);
            out.net = std::move(net);
            out.h_star = h;
            return out;
        }
        case Method::x_ltwfe: {
            auto [net, h] = impute_with_cv(pn, cov, icfg);
            out.net = std::move(net);
            out.h_star = h;
            return out;
        }
        case Method::x_ltwfe_sp: {
            auto [net, h] = impute_split(pn, cov, icfg);
            out.net = std::move(net);
            out.h_star = h;
            return out;
        }
        case Method::cd:
            throw ValidationError("method 'cd' is only meaningful inside the mc harness");
    }
    throw ValidationError("unhandled method");
}

int cmd_simulate(int n, std::vector<double> beta, double phi, bool with_outcomes,
                 std::uint64_t seed, const std::string& out) {
    ensure_out_dir(out);
    auto [cov, lat] = generate_population(n, seed);
    Vector b(beta.size());
    for (std::size_t i = 0; i < beta.size(); ++i) b(i) = beta[i];
    const ProbabilityMatrix p = probability_matrix(cov, lat, GraphonSpec{b, nullptr});
    const Network net = sample_network(p, seed);
    const int n_sampled = static_cast<int>(std::lround(phi * n));
    const PartialNetwork pn = egocentric_sample(net, n_sampled, seed);

    DataBundle bundle;
    bundle.n_nodes = n;
    bundle.covariates = cov.x;
    bundle.sampled = pn.sampled;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (net.adj(i, j) != 0.0 && pn.observed(i, j)) bundle.edges.emplace_back(i, j);
    if (with_outcomes) {
        const Matrix w = peer_covariates(cov, lat);
        const NormalizedNetwork g = row_normalize(net.adj);
        RngStream noise(seed, rng_purpose::outcome);
        const double u_m = noise.normal(0.0, 0.2);
        Vector e(n);
        for (int i = 0; i < n; ++i) e(i) = noise.normal(0.0, 1.0);
        const PeerCoefficients alpha{0.0, 0.5, (Vector(2) << 1.0, 1.0).finished(),
                                     (Vector(2) << 1.0, 1.0).finished()};
        bundle.outcomes = simulate_peer_outcomes(g, w, alpha, u_m, e);
        bundle.w_covariates = w;
    }
    save_bundle(out, bundle);
    std::cout << "wrote bundle to " << out << " (nodes=" << n << ", sampled=" << n_sampled
              << ", edges=" << bundle.edges.size() << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Egocentric network imputation and downstream estimation"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir = ".";
    app.add_option("--config", config_path, "flat key=value config file");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    auto* threads_opt = app.add_option("--threads", threads, "worker cap (results unaffected)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory");

    // simulate
    auto* sim = app.add_subcommand("simulate", "write a synthetic egocentric bundle");
    sim->fallthrough();
    int sim_n = 200;
    std::vector<double> sim_beta = {-0.5, -0.5};
    double sim_phi = 0.4;
    bool sim_outcomes = false;
    sim->add_option("--n", sim_n, "number of nodes");
    sim->add_option("--beta", sim_beta, "homophily coefficients")->delimiter(',');
    sim->add_option("--phi", sim_phi, "sampling rate");
    sim->add_flag("--with-outcomes", sim_outcomes, "also write peer-effects outcomes and W");

    // shared bundle/imputation options
    std::string f_cov, f_edges, f_sampled, f_outcomes, f_wcov;
    std::string method = "x-ltwfe";
    std::vector<double> h_grid;
    double undersmooth = 1.0;
    std::string first_stage = "auto";
    std::string kernel = "epanechnikov";
    int cv_pair_cap = 20000;
    std::vector<int> rank_grid = {1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> k_grid = {10, 20, 40, 60};

    auto add_bundle_opts = [&](CLI::App* cmd, bool need_outcomes) {
        cmd->add_option("--covariates", f_cov, "node covariate csv")->required();
        cmd->add_option("--edges", f_edges, "edge list csv")->required();
        cmd->add_option("--sampled", f_sampled, "sampled node csv")->required();
        auto* oo = cmd->add_option("--outcomes", f_outcomes, "outcome csv");
        if (need_outcomes) oo->required();
        cmd->add_option("--wcov", f_wcov, "peer-effect covariate csv");
    };
    auto add_impute_opts = [&](CLI::App* cmd) {
        cmd->add_option("--method", method,
                        "x-ltwfe | x-ltwfe-sp | x | ltwfe | lr | lpca | x-lpca | sampled");
        cmd->add_option("--h-grid", h_grid, "bandwidth grid (default: auto)")->delimiter(',');
        cmd->add_option("--undersmooth", undersmooth, "multiplier on the CV bandwidth");
        cmd->add_option("--first-stage", first_stage, "auto | local-linear | linear-projection");
        cmd->add_option("--kernel", kernel, "epanechnikov | triangular | uniform");
        cmd->add_option("--cv-pair-cap", cv_pair_cap, "max CV pairs");
        cmd->add_option("--rank-grid", rank_grid, "ranks for lr/lpca")->delimiter(',');
        cmd->add_option("--k-grid", k_grid, "neighbor counts for lpca")->delimiter(',');
    };

    auto* imp = app.add_subcommand("impute", "impute missing links in a bundle");
    imp->fallthrough();
    add_bundle_opts(imp, false);
    add_impute_opts(imp);

    auto* est = app.add_subcommand("estimate", "network regression on an imputed bundle");
    est->fallthrough();
    add_bundle_opts(est, true);
    add_impute_opts(est);
    std::string model = "centrality-degree";
    std::string weight = "identity";
    est->add_option("--model", model, "centrality-degree | centrality-eigen | peer-effects");
    est->add_option("--weight", weight, "GMM weight matrix (identity)");

    auto* mc = app.add_subcommand("mc", "Monte Carlo harness");
    mc->fallthrough();
    std::string mc_experiment = "imputation";
    int mc_n = 200, mc_m = 40, mc_s = 200;
    std::vector<double> mc_beta = {-0.5, -0.5};
    std::vector<double> mc_phi = {0.2, 0.4};
    std::vector<std::string> mc_methods = {"x-ltwfe"};
    auto* mc_exp_opt = mc->add_option("--experiment", mc_experiment,
                                      "imputation | centrality-degree | centrality-eigen | peer-effects");
    auto* mc_n_opt = mc->add_option("--n", mc_n, "network size");
    auto* mc_m_opt = mc->add_option("--m", mc_m, "networks per replication");
    auto* mc_s_opt = mc->add_option("--replications", mc_s, "Monte Carlo replications");
    auto* mc_beta_opt = mc->add_option("--beta", mc_beta, "homophily coefficients")->delimiter(',');
    auto* mc_phi_opt = mc->add_option("--phi-list", mc_phi, "sampling rates")->delimiter(',');
    auto* mc_methods_opt =
        mc->add_option("--methods", mc_methods, "methods to compare")->delimiter(',');
    add_impute_opts(mc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        KvDefaults defaults;
        defaults.load(config_path);
        defaults.apply(seed_opt, "seed", seed);
        defaults.apply(threads_opt, "threads", threads);
        {
            std::string out_from_file = out_dir;
            defaults.apply(out_opt, "out", out_from_file);
            out_dir = out_from_file;
        }

        CLI::App* active = imp->parsed() ? imp : est->parsed() ? est : mc->parsed() ? mc : sim;
        ImputeConfig icfg;
        icfg.h_grid = h_grid;
        icfg.undersmooth = undersmooth;
        icfg.cv_pair_cap = cv_pair_cap;
        icfg.seed = seed;
        defaults.apply(active->get_option_no_throw("--h-grid"), "h_grid", icfg.h_grid);
        defaults.apply(active->get_option_no_throw("--undersmooth"), "undersmooth",
                       icfg.undersmooth);
        defaults.apply(active->get_option_no_throw("--cv-pair-cap"), "cv_pair_cap",
                       icfg.cv_pair_cap);
        std::string kernel_eff = kernel, fs_eff = first_stage;
        defaults.apply(active->get_option_no_throw("--kernel"), "kernel", kernel_eff);
        defaults.apply(active->get_option_no_throw("--first-stage"), "first_stage", fs_eff);
        icfg.kernel = parse_kernel(kernel_eff);
        icfg.first_stage = parse_first_stage(fs_eff);

        if (sim->parsed()) {
            return cmd_simulate(sim_n, sim_beta, sim_phi, sim_outcomes, seed, out_dir);
        }

        if (imp->parsed() || est->parsed()) {
            const BundlePaths paths{f_cov, f_edges, f_sampled, f_outcomes, f_wcov};
            const DataBundle bundle = load_bundle(paths);
            if (bundle.rejected_edges > 0)
                std::cerr << "warning: rejected " << bundle.rejected_edges
                          << " edge(s) with both endpoints unsampled\n";
            const PartialNetwork pn = bundle.to_partial();
            const CovariateSet cov = bundle.covariate_set();
            icfg.split = method == "x-ltwfe-sp";
            const ImputeOutcome res =
                run_imputation(method, pn, cov, icfg, rank_grid, k_grid);

            ensure_out_dir(out_dir);
            if (imp->parsed()) {
                save_matrix_csv((fs::path(out_dir) / "imputed.csv").string(), res.net.a_hat);
                save_provenance_csv((fs::path(out_dir) / "provenance.csv").string(),
                                    res.net.provenance);
                std::vector<std::pair<std::string, std::string>> meta;
                meta.emplace_back("method", method);
                meta.emplace_back("seed", std::to_string(seed));
                meta.emplace_back("n_nodes", std::to_string(bundle.n_nodes));
                meta.emplace_back("n_sampled", std::to_string(bundle.sampled.size()));
                meta.emplace_back("rejected_edges", std::to_string(bundle.rejected_edges));
                meta.emplace_back("fallback_count", std::to_string(res.net.fallback_count));
                if (res.h_star >= 0.0) {
                    meta.emplace_back("h_star", format_double(res.h_star));
                    meta.emplace_back("undersmooth", format_double(icfg.undersmooth));
                }
                if (res.rank >= 0) meta.emplace_back("rank", std::to_string(res.rank));
                if (res.k_neighbors >= 0)
                    meta.emplace_back("k_neighbors", std::to_string(res.k_neighbors));
                save_key_values((fs::path(out_dir) / "meta.txt").string(), meta);
                std::cout << "imputed " << bundle.n_nodes << "-node network -> " << out_dir
                          << "\n";
                return 0;
            }

            // estimate
            if (!bundle.outcomes) throw ValidationError("estimate: outcomes file is required");
            if (weight != "identity") throw ValidationError("estimate: only identity weight");
            std::vector<std::pair<std::string, std::string>> kv;
            kv.emplace_back("model", model);
            kv.emplace_back("method", method);
            kv.emplace_back("n_networks", "1");
            if (model == "centrality-degree" || model == "centrality-eigen") {
                Vector phi_v;
                if (model == "centrality-eigen")
                    phi_v = eigenvector_centrality(res.net.a_hat).phi;
                else
                    phi_v = degree_centrality(res.net.a_hat);
                const CentralityEstimate ce = centrality_ols({*bundle.outcomes}, {phi_v});
                kv.emplace_back("alpha_c", format_double(ce.alpha_c));
                kv.emplace_back("alpha_1", format_double(ce.alpha_1));
                kv.emplace_back("se_available", ce.se_available ? "1" : "0");
                if (ce.se_available) {
                    kv.emplace_back("se_c", format_double(ce.se_c));
                    kv.emplace_back("se_1", format_double(ce.se_1));
                }
            } else if (model == "peer-effects") {
                if (!bundle.w_covariates)
                    throw ValidationError("estimate: peer-effects model requires --wcov");
                const NormalizedNetwork g = row_normalize(res.net.a_hat);
                const PeerEffectsEstimate pe =
                    peer_effects_gmm({PeerNetworkData{g.g, *bundle.w_covariates,
                                                      *bundle.outcomes}});
                kv.emplace_back("alpha_c", format_double(pe.alpha(0)));
                kv.emplace_back("alpha_ybar", format_double(pe.alpha(1)));
                const int d_w = static_cast<int>(bundle.w_covariates->cols());
                for (int d = 0; d < d_w; ++d)
                    kv.emplace_back("alpha_w" + std::to_string(d + 1),
                                    format_double(pe.alpha(2 + d)));
                for (int d = 0; d < d_w; ++d)
                    kv.emplace_back("alpha_wbar" + std::to_string(d + 1),
                                    format_double(pe.alpha(2 + d_w + d)));
                kv.emplace_back("se_available", pe.se_available ? "1" : "0");
            } else {
                throw ValidationError("unknown model: " + model);
            }
            kv.emplace_back("fallback_count", std::to_string(res.net.fallback_count));
            save_key_values((fs::path(out_dir) / "estimate.txt").string(), kv);
            std::cout << "estimates written to " << out_dir << "/estimate.txt\n";
            return 0;
        }

        if (mc->parsed()) {
            ExperimentConfig cfg;
            defaults.apply(mc_exp_opt, "experiment", mc_experiment);
            defaults.apply(mc_n_opt, "n_nodes", mc_n);
            defaults.apply(mc_m_opt, "m_networks", mc_m);
            defaults.apply(mc_s_opt, "replications", mc_s);
            defaults.apply(mc_beta_opt, "beta", mc_beta);
            defaults.apply(mc_phi_opt, "phi_list", mc_phi);
            {
                const auto it = defaults.kv.find("methods");
                if (it != defaults.kv.end() && mc_methods_opt->count() == 0) {
                    mc_methods.clear();
                    std::stringstream ss(it->second);
                    std::string tok;
                    while (std::getline(ss, tok, ','))
                        if (!tok.empty()) mc_methods.push_back(tok);
                }
            }
            defaults.apply(active->get_option_no_throw("--rank-grid"), "rank_grid", rank_grid);
            defaults.apply(active->get_option_no_throw("--k-grid"), "k_grid", k_grid);
            cfg.experiment = parse_experiment(mc_experiment);
            cfg.n_nodes = mc_n;
            cfg.m_networks = mc_m;
            cfg.replications = mc_s;
            cfg.beta.resize(mc_beta.size());
            for (std::size_t i = 0; i < mc_beta.size(); ++i) cfg.beta(i) = mc_beta[i];
            cfg.phi_list = mc_phi;
            cfg.methods.clear();
            for (const auto& name : mc_methods) cfg.methods.push_back(parse_method(name));
            cfg.seed = seed;
            cfg.threads = threads;
            cfg.impute = icfg;
            cfg.rank_grid = rank_grid;
            cfg.k_grid = k_grid;

            const McReport report = run_experiment(cfg);
            ensure_out_dir(out_dir);
            {
                std::ofstream f(fs::path(out_dir) / "report.csv");
                if (!f) throw IoError("cannot write report.csv");
                f << report_csv(report);
            }
            {
                std::ofstream f(fs::path(out_dir) / "report.txt");
                if (!f) throw IoError("cannot write report.txt");
                f << report_text_table(report);
            }
            std::cout << report_text_table(report);
            std::cout << "wall clock: " << report.wall_seconds << " s\n";
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
