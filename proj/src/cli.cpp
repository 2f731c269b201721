#include "nmassvs/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "nmassvs/analysis.hpp"
#include "nmassvs/config.hpp"
#include "nmassvs/design.hpp"
#include "nmassvs/errors.hpp"
#include "nmassvs/graph.hpp"
#include "nmassvs/oracle.hpp"
#include "nmassvs/posterior.hpp"
#include "nmassvs/report.hpp"

namespace nmassvs {

namespace {

// Raw flag values; only flags the user actually passed override the config file.
struct Flags {
    std::string data, cov, arms, reference, method, correlation, g, psi, out, config, sigma2_prior, tau_prior;
    double pi_cons = 0.5, omega = 0.2, c = 10.0, tau = 0.0, tau_scale = 1.0;
    std::vector<double> pi_cons_beta;
    std::size_t chains = 2, iters = 300000, burnin = 50000, thin = 1;
    std::uint64_t seed = 20221001;
    bool traces = false, print_config = false;
};

void add_data_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--data", f.data, "contrast-level data file (study,t1,t2,y,se)");
    cmd->add_option("--cov", f.cov, "within-study covariances of multi-arm studies (study,row,col,cov)");
    cmd->add_option("--arms", f.arms, "arm-level standard errors of multi-arm studies (study,treatment,se_arm)");
    cmd->add_option("--reference", f.reference, "reference treatment id");
    cmd->add_option("--method", f.method, "inconsistency factor placement: lu-ades, dbt or jackson")
        ->check(CLI::IsMember({"lu-ades", "dbt", "jackson"}));
}

void add_sampler_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--chains", f.chains, "number of chains");
    cmd->add_option("--iters", f.iters, "iterations per chain, burn-in included");
    cmd->add_option("--burnin", f.burnin, "burn-in iterations");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--thin", f.thin, "keep every k-th draw");
    cmd->add_option("--tau", f.tau, "fix the heterogeneity sd instead of sampling it");
}

void add_prior_flags(CLI::App* cmd, Flags& f) {
    auto* fixed = cmd->add_option("--pi-cons", f.pi_cons, "prior probability of consistency");
    auto* beta = cmd->add_option("--pi-cons-beta", f.pi_cons_beta, "Beta(a, b) prior on the consistency probability")
                     ->expected(2);
    fixed->excludes(beta);
    cmd->add_option("--omega", f.omega, "practical significance threshold");
    cmd->add_option("--c", f.c, "slab to spike sd ratio");
}

bool given(const CLI::App* cmd, const std::string& name) {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

AnalysisConfig resolve(const CLI::App* cmd, const Flags& f) {
    AnalysisConfig c;
    if (!f.config.empty()) c = load_config(f.config, c);
    if (given(cmd, "--data")) c.data = f.data;
    if (given(cmd, "--cov")) c.cov = f.cov;
    if (given(cmd, "--arms")) c.arms = f.arms;
    if (given(cmd, "--reference")) c.reference = f.reference;
    if (given(cmd, "--method")) c.method = placement_from_string(f.method);
    if (given(cmd, "--correlation"))
        c.correlation = correlation_from_string(f.correlation);
    if (given(cmd, "--g")) {
        if (f.g == "auto") {
            c.g.reset();
        } else {
            try {
                std::size_t used = 0;
                c.g = std::stod(f.g, &used);
                if (used != f.g.size()) throw std::invalid_argument(f.g);
            } catch (const std::exception&) {
                throw ValidationError("--g expects 'auto' or a positive number, got '" + f.g + "'");
            }
        }
    }
    if (given(cmd, "--sigma2-prior"))
        c.sigma2_prior = f.sigma2_prior == "jeffreys" ? Sigma2Prior::jeffreys() : Sigma2Prior::inverse_gamma(1e-3, 1e-3);
    if (given(cmd, "--pi-cons")) {
        c.consistency.mode = ConsistencyPrior::Mode::Fixed;
        c.consistency.pi_cons = f.pi_cons;
    }
    if (given(cmd, "--pi-cons-beta")) {
        c.consistency.mode = ConsistencyPrior::Mode::Beta;
        c.consistency.alpha = f.pi_cons_beta.at(0);
        c.consistency.beta = f.pi_cons_beta.at(1);
        c.consistency.pi_cons = c.consistency.alpha / (c.consistency.alpha + c.consistency.beta);
    }
    if (given(cmd, "--omega")) c.omega = f.omega;
    if (given(cmd, "--c")) c.c = f.c;
    if (given(cmd, "--psi")) c.psi = psi_mode_from_string(f.psi);
    if (given(cmd, "--chains")) c.mcmc.chains = f.chains;
    if (given(cmd, "--iters")) c.mcmc.iterations = f.iters;
    if (given(cmd, "--burnin")) c.mcmc.burn_in = f.burnin;
    if (given(cmd, "--seed")) c.mcmc.seed = f.seed;
    if (given(cmd, "--thin")) c.mcmc.thin = f.thin;
    if (given(cmd, "--tau")) c.mcmc.fixed_tau = f.tau;
    if (given(cmd, "--tau-prior"))
        c.mcmc.tau_prior.kind = f.tau_prior == "uniform" ? TauPrior::Kind::Uniform : TauPrior::Kind::HalfNormal;
    if (given(cmd, "--tau-prior-scale"))
        c.mcmc.tau_prior.scale = f.tau_scale;
    if (given(cmd, "--out")) c.out = f.out;
    if (given(cmd, "--traces")) c.traces = f.traces;
    c.pilot.c = c.c;
    c.pilot.tau_prior = c.mcmc.tau_prior;
    c.pilot.fixed_tau = c.mcmc.fixed_tau;
    return c;
}

std::string pct(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

int cmd_analyze(const CLI::App* cmd, const Flags& f, std::ostream& out, std::ostream& err) {
    const AnalysisConfig config = resolve(cmd, f);
    if (f.print_config) {
        config.validate(false);
        out << to_json(config).dump(2) << "\n";
        return kExitOk;
    }
    config.validate();
    const std::string started = utc_timestamp();
    const AnalysisResult r = run_analysis(config);
    const auto manifest = manifest_json(r, config, f.config, started, utc_timestamp());
    write_outputs(r, config, manifest);

    if (!r.removed.empty()) err << "note: " << r.removed.size() << " studies outside the reference component removed\n";
    if (r.pilot && r.pilot->warning) err << "warning: " << *r.pilot->warning << "\n";
    out << "method: " << to_string(r.spec.method) << ", factors: " << r.spec.p() << "\n";
    if (r.trivially_consistent) {
        out << "network has no closed loops or design inconsistency: consistent by construction\n";
        return kExitOk;
    }
    const auto& rep = *r.report;
    for (std::size_t l = 0; l < rep.pips.size(); ++l)
        out << "  PIP " << rep.labels[l] << " = " << pct(rep.pips[l].value) << " (MC se " << pct(rep.pips[l].mc_se)
            << ")\n";
    out << "P(consistency | y) = " << pct(rep.consistent_prob) << ", posterior odds " << rep.po_consistency.describe()
        << "\n";
    out << "evidence: " << rep.evidence.category;
    if (!rep.evidence.favors.empty()) out << " in favor of " << rep.evidence.favors;
    out << "\n";
    if (rep.diagnostics.available && !rep.diagnostics.all_pass()) {
        err << "warning: split R-hat above 1.05 for";
        for (const auto& d : rep.diagnostics.parameters)
            if (d.flagged) err << " " << d.parameter;
        err << "\n";
    }
    out << "outputs written to " << config.out.string() << "\n";
    return kExitOk;
}

int cmd_structure(const CLI::App* cmd, const Flags& f, std::ostream& out, std::ostream& err) {
    const AnalysisConfig config = resolve(cmd, f);
    config.validate();
    const auto full = load_network(config.data, config.cov, config.arms, config.reference);
    const auto pruned = prune_disconnected(full);
    const auto& net = pruned.network;
    for (const auto& s : pruned.removed) err << "removed study outside the reference component: " << s << "\n";

    out << "treatments: " << net.treatment_count() << " (reference " << net.reference().id << ")\n";
    out << "studies: " << net.study_count() << ", contrasts: " << net.contrast_count() << "\n";
    const auto graph = ComparisonGraph::from_network(net);
    out << "designs:";
    for (const auto& d : graph.designs()) {
        out << " ";
        for (std::size_t k = 0; k < d.size(); ++k) out << (k ? "-" : "") << net.name(d[k]);
    }
    out << "\nbridges:";
    for (const auto& [a, b] : find_bridges(graph)) out << " " << net.name(a) << "-" << net.name(b);
    const auto loops = independent_loops(graph, 0);
    out << "\nindependent loops: " << loops.loops.size() << "\n";
    for (const auto& loop : loops.loops) {
        out << "  ";
        for (std::size_t k = 0; k < loop.nodes.size(); ++k) out << (k ? "-" : "") << net.name(loop.nodes[k]);
        out << " (closed by " << net.name(loop.distinguishing_edge.first) << "-"
            << net.name(loop.distinguishing_edge.second) << ")\n";
    }
    const auto spec = resolve_placement(net, config);
    out << "method: " << to_string(spec.method) << ", factors: " << spec.p() << "\n";
    for (const auto& note : spec.notes) out << "  note: " << note << "\n";
    out << "Z:\n" << spec_to_csv(spec);
    return kExitOk;
}

int cmd_oracle(const CLI::App* cmd, const Flags& f, std::ostream& out, std::ostream&) {
    AnalysisConfig config = resolve(cmd, f);
    if (!config.mcmc.fixed_tau) config.mcmc.fixed_tau = 0.0;
    config.correlation = CorrelationMode::Identity;
    if (config.consistency.mode != ConsistencyPrior::Mode::Fixed)
        throw ValidationError("the exact oracle needs a fixed --pi-cons");
    config.validate();

    const auto net = prune_disconnected(load_network(config.data, config.cov, config.arms, config.reference)).network;
    const auto X = build_X(net);
    const auto spec = resolve_placement(net, config);
    if (spec.p() == 0) {
        out << "no inconsistency factors: consistent by construction\n";
        return kExitOk;
    }
    if (spec.p() > kOracleMaxFactors)
        throw ValidationError("exact enumeration refuses p = " + std::to_string(spec.p()) + " (limit " +
                              std::to_string(kOracleMaxFactors) + ")");
    const auto ss = resolve_spike_slab(net, X, spec, config);
    const double tau = *config.mcmc.fixed_tau;
    const auto exact = enumerate_exact(net, X, spec.Z, ss, config.consistency, tau, config.mcmc.mu_prior_variance);
    const auto run = run_ssifs(net, X, spec, ss, config.consistency, config.mcmc);
    const auto table = posterior_model_probs(run.chains);

    out << "tau fixed at " << tau << ", p = " << spec.p() << "\n";
    out << "model_id,factors,exact,mcmc,abs_diff\n";
    double worst = 0.0;
    const auto labels = spec.labels();
    for (std::uint64_t id = 0; id < exact.probability.size(); ++id) {
        std::string factors;
        for (std::size_t l = 0; l < spec.p(); ++l)
            if ((id >> l) & 1U) factors += (factors.empty() ? "" : ";") + labels[l];
        const double e = exact.probability[id], m = table.probability(id);
        worst = std::max(worst, std::abs(e - m));
        out << id << ',' << factors << ',' << pct(e) << ',' << pct(m) << ',' << pct(std::abs(e - m)) << "\n";
    }
    out << "max abs difference: " << pct(worst) << "\n";
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stochastic search for inconsistency factors in network meta-analysis", "nmassvs"};
    app.require_subcommand(1);
    Flags f;

    auto* analyze = app.add_subcommand("analyze", "place inconsistency factors, sample and report");
    add_data_flags(analyze, f);
    add_prior_flags(analyze, f);
    add_sampler_flags(analyze, f);
    analyze->add_option("--correlation", f.correlation, "prior correlation of the factors: identity or zellner")
        ->check(CLI::IsMember({"identity", "zellner"}));
    analyze->add_option("--g", f.g, "Zellner g: auto (= number of contrasts) or a value");
    analyze->add_option("--sigma2-prior", f.sigma2_prior, "Zellner scale prior: inverse-gamma or jeffreys")
        ->check(CLI::IsMember({"inverse-gamma", "jeffreys"}));
    analyze->add_option("--psi", f.psi, "spike sd: auto (from omega and c) or pilot")
        ->check(CLI::IsMember({"auto", "pilot"}));
    analyze->add_option("--tau-prior", f.tau_prior, "half-normal or uniform")
        ->check(CLI::IsMember({"half-normal", "uniform"}));
    analyze->add_option("--tau-prior-scale", f.tau_scale, "half-normal scale or uniform upper bound");
    analyze->add_option("--out", f.out, "output directory");
    analyze->add_flag("--traces", f.traces, "write per-chain traces");
    analyze->add_flag("--print-config", f.print_config, "print the resolved configuration and exit");
    analyze->add_option("--config", f.config, "JSON configuration file; flags override it");

    auto* structure = app.add_subcommand("structure", "print the network structure and Z without sampling");
    add_data_flags(structure, f);
    structure->add_option("--config", f.config, "JSON configuration file");

    auto* oracle = app.add_subcommand("oracle", "compare sampled model probabilities with exact enumeration");
    add_data_flags(oracle, f);
    add_sampler_flags(oracle, f);
    oracle->add_option("--pi-cons", f.pi_cons, "prior probability of consistency");
    oracle->add_option("--omega", f.omega, "practical significance threshold");
    oracle->add_option("--c", f.c, "slab to spike sd ratio");
    oracle->add_option("--config", f.config, "JSON configuration file");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        for (auto* sub : app.get_subcommands()) err << sub->help();
        return kExitValidation;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(analyze, f, out, err);
        if (structure->parsed()) return cmd_structure(structure, f, out, err);
        return cmd_oracle(oracle, f, out, err);
    } catch (const ValidationError& e) {
        for (const auto& m : e.messages()) err << "error: " << m << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace nmassvs
