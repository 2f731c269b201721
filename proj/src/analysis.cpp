#include "nmassvs/analysis.hpp"

#include "nmassvs/design.hpp"
#include "nmassvs/errors.hpp"

namespace nmassvs {

InconsistencySpec resolve_placement(const EvidenceNetwork& network, const AnalysisConfig& config) {
    try {
        return place(network, config.method);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
}

SpikeSlabConfig resolve_spike_slab(const EvidenceNetwork& network, const Eigen::MatrixXd& X,
                                   const InconsistencySpec& spec, const AnalysisConfig& config,
                                   std::optional<PilotResult>* pilot) {
    SpikeSlabConfig ss = threshold_spike_slab(spec.p(), config.omega, config.c);
    ss.correlation = config.correlation;
    ss.g = config.g ? *config.g : default_g(network.contrast_count());
    ss.sigma2_prior = config.sigma2_prior;
    if (config.psi == PsiMode::Pilot && spec.p() > 0) {
        PilotConfig pc = config.pilot;
        pc.c = config.c;
        pc.tau_prior = config.mcmc.tau_prior;
        pc.fixed_tau = config.mcmc.fixed_tau;
        PilotResult pr = pilot_psi(network, X, spec.Z, pc);
        ss.psi = pr.psi;
        if (pilot) *pilot = std::move(pr);
    }
    return ss;
}

AnalysisResult run_analysis(const EvidenceNetwork& full, const AnalysisConfig& config) {
    config.validate(false);
    AnalysisResult r;
    auto pruned = prune_disconnected(full);
    r.network = std::move(pruned.network);
    r.removed = std::move(pruned.removed);
    r.X = build_X(r.network);
    r.spec = resolve_placement(r.network, config);
    if (r.spec.p() == 0) {
        r.trivially_consistent = true;
        return r;
    }
    r.spike_slab = resolve_spike_slab(r.network, r.X, r.spec, config, &r.pilot);
    auto chains = run_ssifs(r.network, r.X, r.spec, r.spike_slab, config.consistency, config.mcmc);
    r.chains = std::move(chains.chains);
    r.report = summarize(r.chains, r.spec.labels(), basic_contrast_labels(r.network));
    return r;
}

AnalysisResult run_analysis(const AnalysisConfig& config) {
    config.validate();
    const auto network = load_network(config.data, config.cov, config.arms, config.reference);
    return run_analysis(network, config);
}

} // namespace nmassvs
