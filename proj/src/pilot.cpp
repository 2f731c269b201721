#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nmassvs/posterior.hpp"
#include "nmassvs/sampler.hpp"

namespace nmassvs {

PilotResult pilot_psi(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                      const PilotConfig& config) {
    const auto p = static_cast<std::size_t>(Z.cols());
    if (p == 0) return {};

    // Every factor in the slab, slab variance equal to the vague prior variance.
    SpikeSlabConfig ss;
    ss.c = config.c;
    ss.psi.assign(p, std::sqrt(config.prior_variance) / config.c);
    McmcConfig mc;
    mc.chains = config.chains;
    mc.iterations = config.iterations;
    mc.burn_in = config.burn_in;
    mc.seed = config.seed;
    mc.tau_prior = config.tau_prior;
    mc.fixed_tau = config.fixed_tau;
    const SsvsModel model(network, X, Z, ss, ConsistencyPrior::fixed(0.5), mc, /*sample_gamma=*/false);

    std::vector<ChainOutput> chains;
    for (std::size_t k = 0; k < config.chains; ++k) chains.push_back(run_chain(model, k));

    PilotResult out;
    std::ostringstream flagged;
    for (std::size_t l = 0; l < p; ++l) {
        double n = 0.0, mean = 0.0, m2 = 0.0;
        std::vector<std::vector<double>> per_chain;
        for (const auto& c : chains) {
            per_chain.emplace_back(c.draws);
            for (std::size_t t = 0; t < c.draws; ++t) {
                const double v = c.b[t * p + l];
                per_chain.back()[t] = v;
                n += 1.0;
                const double d = v - mean;
                mean += d / n;
                m2 += d * (v - mean);
            }
        }
        const double sd = std::sqrt(m2 / (n - 1.0));
        out.posterior_sd.push_back(sd);
        out.psi.push_back(sd / config.c);
        if (chains.size() > 1) {
            std::vector<std::span<const double>> views(per_chain.begin(), per_chain.end());
            const double r = split_rhat(views);
            if (!(r <= 1.05)) flagged << (flagged.tellp() > 0 ? ", " : "") << "b" << (l + 1) << " (" << r << ")";
        }
    }
    if (flagged.tellp() > 0) out.warning = "pilot run has not converged for " + flagged.str();
    return out;
}

} // namespace nmassvs
