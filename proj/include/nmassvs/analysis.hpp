#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nmassvs/config.hpp"
#include "nmassvs/graph.hpp"
#include "nmassvs/network.hpp"
#include "nmassvs/posterior.hpp"
#include "nmassvs/sampler.hpp"

namespace nmassvs {

struct AnalysisResult {
    EvidenceNetwork network;              // pruned to the reference component
    std::vector<std::string> removed;     // studies dropped by pruning
    Eigen::MatrixXd X;
    InconsistencySpec spec;
    SpikeSlabConfig spike_slab;           // resolved psi and g
    std::optional<PilotResult> pilot;
    bool trivially_consistent = false;    // p == 0, nothing sampled
    std::vector<ChainOutput> chains;
    std::optional<ConsistencyReport> report;
};

/// Placement, prior resolution and spike/slab settings for a network, without sampling.
InconsistencySpec resolve_placement(const EvidenceNetwork& network, const AnalysisConfig& config);
SpikeSlabConfig resolve_spike_slab(const EvidenceNetwork& network, const Eigen::MatrixXd& X,
                                   const InconsistencySpec& spec, const AnalysisConfig& config,
                                   std::optional<PilotResult>* pilot = nullptr);

/// Load, prune, place, sample and summarize.
AnalysisResult run_analysis(const AnalysisConfig& config);
AnalysisResult run_analysis(const EvidenceNetwork& network, const AnalysisConfig& config);

} // namespace nmassvs
