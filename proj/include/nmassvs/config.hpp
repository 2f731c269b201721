#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "nmassvs/graph.hpp"
#include "nmassvs/priors.hpp"
#include "nmassvs/sampler.hpp"

namespace nmassvs {

enum class PsiMode { Threshold, Pilot };

/// Everything an analysis run depends on. Defaults: 2 chains, 300000 iterations,
/// 50000 burn-in, omega 0.2, c 10, pi_cons 0.5, identity correlation.
struct AnalysisConfig {
    std::filesystem::path data;
    std::optional<std::filesystem::path> cov;
    std::optional<std::filesystem::path> arms;
    std::optional<std::string> reference;

    PlacementMethod method = PlacementMethod::DesignByTreatment;
    CorrelationMode correlation = CorrelationMode::Identity;
    std::optional<double> g;  // empty: g = N
    Sigma2Prior sigma2_prior = Sigma2Prior::inverse_gamma(1e-3, 1e-3);
    ConsistencyPrior consistency = ConsistencyPrior::fixed(0.5);
    double omega = 0.2;
    double c = 10.0;
    PsiMode psi = PsiMode::Threshold;
    PilotConfig pilot;
    McmcConfig mcmc;

    std::filesystem::path out = "nmassvs-out";
    bool traces = false;

    /// Throws ValidationError listing every invalid setting.
    void validate(bool need_data = true) const;
};

nlohmann::ordered_json to_json(const AnalysisConfig& config);
/// Overlays the keys present in `doc` onto `base`; unknown keys are rejected.
AnalysisConfig config_from_json(const nlohmann::json& doc, AnalysisConfig base = {});
AnalysisConfig load_config(const std::filesystem::path& path, AnalysisConfig base = {});

std::string to_string(CorrelationMode mode);
CorrelationMode correlation_from_string(const std::string& name);
std::string to_string(PsiMode mode);
PsiMode psi_mode_from_string(const std::string& name);

} // namespace nmassvs
