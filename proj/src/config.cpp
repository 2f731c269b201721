#include "nmassvs/config.hpp"

#include <fstream>
#include <set>

#include "nmassvs/errors.hpp"

namespace nmassvs {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(CorrelationMode mode) { return mode == CorrelationMode::Zellner ? "zellner" : "identity"; }

CorrelationMode correlation_from_string(const std::string& name) {
    if (name == "identity") return CorrelationMode::Identity;
    if (name == "zellner") return CorrelationMode::Zellner;
    throw ValidationError("unknown correlation mode '" + name + "' (expected identity or zellner)");
}

std::string to_string(PsiMode mode) { return mode == PsiMode::Pilot ? "pilot" : "auto"; }

PsiMode psi_mode_from_string(const std::string& name) {
    if (name == "auto") return PsiMode::Threshold;
    if (name == "pilot") return PsiMode::Pilot;
    throw ValidationError("unknown psi mode '" + name + "' (expected auto or pilot)");
}

void AnalysisConfig::validate(bool need_data) const {
    std::vector<std::string> errors;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    };
    if (need_data) check(!data.empty(), "no data file given");
    check(omega > 0.0, "omega must be positive");
    check(c > 1.0, "c must exceed 1");
    if (g) check(*g > 0.0, "g must be positive");
    if (consistency.mode == ConsistencyPrior::Mode::Fixed)
        check(consistency.pi_cons > 0.0 && consistency.pi_cons < 1.0, "pi_cons must lie in (0, 1)");
    else
        check(consistency.alpha > 0.0 && consistency.beta > 0.0, "Beta parameters must be positive");
    if (sigma2_prior.kind == Sigma2Prior::Kind::InverseGamma)
        check(sigma2_prior.shape > 0.0 && sigma2_prior.scale > 0.0, "sigma2 prior shape and scale must be positive");
    try {
        mcmc.validate();
    } catch (const std::invalid_argument& e) {
        errors.emplace_back(e.what());
    }
    if (psi == PsiMode::Pilot) {
        check(pilot.chains >= 1, "pilot needs at least one chain");
        check(pilot.burn_in < pilot.iterations, "pilot burn-in must be smaller than its iterations");
        check(pilot.prior_variance > 0.0, "pilot prior variance must be positive");
    }
    if (!errors.empty()) throw ValidationError(errors);
}

namespace {

ordered_json tau_prior_json(const TauPrior& t) {
    return {{"kind", t.kind == TauPrior::Kind::Uniform ? "uniform" : "half-normal"}, {"scale", t.scale}};
}

TauPrior tau_prior_from_json(const json& j, TauPrior base) {
    if (j.contains("kind")) {
        const auto k = j.at("kind").get<std::string>();
        if (k == "half-normal")
            base.kind = TauPrior::Kind::HalfNormal;
        else if (k == "uniform")
            base.kind = TauPrior::Kind::Uniform;
        else
            throw ValidationError("unknown tau prior '" + k + "'");
    }
    if (j.contains("scale")) base.scale = j.at("scale").get<double>();
    return base;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    std::vector<std::string> errors;
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) errors.push_back("unknown key '" + k + "' in " + where);
    if (!errors.empty()) throw ValidationError(errors);
}

} // namespace

ordered_json to_json(const AnalysisConfig& c) {
    ordered_json j;
    j["data"] = c.data.string();
    j["cov"] = c.cov ? ordered_json(c.cov->string()) : ordered_json(nullptr);
    j["arms"] = c.arms ? ordered_json(c.arms->string()) : ordered_json(nullptr);
    j["reference"] = c.reference ? ordered_json(*c.reference) : ordered_json(nullptr);
    j["method"] = to_string(c.method);
    j["correlation"] = to_string(c.correlation);
    j["g"] = c.g ? ordered_json(*c.g) : ordered_json("auto");
    j["sigma2_prior"] = c.sigma2_prior.kind == Sigma2Prior::Kind::Jeffreys
                            ? ordered_json{{"kind", "jeffreys"}}
                            : ordered_json{{"kind", "inverse-gamma"},
                                           {"shape", c.sigma2_prior.shape},
                                           {"scale", c.sigma2_prior.scale}};
    if (c.consistency.mode == ConsistencyPrior::Mode::Fixed)
        j["consistency"] = {{"kind", "fixed"}, {"pi_cons", c.consistency.pi_cons}};
    else
        j["consistency"] = {{"kind", "beta"}, {"alpha", c.consistency.alpha}, {"beta", c.consistency.beta}};
    j["omega"] = c.omega;
    j["c"] = c.c;
    j["psi"] = to_string(c.psi);
    j["pilot"] = {{"chains", c.pilot.chains},
                  {"iterations", c.pilot.iterations},
                  {"burn_in", c.pilot.burn_in},
                  {"seed", c.pilot.seed},
                  {"prior_variance", c.pilot.prior_variance}};
    j["mcmc"] = {{"chains", c.mcmc.chains},
                 {"iterations", c.mcmc.iterations},
                 {"burn_in", c.mcmc.burn_in},
                 {"thin", c.mcmc.thin},
                 {"seed", c.mcmc.seed},
                 {"mu_prior_variance", c.mcmc.mu_prior_variance},
                 {"tau_prior", tau_prior_json(c.mcmc.tau_prior)},
                 {"fixed_tau", c.mcmc.fixed_tau ? ordered_json(*c.mcmc.fixed_tau) : ordered_json(nullptr)}};
    j["out"] = c.out.string();
    j["traces"] = c.traces;
    return j;
}

AnalysisConfig config_from_json(const json& doc, AnalysisConfig c) {
    if (!doc.is_object()) throw ValidationError("configuration must be a JSON object");
    reject_unknown(doc,
                   {"data", "cov", "arms", "reference", "method", "correlation", "g", "sigma2_prior", "consistency",
                    "omega", "c", "psi", "pilot", "mcmc", "out", "traces"},
                   "configuration");
    try {
        auto opt_path = [&](const char* key, std::optional<std::filesystem::path>& dst) {
            if (!doc.contains(key)) return;
            if (doc.at(key).is_null())
                dst.reset();
            else
                dst = doc.at(key).get<std::string>();
        };
        if (doc.contains("data")) c.data = doc.at("data").get<std::string>();
        opt_path("cov", c.cov);
        opt_path("arms", c.arms);
        if (doc.contains("reference")) {
            if (doc.at("reference").is_null())
                c.reference.reset();
            else
                c.reference = doc.at("reference").get<std::string>();
        }
        if (doc.contains("method")) {
            try {
                c.method = placement_from_string(doc.at("method").get<std::string>());
            } catch (const std::invalid_argument& e) {
                throw ValidationError(e.what());
            }
        }
        if (doc.contains("correlation")) c.correlation = correlation_from_string(doc.at("correlation").get<std::string>());
        if (doc.contains("g")) {
            const auto& g = doc.at("g");
            if (g.is_string() && g.get<std::string>() == "auto")
                c.g.reset();
            else
                c.g = g.get<double>();
        }
        if (doc.contains("sigma2_prior")) {
            const auto& s = doc.at("sigma2_prior");
            reject_unknown(s, {"kind", "shape", "scale"}, "sigma2_prior");
            const auto kind = s.value("kind", std::string("inverse-gamma"));
            if (kind == "jeffreys")
                c.sigma2_prior = Sigma2Prior::jeffreys();
            else if (kind == "inverse-gamma")
                c.sigma2_prior = Sigma2Prior::inverse_gamma(s.value("shape", 1e-3), s.value("scale", 1e-3));
            else
                throw ValidationError("unknown sigma2 prior '" + kind + "'");
        }
        if (doc.contains("consistency")) {
            const auto& s = doc.at("consistency");
            reject_unknown(s, {"kind", "pi_cons", "alpha", "beta"}, "consistency");
            const auto kind = s.value("kind", std::string("fixed"));
            if (kind == "fixed") {
                c.consistency.mode = ConsistencyPrior::Mode::Fixed;
                c.consistency.pi_cons = s.value("pi_cons", 0.5);
            } else if (kind == "beta") {
                c.consistency.mode = ConsistencyPrior::Mode::Beta;
                c.consistency.alpha = s.value("alpha", 157.0);
                c.consistency.beta = s.value("beta", 44.0);
                c.consistency.pi_cons = c.consistency.alpha / (c.consistency.alpha + c.consistency.beta);
            } else {
                throw ValidationError("unknown consistency prior '" + kind + "'");
            }
        }
        if (doc.contains("omega")) c.omega = doc.at("omega").get<double>();
        if (doc.contains("c")) c.c = doc.at("c").get<double>();
        if (doc.contains("psi")) c.psi = psi_mode_from_string(doc.at("psi").get<std::string>());
        if (doc.contains("pilot")) {
            const auto& s = doc.at("pilot");
            reject_unknown(s, {"chains", "iterations", "burn_in", "seed", "prior_variance"}, "pilot");
            c.pilot.chains = s.value("chains", c.pilot.chains);
            c.pilot.iterations = s.value("iterations", c.pilot.iterations);
            c.pilot.burn_in = s.value("burn_in", c.pilot.burn_in);
            c.pilot.seed = s.value("seed", c.pilot.seed);
            c.pilot.prior_variance = s.value("prior_variance", c.pilot.prior_variance);
        }
        if (doc.contains("mcmc")) {
            const auto& s = doc.at("mcmc");
            reject_unknown(s,
                           {"chains", "iterations", "burn_in", "thin", "seed", "mu_prior_variance", "tau_prior",
                            "fixed_tau"},
                           "mcmc");
            c.mcmc.chains = s.value("chains", c.mcmc.chains);
            c.mcmc.iterations = s.value("iterations", c.mcmc.iterations);
            c.mcmc.burn_in = s.value("burn_in", c.mcmc.burn_in);
            c.mcmc.thin = s.value("thin", c.mcmc.thin);
            c.mcmc.seed = s.value("seed", c.mcmc.seed);
            c.mcmc.mu_prior_variance = s.value("mu_prior_variance", c.mcmc.mu_prior_variance);
            if (s.contains("tau_prior")) c.mcmc.tau_prior = tau_prior_from_json(s.at("tau_prior"), c.mcmc.tau_prior);
            if (s.contains("fixed_tau")) {
                if (s.at("fixed_tau").is_null())
                    c.mcmc.fixed_tau.reset();
                else
                    c.mcmc.fixed_tau = s.at("fixed_tau").get<double>();
            }
        }
        if (doc.contains("out")) c.out = doc.at("out").get<std::string>();
        if (doc.contains("traces")) c.traces = doc.at("traces").get<bool>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad configuration value: ") + e.what());
    }
    c.pilot.tau_prior = c.mcmc.tau_prior;
    c.pilot.fixed_tau = c.mcmc.fixed_tau;
    c.pilot.c = c.c;
    return c;
}

AnalysisConfig load_config(const std::filesystem::path& path, AnalysisConfig base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open configuration file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return config_from_json(doc, std::move(base));
}

} // namespace nmassvs
