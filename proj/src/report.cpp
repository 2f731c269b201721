#include "nmassvs/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "nmassvs/design.hpp"
#include "nmassvs/errors.hpp"

namespace nmassvs {

using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

ordered_json odds_json(const Odds& o) {
    const char* kind = o.kind == Odds::Kind::Exact ? "exact" : o.kind == Odds::Kind::LowerBound ? "lower-bound" : "upper-bound";
    return {{"value", o.value}, {"kind", kind}};
}

ordered_json finite_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string factor_list(std::uint64_t id, const std::vector<std::string>& labels) {
    std::string out;
    for (std::size_t l = 0; l < labels.size(); ++l)
        if ((id >> l) & 1U) out += (out.empty() ? "" : ";") + labels[l];
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

} // namespace

ordered_json report_json(const AnalysisResult& r, const AnalysisConfig& config) {
    ordered_json j;
    j["version"] = kVersion;
    j["method"] = to_string(r.spec.method);
    j["network"] = {{"treatments", r.network.treatment_count()},
                    {"studies", r.network.study_count()},
                    {"contrasts", r.network.contrast_count()},
                    {"reference", r.network.reference().id},
                    {"removed_studies", r.removed}};
    j["factors"] = r.spec.labels();
    j["placement_notes"] = r.spec.notes;
    if (r.trivially_consistent) {
        j["status"] = "consistent by construction";
        j["p"] = 0;
        return j;
    }
    j["status"] = "sampled";
    j["p"] = r.spec.p();
    j["prior"] = {{"correlation", to_string(config.correlation)},
                  {"g", r.spike_slab.g},
                  {"c", r.spike_slab.c},
                  {"omega", r.spike_slab.omega},
                  {"psi", r.spike_slab.psi},
                  {"psi_source", to_string(config.psi)},
                  {"inclusion_probability",
                   config.consistency.mode == ConsistencyPrior::Mode::Fixed
                       ? ordered_json(inclusion_probability(config.consistency.pi_cons, r.spec.p()))
                       : ordered_json(nullptr)}};
    if (r.pilot && r.pilot->warning) j["prior"]["pilot_warning"] = *r.pilot->warning;

    const auto& rep = *r.report;
    ordered_json pips = ordered_json::array();
    for (std::size_t l = 0; l < rep.pips.size(); ++l)
        pips.push_back({{"label", rep.labels[l]}, {"pip", rep.pips[l].value}, {"mc_se", rep.pips[l].mc_se}});
    j["pips"] = pips;

    ordered_json table = ordered_json::array();
    for (const auto& [id, prob] : rep.model_table.ranked())
        table.push_back({{"model_id", id},
                         {"factors", factor_list(id, rep.labels)},
                         {"probability", prob},
                         {"count", rep.model_table.counts.at(id)}});
    j["model_table"] = table;
    j["total_draws"] = rep.model_table.total;
    j["consistent_prob"] = rep.consistent_prob;
    j["po_consistency"] = odds_json(rep.po_consistency);
    j["evidence"] = {{"category", rep.evidence.category},
                     {"favors", rep.evidence.favors},
                     {"odds", rep.evidence.odds}};
    ordered_json median = ordered_json::array(), reduced = ordered_json::array();
    for (auto l : rep.median_model) median.push_back(rep.labels[l]);
    for (auto l : rep.reduced_factors) reduced.push_back(rep.labels[l]);
    j["median_model"] = median;
    j["reduced_factors"] = reduced;

    const auto mu_labels = basic_contrast_labels(r.network);
    ordered_json mu = ordered_json::object();
    for (std::size_t k = 0; k < rep.mu_mean.size(); ++k) mu[mu_labels[k]] = rep.mu_mean[k].value;
    j["mu_mean"] = mu;
    j["tau_mean"] = rep.tau_mean.value;

    ordered_json diag = {{"available", rep.diagnostics.available},
                         {"all_pass", rep.diagnostics.available && rep.diagnostics.all_pass()}};
    ordered_json params = ordered_json::array();
    for (const auto& d : rep.diagnostics.parameters)
        params.push_back({{"parameter", d.parameter}, {"rhat", finite_or_null(d.rhat)}, {"flagged", d.flagged}});
    diag["parameters"] = params;
    j["diagnostics"] = diag;

    ordered_json chains = ordered_json::array();
    for (const auto& c : r.chains) {
        ordered_json cj = {{"seed", c.seed}, {"draws", c.draws}};
        if (c.tau_proposed) cj["tau_acceptance"] = static_cast<double>(c.tau_accepted) / static_cast<double>(c.tau_proposed);
        if (c.pi_proposed) cj["pi_cons_acceptance"] = static_cast<double>(c.pi_accepted) / static_cast<double>(c.pi_proposed);
        chains.push_back(cj);
    }
    j["chains"] = chains;
    return j;
}

std::string pips_csv(const AnalysisResult& r) {
    std::ostringstream os;
    os << "factor,label,pip,mc_se\n";
    if (!r.report) return os.str();
    const auto& rep = *r.report;
    for (std::size_t l = 0; l < rep.pips.size(); ++l)
        os << (l + 1) << ',' << rep.labels[l] << ',' << fmt(rep.pips[l].value) << ',' << fmt(rep.pips[l].mc_se) << '\n';
    return os.str();
}

std::string model_table_csv(const AnalysisResult& r) {
    std::ostringstream os;
    os << "model_id,factors,probability,count\n";
    if (!r.report) return os.str();
    const auto& rep = *r.report;
    for (const auto& [id, prob] : rep.model_table.ranked())
        os << id << ',' << factor_list(id, rep.labels) << ',' << fmt(prob) << ',' << rep.model_table.counts.at(id)
           << '\n';
    return os.str();
}

std::string trace_csv(const ChainOutput& c) {
    std::ostringstream os;
    os << "iteration,gamma";
    for (std::size_t l = 0; l < c.p; ++l) os << ",b" << (l + 1);
    os << ",tau\n";
    for (std::size_t t = 0; t < c.draws; ++t) {
        os << c.iteration_of(t) << ',';
        for (auto g : c.gamma_at(t)) os << (g ? '1' : '0');
        for (double b : c.b_at(t)) os << ',' << fmt(b);
        os << ',' << fmt(c.tau[t]) << '\n';
    }
    return os.str();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ordered_json manifest_json(const AnalysisResult& r, const AnalysisConfig& config, const std::string& config_path,
                           const std::string& started, const std::string& finished) {
    ordered_json j;
    j["version"] = kVersion;
    j["inputs"] = {{"data", config.data.string()},
                   {"cov", config.cov ? ordered_json(config.cov->string()) : ordered_json(nullptr)},
                   {"arms", config.arms ? ordered_json(config.arms->string()) : ordered_json(nullptr)}};
    j["config_path"] = config_path.empty() ? ordered_json(nullptr) : ordered_json(config_path);
    j["method"] = to_string(config.method);
    j["seed"] = config.mcmc.seed;
    ordered_json seeds = ordered_json::array();
    for (const auto& c : r.chains) seeds.push_back(c.seed);
    j["chain_seeds"] = seeds;
    j["resolved_config"] = to_json(config);
    j["started"] = started;
    j["finished"] = finished;
    return j;
}

void write_outputs(const AnalysisResult& r, const AnalysisConfig& config, const ordered_json& manifest) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out);
    write_file(config.out / "report.json", report_json(r, config).dump(2) + "\n");
    write_file(config.out / "manifest.json", manifest.dump(2) + "\n");
    write_file(config.out / "pips.csv", pips_csv(r));
    write_file(config.out / "model_table.csv", model_table_csv(r));
    if (config.traces && !r.chains.empty()) {
        fs::create_directories(config.out / "traces");
        for (std::size_t k = 0; k < r.chains.size(); ++k)
            write_file(config.out / "traces" / ("chain-" + std::to_string(k + 1) + ".csv"), trace_csv(r.chains[k]));
    }
}

} // namespace nmassvs
