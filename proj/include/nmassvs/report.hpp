#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "nmassvs/analysis.hpp"
#include "nmassvs/config.hpp"

namespace nmassvs {

inline constexpr const char* kVersion = "0.1.0";

/// Deterministic summary of a run (no timestamps).
nlohmann::ordered_json report_json(const AnalysisResult& result, const AnalysisConfig& config);

/// factor,label,pip,mc_se
std::string pips_csv(const AnalysisResult& result);
/// model_id,factors,probability,count
std::string model_table_csv(const AnalysisResult& result);
/// iteration,gamma,b_1..b_p,tau for one chain
std::string trace_csv(const ChainOutput& chain);

/// Inputs, resolved configuration, seeds, version and timestamps.
nlohmann::ordered_json manifest_json(const AnalysisResult& result, const AnalysisConfig& config,
                                     const std::string& config_path, const std::string& started,
                                     const std::string& finished);

/// UTC time as ISO 8601.
std::string utc_timestamp();

/// Writes report.json, manifest.json, pips.csv, model_table.csv and, when enabled,
/// traces/chain-k.csv into config.out.
void write_outputs(const AnalysisResult& result, const AnalysisConfig& config, const nlohmann::ordered_json& manifest);

} // namespace nmassvs
