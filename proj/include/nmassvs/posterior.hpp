#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nmassvs/sampler.hpp"

namespace nmassvs {

struct Estimate {
    double value = 0.0;
    double mc_se = 0.0;  // batch-means Monte Carlo standard error
};

/// Batch-means standard error of the mean of one series (50 non-overlapping batches).
double batch_means_se(std::span<const double> series, std::size_t batches = 50);

/// Posterior inclusion probabilities pooled over chains.
std::vector<Estimate> pip(const std::vector<ChainOutput>& chains);

/// m(gamma) = sum gamma_l 2^(l-1); throws for p > 62.
std::uint64_t model_id(std::span<const std::uint8_t> gamma);
GammaVector gamma_from_id(std::uint64_t id, std::size_t p);

struct ModelTable {
    std::size_t p = 0;
    std::size_t total = 0;
    std::map<std::uint64_t, std::size_t> counts;

    double probability(std::uint64_t id) const;
    /// (id, probability), most probable first; ties by id.
    std::vector<std::pair<std::uint64_t, double>> ranked() const;
};

ModelTable posterior_model_probs(const std::vector<ChainOutput>& chains);

/// Posterior odds, or a one-sided bound when the probability hit 0 or 1.
struct Odds {
    enum class Kind { Exact, LowerBound, UpperBound };
    Kind kind = Kind::Exact;
    double value = 1.0;

    std::string describe() const;
};

/// prob / (1 - prob); bounds at resolution 1/total_draws when prob is 0 or 1.
Odds odds_from_probability(double prob, std::size_t total_draws);
/// Odds of the consistency model m = 0 against every other model observed.
Odds consistency_odds(const ModelTable& table);

/// Factors with PIP strictly above 0.5.
std::vector<std::size_t> median_probability_model(std::span<const double> pips);
/// Factors with PIP at or above `threshold`.
std::vector<std::size_t> reduce_dimension(std::span<const double> pips, double threshold = 0.2);

struct EvidenceLabel {
    std::string category;  // marginal, positive/substantial, strong, very strong
    std::string favors;    // "consistency", "inconsistency" or "" at odds 1
    double odds = 1.0;     // odds of the favored hypothesis
};

/// Kass-Raftery bands applied to the odds of whichever hypothesis is favored.
EvidenceLabel evidence_label(double po_consistency);

/// Split-chain potential scale reduction over equal-length series. Zero within and
/// between variance gives 1; zero within but positive between gives infinity.
double split_rhat(const std::vector<std::span<const double>>& chains);

/// Same statistic from precomputed half-chain moments (count, mean, variance).
struct HalfMoments {
    std::size_t count;
    double mean;
    double variance;
};
double rhat_from_halves(const std::vector<HalfMoments>& halves);

struct Diagnostic {
    std::string parameter;
    double rhat = 1.0;
    bool flagged = false;  // rhat > 1.05
};

struct Convergence {
    bool available = false;  // needs two or more chains
    std::vector<Diagnostic> parameters;

    bool all_pass() const;
};

Convergence convergence(const std::vector<ChainOutput>& chains, const std::vector<std::string>& factor_labels,
                        const std::vector<std::string>& mu_labels);

struct ConsistencyReport {
    std::vector<std::string> labels;
    std::vector<Estimate> pips;
    ModelTable model_table;
    double consistent_prob = 1.0;
    Odds po_consistency;
    std::vector<std::size_t> median_model;
    std::vector<std::size_t> reduced_factors;
    EvidenceLabel evidence;
    Convergence diagnostics;
    std::vector<Estimate> mu_mean;  // posterior means of the basic parameters (se from chain spread)
    Estimate tau_mean;
};

ConsistencyReport summarize(const std::vector<ChainOutput>& chains, const std::vector<std::string>& factor_labels,
                            const std::vector<std::string>& mu_labels);

} // namespace nmassvs
