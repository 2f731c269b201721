#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "nmassvs/network.hpp"
#include "nmassvs/priors.hpp"

namespace nmassvs {

struct OracleResult {
    std::size_t p = 0;
    std::vector<double> log_marginal;  // indexed by model id
    std::vector<double> probability;   // indexed by model id, sums to 1

    double pip(std::size_t l) const;
};

constexpr std::size_t kOracleMaxFactors = 10;

/// Exact posterior model probabilities by enumerating all 2^p inclusion patterns of
/// the fixed-tau, identity-R, fixed-pi_cons model. Throws std::invalid_argument when
/// p exceeds kOracleMaxFactors or the prior settings are not eligible.
OracleResult enumerate_exact(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                             const SpikeSlabConfig& spike_slab, const ConsistencyPrior& consistency,
                             double tau = 0.0, double mu_prior_variance = 1e4);

/// Log marginal density of y for one inclusion pattern.
double log_marginal_likelihood(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                               const SpikeSlabConfig& spike_slab, std::span<const std::uint8_t> gamma, double tau,
                               double mu_prior_variance);

struct GaussianPosterior {
    Eigen::VectorXd mean;  // (mu, b)
    Eigen::MatrixXd cov;
};

/// Posterior of (mu, b) given gamma, with the same fixed tau and priors.
GaussianPosterior conditional_posterior(const EvidenceNetwork& network, const Eigen::MatrixXd& X,
                                        const Eigen::MatrixXd& Z, const SpikeSlabConfig& spike_slab,
                                        std::span<const std::uint8_t> gamma, double tau, double mu_prior_variance);

/// Sigma + tau^2 * Delta over all rows (block diagonal).
Eigen::MatrixXd marginal_sampling_covariance(const EvidenceNetwork& network, double tau);

} // namespace nmassvs
