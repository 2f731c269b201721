#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nmassvs/graph.hpp"
#include "nmassvs/network.hpp"
#include "nmassvs/priors.hpp"

namespace nmassvs {

using Rng = std::mt19937_64;

/// Prior on the common heterogeneity sd tau.
struct TauPrior {
    enum class Kind { HalfNormal, Uniform };
    Kind kind = Kind::HalfNormal;
    double scale = 1.0;  // half-normal scale, or the upper bound of Uniform(0, scale)

    static TauPrior half_normal(double scale) { return {Kind::HalfNormal, scale}; }
    static TauPrior uniform(double upper) { return {Kind::Uniform, upper}; }
    double log_density(double tau) const;
};

struct McmcConfig {
    std::size_t chains = 2;
    std::size_t iterations = 300000;  // total, burn-in included
    std::size_t burn_in = 50000;
    std::size_t thin = 1;
    std::uint64_t seed = 20221001;
    double mu_prior_variance = 1e4;
    TauPrior tau_prior;
    std::optional<double> fixed_tau;

    void validate() const;
    std::size_t draws_per_chain() const { return (iterations - burn_in) / thin; }
};

struct ModelState {
    Eigen::VectorXd mu;   // basic parameters
    Eigen::VectorXd b;    // inconsistency factors
    GammaVector gamma;
    double tau = 0.5;
    double sigma2 = 1.0;  // Zellner scale
    double pi_cons = 0.5;
};

/// Streaming mean and variance (Welford).
struct RunningMoments {
    std::size_t count = 0;
    Eigen::VectorXd mean;
    Eigen::VectorXd m2;

    void push(const Eigen::VectorXd& x);
    Eigen::VectorXd variance() const;  // unbiased
};

struct ChainOutput {
    std::uint64_t seed = 0;
    std::size_t p = 0;
    std::size_t q = 0;                // T - 1
    std::size_t draws = 0;
    std::size_t burn_in = 0;
    std::size_t thin = 1;
    std::vector<std::uint8_t> gamma;  // draws x p, row-major
    std::vector<double> b;            // draws x p, row-major
    std::vector<double> tau;
    std::vector<double> sigma2;       // Zellner mode only
    std::vector<double> pi_cons;      // Beta mode only
    RunningMoments mu_all;
    RunningMoments mu_half[2];        // split halves of equal length
    std::size_t tau_accepted = 0, tau_proposed = 0;
    std::size_t pi_accepted = 0, pi_proposed = 0;
    double tau_step = 0.0;
    double pi_step = 0.0;

    std::span<const std::uint8_t> gamma_at(std::size_t draw) const { return {gamma.data() + draw * p, p}; }
    std::span<const double> b_at(std::size_t draw) const { return {b.data() + draw * p, p}; }
    std::size_t iteration_of(std::size_t draw) const { return burn_in + (draw + 1) * thin; }
};

struct GammaShapeRate {
    double shape;
    double rate;
};

/// Cache of W' V(tau)^{-1} W and W' V(tau)^{-1} y for the last tau seen.
struct GlsCache {
    double tau = -1.0;
    Eigen::MatrixXd WtVW;
    Eigen::VectorXd WtVy;
};

/// Random-effects inconsistency model y ~ N(X mu + Z b, Sigma + Delta(tau)) with the
/// study effects integrated out, and its Gibbs/Metropolis updates.
class SsvsModel {
public:
    SsvsModel(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
              SpikeSlabConfig spike_slab, ConsistencyPrior consistency, McmcConfig mcmc, bool sample_gamma = true);

    std::size_t p() const { return p_; }
    std::size_t q() const { return q_; }
    const SpikeSlabConfig& spike_slab() const { return ss_; }
    const ConsistencyPrior& consistency() const { return cp_; }
    const McmcConfig& mcmc() const { return mc_; }

    ModelState initial_state(Rng& rng) const;

    /// Mean of the Gaussian full conditional of (mu, b).
    Eigen::VectorXd mu_b_mean(const ModelState& state) const;
    /// Joint conjugate draw of (mu, b).
    void update_mu_b(ModelState& state, Rng& rng, GlsCache* cache = nullptr) const;
    /// Componentwise Bernoulli draws of the inclusion indicators.
    void update_gamma(ModelState& state, Rng& rng) const;
    /// Random-walk Metropolis on log tau; returns true on acceptance.
    bool update_tau(ModelState& state, Rng& rng, double log_step) const;
    /// Exact inverse-gamma draw (Zellner mode).
    void update_sigma2(ModelState& state, Rng& rng) const;
    /// Random-walk Metropolis on logit(pi_cons) (Beta mode); returns true on acceptance.
    bool update_pi_cons(ModelState& state, Rng& rng, double logit_step) const;

    /// log P(gamma_l = 1 | rest) - log P(gamma_l = 0 | rest).
    double inclusion_log_odds(const ModelState& state, std::size_t l) const;
    GammaShapeRate sigma2_conditional(const ModelState& state) const;
    /// Unnormalized log density of pi_cons given gamma (on the pi_cons scale).
    double pi_cons_log_target(double pi_cons, std::span<const std::uint8_t> gamma) const;
    /// Marginal log-likelihood of y given (mu, b, tau), study effects integrated out.
    double log_likelihood(const Eigen::VectorXd& mu, const Eigen::VectorXd& b, double tau) const;
    /// Sampling plus heterogeneity covariance Sigma + Delta(tau) (block diagonal).
    Eigen::MatrixXd marginal_covariance(double tau) const;

private:
    struct Block {
        Eigen::Index offset;
        Eigen::Index size;
        Eigen::MatrixXd sigma;  // sampling covariance
        Eigen::MatrixXd gram;   // Delta(tau) = tau^2 * gram
    };

    void refresh_cache(double tau, GlsCache& cache) const;
    Eigen::MatrixXd mu_b_precision(const ModelState& state, const GlsCache& cache) const;

    std::size_t p_, q_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd W_;  // [X | Z]
    Eigen::MatrixXd ZtZ_;
    std::vector<Block> blocks_;
    SpikeSlabConfig ss_;
    ConsistencyPrior cp_;
    McmcConfig mc_;
    bool sample_gamma_;
};

/// Seed for chain `index` derived from the master seed.
std::uint64_t chain_seed(std::uint64_t master, std::size_t index);

/// Runs one chain: burn-in with step tuning, then recording.
ChainOutput run_chain(const SsvsModel& model, std::size_t chain_index);

struct SsifsResult {
    bool trivially_consistent = false;  // p == 0: nothing to sample
    std::vector<ChainOutput> chains;
};

/// Full stochastic search over inconsistency factors. Chains run concurrently and are
/// merged in chain order.
SsifsResult run_ssifs(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const InconsistencySpec& spec,
                      const SpikeSlabConfig& spike_slab, const ConsistencyPrior& consistency,
                      const McmcConfig& mcmc);

/// Spike/slab settings with psi_l = omega / sqrt(xi(c)) for every factor.
SpikeSlabConfig threshold_spike_slab(std::size_t p, double omega = 0.2, double c = 10.0);

// ---------------------------------------------------------------------------
// Pilot run for data-driven spike sds
// ---------------------------------------------------------------------------

struct PilotConfig {
    std::size_t chains = 2;
    std::size_t iterations = 20000;
    std::size_t burn_in = 5000;
    std::uint64_t seed = 7;
    double c = 10.0;
    double prior_variance = 1e4;  // vague prior on b with every factor included
    TauPrior tau_prior;
    std::optional<double> fixed_tau;
};

struct PilotResult {
    std::vector<double> psi;           // posterior sd / c
    std::vector<double> posterior_sd;
    std::optional<std::string> warning;
};

/// Fits the model with every factor included and sets psi_l = sd(b_l | y) / c.
PilotResult pilot_psi(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                      const PilotConfig& config);

} // namespace nmassvs
