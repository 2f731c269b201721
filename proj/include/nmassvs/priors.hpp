#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

namespace nmassvs {

enum class CorrelationMode { Identity, Zellner };

/// Prior on the Zellner scale sigma^2. Jeffreys is p(sigma^2) ~ 1/sigma^2.
struct Sigma2Prior {
    enum class Kind { Jeffreys, InverseGamma };
    Kind kind = Kind::Jeffreys;
    double shape = 1e-3;
    double scale = 1e-3;

    static Sigma2Prior jeffreys() { return {}; }
    static Sigma2Prior inverse_gamma(double shape, double scale) { return {Kind::InverseGamma, shape, scale}; }
};

/// Spike N(0, psi^2) / slab N(0, c^2 psi^2) mixture settings for the inconsistency factors.
struct SpikeSlabConfig {
    double c = 10.0;
    double omega = 0.2;
    std::vector<double> psi;  // one spike sd per factor
    CorrelationMode correlation = CorrelationMode::Identity;
    double g = 1.0;           // Zellner only
    Sigma2Prior sigma2_prior;

    /// Throws std::invalid_argument unless c > 1, psi has p positive entries and g > 0.
    void validate(std::size_t p) const;
};

/// Prior on the probability that the whole network is consistent.
struct ConsistencyPrior {
    enum class Mode { Fixed, Beta };
    Mode mode = Mode::Fixed;
    double pi_cons = 0.5;
    double alpha = 157.0;
    double beta = 44.0;

    static ConsistencyPrior fixed(double pi_cons);
    static ConsistencyPrior beta_prior(double alpha, double beta);

    double mean() const;
    double sd() const;
};

using GammaVector = std::vector<std::uint8_t>;

/// Common per-factor inclusion probability that keeps P(all excluded) = pi_cons.
double inclusion_probability(double pi_cons, std::size_t p);

/// P(all excluded) when every factor has inclusion probability `pi`.
double naive_consistency_probability(double pi, std::size_t p);

/// Spike/slab intersection point in units of the spike sd, squared:
/// 2 c^2 log(c) / (c^2 - 1).
double xi(double c);

/// Spike sd that places the spike/slab intersection at |b| = omega.
double psi_from_threshold(double omega, double c);

/// Unit-information choice g = N.
double default_g(std::size_t total_contrasts);

/// Beta(157, 44): 157 of 201 published networks were judged consistent.
ConsistencyPrior historical_consistency_prior();

/// D_gamma R D_gamma with D_gamma = diag(c^gamma_l psi_l) and R = I or g (Z'Z)^{-1} sigma2.
Eigen::MatrixXd prior_b_covariance(const SpikeSlabConfig& config, std::span<const std::uint8_t> gamma,
                                   const Eigen::MatrixXd& Z, double sigma2);

/// Log density of b under N(0, prior_b_covariance(...)).
double log_prior_b(const SpikeSlabConfig& config, std::span<const std::uint8_t> gamma, const Eigen::MatrixXd& ZtZ,
                   double sigma2, const Eigen::VectorXd& b);

/// Quadratic form b' [D0 (Z'Z)^{-1} D0]^{-1} b with D0 = diag(psi).
double correlated_quadratic_form(const Eigen::VectorXd& b, const SpikeSlabConfig& config, const Eigen::MatrixXd& Z);

/// True when b lies where the all-slab density exceeds the all-spike density under the
/// Zellner prior. The boundary itself belongs to the spike.
bool correlated_significance_region(const Eigen::VectorXd& b, const SpikeSlabConfig& config,
                                    const Eigen::MatrixXd& Z, double sigma2);

} // namespace nmassvs
