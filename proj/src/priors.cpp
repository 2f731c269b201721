#include "nmassvs/priors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nmassvs/errors.hpp"

namespace nmassvs {

void SpikeSlabConfig::validate(std::size_t p) const {
    if (!(c > 1.0)) throw std::invalid_argument("c must exceed 1");
    if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
    if (psi.size() != p)
        throw std::invalid_argument("psi has " + std::to_string(psi.size()) + " entries, expected " + std::to_string(p));
    for (double s : psi)
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("psi entries must be positive");
    if (correlation == CorrelationMode::Zellner && !(g > 0.0)) throw std::invalid_argument("g must be positive");
    if (sigma2_prior.kind == Sigma2Prior::Kind::InverseGamma &&
        !(sigma2_prior.shape > 0.0 && sigma2_prior.scale > 0.0))
        throw std::invalid_argument("inverse-gamma shape and scale must be positive");
}

ConsistencyPrior ConsistencyPrior::fixed(double pi_cons) {
    if (!(pi_cons > 0.0 && pi_cons < 1.0)) throw std::invalid_argument("pi_cons must lie in (0, 1)");
    ConsistencyPrior p;
    p.mode = Mode::Fixed;
    p.pi_cons = pi_cons;
    return p;
}

ConsistencyPrior ConsistencyPrior::beta_prior(double alpha, double beta) {
    if (!(alpha > 0.0 && beta > 0.0)) throw std::invalid_argument("Beta parameters must be positive");
    ConsistencyPrior p;
    p.mode = Mode::Beta;
    p.alpha = alpha;
    p.beta = beta;
    p.pi_cons = alpha / (alpha + beta);
    return p;
}

double ConsistencyPrior::mean() const { return mode == Mode::Fixed ? pi_cons : alpha / (alpha + beta); }

double ConsistencyPrior::sd() const {
    if (mode == Mode::Fixed) return 0.0;
    const double s = alpha + beta;
    return std::sqrt(alpha * beta / (s * s * (s + 1.0)));
}

double inclusion_probability(double pi_cons, std::size_t p) {
    if (!(pi_cons > 0.0 && pi_cons < 1.0)) throw std::invalid_argument("pi_cons must lie in (0, 1)");
    if (p == 0) throw std::invalid_argument("p must be at least 1");
    // 1 - pi_cons^{1/p}, written to keep precision for large p.
    return -std::expm1(std::log(pi_cons) / static_cast<double>(p));
}

double naive_consistency_probability(double pi, std::size_t p) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw std::invalid_argument("pi must lie in [0, 1]");
    return std::pow(1.0 - pi, static_cast<double>(p));
}

double xi(double c) {
    if (!(c > 1.0)) throw std::invalid_argument("xi(c) needs c > 1");
    const double c2 = c * c;
    return 2.0 * c2 * std::log(c) / (c2 - 1.0);
}

double psi_from_threshold(double omega, double c) {
    if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
    return omega / std::sqrt(xi(c));
}

double default_g(std::size_t total_contrasts) {
    if (total_contrasts == 0) throw std::invalid_argument("N must be at least 1");
    return static_cast<double>(total_contrasts);
}

ConsistencyPrior historical_consistency_prior() { return ConsistencyPrior::beta_prior(157.0, 44.0); }

namespace {

Eigen::VectorXd d_gamma(const SpikeSlabConfig& config, std::span<const std::uint8_t> gamma) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(gamma.size()));
    for (std::size_t l = 0; l < gamma.size(); ++l)
        d(static_cast<Eigen::Index>(l)) = (gamma[l] ? config.c : 1.0) * config.psi.at(l);
    return d;
}

Eigen::MatrixXd inverse_gram(const Eigen::MatrixXd& Z) {
    const Eigen::MatrixXd ztz = Z.transpose() * Z;
    Eigen::LLT<Eigen::MatrixXd> llt(ztz);
    if (llt.info() != Eigen::Success) throw NumericalError("Z'Z is singular");
    return llt.solve(Eigen::MatrixXd::Identity(ztz.rows(), ztz.cols()));
}

} // namespace

Eigen::MatrixXd prior_b_covariance(const SpikeSlabConfig& config, std::span<const std::uint8_t> gamma,
                                   const Eigen::MatrixXd& Z, double sigma2) {
    const auto p = static_cast<Eigen::Index>(gamma.size());
    if (config.psi.size() != gamma.size()) throw std::invalid_argument("gamma and psi differ in length");
    const Eigen::VectorXd d = d_gamma(config, gamma);
    if (config.correlation == CorrelationMode::Identity) return d.array().square().matrix().asDiagonal();

    if (Z.cols() != p) throw std::invalid_argument("Z column count differs from p");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    const Eigen::MatrixXd R = config.g * sigma2 * inverse_gram(Z);
    return d.asDiagonal() * R * d.asDiagonal();
}

double log_prior_b(const SpikeSlabConfig& config, std::span<const std::uint8_t> gamma, const Eigen::MatrixXd& ZtZ,
                   double sigma2, const Eigen::VectorXd& b) {
    const auto p = static_cast<double>(gamma.size());
    const Eigen::VectorXd d = d_gamma(config, gamma);
    const Eigen::VectorXd u = b.cwiseQuotient(d);
    constexpr double log2pi = 1.8378770664093453;
    if (config.correlation == CorrelationMode::Identity)
        return -0.5 * p * log2pi - d.array().log().sum() - 0.5 * u.squaredNorm();

    // Cov = g sigma2 D (Z'Z)^{-1} D, precision = D^{-1} Z'Z D^{-1} / (g sigma2).
    const double scale = config.g * sigma2;
    Eigen::LLT<Eigen::MatrixXd> llt(ZtZ);
    if (llt.info() != Eigen::Success) throw NumericalError("Z'Z is singular");
    const double logdet_ztz = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double logdet_cov = p * std::log(scale) + 2.0 * d.array().log().sum() - logdet_ztz;
    const double quad = u.dot(ZtZ * u) / scale;
    return -0.5 * p * log2pi - 0.5 * logdet_cov - 0.5 * quad;
}

double correlated_quadratic_form(const Eigen::VectorXd& b, const SpikeSlabConfig& config, const Eigen::MatrixXd& Z) {
    if (b.size() != Z.cols() || config.psi.size() != static_cast<std::size_t>(b.size()))
        throw std::invalid_argument("b is not conformable with Z and psi");
    // [D0 (Z'Z)^{-1} D0]^{-1} = D0^{-1} Z'Z D0^{-1}
    Eigen::VectorXd u(b.size());
    for (Eigen::Index l = 0; l < b.size(); ++l) u(l) = b(l) / config.psi[static_cast<std::size_t>(l)];
    return u.dot((Z.transpose() * Z) * u);
}

bool correlated_significance_region(const Eigen::VectorXd& b, const SpikeSlabConfig& config,
                                    const Eigen::MatrixXd& Z, double sigma2) {
    if (config.correlation != CorrelationMode::Zellner)
        throw std::invalid_argument("correlated_significance_region applies to the Zellner prior");
    const double p = static_cast<double>(b.size());
    return correlated_quadratic_form(b, config, Z) > config.g * p * sigma2 * xi(config.c);
}

} // namespace nmassvs
