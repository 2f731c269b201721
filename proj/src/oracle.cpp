#include "nmassvs/oracle.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nmassvs/errors.hpp"

namespace nmassvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd stacked(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd W(X.rows(), X.cols() + Z.cols());
    W << X, Z;
    return W;
}

Eigen::VectorXd prior_variances(const SpikeSlabConfig& ss, std::span<const std::uint8_t> gamma, Eigen::Index q,
                                double mu_prior_variance) {
    Eigen::VectorXd v(q + static_cast<Eigen::Index>(gamma.size()));
    v.head(q).setConstant(mu_prior_variance);
    for (std::size_t l = 0; l < gamma.size(); ++l) {
        const double sd = (gamma[l] ? ss.c : 1.0) * ss.psi.at(l);
        v(q + static_cast<Eigen::Index>(l)) = sd * sd;
    }
    return v;
}

void check_dims(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                const SpikeSlabConfig& ss, std::size_t gamma_size) {
    const auto N = static_cast<Eigen::Index>(network.contrast_count());
    if (X.rows() != N || Z.rows() != N) throw std::invalid_argument("X/Z rows differ from N");
    if (static_cast<std::size_t>(Z.cols()) != gamma_size || ss.psi.size() != gamma_size)
        throw std::invalid_argument("gamma, psi and Z disagree on p");
}

} // namespace

double OracleResult::pip(std::size_t l) const {
    double s = 0.0;
    for (std::size_t id = 0; id < probability.size(); ++id)
        if ((id >> l) & 1U) s += probability[id];
    return s;
}

Eigen::MatrixXd marginal_sampling_covariance(const EvidenceNetwork& network, double tau) {
    const auto N = static_cast<Eigen::Index>(network.contrast_count());
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(N, N);
    Eigen::Index offset = 0;
    for (const auto& s : network.studies()) {
        const auto k = static_cast<Eigen::Index>(s.contrasts.size());
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j) {
                const auto& a = s.contrasts[static_cast<std::size_t>(i)];
                const auto& b = s.contrasts[static_cast<std::size_t>(j)];
                const int dot = (a.t2 == b.t2) - (a.t2 == b.t1) - (a.t1 == b.t2) + (a.t1 == b.t1);
                V(offset + i, offset + j) = s.cov(i, j) + tau * tau * 0.5 * dot;
            }
        offset += k;
    }
    return V;
}

double log_marginal_likelihood(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                               const SpikeSlabConfig& spike_slab, std::span<const std::uint8_t> gamma, double tau,
                               double mu_prior_variance) {
    check_dims(network, X, Z, spike_slab, gamma.size());
    const Eigen::MatrixXd W = stacked(X, Z);
    const Eigen::VectorXd lambda = prior_variances(spike_slab, gamma, X.cols(), mu_prior_variance);
    const Eigen::MatrixXd S =
        marginal_sampling_covariance(network, tau) + W * lambda.asDiagonal() * W.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw NumericalError("marginal covariance of y is not positive definite");
    const Eigen::VectorXd y = network.y();
    const Eigen::VectorXd w = llt.matrixL().solve(y);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(y.size()) * kLog2Pi + logdet + w.squaredNorm());
}

OracleResult enumerate_exact(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                             const SpikeSlabConfig& spike_slab, const ConsistencyPrior& consistency, double tau,
                             double mu_prior_variance) {
    const auto p = static_cast<std::size_t>(Z.cols());
    if (p == 0) throw std::invalid_argument("nothing to enumerate: p = 0");
    if (p > kOracleMaxFactors)
        throw std::invalid_argument("exact enumeration is limited to p <= " + std::to_string(kOracleMaxFactors) +
                                    " (got " + std::to_string(p) + ")");
    if (spike_slab.correlation != CorrelationMode::Identity)
        throw std::invalid_argument("exact enumeration needs the identity correlation mode");
    if (consistency.mode != ConsistencyPrior::Mode::Fixed)
        throw std::invalid_argument("exact enumeration needs a fixed pi_cons");
    if (!(tau >= 0.0)) throw std::invalid_argument("tau must be non-negative");
    spike_slab.validate(p);

    const double pi = inclusion_probability(consistency.pi_cons, p);
    const std::size_t models = std::size_t{1} << p;
    OracleResult out;
    out.p = p;
    out.log_marginal.resize(models);
    std::vector<double> log_post(models);
    for (std::size_t id = 0; id < models; ++id) {
        GammaVector gamma(p);
        std::size_t k = 0;
        for (std::size_t l = 0; l < p; ++l) k += gamma[l] = (id >> l) & 1U;
        out.log_marginal[id] = log_marginal_likelihood(network, X, Z, spike_slab, gamma, tau, mu_prior_variance);
        log_post[id] = out.log_marginal[id] + static_cast<double>(k) * std::log(pi) +
                       static_cast<double>(p - k) * std::log1p(-pi);
    }
    const double top = *std::max_element(log_post.begin(), log_post.end());
    double z = 0.0;
    for (double v : log_post) z += std::exp(v - top);
    out.probability.resize(models);
    for (std::size_t id = 0; id < models; ++id) out.probability[id] = std::exp(log_post[id] - top) / z;
    return out;
}

GaussianPosterior conditional_posterior(const EvidenceNetwork& network, const Eigen::MatrixXd& X,
                                        const Eigen::MatrixXd& Z, const SpikeSlabConfig& spike_slab,
                                        std::span<const std::uint8_t> gamma, double tau, double mu_prior_variance) {
    check_dims(network, X, Z, spike_slab, gamma.size());
    const Eigen::MatrixXd W = stacked(X, Z);
    const Eigen::VectorXd lambda = prior_variances(spike_slab, gamma, X.cols(), mu_prior_variance);
    Eigen::LLT<Eigen::MatrixXd> vllt(marginal_sampling_covariance(network, tau));
    if (vllt.info() != Eigen::Success) throw NumericalError("sampling covariance is not positive definite");
    Eigen::MatrixXd prec = W.transpose() * vllt.solve(W);
    prec.diagonal() += lambda.cwiseInverse();
    Eigen::LLT<Eigen::MatrixXd> pllt(prec);
    if (pllt.info() != Eigen::Success) throw NumericalError("posterior precision is not positive definite");
    GaussianPosterior out;
    out.cov = pllt.solve(Eigen::MatrixXd::Identity(prec.rows(), prec.cols()));
    out.mean = out.cov * (W.transpose() * vllt.solve(network.y()));
    return out;
}

} // namespace nmassvs
