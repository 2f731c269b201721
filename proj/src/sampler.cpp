#include "nmassvs/sampler.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include "nmassvs/design.hpp"
#include "nmassvs/errors.hpp"

namespace nmassvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double std_normal(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

double unit_uniform(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng);
}

double log_sigmoid_prob(double log_odds) { return 1.0 / (1.0 + std::exp(-log_odds)); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Burn-in step adaptation toward a 0.44 acceptance rate, batches of 100 proposals.
struct StepTuner {
    double log_step;
    std::size_t accepted = 0, proposed = 0, batch = 0;

    explicit StepTuner(double step) : log_step(std::log(step)) {}
    double step() const { return std::exp(log_step); }
    void record(bool accepted_now, bool tuning) {
        if (!tuning) return;
        accepted += accepted_now;
        if (++proposed < 100) return;
        const double rate = static_cast<double>(accepted) / static_cast<double>(proposed);
        const double gain = std::min(0.5, 10.0 / std::sqrt(static_cast<double>(++batch)));
        log_step += gain * (rate - 0.44);
        log_step = std::clamp(log_step, std::log(1e-4), std::log(50.0));
        accepted = proposed = 0;
    }
};

} // namespace

double TauPrior::log_density(double tau) const {
    if (tau < 0.0) return -INFINITY;
    switch (kind) {
        case Kind::HalfNormal: return -0.5 * (tau / scale) * (tau / scale);
        case Kind::Uniform: return tau <= scale ? 0.0 : -INFINITY;
    }
    return -INFINITY;
}

void McmcConfig::validate() const {
    if (chains < 1) throw std::invalid_argument("at least one chain is required");
    if (burn_in >= iterations) throw std::invalid_argument("burn-in must be smaller than the total iterations");
    if (thin < 1) throw std::invalid_argument("thinning must be at least 1");
    if (draws_per_chain() < 1) throw std::invalid_argument("no draws left after burn-in and thinning");
    if (!(mu_prior_variance > 0.0)) throw std::invalid_argument("mu prior variance must be positive");
    if (!(tau_prior.scale > 0.0)) throw std::invalid_argument("tau prior scale must be positive");
    if (fixed_tau && !(*fixed_tau >= 0.0)) throw std::invalid_argument("fixed tau must be non-negative");
}

void RunningMoments::push(const Eigen::VectorXd& x) {
    if (count == 0) {
        mean = Eigen::VectorXd::Zero(x.size());
        m2 = Eigen::VectorXd::Zero(x.size());
    }
    ++count;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(x - mean);
}

Eigen::VectorXd RunningMoments::variance() const {
    if (count < 2) return Eigen::VectorXd::Zero(mean.size());
    return m2 / static_cast<double>(count - 1);
}

// ---------------------------------------------------------------------------
// SsvsModel
// ---------------------------------------------------------------------------

SsvsModel::SsvsModel(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                     SpikeSlabConfig spike_slab, ConsistencyPrior consistency, McmcConfig mcmc, bool sample_gamma)
    : p_(static_cast<std::size_t>(Z.cols())),
      q_(static_cast<std::size_t>(X.cols())),
      y_(network.y()),
      ss_(std::move(spike_slab)),
      cp_(consistency),
      mc_(std::move(mcmc)),
      sample_gamma_(sample_gamma) {
    const auto N = static_cast<Eigen::Index>(network.contrast_count());
    if (X.rows() != N || (p_ > 0 && Z.rows() != N)) throw std::invalid_argument("X/Z rows differ from N");
    mc_.validate();
    ss_.validate(p_);

    W_.resize(N, static_cast<Eigen::Index>(q_ + p_));
    W_.leftCols(static_cast<Eigen::Index>(q_)) = X;
    if (p_ > 0) W_.rightCols(static_cast<Eigen::Index>(p_)) = Z;
    if (matrix_rank(W_) != W_.cols()) throw std::invalid_argument("[X | Z] is not of full column rank");
    ZtZ_ = Z.transpose() * Z;

    Eigen::Index offset = 0;
    for (const auto& s : network.studies()) {
        Block blk;
        blk.offset = offset;
        blk.size = static_cast<Eigen::Index>(s.contrasts.size());
        blk.sigma = s.cov;
        blk.gram.resize(blk.size, blk.size);
        for (Eigen::Index i = 0; i < blk.size; ++i)
            for (Eigen::Index j = 0; j < blk.size; ++j) {
                const auto& a = s.contrasts[static_cast<std::size_t>(i)];
                const auto& b = s.contrasts[static_cast<std::size_t>(j)];
                // Half the inner product of the arm-coefficient vectors (e_t2 - e_t1).
                const int dot = (a.t2 == b.t2) - (a.t2 == b.t1) - (a.t1 == b.t2) + (a.t1 == b.t1);
                blk.gram(i, j) = 0.5 * dot;
            }
        offset += blk.size;
        blocks_.push_back(std::move(blk));
    }
}

ModelState SsvsModel::initial_state(Rng& rng) const {
    ModelState s;
    s.mu.resize(static_cast<Eigen::Index>(q_));
    for (Eigen::Index j = 0; j < s.mu.size(); ++j) s.mu(j) = std_normal(rng);
    s.b.resize(static_cast<Eigen::Index>(p_));
    s.gamma.assign(p_, 1);
    for (std::size_t l = 0; l < p_; ++l) {
        s.b(static_cast<Eigen::Index>(l)) = 0.5 * std_normal(rng);
        if (sample_gamma_) s.gamma[l] = unit_uniform(rng) < 0.5;
    }
    s.tau = mc_.fixed_tau ? *mc_.fixed_tau : 0.1 + 0.9 * unit_uniform(rng);
    if (mc_.tau_prior.kind == TauPrior::Kind::Uniform) s.tau = std::min(s.tau, 0.5 * mc_.tau_prior.scale);
    s.sigma2 = 1.0;
    s.pi_cons = cp_.mean();
    return s;
}

void SsvsModel::refresh_cache(double tau, GlsCache& cache) const {
    const auto d = W_.cols();
    cache.tau = tau;
    cache.WtVW = Eigen::MatrixXd::Zero(d, d);
    cache.WtVy = Eigen::VectorXd::Zero(d);
    const double t2 = tau * tau;
    for (const auto& blk : blocks_) {
        const Eigen::MatrixXd V = blk.sigma + t2 * blk.gram;
        const auto Wb = W_.middleRows(blk.offset, blk.size);
        const auto yb = y_.segment(blk.offset, blk.size);
        if (blk.size == 1) {
            const double inv = 1.0 / V(0, 0);
            cache.WtVW.noalias() += inv * Wb.transpose() * Wb;
            cache.WtVy.noalias() += inv * yb(0) * Wb.transpose();
            continue;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(V);
        if (llt.info() != Eigen::Success) throw NumericalError("study covariance factorization failed");
        const Eigen::MatrixXd VinvW = llt.solve(Eigen::MatrixXd(Wb));
        cache.WtVW.noalias() += Wb.transpose() * VinvW;
        cache.WtVy.noalias() += VinvW.transpose() * yb;
    }
}

Eigen::MatrixXd SsvsModel::mu_b_precision(const ModelState& state, const GlsCache& c) const {
    const auto q = static_cast<Eigen::Index>(q_);
    const auto p = static_cast<Eigen::Index>(p_);
    Eigen::MatrixXd prec = c.WtVW;
    prec.topLeftCorner(q, q).diagonal().array() += 1.0 / mc_.mu_prior_variance;
    if (p > 0) {
        Eigen::VectorXd dinv(p);
        for (Eigen::Index l = 0; l < p; ++l)
            dinv(l) = 1.0 / ((state.gamma[static_cast<std::size_t>(l)] ? ss_.c : 1.0) * ss_.psi[static_cast<std::size_t>(l)]);
        if (ss_.correlation == CorrelationMode::Identity) {
            prec.bottomRightCorner(p, p).diagonal() += dinv.cwiseAbs2();
        } else {
            prec.bottomRightCorner(p, p) +=
                (dinv.asDiagonal() * ZtZ_ * dinv.asDiagonal()) / (ss_.g * state.sigma2);
        }
    }
    return prec;
}

Eigen::VectorXd SsvsModel::mu_b_mean(const ModelState& state) const {
    GlsCache c;
    refresh_cache(state.tau, c);
    Eigen::LLT<Eigen::MatrixXd> llt(mu_b_precision(state, c));
    if (llt.info() != Eigen::Success) throw NumericalError("posterior precision of (mu, b) is not positive definite");
    return llt.solve(c.WtVy);
}

void SsvsModel::update_mu_b(ModelState& state, Rng& rng, GlsCache* cache) const {
    GlsCache local;
    GlsCache& c = cache ? *cache : local;
    if (c.tau != state.tau || c.WtVW.size() == 0) refresh_cache(state.tau, c);

    Eigen::LLT<Eigen::MatrixXd> llt(mu_b_precision(state, c));
    if (llt.info() != Eigen::Success) throw NumericalError("posterior precision of (mu, b) is not positive definite");
    Eigen::VectorXd z(static_cast<Eigen::Index>(q_ + p_));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = std_normal(rng);
    // L L' = precision, so L'^{-1} z has covariance precision^{-1}.
    const Eigen::VectorXd draw = llt.solve(c.WtVy) + llt.matrixU().solve(z);
    if (!draw.allFinite()) throw NumericalError("non-finite draw of (mu, b)");
    state.mu = draw.head(static_cast<Eigen::Index>(q_));
    state.b = draw.tail(static_cast<Eigen::Index>(p_));
}

double SsvsModel::inclusion_log_odds(const ModelState& state, std::size_t l) const {
    const double pi_cons = cp_.mode == ConsistencyPrior::Mode::Fixed ? cp_.pi_cons : state.pi_cons;
    const double pi = inclusion_probability(pi_cons, p_);
    const double prior = std::log(pi) - std::log1p(-pi);
    const double psi = ss_.psi[l];
    const double bl = state.b(static_cast<Eigen::Index>(l));

    if (ss_.correlation == CorrelationMode::Identity) {
        const double s0 = psi, s1 = ss_.c * psi;
        return prior - std::log(ss_.c) - 0.5 * bl * bl / (s1 * s1) + 0.5 * bl * bl / (s0 * s0);
    }
    // Zellner: the joint density changes through D_gamma only.
    const auto p = static_cast<Eigen::Index>(p_);
    Eigen::VectorXd u(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const double a = state.gamma[static_cast<std::size_t>(k)] ? ss_.c : 1.0;
        u(k) = state.b(k) / (a * ss_.psi[static_cast<std::size_t>(k)]);
    }
    const auto L = static_cast<Eigen::Index>(l);
    Eigen::VectorXd u1 = u, u0 = u;
    u1(L) = bl / (ss_.c * psi);
    u0(L) = bl / psi;
    const double scale = ss_.g * state.sigma2;
    const double q1 = u1.dot(ZtZ_ * u1) / scale;
    const double q0 = u0.dot(ZtZ_ * u0) / scale;
    return prior - std::log(ss_.c) - 0.5 * (q1 - q0);
}

void SsvsModel::update_gamma(ModelState& state, Rng& rng) const {
    if (!sample_gamma_) return;
    for (std::size_t l = 0; l < p_; ++l) {
        const double prob = log_sigmoid_prob(inclusion_log_odds(state, l));
        state.gamma[l] = unit_uniform(rng) < prob;
    }
}

double SsvsModel::log_likelihood(const Eigen::VectorXd& mu, const Eigen::VectorXd& b, double tau) const {
    Eigen::VectorXd theta(W_.cols());
    theta << mu, b;
    const Eigen::VectorXd r = y_ - W_ * theta;
    const double t2 = tau * tau;
    double ll = 0.0;
    for (const auto& blk : blocks_) {
        const auto rb = r.segment(blk.offset, blk.size);
        if (blk.size == 1) {
            const double v = blk.sigma(0, 0) + t2 * blk.gram(0, 0);
            ll += -0.5 * (kLog2Pi + std::log(v) + rb(0) * rb(0) / v);
            continue;
        }
        const Eigen::MatrixXd V = blk.sigma + t2 * blk.gram;
        Eigen::LLT<Eigen::MatrixXd> llt(V);
        if (llt.info() != Eigen::Success) throw NumericalError("study covariance factorization failed");
        const Eigen::VectorXd w = llt.matrixL().solve(Eigen::VectorXd(rb));
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        ll += -0.5 * (static_cast<double>(blk.size) * kLog2Pi + logdet + w.squaredNorm());
    }
    return ll;
}

Eigen::MatrixXd SsvsModel::marginal_covariance(double tau) const {
    const auto N = y_.size();
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(N, N);
    for (const auto& blk : blocks_)
        V.block(blk.offset, blk.offset, blk.size, blk.size) = blk.sigma + tau * tau * blk.gram;
    return V;
}

bool SsvsModel::update_tau(ModelState& state, Rng& rng, double log_step) const {
    if (mc_.fixed_tau) return false;
    const double proposal = state.tau * std::exp(log_step * std_normal(rng));
    const double prior_new = mc_.tau_prior.log_density(proposal);
    if (!std::isfinite(prior_new)) return false;
    // Target on log tau includes the Jacobian tau.
    const double cur = log_likelihood(state.mu, state.b, state.tau) + mc_.tau_prior.log_density(state.tau) +
                       std::log(state.tau);
    const double nxt = log_likelihood(state.mu, state.b, proposal) + prior_new + std::log(proposal);
    if (!std::isfinite(nxt)) return false;
    if (std::log(unit_uniform(rng)) < nxt - cur) {
        state.tau = proposal;
        return true;
    }
    return false;
}

GammaShapeRate SsvsModel::sigma2_conditional(const ModelState& state) const {
    const auto p = static_cast<Eigen::Index>(p_);
    Eigen::VectorXd u(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const double a = state.gamma[static_cast<std::size_t>(k)] ? ss_.c : 1.0;
        u(k) = state.b(k) / (a * ss_.psi[static_cast<std::size_t>(k)]);
    }
    // b' [g D (Z'Z)^{-1} D]^{-1} b
    const double quad = u.dot(ZtZ_ * u) / ss_.g;
    GammaShapeRate out{0.5 * static_cast<double>(p_), 0.5 * quad};
    if (ss_.sigma2_prior.kind == Sigma2Prior::Kind::InverseGamma) {
        out.shape += ss_.sigma2_prior.shape;
        out.rate += ss_.sigma2_prior.scale;
    }
    return out;
}

void SsvsModel::update_sigma2(ModelState& state, Rng& rng) const {
    if (ss_.correlation != CorrelationMode::Zellner || p_ == 0) return;
    const auto [shape, rate] = sigma2_conditional(state);
    if (!(rate > 0.0)) {
        // b == 0 exactly under the Jeffreys prior: fall back to the prior on a finite range.
        state.sigma2 = std::exp(std::log(1e-6) + unit_uniform(rng) * (std::log(1e6) - std::log(1e-6)));
        return;
    }
    std::gamma_distribution<double> gamma(shape, 1.0);
    state.sigma2 = rate / gamma(rng);
}

double SsvsModel::pi_cons_log_target(double pi_cons, std::span<const std::uint8_t> gamma) const {
    if (!(pi_cons > 0.0 && pi_cons < 1.0)) return -INFINITY;
    const auto p = static_cast<double>(gamma.size());
    double k = 0.0;
    for (auto g : gamma) k += g;
    const double log_excl = std::log(pi_cons) / p;            // log(1 - pi)
    const double log_incl = std::log(-std::expm1(log_excl));  // log(pi)
    return (cp_.alpha - 1.0) * std::log(pi_cons) + (cp_.beta - 1.0) * std::log1p(-pi_cons) + k * log_incl +
           (p - k) * log_excl;
}

bool SsvsModel::update_pi_cons(ModelState& state, Rng& rng, double logit_step) const {
    if (cp_.mode != ConsistencyPrior::Mode::Beta || p_ == 0) return false;
    const double cur = state.pi_cons;
    const double logit = std::log(cur) - std::log1p(-cur) + logit_step * std_normal(rng);
    const double prop = 1.0 / (1.0 + std::exp(-logit));
    if (!(prop > 0.0 && prop < 1.0)) return false;
    // Jacobian of the logit transform: pi (1 - pi).
    const double lcur = pi_cons_log_target(cur, state.gamma) + std::log(cur) + std::log1p(-cur);
    const double lnew = pi_cons_log_target(prop, state.gamma) + std::log(prop) + std::log1p(-prop);
    if (std::log(unit_uniform(rng)) < lnew - lcur) {
        state.pi_cons = prop;
        return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

std::uint64_t chain_seed(std::uint64_t master, std::size_t index) {
    return splitmix64(splitmix64(master) ^ (0xD1B54A32D192ED03ULL * (index + 1)));
}

ChainOutput run_chain(const SsvsModel& model, std::size_t chain_index) {
    const auto& cfg = model.mcmc();
    ChainOutput out;
    out.seed = chain_seed(cfg.seed, chain_index);
    out.p = model.p();
    out.q = model.q();
    out.draws = cfg.draws_per_chain();
    out.burn_in = cfg.burn_in;
    out.thin = cfg.thin;
    out.gamma.reserve(out.draws * out.p);
    out.b.reserve(out.draws * out.p);
    out.tau.reserve(out.draws);
    const bool zellner = model.spike_slab().correlation == CorrelationMode::Zellner && model.p() > 0;
    const bool beta_mode = model.consistency().mode == ConsistencyPrior::Mode::Beta && model.p() > 0;
    if (zellner) out.sigma2.reserve(out.draws);
    if (beta_mode) out.pi_cons.reserve(out.draws);

    Rng rng(out.seed);
    ModelState state = model.initial_state(rng);
    GlsCache cache;
    StepTuner tau_tuner(0.5), pi_tuner(0.5);
    const std::size_t half = out.draws / 2;

    std::size_t recorded = 0;
    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        const bool tuning = it <= cfg.burn_in;
        try {
            model.update_mu_b(state, rng, &cache);
            model.update_gamma(state, rng);
            if (!cfg.fixed_tau) {
                const bool acc = model.update_tau(state, rng, tau_tuner.step());
                tau_tuner.record(acc, tuning);
                if (!tuning) {
                    ++out.tau_proposed;
                    out.tau_accepted += acc;
                }
            }
            model.update_sigma2(state, rng);
            if (beta_mode) {
                const bool acc = model.update_pi_cons(state, rng, pi_tuner.step());
                pi_tuner.record(acc, tuning);
                if (!tuning) {
                    ++out.pi_proposed;
                    out.pi_accepted += acc;
                }
            }
        } catch (const NumericalError& e) {
            throw NumericalError(e.what(), it);
        }

        if (tuning || (it - cfg.burn_in) % cfg.thin != 0) continue;
        out.gamma.insert(out.gamma.end(), state.gamma.begin(), state.gamma.end());
        out.b.insert(out.b.end(), state.b.data(), state.b.data() + state.b.size());
        out.tau.push_back(state.tau);
        if (zellner) out.sigma2.push_back(state.sigma2);
        if (beta_mode) out.pi_cons.push_back(state.pi_cons);
        out.mu_all.push(state.mu);
        if (recorded < half) out.mu_half[0].push(state.mu);
        if (recorded >= out.draws - half) out.mu_half[1].push(state.mu);
        ++recorded;
    }
    out.tau_step = tau_tuner.step();
    out.pi_step = pi_tuner.step();
    return out;
}

SsifsResult run_ssifs(const EvidenceNetwork& network, const Eigen::MatrixXd& X, const InconsistencySpec& spec,
                      const SpikeSlabConfig& spike_slab, const ConsistencyPrior& consistency,
                      const McmcConfig& mcmc) {
    SsifsResult result;
    if (spec.p() == 0) {
        result.trivially_consistent = true;
        return result;
    }
    const SsvsModel model(network, X, spec.Z, spike_slab, consistency, mcmc);

    result.chains.resize(mcmc.chains);
    std::vector<std::exception_ptr> errors(mcmc.chains);
    std::vector<std::thread> workers;
    for (std::size_t k = 0; k < mcmc.chains; ++k) {
        workers.emplace_back([&, k] {
            try {
                result.chains[k] = run_chain(model, k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return result;
}

SpikeSlabConfig threshold_spike_slab(std::size_t p, double omega, double c) {
    SpikeSlabConfig cfg;
    cfg.c = c;
    cfg.omega = omega;
    cfg.psi.assign(p, psi_from_threshold(omega, c));
    return cfg;
}

} // namespace nmassvs
