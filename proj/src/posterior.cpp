#include "nmassvs/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace nmassvs {

namespace {

void require_draws(const std::vector<ChainOutput>& chains) {
    if (chains.empty()) throw std::invalid_argument("no chains");
    for (const auto& c : chains)
        if (c.draws == 0) throw std::invalid_argument("chain without post burn-in draws");
    for (const auto& c : chains)
        if (c.p != chains.front().p) throw std::invalid_argument("chains disagree on p");
}

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

} // namespace

double batch_means_se(std::span<const double> series, std::size_t batches) {
    const std::size_t n = series.size();
    if (n < 2) return 0.0;
    batches = std::min(batches, n);
    const std::size_t size = n / batches;
    std::vector<double> means(batches);
    for (std::size_t k = 0; k < batches; ++k) means[k] = mean_of(series.subspan(k * size, size));
    const double m = mean_of(means);
    double ss = 0.0;
    for (double v : means) ss += (v - m) * (v - m);
    const double var_batch = ss / static_cast<double>(batches - 1);
    return std::sqrt(var_batch / static_cast<double>(batches));
}

std::vector<Estimate> pip(const std::vector<ChainOutput>& chains) {
    require_draws(chains);
    const std::size_t p = chains.front().p;
    std::vector<Estimate> out(p);
    std::size_t total = 0;
    for (const auto& c : chains) total += c.draws;

    std::vector<double> series;
    for (std::size_t l = 0; l < p; ++l) {
        double hits = 0.0, var = 0.0;
        for (const auto& c : chains) {
            series.resize(c.draws);
            for (std::size_t t = 0; t < c.draws; ++t) series[t] = c.gamma[t * p + l];
            for (double v : series) hits += v;
            const double w = static_cast<double>(c.draws) / static_cast<double>(total);
            const double se = batch_means_se(series);
            var += w * w * se * se;
        }
        out[l] = {hits / static_cast<double>(total), std::sqrt(var)};
    }
    return out;
}

std::uint64_t model_id(std::span<const std::uint8_t> gamma) {
    if (gamma.size() > 62) throw std::invalid_argument("model ids need p <= 62; reduce the factor set first");
    std::uint64_t id = 0;
    for (std::size_t l = 0; l < gamma.size(); ++l)
        if (gamma[l]) id |= std::uint64_t{1} << l;
    return id;
}

GammaVector gamma_from_id(std::uint64_t id, std::size_t p) {
    GammaVector g(p);
    for (std::size_t l = 0; l < p; ++l) g[l] = (id >> l) & 1U;
    return g;
}

double ModelTable::probability(std::uint64_t id) const {
    if (total == 0) return 0.0;
    const auto it = counts.find(id);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

std::vector<std::pair<std::uint64_t, double>> ModelTable::ranked() const {
    std::vector<std::pair<std::uint64_t, std::size_t>> tmp(counts.begin(), counts.end());
    std::stable_sort(tmp.begin(), tmp.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::pair<std::uint64_t, double>> out;
    for (const auto& [id, n] : tmp) out.emplace_back(id, static_cast<double>(n) / static_cast<double>(total));
    return out;
}

ModelTable posterior_model_probs(const std::vector<ChainOutput>& chains) {
    require_draws(chains);
    ModelTable table;
    table.p = chains.front().p;
    for (const auto& c : chains)
        for (std::size_t t = 0; t < c.draws; ++t) {
            ++table.counts[model_id(c.gamma_at(t))];
            ++table.total;
        }
    return table;
}

std::string Odds::describe() const {
    std::ostringstream os;
    os.precision(4);
    if (kind == Kind::LowerBound) os << ">= ";
    if (kind == Kind::UpperBound) os << "<= ";
    os << value;
    return os.str();
}

Odds odds_from_probability(double prob, std::size_t total_draws) {
    if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
    if (total_draws < 2) throw std::invalid_argument("odds bounds need at least two draws");
    const double d = static_cast<double>(total_draws);
    // One more draw on the other side is the smallest change the run could resolve.
    if (prob >= 1.0) return {Odds::Kind::LowerBound, d - 1.0};
    if (prob <= 0.0) return {Odds::Kind::UpperBound, 1.0 / (d - 1.0)};
    return {Odds::Kind::Exact, prob / (1.0 - prob)};
}

Odds consistency_odds(const ModelTable& table) {
    if (table.total == 0) throw std::invalid_argument("empty model table");
    return odds_from_probability(table.probability(0), table.total);
}

std::vector<std::size_t> median_probability_model(std::span<const double> pips) {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < pips.size(); ++l)
        if (pips[l] > 0.5) out.push_back(l);
    return out;
}

std::vector<std::size_t> reduce_dimension(std::span<const double> pips, double threshold) {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < pips.size(); ++l)
        if (pips[l] >= threshold) out.push_back(l);
    return out;
}

EvidenceLabel evidence_label(double po_consistency) {
    if (!(po_consistency > 0.0)) throw std::invalid_argument("posterior odds must be positive");
    EvidenceLabel out;
    if (po_consistency > 1.0) {
        out.favors = "consistency";
        out.odds = po_consistency;
    } else if (po_consistency < 1.0) {
        out.favors = "inconsistency";
        out.odds = 1.0 / po_consistency;
    }
    if (out.odds < 3.0)
        out.category = "marginal";
    else if (out.odds < 20.0)
        out.category = "positive/substantial";
    else if (out.odds <= 150.0)
        out.category = "strong";
    else
        out.category = "very strong";
    return out;
}

double rhat_from_halves(const std::vector<HalfMoments>& halves) {
    if (halves.size() < 2) throw std::invalid_argument("need at least two half-chains");
    const std::size_t n = halves.front().count;
    for (const auto& h : halves)
        if (h.count != n) throw std::invalid_argument("half-chains differ in length");
    if (n < 2) throw std::invalid_argument("half-chains too short");
    const double m = static_cast<double>(halves.size());
    const double nd = static_cast<double>(n);
    double grand = 0.0, W = 0.0;
    for (const auto& h : halves) {
        grand += h.mean;
        W += h.variance;
    }
    grand /= m;
    W /= m;
    double B = 0.0;
    for (const auto& h : halves) B += (h.mean - grand) * (h.mean - grand);
    B *= nd / (m - 1.0);
    const double scale = std::max(std::abs(grand), 1.0);
    const double eps = 1e-24 * scale * scale;
    if (W <= eps) return B <= eps ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (nd - 1.0) / nd * W + B / nd;
    return std::sqrt(var_plus / W);
}

double split_rhat(const std::vector<std::span<const double>>& chains) {
    if (chains.empty()) throw std::invalid_argument("no chains");
    std::size_t n = chains.front().size();
    for (const auto& c : chains) n = std::min(n, c.size());
    const std::size_t half = n / 2;
    std::vector<HalfMoments> halves;
    for (const auto& c : chains) {
        // Both halves of length `half`; the middle draw is dropped for odd lengths.
        for (auto part : {c.subspan(0, half), c.subspan(c.size() - half, half)}) {
            const double m = mean_of(part);
            double ss = 0.0;
            for (double v : part) ss += (v - m) * (v - m);
            halves.push_back({half, m, ss / static_cast<double>(half - 1)});
        }
    }
    return rhat_from_halves(halves);
}

bool Convergence::all_pass() const {
    return std::none_of(parameters.begin(), parameters.end(), [](const Diagnostic& d) { return d.flagged; });
}

Convergence convergence(const std::vector<ChainOutput>& chains, const std::vector<std::string>& factor_labels,
                        const std::vector<std::string>& mu_labels) {
    Convergence out;
    if (chains.size() < 2) return out;
    require_draws(chains);
    out.available = true;
    const std::size_t p = chains.front().p;

    auto add = [&](const std::string& name, double r) {
        out.parameters.push_back({name, r, !(r <= 1.05)});
    };
    auto scalar_series = [&](auto&& getter, const std::string& name) {
        std::vector<std::vector<double>> store;
        for (const auto& c : chains) store.push_back(getter(c));
        if (store.front().empty()) return;
        std::vector<std::span<const double>> views(store.begin(), store.end());
        add(name, split_rhat(views));
    };

    for (std::size_t l = 0; l < p; ++l) {
        const std::string label = l < factor_labels.size() ? factor_labels[l] : "b" + std::to_string(l + 1);
        scalar_series([&](const ChainOutput& c) {
            std::vector<double> s(c.draws);
            for (std::size_t t = 0; t < c.draws; ++t) s[t] = c.b[t * p + l];
            return s;
        }, "b[" + label + "]");
        scalar_series([&](const ChainOutput& c) {
            std::vector<double> s(c.draws);
            for (std::size_t t = 0; t < c.draws; ++t) s[t] = c.gamma[t * p + l];
            return s;
        }, "pip[" + label + "]");
    }
    scalar_series([](const ChainOutput& c) { return c.tau; }, "tau");
    scalar_series([](const ChainOutput& c) { return c.sigma2; }, "sigma2");
    scalar_series([](const ChainOutput& c) { return c.pi_cons; }, "pi_cons");

    const std::size_t q = chains.front().q;
    if (chains.front().mu_half[0].count >= 2) {
        for (std::size_t j = 0; j < q; ++j) {
            std::vector<HalfMoments> halves;
            for (const auto& c : chains)
                for (const auto& h : c.mu_half) {
                    const auto J = static_cast<Eigen::Index>(j);
                    halves.push_back({h.count, h.mean(J), h.variance()(J)});
                }
            const std::string label = j < mu_labels.size() ? mu_labels[j] : "mu" + std::to_string(j + 1);
            add("mu[" + label + "]", rhat_from_halves(halves));
        }
    }
    return out;
}

ConsistencyReport summarize(const std::vector<ChainOutput>& chains, const std::vector<std::string>& factor_labels,
                            const std::vector<std::string>& mu_labels) {
    require_draws(chains);
    ConsistencyReport r;
    r.labels = factor_labels;
    r.pips = pip(chains);
    r.model_table = posterior_model_probs(chains);
    r.consistent_prob = r.model_table.probability(0);
    r.po_consistency = consistency_odds(r.model_table);
    std::vector<double> values;
    for (const auto& e : r.pips) values.push_back(e.value);
    r.median_model = median_probability_model(values);
    r.reduced_factors = reduce_dimension(values);
    r.evidence = evidence_label(r.po_consistency.value);
    r.diagnostics = convergence(chains, factor_labels, mu_labels);

    const std::size_t q = chains.front().q;
    std::size_t total = 0;
    for (const auto& c : chains) total += c.mu_all.count;
    r.mu_mean.resize(q);
    for (std::size_t j = 0; j < q && total > 0; ++j) {
        const auto J = static_cast<Eigen::Index>(j);
        double m = 0.0;
        for (const auto& c : chains) m += c.mu_all.mean(J) * static_cast<double>(c.mu_all.count);
        m /= static_cast<double>(total);
        double spread = 0.0;
        for (const auto& c : chains) spread += (c.mu_all.mean(J) - m) * (c.mu_all.mean(J) - m);
        r.mu_mean[j] = {m, chains.size() > 1 ? std::sqrt(spread / static_cast<double>(chains.size() - 1) /
                                                         static_cast<double>(chains.size()))
                                             : 0.0};
    }
    std::vector<double> taus;
    double tau_var = 0.0;
    for (const auto& c : chains) {
        taus.insert(taus.end(), c.tau.begin(), c.tau.end());
        const double se = batch_means_se(c.tau);
        const double w = static_cast<double>(c.draws) / static_cast<double>(r.model_table.total);
        tau_var += w * w * se * se;
    }
    r.tau_mean = {mean_of(taus), std::sqrt(tau_var)};
    return r;
}

} // namespace nmassvs
