#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "nmassvs/posterior.hpp"

using namespace nmassvs;

namespace {

ChainOutput fake_chain(std::size_t p, const std::vector<GammaVector>& gammas, std::size_t q = 1) {
    ChainOutput c;
    c.p = p;
    c.q = q;
    c.draws = gammas.size();
    for (const auto& g : gammas) {
        c.gamma.insert(c.gamma.end(), g.begin(), g.end());
        for (std::size_t l = 0; l < p; ++l) c.b.push_back(g[l] ? 0.5 : 0.01);
        c.tau.push_back(0.2);
    }
    const std::size_t half = c.draws / 2;
    for (std::size_t t = 0; t < c.draws; ++t) {
        const Eigen::VectorXd mu = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(q), 0.1 * (t % 3));
        c.mu_all.push(mu);
        if (t < half) c.mu_half[0].push(mu);
        if (t >= c.draws - half) c.mu_half[1].push(mu);
    }
    return c;
}

// Textbook split R-hat: halve each chain, then compare between- and within-half variance.
double reference_rhat(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        const std::size_t n = c.size() / 2;
        halves.emplace_back(c.begin(), c.begin() + static_cast<long>(n));
        halves.emplace_back(c.end() - static_cast<long>(n), c.end());
    }
    const double n = static_cast<double>(halves.front().size());
    const double m = static_cast<double>(halves.size());
    std::vector<double> means;
    double W = 0.0;
    for (const auto& h : halves) {
        double mean = 0.0;
        for (double v : h) mean += v / n;
        double s2 = 0.0;
        for (double v : h) s2 += (v - mean) * (v - mean) / (n - 1.0);
        means.push_back(mean);
        W += s2 / m;
    }
    double grand = 0.0;
    for (double v : means) grand += v / m;
    double B = 0.0;
    for (double v : means) B += n * (v - grand) * (v - grand) / (m - 1.0);
    return std::sqrt(((n - 1.0) / n * W + B / n) / W);
}

} // namespace

TEST_CASE("model ids") {
    CHECK(model_id(GammaVector{0, 0, 0}) == 0);
    CHECK(model_id(GammaVector{1, 0, 0}) == 1);
    CHECK(model_id(GammaVector{0, 1, 0}) == 2);
    CHECK(model_id(GammaVector{1, 0, 1}) == 5);
    CHECK(model_id(GammaVector{1, 1, 1}) == 7);
    for (std::uint64_t id = 0; id < 64; ++id) CHECK(model_id(gamma_from_id(id, 6)) == id);
    CHECK_THROWS(model_id(GammaVector(63, 0)));
    CHECK_NOTHROW(model_id(GammaVector(62, 1)));
}

TEST_CASE("model table and PIPs agree") {
    std::mt19937_64 rng(1);
    std::bernoulli_distribution coin(0.3);
    std::vector<ChainOutput> chains;
    for (int k = 0; k < 2; ++k) {
        std::vector<GammaVector> g;
        for (int t = 0; t < 1000; ++t) g.push_back({coin(rng), coin(rng), coin(rng), coin(rng)});
        chains.push_back(fake_chain(4, g));
    }
    const auto table = posterior_model_probs(chains);
    CHECK(table.total == 2000);
    double total = 0.0;
    for (const auto& [id, prob] : table.ranked()) total += prob;
    CHECK(total == doctest::Approx(1.0));
    const auto pips = pip(chains);
    for (std::size_t l = 0; l < 4; ++l) {
        double s = 0.0;
        for (const auto& [id, prob] : table.ranked())
            if ((id >> l) & 1U) s += prob;
        CHECK(pips[l].value == doctest::Approx(s).epsilon(1e-12));
        CHECK(pips[l].mc_se > 0.0);
    }
    const auto ranked = table.ranked();
    for (std::size_t i = 1; i < ranked.size(); ++i) CHECK(ranked[i - 1].second >= ranked[i].second);
}

TEST_CASE("batch means standard error") {
    // 50 batches of 10 constant values: se = sd(batch means) / sqrt(50).
    std::vector<double> series;
    for (int b = 0; b < 50; ++b)
        for (int i = 0; i < 10; ++i) series.push_back(b % 5);
    double mean = 0.0;
    for (int b = 0; b < 50; ++b) mean += (b % 5) / 50.0;
    double var = 0.0;
    for (int b = 0; b < 50; ++b) var += ((b % 5) - mean) * ((b % 5) - mean) / 49.0;
    CHECK(batch_means_se(series) == doctest::Approx(std::sqrt(var / 50.0)));
    CHECK(batch_means_se(std::vector<double>(500, 1.0)) == 0.0);
}

TEST_CASE("posterior odds and their bounds") {
    const auto exact = odds_from_probability(0.86, 1000);
    CHECK(exact.kind == Odds::Kind::Exact);
    CHECK(exact.value == doctest::Approx(0.86 / 0.14));
    const auto lower = odds_from_probability(1.0, 1000);
    CHECK(lower.kind == Odds::Kind::LowerBound);
    CHECK(lower.value == doctest::Approx(999.0));
    const auto upper = odds_from_probability(0.0, 1000);
    CHECK(upper.kind == Odds::Kind::UpperBound);
    CHECK(upper.value == doctest::Approx(1.0 / 999.0));
    CHECK(lower.describe().find(">") != std::string::npos);
    CHECK(upper.describe().find("<") != std::string::npos);
    CHECK_THROWS(odds_from_probability(1.2, 1000));

    // Every draw consistent: the odds are a lower bound.
    std::vector<ChainOutput> chains{fake_chain(2, std::vector<GammaVector>(100, GammaVector{0, 0}))};
    CHECK(consistency_odds(posterior_model_probs(chains)).kind == Odds::Kind::LowerBound);
}

TEST_CASE("median probability model and dimension reduction") {
    const std::vector<double> pips{0.51, 0.5, 0.2, 0.19, 0.9};
    CHECK(median_probability_model(pips) == std::vector<std::size_t>{0, 4});
    CHECK(reduce_dimension(pips) == std::vector<std::size_t>{0, 1, 2, 4});
    CHECK(reduce_dimension(pips, 0.6) == std::vector<std::size_t>{4});
}

TEST_CASE("evidence labels") {
    auto e = evidence_label(6.14);
    CHECK(e.category == "positive/substantial");
    CHECK(e.favors == "consistency");
    e = evidence_label(1.78);
    CHECK(e.category == "marginal");
    CHECK(e.favors == "consistency");
    e = evidence_label(1.0);
    CHECK(e.category == "marginal");
    CHECK(e.favors.empty());
    e = evidence_label(1.0 / 40.0);
    CHECK(e.category == "strong");
    CHECK(e.favors == "inconsistency");
    CHECK(e.odds == doctest::Approx(40.0));
    CHECK(evidence_label(3.0).category == "positive/substantial");
    CHECK(evidence_label(20.0).category == "strong");
    CHECK(evidence_label(150.0).category == "strong");
    CHECK(evidence_label(151.0).category == "very strong");
    CHECK_THROWS(evidence_label(0.0));
}

TEST_CASE("split R-hat") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<std::vector<double>> chains(3, std::vector<double>(2000));
    for (auto& c : chains)
        for (auto& v : c) v = z(rng);

    auto views = [](const std::vector<std::vector<double>>& cs) {
        return std::vector<std::span<const double>>(cs.begin(), cs.end());
    };
    CHECK(split_rhat(views(chains)) == doctest::Approx(reference_rhat(chains)).epsilon(1e-10));
    CHECK(split_rhat(views(chains)) < 1.01);

    auto offset = chains;
    for (auto& v : offset[1]) v += 3.0;
    CHECK(split_rhat(views(offset)) == doctest::Approx(reference_rhat(offset)).epsilon(1e-10));
    CHECK(split_rhat(views(offset)) > 1.05);

    // A drifting chain is caught by the split even with a single chain.
    std::vector<std::vector<double>> drift{std::vector<double>(2000)};
    for (std::size_t t = 0; t < 2000; ++t) drift[0][t] = z(rng) + (t < 1000 ? 0.0 : 2.0);
    CHECK(split_rhat(views(drift)) > 1.05);

    const std::vector<std::vector<double>> flat(2, std::vector<double>(100, 0.3));
    CHECK(split_rhat(views(flat)) == 1.0);
    std::vector<std::vector<double>> stuck{std::vector<double>(100, 0.0), std::vector<double>(100, 1.0)};
    CHECK(std::isinf(split_rhat(views(stuck))));
}

TEST_CASE("R-hat from half-chain moments matches the series version") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<std::vector<double>> chains(2, std::vector<double>(1000));
    for (std::size_t k = 0; k < 2; ++k)
        for (auto& v : chains[k]) v = z(rng) + 0.3 * k;
    std::vector<HalfMoments> halves;
    for (const auto& c : chains)
        for (int h = 0; h < 2; ++h) {
            const auto first = c.begin() + h * 500;
            double mean = 0.0, var = 0.0;
            for (auto it = first; it != first + 500; ++it) mean += *it / 500.0;
            for (auto it = first; it != first + 500; ++it) var += (*it - mean) * (*it - mean) / 499.0;
            halves.push_back({500, mean, var});
        }
    CHECK(rhat_from_halves(halves) == doctest::Approx(reference_rhat(chains)).epsilon(1e-10));
}

TEST_CASE("summary of chains") {
    std::vector<GammaVector> g;
    for (int t = 0; t < 400; ++t) g.push_back({static_cast<std::uint8_t>(t % 4 == 0), static_cast<std::uint8_t>(t % 10 == 0)});
    const std::vector<ChainOutput> chains{fake_chain(2, g), fake_chain(2, g)};
    const auto r = summarize(chains, {"f1", "f2"}, {"A:B"});
    CHECK(r.pips[0].value == doctest::Approx(0.25));
    CHECK(r.pips[1].value == doctest::Approx(0.1));
    // t % 4 != 0 and t % 10 != 0
    CHECK(r.consistent_prob == doctest::Approx(0.7));
    CHECK(r.po_consistency.value == doctest::Approx(0.7 / 0.3));
    CHECK(r.evidence.category == "marginal");
    CHECK(r.median_model.empty());
    CHECK(r.reduced_factors == std::vector<std::size_t>{0});
    CHECK(r.diagnostics.available);
    CHECK(r.diagnostics.all_pass());
    CHECK(r.tau_mean.value == doctest::Approx(0.2));

    const auto single = summarize({fake_chain(2, g)}, {"f1", "f2"}, {"A:B"});
    CHECK_FALSE(single.diagnostics.available);
}
