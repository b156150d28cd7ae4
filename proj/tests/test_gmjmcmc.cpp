#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "bgnlm/dataset.h"
#include "bgnlm/errors.h"
#include "bgnlm/gmjmcmc.h"
#include "bgnlm/rng.h"

using namespace bgnlm;

namespace {

GmjSettings linear_settings(int P, long N) {
    GmjSettings s;
    s.P = P;
    s.N = N;
    s.eval.p_original = 0;
    return s;
}

std::set<std::string> keys_of(const Population& pop) {
    std::set<std::string> out;
    for (const auto& f : pop.features) out.insert(f.key());
    return out;
}

Population leaves(int p) {
    Population pop;
    for (int j = 0; j < p; ++j) {
        pop.features.push_back(Feature::leaf(static_cast<std::size_t>(j)));
        pop.provenance.push_back(Provenance::Original);
    }
    return pop;
}

double inclusion_of(const GenerationRecord& gen, const std::string& key) {
    for (std::size_t i = 0; i < gen.population.features.size(); ++i) {
        if (gen.population.features[i].key() == key) return gen.inclusion[i];
    }
    return 0.0;
}

}  // namespace

TEST(InitPopulation, AllCovariates) {
    const auto pop = init_population(20, 0, ParamsFeat{});
    EXPECT_EQ(pop.features.size(), 20u);
    EXPECT_EQ(pop.generation, 1);
    for (const auto& p : pop.provenance) EXPECT_EQ(p, Provenance::Original);
}

TEST(InitPopulation, Preselection) {
    ParamsFeat feat;
    for (int j = 0; j < 50; ++j) feat.prel_select.push_back(3 * j);
    const auto pop = init_population(3220, 0, feat);
    EXPECT_EQ(pop.features.size(), 50u);
    EXPECT_EQ(pop.features[1].key(), "x4");
}

TEST(InitPopulation, FixedCovariatesAreExcluded) {
    const auto pop = init_population(6, 2, ParamsFeat{});
    EXPECT_EQ(pop.features.size(), 4u);
    EXPECT_EQ(pop.features.front().key(), "x3");
}

TEST(InitPopulation, ScreeningCanEmptyThePopulation) {
    ParamsFeat feat;
    feat.prel_filter = 0.9;
    const std::vector<double> stats{0.1, 0.5, 0.2};
    EXPECT_THROW(init_population(3, 0, feat, &stats), EmptyInitialPopulation);
    feat.prel_filter = 0.3;
    EXPECT_EQ(init_population(3, 0, feat, &stats).features.size(), 1u);
}

TEST(ScreeningStatistics, AbsoluteCorrelation) {
    Eigen::MatrixXd x(4, 3);
    x << 1, 4, 1, 2, 3, 1, 3, 2, 1, 4, 1, 1;
    Eigen::VectorXd y(4);
    y << 1, 2, 3, 4;
    const auto s = screening_statistics(x, y);
    EXPECT_NEAR(s[0], 1.0, 1e-12);
    EXPECT_NEAR(s[1], 1.0, 1e-12);
    EXPECT_EQ(s[2], 0.0);
}

TEST(FilterPopulation, Examples) {
    Rng rng(1);
    const auto pop = leaves(10);
    const auto all = filter_population(pop, std::vector<double>(10, 1.0), 0.6, 0.8, false, rng);
    EXPECT_TRUE(all.removed.empty());
    for (int rep = 0; rep < 200; ++rep) {
        const auto r = filter_population(pop, std::vector<double>(10, 0.0), 0.6, 0.8, false, rng);
        EXPECT_GE(r.kept.size(), 8u);
        EXPECT_EQ(r.kept.size() + r.removed.size(), 10u);
    }
    const auto two = leaves(2);
    for (int rep = 0; rep < 100; ++rep) {
        const auto r = filter_population(two, {0.9, 0.1}, 0.6, 0.0, false, rng);
        EXPECT_TRUE(std::find(r.kept.begin(), r.kept.end(), 0u) != r.kept.end());
    }
}

TEST(FilterPopulation, KeepOriginals) {
    Rng rng(2);
    auto pop = leaves(4);
    pop.features.push_back(Feature::interaction(Feature::leaf(0), Feature::leaf(1)));
    pop.provenance.push_back(Provenance::Interaction);
    for (int rep = 0; rep < 100; ++rep) {
        const auto r = filter_population(pop, std::vector<double>(5, 0.0), 0.6, 0.0, true, rng);
        for (std::size_t i : r.removed) EXPECT_EQ(i, 4u);
    }
}

TEST(EvolvePopulation, MutationOnlyKeepsCovariates) {
    const auto data = simulate_dataset("linear", 100, 3);
    auto settings = linear_settings(2, 50);
    settings.probs.gen.gen = {0, 0, 0, 1};
    const auto reg = TransformRegistry::builtin();
    Rng rng(3);
    const auto pop = init_population(20, 0, settings.feat);
    const auto next = evolve_population(pop, std::vector<double>(20, 0.0), settings, reg, data.x, data.y, rng);
    for (const auto& f : next.features) EXPECT_EQ(f.kind(), Feature::Kind::Leaf);
    EXPECT_EQ(keys_of(next), keys_of(pop));
}

TEST(EvolvePopulation, GrowsToPopMaxAfterFirstGeneration) {
    const auto data = simulate_dataset("kepler-like", 200, 4);
    GmjSettings settings = linear_settings(2, 50);
    settings.feat.pop_max = 13;
    settings.probs.gen.transforms = {"sigmoid", "troot", "p0"};
    const auto reg = TransformRegistry::builtin();
    Rng rng(4);
    const auto pop = init_population(9, 0, settings.feat);
    const auto next = evolve_population(pop, std::vector<double>(9, 1.0), settings, reg, data.x, data.y, rng);
    EXPECT_EQ(next.features.size(), 13u);
    EXPECT_EQ(next.generation, 2);
    EXPECT_EQ(keys_of(next).size(), 13u);
    // Third generation keeps the size.
    const auto third = evolve_population(next, std::vector<double>(13, 0.3), settings, reg, data.x, data.y, rng);
    EXPECT_EQ(third.features.size(), 13u);
}

TEST(EvolvePopulation, RejectsCommutedDuplicate) {
    const auto data = simulate_dataset("linear", 100, 5);
    GmjSettings settings = linear_settings(2, 50);
    settings.probs.gen.gen = {1, 0, 0, 0};
    settings.feat.pop_max = 4;
    settings.feat.check_col = false;
    const auto reg = TransformRegistry::builtin();
    Population pop;
    pop.features = {Feature::leaf(0), Feature::leaf(1), Feature::interaction(Feature::leaf(1), Feature::leaf(0))};
    pop.provenance = {Provenance::Original, Provenance::Original, Provenance::Interaction};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto next = evolve_population(pop, {1.0, 1.0, 1.0}, settings, reg, data.x.leftCols(2), data.y, rng);
        EXPECT_EQ(keys_of(next).size(), next.features.size());
        EXPECT_LE(next.features.size(), 4u);
    }
}

TEST(Gmjmcmc, SingleGenerationEqualsPlainMjmcmc) {
    const auto data = simulate_dataset("linear", 100, 6);
    const auto reg = TransformRegistry::builtin();
    auto settings = linear_settings(1, 300);
    Rng a(7), b(7);
    const auto g = run_gmjmcmc(data.x, data.y, reg, settings, a);
    const auto m = run_mjmcmc_covariates(data.x, data.y, reg, settings, b);
    ASSERT_EQ(g.generations.size(), 1u);
    ASSERT_EQ(g.generations[0].chain.models.size(), m.generations[0].chain.models.size());
    for (std::size_t i = 0; i < m.generations[0].chain.models.size(); ++i) {
        EXPECT_EQ(g.generations[0].chain.models[i].first, m.generations[0].chain.models[i].first);
        EXPECT_EQ(g.generations[0].chain.models[i].second.crit, m.generations[0].chain.models[i].second.crit);
    }
    EXPECT_EQ(g.generations[0].inclusion, m.generations[0].inclusion);
}

TEST(Gmjmcmc, LinearScenarioRecoversStrongCovariates) {
    auto data = simulate_dataset("linear", 100, 8);
    scale_dataset(data, true, true);
    const auto reg = TransformRegistry::builtin();
    auto settings = linear_settings(1, 1000);
    settings.eval.p_original = 20;
    Rng rng(9);
    const auto res = run_mjmcmc_covariates(data.x, data.y, reg, settings, rng);
    const auto& gen = res.generations[0];
    for (const char* k : {"x3", "x4", "x5"}) EXPECT_GE(inclusion_of(gen, k), 0.95) << k;
}

TEST(Gmjmcmc, InvariantsAcrossGenerations) {
    auto data = simulate_dataset("interaction", 300, 10);
    const auto reg = TransformRegistry::builtin();
    auto settings = linear_settings(6, 150);
    settings.probs.gen.gen = {1, 1, 1, 1};
    settings.probs.gen.transforms = {"sigmoid", "sin_deg", "p0", "troot"};
    settings.eval.p_original = 20;
    Rng rng(11);
    const auto res = run_gmjmcmc(data.x, data.y, reg, settings, rng);
    ASSERT_EQ(res.generations.size(), 6u);
    EXPECT_EQ(res.best_crit_series().size(), 6u);
    const int pop_max = settings.feat.resolved_pop_max(20);
    std::size_t prev = 0;
    for (std::size_t t = 0; t < res.generations.size(); ++t) {
        const auto& g = res.generations[t];
        EXPECT_LE(static_cast<int>(g.population.features.size()), pop_max);
        EXPECT_EQ(keys_of(g.population).size(), g.population.features.size());
        if (t > 0) EXPECT_GE(g.population.features.size(), static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(prev))));
        prev = g.population.features.size();
        double best = kCritFloor;
        for (const auto& [k, rec] : g.chain.models) best = std::max(best, rec.crit);
        EXPECT_EQ(g.best_crit, best);
        for (const auto& f : g.population.features) {
            EXPECT_LE(f.complexity().depth, settings.feat.D);
            EXPECT_LE(f.complexity().width, settings.feat.L);
        }
        // The design matrix is recomputable from the archived features.
        const Eigen::MatrixXd d = build_design(data.x, g.population.features, true, 0, reg);
        EXPECT_EQ(d.cols(), static_cast<Eigen::Index>(g.population.features.size()) + 1);
        EXPECT_TRUE(d.allFinite());
    }
    const auto series = res.best_crit_series();
    EXPECT_EQ(res.best_generation, static_cast<int>(std::max_element(series.begin(), series.end()) - series.begin()));
    EXPECT_EQ(res.last_generation, 5);
}

TEST(Gmjmcmc, MutationOnlyRunStaysLinear) {
    const auto data = simulate_dataset("linear", 100, 12);
    const auto reg = TransformRegistry::builtin();
    auto settings = linear_settings(4, 100);
    settings.probs.gen.gen = {0, 0, 0, 1};
    Rng rng(13);
    const auto res = run_gmjmcmc(data.x, data.y, reg, settings, rng);
    for (const auto& g : res.generations) {
        for (const auto& f : g.population.features) EXPECT_EQ(f.kind(), Feature::Kind::Leaf);
    }
}

TEST(Gmjmcmc, FixedCovariatesAlwaysIncluded) {
    const auto data = simulate_dataset("linear", 80, 14);
    const auto reg = TransformRegistry::builtin();
    auto settings = linear_settings(1, 100);
    settings.fixed = 2;
    Rng rng(15);
    const auto res = run_gmjmcmc(data.x, data.y, reg, settings, rng);
    EXPECT_EQ(res.generations[0].population.features.size(), 18u);
    for (const auto& [k, rec] : res.generations[0].chain.models) {
        EXPECT_EQ(k.size(), 18u);
        // Coefficients: intercept, two fixed, then the included features.
        EXPECT_EQ(rec.coefs.size(), static_cast<Eigen::Index>(3 + k.count()));
    }
}
