#include "bgnlm/gmjmcmc.h"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "bgnlm/errors.h"
#include "bgnlm/subsample.h"

namespace bgnlm {

int ParamsFeat::resolved_pop_max(int p) const {
    if (pop_max > 0) return pop_max;
    return std::max(1, std::min(static_cast<int>(std::floor(1.5 * p)), 100));
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::Original: return "original";
        case Provenance::Interaction: return "interaction";
        case Provenance::Modification: return "modification";
        case Provenance::Projection: return "projection";
        case Provenance::Mutation: return "mutation";
    }
    return "?";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "original") return Provenance::Original;
    if (s == "interaction") return Provenance::Interaction;
    if (s == "modification") return Provenance::Modification;
    if (s == "projection") return Provenance::Projection;
    if (s == "mutation") return Provenance::Mutation;
    throw ConfigError("unknown provenance '" + s + "'");
}

std::vector<double> GmjResult::best_crit_series() const {
    std::vector<double> out;
    out.reserve(generations.size());
    for (const auto& g : generations) out.push_back(g.best_crit);
    return out;
}

std::vector<double> screening_statistics(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    std::vector<double> out(static_cast<std::size_t>(x.cols()), 0.0);
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double yn = yc.norm();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Eigen::VectorXd xc = x.col(j).array() - x.col(j).mean();
        const double xn = xc.norm();
        if (xn > 0.0 && yn > 0.0) out[static_cast<std::size_t>(j)] = std::abs(xc.dot(yc) / (xn * yn));
    }
    return out;
}

Population init_population(int p, int fixed, const ParamsFeat& feat, const std::vector<double>* screening) {
    Population pop;
    pop.generation = 1;
    std::vector<int> candidates;
    if (!feat.prel_select.empty()) {
        for (int idx : feat.prel_select) {
            if (idx < 0 || idx >= p) throw ConfigError("prel_select index out of range");
            if (idx >= fixed) candidates.push_back(idx);
        }
    } else {
        for (int j = fixed; j < p; ++j) candidates.push_back(j);
    }
    std::unordered_set<int> seen;
    for (int j : candidates) {
        if (!seen.insert(j).second) continue;
        if (feat.prel_filter > 0.0 && screening && (*screening)[static_cast<std::size_t>(j)] < feat.prel_filter) continue;
        pop.features.push_back(Feature::leaf(static_cast<std::size_t>(j)));
        pop.provenance.push_back(Provenance::Original);
    }
    if (pop.features.empty()) throw EmptyInitialPopulation("no covariate passes the initial screening");
    return pop;
}

FilterOutcome filter_population(const Population& pop, const std::vector<double>& probs, double filter,
                                double keep_min, bool keep_org, Rng& rng) {
    const std::size_t size = pop.features.size();
    if (probs.size() != size) throw std::invalid_argument("inclusion probabilities must align with population");
    const auto floor_keep = static_cast<std::size_t>(std::ceil(keep_min * static_cast<double>(size) - 1e-9));

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < size; ++i) {
        if (probs[i] >= filter) continue;
        if (keep_org && pop.features[i].kind() == Feature::Kind::Leaf) continue;
        candidates.push_back(i);
    }
    for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng.index(i)]);

    std::vector<bool> removed(size, false);
    std::size_t remaining = size;
    for (std::size_t i : candidates) {
        if (remaining <= floor_keep) break;
        if (rng.bernoulli(1.0 - probs[i])) {
            removed[i] = true;
            --remaining;
        }
    }
    FilterOutcome out;
    for (std::size_t i = 0; i < size; ++i) (removed[i] ? out.removed : out.kept).push_back(i);
    return out;
}

Eigen::MatrixXd build_design(const Eigen::MatrixXd& x, const std::vector<Feature>& features, bool intercept, int fixed,
                             const TransformRegistry& transforms) {
    const Eigen::Index lead = (intercept ? 1 : 0) + fixed;
    Eigen::MatrixXd design(x.rows(), lead + static_cast<Eigen::Index>(features.size()));
    Eigen::Index c = 0;
    if (intercept) design.col(c++).setOnes();
    for (int j = 0; j < fixed; ++j) design.col(c++) = x.col(j);
    for (const auto& f : features) design.col(c++) = f.evaluate(x, transforms);
    return design;
}

Scorer make_population_scorer(const DesignContext& ctx, const std::vector<Feature>& features,
                              const EvaluatorParams& params) {
    std::vector<Complexity> complexity;
    complexity.reserve(features.size());
    for (const auto& f : features) complexity.push_back(f.complexity());
    const int forced = ctx.forced();
    const bool sub = params.sub && params.family == Family::Binomial;
    const SubsampleParams schedule = SubsampleParams::from(params);

    Scorer scorer;
    scorer.refresh = sub;
    scorer.fn = [&ctx, complexity = std::move(complexity), forced, sub, schedule, &params](
                    const ModelKey& key, SubsampleState* warm, Rng& rng) {
        std::vector<bool> model(static_cast<std::size_t>(ctx.cols()), false);
        for (int i = 0; i < forced; ++i) model[static_cast<std::size_t>(i)] = true;
        std::vector<Complexity> included;
        for (std::size_t j = 0; j < key.size(); ++j) {
            if (key.test(j)) {
                model[static_cast<std::size_t>(forced) + j] = true;
                included.push_back(complexity[j]);
            }
        }
        if (sub && warm) return evaluate_model_subsampled(ctx, model, included, params, schedule, *warm, rng);
        return evaluate_model(ctx, model, included, params);
    };
    return scorer;
}

namespace {


Provenance provenance_of(GenOperator op) {
    switch (op) {
        case GenOperator::Interaction: return Provenance::Interaction;
        case GenOperator::Modification: return Provenance::Modification;
        case GenOperator::Projection: return Provenance::Projection;
        case GenOperator::Mutation: return Provenance::Mutation;
    }
    return Provenance::Mutation;
}

}  // namespace

Population evolve_population(const Population& pop, const std::vector<double>& inclusion, const GmjSettings& settings,
                             const TransformRegistry& transforms, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             Rng& rng, int* exhausted) {
    const int p = static_cast<int>(x.cols());
    const auto& feat = settings.feat;
    const int pop_max = feat.resolved_pop_max(p);
    const std::size_t target = static_cast<std::size_t>(
        std::min(pop_max, pop.generation == 1 ? pop_max : static_cast<int>(pop.features.size())));

    const FilterOutcome f = filter_population(pop, inclusion, settings.probs.filter, feat.keep_min, feat.keep_org, rng);

    Population next;
    next.generation = pop.generation + 1;
    next.discarded = pop.discarded;
    std::unordered_set<std::string> taken;
    for (std::size_t i : f.kept) {
        if (next.features.size() >= target) break;
        next.features.push_back(pop.features[i]);
        next.provenance.push_back(pop.provenance[i]);
        taken.insert(pop.features[i].key());
    }
    std::unordered_set<std::string> discarded_keys;
    for (const auto& d : next.discarded) discarded_keys.insert(d.key());
    for (std::size_t i : f.removed) {
        if (discarded_keys.insert(pop.features[i].key()).second) next.discarded.push_back(pop.features[i]);
    }

    // Reintroducible features: anything discarded so far plus every original covariate.
    std::vector<Feature> pool_all = next.discarded;
    for (int j = settings.fixed; j < p; ++j) {
        Feature leaf = Feature::leaf(static_cast<std::size_t>(j));
        if (!discarded_keys.count(leaf.key())) pool_all.push_back(std::move(leaf));
    }

    std::optional<CollinearityScreen> screen;
    if (feat.check_col) {
        screen.emplace(collinearity_rows(x, feat.col_check_mock_data, rng), transforms);
        for (int j = 0; j < settings.fixed; ++j) screen->add(Feature::leaf(static_cast<std::size_t>(j)));
        for (const auto& k : next.features) screen->add(k);
    }

    GenWeights weights = settings.probs.gen.normalized();
    GenerationLimits limits;
    limits.max_depth = feat.D;
    limits.max_width = feat.L;
    limits.eps = feat.eps;
    limits.max_proj_size = feat.max_proj_size;
    limits.max_retries = feat.max_retries;
    limits.check_col = feat.check_col;
    limits.alpha = feat.alpha;

    while (next.features.size() < target) {
        std::vector<Feature> pool;
        for (const auto& c : pool_all) {
            if (!taken.count(c.key())) pool.push_back(c);
        }
        GenerationRequest req;
        req.pop = pop.features;
        req.probs = inclusion;
        req.mutation_pool = pool;
        req.taken = &taken;
        req.screen = screen ? &*screen : nullptr;
        req.alpha_fit = {&x, &y, &transforms};
        GenOperator op{};
        try {
            Feature nf = generate_feature(req, weights, limits, rng, &op);
            taken.insert(nf.key());
            if (screen) screen->add(nf);
            next.features.push_back(std::move(nf));
            next.provenance.push_back(provenance_of(op));
        } catch (const GenerationExhausted&) {
            if (exhausted) ++*exhausted;
            break;
        }
    }
    if (next.features.empty()) {
        // Nothing survived and nothing could be generated: keep the old population.
        next.features = pop.features;
        next.provenance = pop.provenance;
    }
    return next;
}

namespace {

GenerationRecord run_generation(const Population& pop, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const TransformRegistry& transforms, const GmjSettings& settings, long N, Rng& rng) {
    const DesignContext ctx(y, build_design(x, pop.features, settings.intercept, settings.fixed, transforms),
                            settings.intercept, settings.fixed);
    const Scorer scorer = make_population_scorer(ctx, pop.features, settings.eval);
    ParamsMJ mj = settings.mj;
    const int q = static_cast<int>(pop.features.size());
    auto clamp_q = [q](Neighborhood n) {
        n.size = std::clamp(n.size, 1, std::max(q, 1));
        n.min = std::clamp(n.min, 1, std::max(q, 1));
        n.max = std::clamp(n.max, n.min, std::max(q, 1));
        return n;
    };
    mj.large = clamp_q(mj.large);

    GenerationRecord rec;
    rec.population = pop;
    rec.chain = run_mjmcmc(pop.features.size(), N, settings.probs.mj, mj, scorer, rng);
    rec.inclusion = marginal_inclusion(rec.chain.models, pop.features.size());
    rec.best_crit = rec.chain.best_crit;
    return rec;
}

void validate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GmjSettings& s) {
    if (x.rows() != y.size()) throw std::invalid_argument("covariate rows must match response length");
    if (s.P < 1) throw ConfigError("P must be at least 1");
    if (s.N < 1) throw ConfigError("N must be at least 1");
    if (s.fixed < 0 || s.fixed > x.cols()) throw ConfigError("fixed count out of range");
}

GmjSettings resolve(const GmjSettings& settings, int p) {
    GmjSettings s = settings;
    if (s.eval.p_original <= 0) s.eval.p_original = p;
    if (s.derive_large_neigh) s.mj.large = ParamsMJ::defaults(p).large;
    return s;
}

void finish(GmjResult& out) {
    out.last_generation = static_cast<int>(out.generations.size()) - 1;
    out.best_generation = 0;
    for (std::size_t t = 1; t < out.generations.size(); ++t) {
        if (out.generations[t].best_crit > out.generations[static_cast<std::size_t>(out.best_generation)].best_crit) {
            out.best_generation = static_cast<int>(t);
        }
    }
}

}  // namespace

GmjResult run_gmjmcmc(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TransformRegistry& transforms,
                      const GmjSettings& settings_in, Rng& rng) {
    validate(x, y, settings_in);
    const int p = static_cast<int>(x.cols());
    const GmjSettings settings = resolve(settings_in, p);
    std::vector<double> screening;
    if (settings.feat.prel_filter > 0.0) screening = screening_statistics(x, y);
    Population pop = init_population(p, settings.fixed, settings.feat, screening.empty() ? nullptr : &screening);

    GmjResult out;
    for (int t = 1; t <= settings.P; ++t) {
        const long N = (t == settings.P && settings.N_final > 0) ? settings.N_final : settings.N;
        out.generations.push_back(run_generation(pop, x, y, transforms, settings, N, rng));
        if (t < settings.P) {
            pop = evolve_population(pop, out.generations.back().inclusion, settings, transforms, x, y, rng,
                                    &out.exhausted);
        }
    }
    finish(out);
    return out;
}

GmjResult run_mjmcmc_covariates(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TransformRegistry& transforms,
                                const GmjSettings& settings_in, Rng& rng) {
    validate(x, y, settings_in);
    const GmjSettings settings = resolve(settings_in, static_cast<int>(x.cols()));
    ParamsFeat feat = settings.feat;
    feat.prel_filter = 0.0;
    const Population pop = init_population(static_cast<int>(x.cols()), settings.fixed, feat);
    GmjResult out;
    out.generations.push_back(run_generation(pop, x, y, transforms, settings, settings.N, rng));
    finish(out);
    return out;
}

}  // namespace bgnlm
