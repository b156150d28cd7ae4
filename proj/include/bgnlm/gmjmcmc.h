#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bgnlm/feature.h"
#include "bgnlm/feature_gen.h"
#include "bgnlm/marginal.h"
#include "bgnlm/mjmcmc.h"
#include "bgnlm/rng.h"
#include "bgnlm/transforms.h"

namespace bgnlm {

struct ParamsFeat {
    int D = 5;
    int L = 15;
    AlphaStrategy alpha = AlphaStrategy::Unit;
    int pop_max = 0;  // 0 selects min(floor(1.5 p), 100)
    bool keep_org = false;
    double prel_filter = 0.0;
    std::vector<int> prel_select;  // 0-based covariate indices; empty = all
    double keep_min = 0.8;
    double eps = 0.05;
    bool check_col = true;
    bool col_check_mock_data = false;
    int max_proj_size = 15;
    int max_retries = 100;

    int resolved_pop_max(int p) const;
};

struct ProbsGMJ {
    ProbsMJ mj;
    double filter = 0.6;
    GenWeights gen;
};

enum class Provenance { Original, Interaction, Modification, Projection, Mutation };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct Population {
    int generation = 1;
    std::vector<Feature> features;
    std::vector<Provenance> provenance;
    std::vector<Feature> discarded;  // removed in earlier generations
};

struct GmjSettings {
    int P = 10;
    long N = 100;
    long N_final = 0;  // 0 selects N
    ProbsGMJ probs;
    ParamsMJ mj;
    bool derive_large_neigh = true;  // replace mj.large by the defaults for p covariates
    ParamsFeat feat;
    EvaluatorParams eval;
    bool intercept = true;
    int fixed = 0;  // leading covariates always included and never part of the population
};

struct GenerationRecord {
    Population population;
    ChainResult chain;
    std::vector<double> inclusion;  // aligned with population.features
    double best_crit = kCritFloor;
};

struct GmjResult {
    std::vector<GenerationRecord> generations;
    int best_generation = 0;  // 0-based
    int last_generation = 0;
    int exhausted = 0;        // refills cut short by GenerationExhausted

    std::vector<double> best_crit_series() const;
};

/// Absolute Pearson correlation of each covariate with y (0 for constant columns).
std::vector<double> screening_statistics(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Generation-1 population: leaves of prel_select (or all non-fixed covariates), screened by
/// prel_filter when positive. Throws EmptyInitialPopulation.
Population init_population(int p, int fixed, const ParamsFeat& feat, const std::vector<double>* screening = nullptr);

struct FilterOutcome {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> removed;
};

/// Keeps features with probability >= filter; others are visited in random order and
/// removed with probability 1 - p while at least ceil(keep_min * |pop|) features remain.
FilterOutcome filter_population(const Population& pop, const std::vector<double>& probs, double filter,
                                double keep_min, bool keep_org, Rng& rng);

/// Builds the design matrix [1][fixed covariates][features].
Eigen::MatrixXd build_design(const Eigen::MatrixXd& x, const std::vector<Feature>& features, bool intercept,
                             int fixed, const TransformRegistry& transforms);

/// Scorer for one population: maps a key over the features to the full model vector.
Scorer make_population_scorer(const DesignContext& ctx, const std::vector<Feature>& features,
                              const EvaluatorParams& params);

/// Filter, then refill with newly generated features. The target size is pop_max after the
/// first generation and the previous size afterwards.
Population evolve_population(const Population& pop, const std::vector<double>& inclusion, const GmjSettings& settings,
                             const TransformRegistry& transforms, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             Rng& rng, int* exhausted = nullptr);

GmjResult run_gmjmcmc(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TransformRegistry& transforms,
                      const GmjSettings& settings, Rng& rng);

/// Plain MJMCMC over all covariates, packaged as a one-generation result.
GmjResult run_mjmcmc_covariates(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TransformRegistry& transforms,
                                const GmjSettings& settings, Rng& rng);

}  // namespace bgnlm
