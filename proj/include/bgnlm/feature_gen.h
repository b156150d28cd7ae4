#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "bgnlm/feature.h"
#include "bgnlm/rng.h"
#include "bgnlm/transforms.h"

namespace bgnlm {

enum class GenOperator { Interaction = 0, Modification = 1, Projection = 2, Mutation = 3 };

const char* to_string(GenOperator op);

/// Operator probabilities (interaction, modification, projection, mutation) and the
/// distribution over transform names used by modification and projection.
struct GenWeights {
    std::array<double, 4> gen{0.25, 0.25, 0.25, 0.25};
    std::vector<std::string> transforms;
    std::vector<double> trans_weights;  // empty = uniform over transforms

    /// Copy with gen and trans_weights rescaled to sum to one. Throws std::invalid_argument
    /// on negative entries or an all-zero gen vector.
    GenWeights normalized() const;
};

enum class AlphaStrategy { Unit, Deep, Random };

const char* to_string(AlphaStrategy s);
AlphaStrategy alpha_strategy_from_string(const std::string& s);

struct GenerationLimits {
    int max_depth = 5;         // D
    int max_width = 15;        // L, leaves per feature
    double eps = 0.05;         // parents below this inclusion probability are not used
    int max_proj_size = 15;
    int max_retries = 100;
    bool check_col = true;
    AlphaStrategy alpha = AlphaStrategy::Unit;
};

/// Data a projection needs when its alphas are fitted ("deep").
struct AlphaFitData {
    const Eigen::MatrixXd* data = nullptr;
    const Eigen::VectorXd* y = nullptr;
    const TransformRegistry* transforms = nullptr;
};

Feature gen_interaction(std::span<const Feature> pop, std::span<const double> probs, double eps, Rng& rng);

Feature gen_modification(std::span<const Feature> pop, std::span<const double> probs, double eps,
                         const GenWeights& weights, Rng& rng);

Feature gen_projection(std::span<const Feature> pop, std::span<const double> probs, double eps,
                       const GenWeights& weights, AlphaStrategy strategy, int max_proj_size,
                       const AlphaFitData& fit, Rng& rng);

/// Uniform draw from the pool of reintroducible features. Throws NoEligibleParent when empty.
Feature gen_mutation(std::span<const Feature> pool, Rng& rng);

/// Rows used to screen candidates for collinearity: up to 1000 rows of the real data
/// (a random subsample when larger) or, with `mock`, standard normal synthetic rows.
Eigen::MatrixXd collinearity_rows(const Eigen::MatrixXd& data, bool mock, Rng& rng);

/// True when the candidate's column is constant or has |Pearson correlation| >= 1 - 1e-8
/// with any column already in `existing`.
bool is_collinear(const Eigen::VectorXd& candidate, std::span<const Eigen::VectorXd> existing);

/// Convenience form evaluating the features on `rows`.
bool check_collinearity(const Feature& candidate, std::span<const Feature> pop, const Eigen::MatrixXd& rows,
                        const TransformRegistry& transforms);

/// Incrementally maintained screening state for one population update.
class CollinearityScreen {
public:
    CollinearityScreen(Eigen::MatrixXd rows, const TransformRegistry& transforms)
        : rows_(std::move(rows)), transforms_(&transforms) {}

    bool collinear(const Feature& candidate) const;
    void add(const Feature& feature);
    const Eigen::MatrixXd& rows() const { return rows_; }

private:
    Eigen::MatrixXd rows_;
    const TransformRegistry* transforms_;
    std::vector<Eigen::VectorXd> columns_;
};

/// Everything generate_feature needs besides the parent population.
struct GenerationRequest {
    std::span<const Feature> pop;
    std::span<const double> probs;
    std::span<const Feature> mutation_pool;     // reintroducible features not currently present
    const std::unordered_set<std::string>* taken = nullptr;  // keys that would be duplicates
    CollinearityScreen* screen = nullptr;       // null disables the collinearity check
    AlphaFitData alpha_fit;
};

/// Draws an operator from `weights.gen`, builds a candidate and rejects it if it breaks the
/// depth/width caps, duplicates a taken key or is collinear. Throws GenerationExhausted after
/// `limits.max_retries` rejected attempts.
Feature generate_feature(const GenerationRequest& request, const GenWeights& weights,
                         const GenerationLimits& limits, Rng& rng, GenOperator* used = nullptr);

/// Nelder-Mead fit of (alpha0, weights) maximizing the Gaussian likelihood of y regressed on
/// the single projected column. Starts from `start`; at most `max_iter` iterations.
std::vector<double> fit_projection_alphas(const std::string& transform, std::span<const Feature> children,
                                          std::vector<double> start, const AlphaFitData& fit,
                                          int max_iter = 200);

}  // namespace bgnlm
