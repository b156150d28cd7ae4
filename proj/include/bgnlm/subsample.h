#pragma once

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bgnlm/marginal.h"
#include "bgnlm/rng.h"

namespace bgnlm {

/// Schedule of the subsampled logistic estimator.
struct SubsampleParams {
    double fraction = 0.05;
    int irls_steps = 20;
    int sgd_steps = 250;
    double learning_rate = 1e-3;
    double decay = 0.99;

    /// Reads "subs", "irls_steps", "sgd_steps", "lr" and "decay" from params.extra.
    static SubsampleParams from(const EvaluatorParams& params);
};

/// Per-model state carried between visits of the same model within one chain.
struct SubsampleState {
    Eigen::VectorXd current;       // latest iterate
    Eigen::VectorXd average_sum;   // running sum of averaged Newton estimates
    double average_count = 0.0;
    Eigen::VectorXd best;          // coefficients with the smallest full-data deviance so far
    double best_deviance = std::numeric_limits<double>::infinity();
    int rank = -1;
    int visits = 0;
};

/// Binomial log posterior from subsampled fitting. The first visit runs subsampled IRLS
/// followed by SGD; later visits refine the warm state with more averaged subsample Newton
/// steps. The reported crit is a BIC value at the best coefficients found so far, judged by
/// the full-data deviance, so it never decreases across visits.
FitResult evaluate_model_subsampled(const DesignContext& ctx, const std::vector<bool>& model,
                                    std::span<const Complexity> complexities, const EvaluatorParams& params,
                                    const SubsampleParams& schedule, SubsampleState& state, Rng& rng);

}  // namespace bgnlm
