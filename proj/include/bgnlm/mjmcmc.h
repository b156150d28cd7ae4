#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bgnlm/marginal.h"
#include "bgnlm/rng.h"
#include "bgnlm/subsample.h"

namespace bgnlm {

/// Inclusion indicators over the q selectable features of a population.
class ModelKey {
public:
    ModelKey() = default;
    explicit ModelKey(std::size_t q) : q_(q), words_((q + 63) / 64, 0) {}

    std::size_t size() const { return q_; }
    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1ULL; }
    void set(std::size_t i, bool on = true) {
        if (on) words_[i >> 6] |= 1ULL << (i & 63);
        else words_[i >> 6] &= ~(1ULL << (i & 63));
    }
    void flip(std::size_t i) { words_[i >> 6] ^= 1ULL << (i & 63); }
    std::size_t count() const;
    std::size_t hamming(const ModelKey& other) const;

    /// '1'/'0' per feature, feature 0 first.
    std::string to_string() const;
    static ModelKey from_string(const std::string& bits);

    bool operator==(const ModelKey& o) const { return q_ == o.q_ && words_ == o.words_; }
    bool operator<(const ModelKey& o) const;
    std::size_t hash() const;

private:
    std::size_t q_ = 0;
    std::vector<std::uint64_t> words_;
};

struct ModelKeyHash {
    std::size_t operator()(const ModelKey& k) const { return k.hash(); }
};

struct Neighborhood {
    int size = 1;
    int min = 1;
    int max = 2;
};

struct ProbsMJ {
    double large = 0.05;
    std::array<double, 4> large_kern{0.0, 0.0, 0.0, 1.0};
    std::array<double, 2> localopt_kern{0.5, 0.5};
    std::array<double, 4> random_kern{0.5, 0.5, 0.0, 0.0};
    std::array<double, 6> mh{0.2, 0.2, 0.2, 0.2, 0.1, 0.1};

    /// Copy with every vector rescaled to sum to one. Throws std::invalid_argument.
    ProbsMJ normalized() const;
};

struct SaParams {
    double t_init = 10.0;
    double t_min = 1e-4;
    double dt = 3.0;
    int M = 12;
    std::array<double, 6> kern{0.1, 0.05, 0.2, 0.3, 0.2, 0.15};
    Neighborhood neigh;
};

struct GreedyParams {
    int steps = 20;
    int tries = 3;
    std::array<double, 6> kern{0.1, 0.05, 0.2, 0.3, 0.2, 0.15};
    Neighborhood neigh;
};

struct ParamsMJ {
    int burn_in = 100;
    Neighborhood mh;
    Neighborhood large{35, 25, 45};
    double random_prob = 0.01;
    SaParams sa;
    GreedyParams greedy;
    int max_model_size = 0;  // 0 = unlimited; larger models are scored at the floor

    /// Defaults for p covariates: large neighbourhoods floor(0.35p)<=35, floor(0.25p)<=25,
    /// floor(0.45p)<=45, each at least 1.
    static ParamsMJ defaults(int p);
};

/// Proposal kernels. Types 1-4 are random flips / swaps with a random or fixed neighbourhood
/// size, 5 adds and 6 removes one feature. Degenerate proposals return the key unchanged.
ModelKey kernel_propose(const ModelKey& key, int type, const Neighborhood& neigh, Rng& rng);

struct ModelRecord {
    double crit = kCritFloor;
    Eigen::VectorXd coefs;
    int visits = 0;     // number of evaluations requested for this key
    long mc_count = 0;  // post-burn-in iterations spent in this model
    std::shared_ptr<SubsampleState> warm;
};

using ModelCache = std::unordered_map<ModelKey, ModelRecord, ModelKeyHash>;

/// Scores a key. `warm` is non-null only in refresh mode and carries estimator state.
struct Scorer {
    std::function<FitResult(const ModelKey&, SubsampleState*, Rng&)> fn;
    bool refresh = false;  // re-score cached keys on every revisit

    static Scorer from_crit(std::function<double(const ModelKey&)> crit);
};

using CritFn = std::function<double(const ModelKey&)>;

struct LocalOptimum {
    ModelKey key;
    double crit;
};

LocalOptimum local_optimize_sa(const ModelKey& start, const CritFn& crit, const SaParams& sa, Rng& rng);
LocalOptimum local_optimize_greedy(const ModelKey& start, const CritFn& crit, const GreedyParams& greedy, Rng& rng);

struct ChainStats {
    long iterations = 0;
    long mh_proposed = 0;
    long mh_accepted = 0;
    long large_proposed = 0;
    long large_accepted = 0;
};

struct ChainState {
    ModelKey current;
    double current_crit = kCritFloor;
    ModelCache cache;
    Rng rng;
    ChainStats stats;
    long evaluations = 0;
};

/// Cache-aware scoring: a key is scored once (or refreshed on revisit in refresh mode).
double evaluate_key(ChainState& state, const Scorer& scorer, const ParamsMJ& params, const ModelKey& key);

/// Initializes the chain at `start`.
void start_chain(ChainState& state, const Scorer& scorer, const ParamsMJ& params, const ModelKey& start);

/// One iteration: a local Metropolis-Hastings move, or with probability probs.large a mode jump
/// (large move, local optimization, randomization, and a mirrored backward path).
void mode_jump_step(ChainState& state, const ProbsMJ& probs, const ParamsMJ& params, const Scorer& scorer);

struct ChainResult {
    std::size_t q = 0;
    std::vector<std::pair<ModelKey, ModelRecord>> models;  // sorted by key
    ModelKey best_key;
    double best_crit = kCritFloor;
    ChainStats stats;
};

/// N iterations from a uniformly random start.
ChainResult run_mjmcmc(std::size_t q, long N, const ProbsMJ& probs, const ParamsMJ& params, const Scorer& scorer,
                       Rng& rng);

/// Same, from a given start.
ChainResult run_mjmcmc_from(const ModelKey& start, long N, const ProbsMJ& probs, const ParamsMJ& params,
                            const Scorer& scorer, Rng& rng);

/// exp(crit - max) normalized over all cached models, aligned with `models`.
std::vector<double> renormalized_model_posteriors(const std::vector<std::pair<ModelKey, ModelRecord>>& models);

/// Sum of model probabilities over models including feature j.
std::vector<double> marginal_inclusion(const std::vector<std::pair<ModelKey, ModelRecord>>& models, std::size_t q);

/// Log-sum-exp normalization of arbitrary log weights.
std::vector<double> normalize_log_weights(const std::vector<double>& log_weights);

}  // namespace bgnlm
