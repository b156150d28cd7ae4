#include "bgnlm/mjmcmc.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bgnlm {

// ---------------------------------------------------------------------------
// ModelKey

std::size_t ModelKey::count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

std::size_t ModelKey::hamming(const ModelKey& other) const {
    if (other.q_ != q_) throw std::invalid_argument("model keys differ in length");
    std::size_t c = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) c += static_cast<std::size_t>(std::popcount(words_[i] ^ other.words_[i]));
    return c;
}

std::string ModelKey::to_string() const {
    std::string s(q_, '0');
    for (std::size_t i = 0; i < q_; ++i) {
        if (test(i)) s[i] = '1';
    }
    return s;
}

ModelKey ModelKey::from_string(const std::string& bits) {
    ModelKey k(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') k.set(i);
        else if (bits[i] != '0') throw std::invalid_argument("model bitmask must contain only 0 and 1");
    }
    return k;
}

bool ModelKey::operator<(const ModelKey& o) const {
    if (q_ != o.q_) return q_ < o.q_;
    // Lexicographic in feature order, so sorting matches the bitmask strings.
    for (std::size_t i = 0; i < q_; ++i) {
        const bool a = test(i), b = o.test(i);
        if (a != b) return b;
    }
    return false;
}

std::size_t ModelKey::hash() const {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL ^ q_;
    for (auto w : words_) {
        h ^= w + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
        h *= 0xBF58476D1CE4E5B9ULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 31));
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

template <std::size_t N>
std::array<double, N> normalize_array(std::array<double, N> a, const char* what) {
    double total = 0.0;
    for (double v : a) {
        if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be nonnegative");
        total += v;
    }
    if (total <= 0.0) throw std::invalid_argument(std::string(what) + " sums to zero");
    for (double& v : a) v /= total;
    return a;
}

template <std::size_t N>
std::size_t draw(const std::array<double, N>& w, Rng& rng) {
    return rng.categorical(std::vector<double>(w.begin(), w.end()));
}

}  // namespace

ProbsMJ ProbsMJ::normalized() const {
    if (large < 0.0 || large > 1.0) throw std::invalid_argument("large must lie in [0, 1]");
    ProbsMJ out = *this;
    out.large_kern = normalize_array(large_kern, "large_kern");
    out.localopt_kern = normalize_array(localopt_kern, "localopt_kern");
    out.random_kern = normalize_array(random_kern, "random_kern");
    out.mh = normalize_array(mh, "mh");
    return out;
}

ParamsMJ ParamsMJ::defaults(int p) {
    ParamsMJ out;
    auto part = [p](double frac, int cap) { return std::max(1, std::min(static_cast<int>(std::floor(frac * p)), cap)); };
    out.large = {part(0.35, 35), part(0.25, 25), part(0.45, 45)};
    return out;
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

std::pair<int, int> count_range(const Neighborhood& neigh, std::size_t q) {
    const int qi = static_cast<int>(q);
    const int lo = std::clamp(neigh.min, 1, std::max(qi, 1));
    const int hi = std::clamp(neigh.max, lo, std::max(qi, 1));
    return {lo, hi};
}

void flip_random_positions(ModelKey& key, int count, Rng& rng) {
    const std::size_t q = key.size();
    std::vector<std::size_t> idx(q);
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(std::max(count, 0)), q);
    for (std::size_t i = 0; i < c; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(q) - 1));
        std::swap(idx[i], idx[j]);
        key.flip(idx[i]);
    }
}

std::vector<std::size_t> positions(const ModelKey& key, bool on) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (key.test(i) == on) out.push_back(i);
    }
    return out;
}

// Swaps `count` disjoint (included, excluded) pairs, capped by the smaller side, so a swap
// is never undone by a later one within the same proposal.
void swap_pairs(ModelKey& key, int count, Rng& rng) {
    auto in = positions(key, true);
    auto out = positions(key, false);
    const auto c = std::min({static_cast<std::size_t>(std::max(count, 0)), in.size(), out.size()});
    for (std::size_t s = 0; s < c; ++s) {
        const auto a = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(s), static_cast<std::int64_t>(in.size()) - 1));
        const auto b = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(s), static_cast<std::int64_t>(out.size()) - 1));
        std::swap(in[s], in[a]);
        std::swap(out[s], out[b]);
        key.flip(in[s]);
        key.flip(out[s]);
    }
}

}  // namespace

ModelKey kernel_propose(const ModelKey& key, int type, const Neighborhood& neigh, Rng& rng) {
    ModelKey out = key;
    const std::size_t q = key.size();
    if (q == 0) return out;
    switch (type) {
        case 1: {
            const auto [lo, hi] = count_range(neigh, q);
            flip_random_positions(out, static_cast<int>(rng.uniform_int(lo, hi)), rng);
            break;
        }
        case 2:
            flip_random_positions(out, std::clamp(neigh.size, 1, static_cast<int>(q)), rng);
            break;
        case 3: {
            const auto [lo, hi] = count_range(neigh, q);
            swap_pairs(out, static_cast<int>(rng.uniform_int(lo, hi)), rng);
            break;
        }
        case 4:
            swap_pairs(out, std::max(neigh.size, 1), rng);
            break;
        case 5: {
            const auto excluded = positions(key, false);
            if (!excluded.empty()) out.set(excluded[rng.index(excluded.size())]);
            break;
        }
        case 6: {
            const auto included = positions(key, true);
            if (!included.empty()) out.set(included[rng.index(included.size())], false);
            break;
        }
        default:
            throw std::invalid_argument("kernel type must be 1..6");
    }
    return out;
}

Scorer Scorer::from_crit(std::function<double(const ModelKey&)> crit) {
    Scorer s;
    s.fn = [crit = std::move(crit)](const ModelKey& key, SubsampleState*, Rng&) {
        FitResult r;
        r.crit = crit(key);
        return r;
    };
    return s;
}

// ---------------------------------------------------------------------------
// Local optimizers

LocalOptimum local_optimize_sa(const ModelKey& start, const CritFn& crit, const SaParams& sa, Rng& rng) {
    const auto kern = normalize_array(sa.kern, "sa kern");
    ModelKey current = start;
    double current_crit = crit(current);
    LocalOptimum best{current, current_crit};
    if (!(sa.dt > 1.0)) throw std::invalid_argument("sa dt must exceed 1");
    // Relative slack so that a schedule ending exactly on t_min is not cut short by rounding.
    for (double t = sa.t_init; t >= sa.t_min * (1.0 - 1e-12); t /= sa.dt) {
        for (int i = 0; i < sa.M; ++i) {
            const int type = static_cast<int>(draw(kern, rng)) + 1;
            ModelKey prop = kernel_propose(current, type, sa.neigh, rng);
            const double c = crit(prop);
            const double delta = c - current_crit;
            if (delta >= 0.0 || rng.uniform() < std::exp(delta / t)) {
                current = std::move(prop);
                current_crit = c;
                if (current_crit > best.crit) best = {current, current_crit};
            }
        }
    }
    return best;
}

LocalOptimum local_optimize_greedy(const ModelKey& start, const CritFn& crit, const GreedyParams& greedy, Rng& rng) {
    const auto kern = normalize_array(greedy.kern, "greedy kern");
    LocalOptimum cur{start, crit(start)};
    for (int step = 0; step < greedy.steps; ++step) {
        bool have = false;
        LocalOptimum cand{cur.key, -std::numeric_limits<double>::infinity()};
        for (int t = 0; t < greedy.tries; ++t) {
            const int type = static_cast<int>(draw(kern, rng)) + 1;
            ModelKey prop = kernel_propose(cur.key, type, greedy.neigh, rng);
            const double c = crit(prop);
            if (!have || c > cand.crit) {
                cand = {std::move(prop), c};
                have = true;
            }
        }
        if (!have || !(cand.crit > cur.crit)) break;
        cur = std::move(cand);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Chain

double evaluate_key(ChainState& state, const Scorer& scorer, const ParamsMJ& params, const ModelKey& key) {
    if (params.max_model_size > 0 && key.count() > static_cast<std::size_t>(params.max_model_size)) return kCritFloor;
    auto it = state.cache.find(key);
    if (it != state.cache.end()) {
        ModelRecord& rec = it->second;
        ++rec.visits;
        if (scorer.refresh) {
            FitResult r = scorer.fn(key, rec.warm.get(), state.rng);
            ++state.evaluations;
            rec.crit = std::isfinite(r.crit) ? r.crit : kCritFloor;
            rec.coefs = std::move(r.coefs);
        }
        return rec.crit;
    }
    ModelRecord rec;
    if (scorer.refresh) rec.warm = std::make_shared<SubsampleState>();
    FitResult r = scorer.fn(key, rec.warm.get(), state.rng);
    ++state.evaluations;
    rec.crit = std::isfinite(r.crit) ? r.crit : kCritFloor;
    rec.coefs = std::move(r.coefs);
    rec.visits = 1;
    const double c = rec.crit;
    state.cache.emplace(key, std::move(rec));
    return c;
}

void start_chain(ChainState& state, const Scorer& scorer, const ParamsMJ& params, const ModelKey& start) {
    state.current = start;
    state.current_crit = evaluate_key(state, scorer, params, start);
}

namespace {

double log_randomization_density(const ModelKey& to, const ModelKey& from, double p) {
    const double d = static_cast<double>(to.hamming(from));
    const double q = static_cast<double>(to.size());
    if (p <= 0.0) return d == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return d == q ? 0.0 : -std::numeric_limits<double>::infinity();
    return d * std::log(p) + (q - d) * std::log1p(-p);
}

ModelKey randomize(const ModelKey& key, double p, Rng& rng) {
    ModelKey out = key;
    if (p <= 0.0) return out;
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (rng.bernoulli(p)) out.flip(i);
    }
    return out;
}

/// Probability that the symmetric part of the MH mixture (types 1-4) proposes one specific
/// single-feature change.
double symmetric_single_flip(const ProbsMJ& probs, const Neighborhood& neigh, std::size_t q) {
    const auto [lo, hi] = count_range(neigh, q);
    const double p1 = lo == 1 ? 1.0 / (hi - lo + 1) : 0.0;
    const double p2 = std::clamp(neigh.size, 1, static_cast<int>(q)) == 1 ? 1.0 : 0.0;
    return (probs.mh[0] * p1 + probs.mh[1] * p2) / static_cast<double>(q);
}

void local_mh_step(ChainState& state, const ProbsMJ& probs, const ParamsMJ& params, const Scorer& scorer) {
    const int type = static_cast<int>(draw(probs.mh, state.rng)) + 1;
    ModelKey prop = kernel_propose(state.current, type, params.mh, state.rng);
    ++state.stats.mh_proposed;
    const double c = evaluate_key(state, scorer, params, prop);
    if (prop == state.current) {
        state.current_crit = c;
        ++state.stats.mh_accepted;
        return;
    }
    double log_ratio = c - state.current_crit;
    if (prop.hamming(state.current) == 1) {
        // Additions and deletions are not symmetric; the full mixture density is used.
        const std::size_t q = prop.size();
        const double s1 = symmetric_single_flip(probs, params.mh, q);
        const std::size_t in_cur = state.current.count();
        const bool add = prop.count() > in_cur;
        double fwd, bwd;
        if (add) {
            fwd = s1 + probs.mh[4] / static_cast<double>(q - in_cur);
            bwd = s1 + probs.mh[5] / static_cast<double>(in_cur + 1);
        } else {
            fwd = s1 + probs.mh[5] / static_cast<double>(in_cur);
            bwd = s1 + probs.mh[4] / static_cast<double>(q - in_cur + 1);
        }
        log_ratio += std::log(bwd) - std::log(fwd);
    }
    if (log_ratio >= 0.0 || std::log(state.rng.uniform()) < log_ratio) {
        state.current = std::move(prop);
        state.current_crit = c;
        ++state.stats.mh_accepted;
    }
}

void large_jump_step(ChainState& state, const ProbsMJ& probs, const ParamsMJ& params, const Scorer& scorer) {
    ++state.stats.large_proposed;
    const CritFn crit = [&](const ModelKey& k) { return evaluate_key(state, scorer, params, k); };
    const int type = static_cast<int>(draw(probs.large_kern, state.rng)) + 1;
    const std::size_t optimizer = draw(probs.localopt_kern, state.rng);
    auto optimize = [&](const ModelKey& from) {
        return optimizer == 0 ? local_optimize_sa(from, crit, params.sa, state.rng)
                              : local_optimize_greedy(from, crit, params.greedy, state.rng);
    };

    const ModelKey chi0 = kernel_propose(state.current, type, params.large, state.rng);
    const LocalOptimum forward = optimize(chi0);
    ModelKey proposal = randomize(forward.key, params.random_prob, state.rng);
    const double proposal_crit = crit(proposal);

    const ModelKey back0 = kernel_propose(proposal, type, params.large, state.rng);
    const LocalOptimum backward = optimize(back0);

    // Scores may have been refreshed while optimizing; use the cached value of the current model.
    auto it = state.cache.find(state.current);
    if (it != state.cache.end()) state.current_crit = it->second.crit;

    const double log_ratio = proposal_crit - state.current_crit +
                             log_randomization_density(state.current, backward.key, params.random_prob) -
                             log_randomization_density(proposal, forward.key, params.random_prob);
    if (std::isfinite(log_ratio) || log_ratio > 0.0) {
        if (log_ratio >= 0.0 || std::log(state.rng.uniform()) < log_ratio) {
            state.current = std::move(proposal);
            state.current_crit = proposal_crit;
            ++state.stats.large_accepted;
        }
    }
}

}  // namespace

void mode_jump_step(ChainState& state, const ProbsMJ& probs, const ParamsMJ& params, const Scorer& scorer) {
    if (state.rng.uniform() < probs.large) large_jump_step(state, probs, params, scorer);
    else local_mh_step(state, probs, params, scorer);
    ++state.stats.iterations;
}

ChainResult run_mjmcmc_from(const ModelKey& start, long N, const ProbsMJ& probs_in, const ParamsMJ& params,
                            const Scorer& scorer, Rng& rng) {
    const ProbsMJ probs = probs_in.normalized();
    ChainState state;
    state.rng = rng;
    start_chain(state, scorer, params, start);
    for (long it = 0; it < N; ++it) {
        mode_jump_step(state, probs, params, scorer);
        if (it >= params.burn_in) {
            auto rec = state.cache.find(state.current);
            if (rec != state.cache.end()) ++rec->second.mc_count;
        }
    }
    rng = state.rng;

    ChainResult out;
    out.q = start.size();
    out.stats = state.stats;
    out.models.reserve(state.cache.size());
    for (auto& [k, rec] : state.cache) out.models.emplace_back(k, std::move(rec));
    std::sort(out.models.begin(), out.models.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    out.best_key = out.models.front().first;
    out.best_crit = out.models.front().second.crit;
    for (const auto& [k, rec] : out.models) {
        if (rec.crit > out.best_crit) {
            out.best_crit = rec.crit;
            out.best_key = k;
        }
    }
    return out;
}

ChainResult run_mjmcmc(std::size_t q, long N, const ProbsMJ& probs, const ParamsMJ& params, const Scorer& scorer,
                       Rng& rng) {
    ModelKey start(q);
    for (std::size_t i = 0; i < q; ++i) {
        if (rng.bernoulli(0.5)) start.set(i);
    }
    return run_mjmcmc_from(start, N, probs, params, scorer, rng);
}

std::vector<double> normalize_log_weights(const std::vector<double>& log_weights) {
    std::vector<double> out(log_weights.size(), 0.0);
    if (log_weights.empty()) return out;
    const double m = *std::max_element(log_weights.begin(), log_weights.end());
    double total = 0.0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        out[i] = std::exp(log_weights[i] - m);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

std::vector<double> renormalized_model_posteriors(const std::vector<std::pair<ModelKey, ModelRecord>>& models) {
    std::vector<double> crits;
    crits.reserve(models.size());
    for (const auto& [k, rec] : models) crits.push_back(rec.crit);
    return normalize_log_weights(crits);
}

std::vector<double> marginal_inclusion(const std::vector<std::pair<ModelKey, ModelRecord>>& models, std::size_t q) {
    const auto probs = renormalized_model_posteriors(models);
    std::vector<double> out(q, 0.0);
    for (std::size_t m = 0; m < models.size(); ++m) {
        const auto& key = models[m].first;
        for (std::size_t j = 0; j < q && j < key.size(); ++j) {
            if (key.test(j)) out[j] += probs[m];
        }
    }
    return out;
}

}  // namespace bgnlm
