#include "bgnlm/feature_gen.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bgnlm/errors.h"

namespace bgnlm {

const char* to_string(GenOperator op) {
    switch (op) {
        case GenOperator::Interaction: return "interaction";
        case GenOperator::Modification: return "modification";
        case GenOperator::Projection: return "projection";
        case GenOperator::Mutation: return "mutation";
    }
    return "?";
}

const char* to_string(AlphaStrategy s) {
    switch (s) {
        case AlphaStrategy::Unit: return "unit";
        case AlphaStrategy::Deep: return "deep";
        case AlphaStrategy::Random: return "random";
    }
    return "?";
}

AlphaStrategy alpha_strategy_from_string(const std::string& s) {
    if (s == "unit") return AlphaStrategy::Unit;
    if (s == "deep") return AlphaStrategy::Deep;
    if (s == "random") return AlphaStrategy::Random;
    throw std::invalid_argument("unknown alpha strategy '" + s + "'");
}

GenWeights GenWeights::normalized() const {
    GenWeights out = *this;
    double total = 0.0;
    for (double g : gen) {
        if (g < 0.0 || !std::isfinite(g)) throw std::invalid_argument("operator probabilities must be nonnegative");
        total += g;
    }
    if (total <= 0.0) throw std::invalid_argument("operator probabilities sum to zero");
    for (double& g : out.gen) g /= total;

    if (out.trans_weights.empty()) {
        out.trans_weights.assign(out.transforms.size(), out.transforms.empty() ? 0.0 : 1.0 / static_cast<double>(out.transforms.size()));
    } else {
        if (out.trans_weights.size() != out.transforms.size()) {
            throw std::invalid_argument("trans_weights must align with transforms");
        }
        double t = 0.0;
        for (double w : out.trans_weights) {
            if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("transform weights must be nonnegative");
            t += w;
        }
        if (t <= 0.0) throw std::invalid_argument("transform weights sum to zero");
        for (double& w : out.trans_weights) w /= t;
    }
    return out;
}

namespace {

std::vector<std::size_t> eligible_parents(std::span<const double> probs, double eps) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] >= eps) idx.push_back(i);
    }
    return idx;
}

std::size_t pick_parent(const std::vector<std::size_t>& eligible, std::span<const double> probs, Rng& rng) {
    std::vector<double> w;
    w.reserve(eligible.size());
    for (auto i : eligible) w.push_back(probs[i]);
    return eligible[rng.categorical(w)];
}

const std::string& pick_transform(const GenWeights& weights, Rng& rng) {
    if (weights.transforms.empty()) throw NoEligibleParent("no transforms available");
    if (weights.trans_weights.empty()) return weights.transforms[rng.index(weights.transforms.size())];
    return weights.transforms[rng.categorical(weights.trans_weights)];
}

void check_aligned(std::span<const Feature> pop, std::span<const double> probs) {
    if (pop.size() != probs.size()) throw std::invalid_argument("inclusion probabilities must align with population");
}

}  // namespace

Feature gen_interaction(std::span<const Feature> pop, std::span<const double> probs, double eps, Rng& rng) {
    check_aligned(pop, probs);
    const auto eligible = eligible_parents(probs, eps);
    if (eligible.empty()) throw NoEligibleParent("no feature reaches the parent threshold");
    const std::size_t a = pick_parent(eligible, probs, rng);
    const std::size_t b = pick_parent(eligible, probs, rng);
    return Feature::interaction(pop[a], pop[b]);
}

Feature gen_modification(std::span<const Feature> pop, std::span<const double> probs, double eps,
                         const GenWeights& weights, Rng& rng) {
    check_aligned(pop, probs);
    const auto eligible = eligible_parents(probs, eps);
    if (eligible.empty()) throw NoEligibleParent("no feature reaches the parent threshold");
    const std::size_t a = pick_parent(eligible, probs, rng);
    return Feature::modification(pick_transform(weights, rng), pop[a]);
}

Feature gen_projection(std::span<const Feature> pop, std::span<const double> probs, double eps,
                       const GenWeights& weights, AlphaStrategy strategy, int max_proj_size,
                       const AlphaFitData& fit, Rng& rng) {
    check_aligned(pop, probs);
    auto eligible = eligible_parents(probs, eps);
    if (eligible.empty()) throw NoEligibleParent("no feature reaches the parent threshold");
    const std::size_t cap = std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(std::max(1, max_proj_size)));
    const std::size_t count = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(cap)));

    std::vector<Feature> children;
    children.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t slot = [&] {
            std::vector<double> w;
            for (auto i : eligible) w.push_back(probs[i]);
            return rng.categorical(w);
        }();
        children.push_back(pop[eligible[slot]]);
        eligible.erase(eligible.begin() + static_cast<std::ptrdiff_t>(slot));
    }
    const std::string& transform = pick_transform(weights, rng);

    std::vector<double> alphas(count + 1, 1.0);
    switch (strategy) {
        case AlphaStrategy::Unit:
            break;
        case AlphaStrategy::Random:
            for (double& a : alphas) a = rng.normal();
            break;
        case AlphaStrategy::Deep:
            alphas = fit_projection_alphas(transform, children, alphas, fit);
            break;
    }
    std::vector<double> w(alphas.begin() + 1, alphas.end());
    return Feature::projection(transform, alphas[0], std::move(w), std::move(children));
}

Feature gen_mutation(std::span<const Feature> pool, Rng& rng) {
    if (pool.empty()) throw NoEligibleParent("mutation pool is empty");
    return pool[rng.index(pool.size())];
}

Eigen::MatrixXd collinearity_rows(const Eigen::MatrixXd& data, bool mock, Rng& rng) {
    constexpr Eigen::Index kMaxRows = 1000;
    const Eigen::Index rows = std::min<Eigen::Index>(data.rows(), kMaxRows);
    if (mock) {
        Eigen::MatrixXd out(kMaxRows, data.cols());
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = rng.normal();
        return out;
    }
    if (data.rows() <= kMaxRows) return data;
    // Partial Fisher-Yates for a uniform subsample without replacement, kept in row order.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(data.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i, data.rows() - 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + rows);
    Eigen::MatrixXd out(rows, data.cols());
    for (Eigen::Index i = 0; i < rows; ++i) out.row(i) = data.row(idx[static_cast<std::size_t>(i)]);
    return out;
}

namespace {

constexpr double kCollinearTol = 1e-8;

bool is_constant(const Eigen::VectorXd& v) {
    if (v.size() == 0) return true;
    const double lo = v.minCoeff();
    const double hi = v.maxCoeff();
    const double scale = std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    return (hi - lo) <= 1e-12 * scale;
}

}  // namespace

bool is_collinear(const Eigen::VectorXd& candidate, std::span<const Eigen::VectorXd> existing) {
    if (is_constant(candidate)) return true;
    const Eigen::VectorXd c = candidate.array() - candidate.mean();
    const double cn = c.norm();
    if (!(cn > 0.0) || !std::isfinite(cn)) return true;
    for (const auto& col : existing) {
        if (col.size() != candidate.size()) throw std::invalid_argument("collinearity columns differ in length");
        const Eigen::VectorXd e = col.array() - col.mean();
        const double en = e.norm();
        if (!(en > 0.0)) continue;
        const double corr = c.dot(e) / (cn * en);
        if (std::abs(corr) >= 1.0 - kCollinearTol) return true;
    }
    return false;
}

bool check_collinearity(const Feature& candidate, std::span<const Feature> pop, const Eigen::MatrixXd& rows,
                        const TransformRegistry& transforms) {
    std::vector<Eigen::VectorXd> cols;
    cols.reserve(pop.size());
    for (const auto& f : pop) cols.push_back(f.evaluate(rows, transforms));
    return is_collinear(candidate.evaluate(rows, transforms), cols);
}

bool CollinearityScreen::collinear(const Feature& candidate) const {
    return is_collinear(candidate.evaluate(rows_, *transforms_), columns_);
}

void CollinearityScreen::add(const Feature& feature) { columns_.push_back(feature.evaluate(rows_, *transforms_)); }

Feature generate_feature(const GenerationRequest& request, const GenWeights& weights,
                         const GenerationLimits& limits, Rng& rng, GenOperator* used) {
    const std::vector<double> gen(weights.gen.begin(), weights.gen.end());
    for (int attempt = 0; attempt < limits.max_retries; ++attempt) {
        const auto op = static_cast<GenOperator>(rng.categorical(gen));
        std::optional<Feature> candidate;
        try {
            switch (op) {
                case GenOperator::Interaction:
                    candidate = gen_interaction(request.pop, request.probs, limits.eps, rng);
                    break;
                case GenOperator::Modification:
                    candidate = gen_modification(request.pop, request.probs, limits.eps, weights, rng);
                    break;
                case GenOperator::Projection:
                    candidate = gen_projection(request.pop, request.probs, limits.eps, weights, limits.alpha,
                                               limits.max_proj_size, request.alpha_fit, rng);
                    break;
                case GenOperator::Mutation:
                    candidate = gen_mutation(request.mutation_pool, rng);
                    break;
            }
        } catch (const NoEligibleParent&) {
            continue;
        }
        const Complexity& c = candidate->complexity();
        if (c.depth > limits.max_depth || c.width > limits.max_width) continue;
        if (request.taken && request.taken->count(candidate->key())) continue;
        if (limits.check_col && request.screen && request.screen->collinear(*candidate)) continue;
        if (used) *used = op;
        return *candidate;
    }
    throw GenerationExhausted("no admissible feature after " + std::to_string(limits.max_retries) + " attempts");
}

// ---------------------------------------------------------------------------

namespace {

/// Residual sum of squares of y regressed on [1, column].
double simple_rss(const Eigen::VectorXd& y, const Eigen::VectorXd& x) {
    const double xm = x.mean();
    const double ym = y.mean();
    const Eigen::VectorXd xc = x.array() - xm;
    const Eigen::VectorXd yc = y.array() - ym;
    const double sxx = xc.squaredNorm();
    const double syy = yc.squaredNorm();
    if (!(sxx > 1e-300)) return syy;
    const double sxy = xc.dot(yc);
    return std::max(0.0, syy - sxy * sxy / sxx);
}

template <class F>
std::vector<double> nelder_mead(F&& objective, std::vector<double> start, int max_iter) {
    const std::size_t d = start.size();
    std::vector<std::vector<double>> simplex(d + 1, start);
    for (std::size_t i = 0; i < d; ++i) simplex[i + 1][i] += (start[i] != 0.0 ? 0.5 * std::abs(start[i]) : 0.5);
    std::vector<double> values(d + 1);
    for (std::size_t i = 0; i <= d; ++i) values[i] = objective(simplex[i]);

    std::vector<std::size_t> order(d + 1);
    for (int iter = 0; iter < max_iter; ++iter) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[d - (d > 0 ? 1 : 0)];
        if (std::abs(values[worst] - values[best]) <= 1e-10 * (std::abs(values[best]) + 1e-10)) break;

        std::vector<double> centroid(d, 0.0);
        for (std::size_t k = 0; k < d; ++k) {
            const auto& v = simplex[order[k]];
            for (std::size_t i = 0; i < d; ++i) centroid[i] += v[i] / static_cast<double>(d);
        }
        auto along = [&](double t) {
            std::vector<double> p(d);
            for (std::size_t i = 0; i < d; ++i) p[i] = centroid[i] + t * (simplex[worst][i] - centroid[i]);
            return p;
        };
        auto reflected = along(-1.0);
        const double fr = objective(reflected);
        if (fr < values[best]) {
            auto expanded = along(-2.0);
            const double fe = objective(expanded);
            if (fe < fr) { simplex[worst] = expanded; values[worst] = fe; }
            else { simplex[worst] = reflected; values[worst] = fr; }
        } else if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            auto contracted = along(fr < values[worst] ? -0.5 : 0.5);
            const double fc = objective(contracted);
            if (fc < std::min(fr, values[worst])) {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                for (std::size_t k = 1; k <= d; ++k) {
                    auto& v = simplex[order[k]];
                    for (std::size_t i = 0; i < d; ++i) v[i] = simplex[best][i] + 0.5 * (v[i] - simplex[best][i]);
                    values[order[k]] = objective(v);
                }
            }
        }
    }
    const auto it = std::min_element(values.begin(), values.end());
    return simplex[static_cast<std::size_t>(it - values.begin())];
}

}  // namespace

std::vector<double> fit_projection_alphas(const std::string& transform, std::span<const Feature> children,
                                          std::vector<double> start, const AlphaFitData& fit, int max_iter) {
    if (!fit.data || !fit.y || !fit.transforms) return start;
    const auto& fn = fit.transforms->get(transform).fn;
    std::vector<Eigen::VectorXd> cols;
    cols.reserve(children.size());
    for (const auto& c : children) cols.push_back(c.evaluate(*fit.data, *fit.transforms));
    const Eigen::VectorXd& y = *fit.y;

    auto objective = [&](const std::vector<double>& a) {
        Eigen::VectorXd lin = Eigen::VectorXd::Constant(y.size(), a[0]);
        for (std::size_t i = 0; i < cols.size(); ++i) lin += a[i + 1] * cols[i];
        Eigen::VectorXd out = lin.unaryExpr([&fn](double v) { double r = fn(v); return std::isfinite(r) ? r : 0.0; });
        return simple_rss(y, out);
    };
    auto best = nelder_mead(objective, std::move(start), max_iter);
    for (double& a : best) {
        if (!std::isfinite(a)) a = 1.0;
    }
    return best;
}

}  // namespace bgnlm
