#include "bgnlm/results.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "bgnlm/errors.h"
#include "bgnlm/mjmcmc.h"

namespace bgnlm {

const char* to_string(PopSelector s) {
    switch (s) {
        case PopSelector::Best: return "best";
        case PopSelector::Last: return "last";
        case PopSelector::All: return "all";
    }
    return "?";
}

PopSelector pop_selector_from_string(const std::string& s) {
    if (s == "best") return PopSelector::Best;
    if (s == "last") return PopSelector::Last;
    if (s == "all") return PopSelector::All;
    throw ConfigError("unknown population selector '" + s + "'");
}

std::string model_signature(std::span<const Feature> features) {
    std::vector<std::string> keys;
    keys.reserve(features.size());
    for (const auto& f : features) keys.push_back(f.key());
    std::sort(keys.begin(), keys.end());
    std::string out;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (i) out += ';';
        out += keys[i];
    }
    return out;
}

MergedResult merge_runs(std::span<const GmjResult> runs, PopSelector selector, bool intercept, int fixed) {
    MergedResult out;
    out.intercept = intercept;
    out.fixed = fixed;
    std::map<std::string, MergedModel> by_signature;

    for (std::size_t r = 0; r < runs.size(); ++r) {
        const GmjResult& run = runs[r];
        out.best_crit_series.push_back(run.best_crit_series());
        std::vector<int> gens;
        switch (selector) {
            case PopSelector::Best: gens.push_back(run.best_generation); break;
            case PopSelector::Last: gens.push_back(run.last_generation); break;
            case PopSelector::All:
                for (int t = 0; t < static_cast<int>(run.generations.size()); ++t) gens.push_back(t);
                break;
        }
        for (int t : gens) {
            if (t < 0 || t >= static_cast<int>(run.generations.size())) continue;
            const GenerationRecord& g = run.generations[static_cast<std::size_t>(t)];
            for (const auto& [key, rec] : g.chain.models) {
                MergedModel m;
                for (std::size_t j = 0; j < key.size(); ++j) {
                    if (key.test(j)) m.features.push_back(g.population.features[j]);
                }
                m.signature = model_signature(m.features);
                m.coefs = rec.coefs;
                m.crit = rec.crit;
                m.run = static_cast<int>(r);
                m.generation = t;
                auto it = by_signature.find(m.signature);
                if (it == by_signature.end()) {
                    by_signature.emplace(m.signature, std::move(m));
                } else if (m.crit > it->second.crit) {
                    it->second = std::move(m);
                }
            }
        }
    }

    std::vector<double> crits;
    for (auto& [sig, m] : by_signature) {
        crits.push_back(m.crit);
        out.models.push_back(std::move(m));
    }
    const auto probs = normalize_log_weights(crits);
    std::map<std::string, FeatureInclusion> incl;
    for (std::size_t i = 0; i < out.models.size(); ++i) {
        out.models[i].prob = probs[i];
        for (const auto& f : out.models[i].features) {
            auto [it, inserted] = incl.try_emplace(f.key(), FeatureInclusion{f.key(), f, 0.0});
            it->second.prob += probs[i];
        }
    }
    for (auto& [k, v] : incl) {
        v.prob = std::min(v.prob, 1.0);
        out.features.push_back(std::move(v));
    }
    return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double level) {
    if (values.empty()) throw std::invalid_argument("weighted quantile of an empty set");
    if (values.size() != weights.size()) throw std::invalid_argument("values and weights differ in length");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double cum = 0.0;
    for (std::size_t i : order) {
        cum += weights[i] / total;
        if (cum >= level - 1e-12) return values[i];
    }
    return values[order.back()];
}

Summary summarize(const MergedResult& merged, double tol, std::span<const std::string> labels,
                  std::span<const double> effect_levels) {
    Summary s;
    s.levels.assign(effect_levels.begin(), effect_levels.end());
    for (const auto& m : merged.models) s.best_crit = std::max(s.best_crit, m.crit);

    const int forced = (merged.intercept ? 1 : 0) + merged.fixed;
    std::vector<double> weights;
    for (const auto& m : merged.models) weights.push_back(m.prob);

    auto effects_for = [&](const std::string& key) {
        std::vector<double> coefs;
        coefs.reserve(merged.models.size());
        for (const auto& m : merged.models) {
            double c = 0.0;
            for (std::size_t j = 0; j < m.features.size(); ++j) {
                if (m.features[j].key() == key) {
                    c = m.coefs(forced + static_cast<Eigen::Index>(j));
                    break;
                }
            }
            coefs.push_back(c);
        }
        std::vector<double> out;
        for (double level : s.levels) out.push_back(weighted_quantile(coefs, weights, level));
        return out;
    };

    for (const auto& f : merged.features) {
        if (f.prob < tol) continue;
        SummaryRow row;
        row.key = f.key;
        row.feature = labels.empty() ? f.key : f.feature.render(labels);
        row.prob = f.prob;
        if (!s.levels.empty()) row.effects = effects_for(f.key);
        s.rows.push_back(std::move(row));
    }
    std::stable_sort(s.rows.begin(), s.rows.end(), [](const auto& a, const auto& b) { return a.prob > b.prob; });

    if (merged.intercept && !s.levels.empty() && !merged.models.empty()) {
        std::vector<double> b0;
        for (const auto& m : merged.models) b0.push_back(m.coefs.size() ? m.coefs(0) : 0.0);
        for (double level : s.levels) s.intercept_effects.push_back(weighted_quantile(b0, weights, level));
    }
    return s;
}

const MergedModel& best_model(const MergedResult& merged) {
    if (merged.models.empty()) throw std::invalid_argument("no models to choose from");
    const MergedModel* best = &merged.models.front();
    for (const auto& m : merged.models) {
        if (m.crit > best->crit || (m.crit == best->crit && m.signature < best->signature)) best = &m;
    }
    return *best;
}

MergedModel mpm_model(const MergedResult& merged, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const TransformRegistry& transforms, const EvaluatorParams& params) {
    MergedModel m;
    for (const auto& f : merged.features) {
        if (f.prob > 0.5) m.features.push_back(f.feature);
    }
    m.signature = model_signature(m.features);
    const DesignContext ctx(y, build_design(x, m.features, merged.intercept, merged.fixed, transforms), merged.intercept,
                            merged.fixed);
    std::vector<bool> model(static_cast<std::size_t>(ctx.cols()), true);
    std::vector<Complexity> complexity;
    for (const auto& f : m.features) complexity.push_back(f.complexity());
    EvaluatorParams p = params;
    if (p.p_original <= 0) p.p_original = static_cast<int>(x.cols());
    const FitResult fit = evaluate_model(ctx, model, complexity, p);
    m.coefs = fit.coefs;
    m.crit = fit.crit;
    m.prob = 1.0;
    return m;
}

Eigen::VectorXd predict_model(const MergedModel& model, const Eigen::MatrixXd& x, const TransformRegistry& transforms,
                              bool intercept, int fixed, Family link) {
    for (const auto& f : model.features) {
        if (f.max_covariate() >= static_cast<std::size_t>(x.cols())) {
            throw MissingCovariate("new data lacks covariate " + std::to_string(f.max_covariate() + 1));
        }
    }
    if (fixed > x.cols()) throw MissingCovariate("new data lacks fixed covariates");
    const Eigen::MatrixXd design = build_design(x, model.features, intercept, fixed, transforms);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(x.rows());
    if (design.cols() == model.coefs.size()) eta = design * model.coefs;
    return inverse_link(eta, link);
}

PredictionSet predict_bma(const MergedResult& merged, const Eigen::MatrixXd& x, const TransformRegistry& transforms,
                          Family link, std::span<const double> levels) {
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (!(levels[i] > levels[i - 1])) throw std::invalid_argument("quantile levels must be strictly increasing");
    }
    PredictionSet out;
    out.levels.assign(levels.begin(), levels.end());
    const Eigen::Index n = x.rows();
    out.mean = Eigen::VectorXd::Zero(n);
    out.quantiles = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(levels.size()));

    std::vector<Eigen::VectorXd> preds;
    std::vector<double> weights;
    for (const auto& m : merged.models) {
        if (m.prob <= 0.0) continue;
        preds.push_back(predict_model(m, x, transforms, merged.intercept, merged.fixed, link));
        weights.push_back(m.prob);
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (std::size_t k = 0; k < preds.size(); ++k) out.mean += (weights[k] / total) * preds[k];
    std::vector<double> column(preds.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < preds.size(); ++k) column[k] = preds[k](i);
        for (std::size_t l = 0; l < levels.size(); ++l) {
            out.quantiles(i, static_cast<Eigen::Index>(l)) = weighted_quantile(column, weights, levels[l]);
        }
    }
    return out;
}

DiagStatistic diag_statistic_from_string(const std::string& s) {
    if (s == "median") return DiagStatistic::Median;
    if (s == "mean") return DiagStatistic::Mean;
    if (s == "min") return DiagStatistic::Min;
    if (s == "max") return DiagStatistic::Max;
    if (s == "var") return DiagStatistic::Var;
    throw ConfigError("unknown statistic '" + s + "'");
}

const char* to_string(DiagStatistic s) {
    switch (s) {
        case DiagStatistic::Median: return "median";
        case DiagStatistic::Mean: return "mean";
        case DiagStatistic::Min: return "min";
        case DiagStatistic::Max: return "max";
        case DiagStatistic::Var: return "var";
    }
    return "?";
}

namespace {

double apply_statistic(std::vector<double> v, DiagStatistic stat) {
    const double n = static_cast<double>(v.size());
    switch (stat) {
        case DiagStatistic::Median: {
            std::sort(v.begin(), v.end());
            const std::size_t h = v.size() / 2;
            return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
        }
        case DiagStatistic::Mean: return std::accumulate(v.begin(), v.end(), 0.0) / n;
        case DiagStatistic::Min: return *std::min_element(v.begin(), v.end());
        case DiagStatistic::Max: return *std::max_element(v.begin(), v.end());
        case DiagStatistic::Var: {
            if (v.size() < 2) return 0.0;
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            return ss / (n - 1.0);
        }
    }
    return 0.0;
}

}  // namespace

std::vector<DiagnosticPoint> diagnostics_series(const std::vector<std::vector<double>>& best_crit_series,
                                                DiagStatistic stat, int window) {
    std::size_t generations = 0;
    for (const auto& s : best_crit_series) generations = std::max(generations, s.size());
    std::vector<DiagnosticPoint> out;
    std::vector<double> values;
    for (std::size_t t = 0; t < generations; ++t) {
        std::vector<double> pooled;
        for (const auto& s : best_crit_series) {
            if (t < s.size()) pooled.push_back(s[t]);
        }
        DiagnosticPoint pt;
        pt.generation = static_cast<int>(t) + 1;
        pt.value = apply_statistic(pooled, stat);
        values.push_back(pt.value);
        const std::size_t w = static_cast<std::size_t>(std::max(window, 1));
        const std::size_t start = values.size() > w ? values.size() - w : 0;
        const std::vector<double> recent(values.begin() + static_cast<std::ptrdiff_t>(start), values.end());
        const double sd = std::sqrt(apply_statistic(recent, DiagStatistic::Var));
        pt.lower = pt.value - 2.0 * sd;
        pt.upper = pt.value + 2.0 * sd;
        out.push_back(pt);
    }
    return out;
}

}  // namespace bgnlm
