#include "bgnlm/marginal.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <unordered_map>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bgnlm/errors.h"

namespace bgnlm {

const char* to_string(ComplexityMeasure m) {
    switch (m) {
        case ComplexityMeasure::Oc: return "oc";
        case ComplexityMeasure::Width: return "width";
        case ComplexityMeasure::Depth: return "depth";
    }
    return "?";
}

ComplexityMeasure complexity_measure_from_string(const std::string& s) {
    if (s == "oc") return ComplexityMeasure::Oc;
    if (s == "width") return ComplexityMeasure::Width;
    if (s == "depth") return ComplexityMeasure::Depth;
    throw ConfigError("unknown complexity measure '" + s + "'");
}

// ---------------------------------------------------------------------------
// DesignContext

DesignContext::DesignContext(Eigen::VectorXd y, Eigen::MatrixXd x, bool intercept, int fixed)
    : y_(std::move(y)), x_(std::move(x)), intercept_(intercept), fixed_(fixed) {
    if (x_.rows() != y_.size()) throw std::invalid_argument("design rows must match response length");
    if (forced() > x_.cols()) throw std::invalid_argument("design has fewer columns than forced columns");
    ybar_ = y_.mean();
    tss_ = (y_.array() - ybar_).square().sum();
    if (intercept_) {
        xbar_ = x_.colwise().mean().transpose();
        const Eigen::MatrixXd xc = x_.rowwise() - xbar_.transpose();
        gram_ = xc.transpose() * xc;
        xty_ = xc.transpose() * (y_.array() - ybar_).matrix();
    } else {
        xbar_ = Eigen::VectorXd::Zero(x_.cols());
        gram_ = x_.transpose() * x_;
        xty_ = x_.transpose() * y_;
    }
}

std::vector<Eigen::Index> DesignContext::included(const std::vector<bool>& model) {
    std::vector<Eigen::Index> cols;
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model[i]) cols.push_back(static_cast<Eigen::Index>(i));
    }
    return cols;
}

Eigen::MatrixXd DesignContext::submatrix(std::span<const Eigen::Index> columns) const {
    Eigen::MatrixXd out(x_.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x_.col(columns[j]);
    return out;
}

DesignContext::LinearFit DesignContext::linear_fit(std::span<const Eigen::Index> columns) const {
    constexpr double kPivotTol = 1e-10;
    LinearFit fit;
    fit.coefs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(columns.size()));

    // Columns other than the intercept enter the Cholesky factor one at a time.
    std::vector<std::size_t> slots;       // position in `columns`
    std::vector<Eigen::Index> kept;       // design column index
    std::size_t intercept_slot = columns.size();
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (intercept_ && columns[j] == 0) {
            intercept_slot = j;
            continue;
        }
        slots.push_back(j);
    }
    const bool has_intercept = intercept_slot < columns.size();

    const Eigen::Index m = static_cast<Eigen::Index>(slots.size());
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
    Eigen::Index r = 0;
    std::vector<std::size_t> kept_slots;
    for (Eigen::Index s = 0; s < m; ++s) {
        const Eigen::Index c = columns[slots[static_cast<std::size_t>(s)]];
        const double diag = gram_(c, c);
        if (!(diag > 0.0)) continue;
        Eigen::VectorXd row(r);
        for (Eigen::Index i = 0; i < r; ++i) {
            double v = gram_(c, kept[static_cast<std::size_t>(i)]);
            for (Eigen::Index t = 0; t < i; ++t) v -= l(i, t) * row(t);
            row(i) = v / l(i, i);
        }
        const double pivot = diag - row.squaredNorm();
        if (!(pivot > kPivotTol * diag)) continue;
        l.row(r).head(r) = row.transpose();
        l(r, r) = std::sqrt(pivot);
        kept.push_back(c);
        kept_slots.push_back(slots[static_cast<std::size_t>(s)]);
        ++r;
    }

    Eigen::VectorXd beta(r);
    if (r > 0) {
        Eigen::VectorXd rhs(r);
        for (Eigen::Index i = 0; i < r; ++i) rhs(i) = xty_(kept[static_cast<std::size_t>(i)]);
        const auto lv = l.topLeftCorner(r, r).triangularView<Eigen::Lower>();
        beta = lv.transpose().solve(lv.solve(rhs));
    }

    Eigen::VectorXd fitted = Eigen::VectorXd::Zero(n());
    for (Eigen::Index i = 0; i < r; ++i) {
        fit.coefs(static_cast<Eigen::Index>(kept_slots[static_cast<std::size_t>(i)])) = beta(i);
        fitted += beta(i) * x_.col(kept[static_cast<std::size_t>(i)]);
    }
    if (has_intercept) {
        double b0 = ybar_;
        for (Eigen::Index i = 0; i < r; ++i) b0 -= beta(i) * xbar_(kept[static_cast<std::size_t>(i)]);
        fit.coefs(static_cast<Eigen::Index>(intercept_slot)) = b0;
        fitted.array() += b0;
    }
    fit.rank = static_cast<int>(r) + (has_intercept ? 1 : 0);
    fit.rss = (y_ - fitted).squaredNorm();
    fit.r2 = tss_ > 0.0 ? std::clamp(1.0 - fit.rss / tss_, 0.0, 1.0) : 0.0;
    return fit;
}

// ---------------------------------------------------------------------------
// Closed forms

double mloglik_gprior_gaussian(double r2, double n, double k, double g) {
    return 0.5 * (n - k) * std::log1p(g) - 0.5 * (n - 1.0) * std::log1p(g * (1.0 - r2));
}

double default_g(double n, double p) { return std::max(n, p * p); }

double mloglik_bic(double loglik, double n, double p_m) { return loglik - 0.5 * p_m * std::log(n); }

// ---------------------------------------------------------------------------
// tCCH family

namespace {

const char* const kReservedRows[] = {"EB-local", "EB-global", "JZS", "ZS-null", "ZS-full",
                                     "hyper-g", "hyper-g-laplace", "AIC"};
const char* const kTcchRows[] = {"CH", "uniform", "Jeffreys", "beta.prime", "benchmark", "TG",
                                 "ZS-adapted", "robust", "hyper-g-n", "intrinsic", "tCCH"};

}  // namespace

bool is_tcch_row(const std::string& name) {
    return std::any_of(std::begin(kTcchRows), std::end(kTcchRows), [&](const char* r) { return name == r; });
}

TcchParams resolve_tcch_row(const std::string& name, double n, double p_m, double p_original, const BetaPrior& user) {
    if (name == "CH") return {user.a, user.b, 0.0, user.s, 1.0, 1.0};
    if (name == "uniform") return {2.0, 2.0, 0.0, 0.0, 1.0, 1.0};
    if (name == "Jeffreys") return {0.0, 2.0, 0.0, 0.0, 1.0, 1.0};
    if (name == "beta.prime") return {0.5, n - p_m - 1.5, 0.0, 0.0, 1.0, 1.0};
    if (name == "benchmark") return {0.02, 0.02 * std::max(n, p_original * p_original), 0.0, 0.0, 1.0, 1.0};
    if (name == "TG") return {2.0 * user.a, 2.0, 0.0, 2.0 * user.s, 1.0, 1.0};
    if (name == "ZS-adapted") return {1.0, 2.0, 0.0, n + 3.0, 1.0, 1.0};
    if (name == "robust") return {1.0, 2.0, 1.5, 0.0, (n + 1.0) / (p_m + 1.0), 1.0};
    if (name == "hyper-g-n") return {1.0, 2.0, 1.5, 0.0, 1.0, 1.0 / n};
    if (name == "intrinsic") return {1.0, 1.0, 1.0, 0.0, (n + p_m + 1.0) / (p_m + 1.0), (n + p_m + 1.0) / n};
    if (name == "tCCH") return {user.a, user.b, user.rho, user.s, user.v, user.k};
    for (const char* r : kReservedRows) {
        if (name == r) throw UnsupportedPrior("prior '" + name + "' is reserved but not implemented");
    }
    throw UnsupportedPrior("unknown coefficient prior '" + name + "'");
}

namespace {

/// Unnormalized log tCCH density in terms of v u, i.e. off by the constant (a/2-1) log v.
/// log(v u) and log(1 - v u) are passed in so both ends of the support keep full precision
/// even when a or b is huge.
double tcch_log_density(const TcchParams& p, double u, double log_vu, double log1m_vu) {
    double out = (p.a / 2.0 - 1.0) * log_vu + (p.b / 2.0 - 1.0) * log1m_vu - p.s * u / 2.0;
    if (p.rho != 0.0) out -= p.rho * std::log(p.k + (1.0 - p.k) * p.v * u);
    return out;
}

struct LogIntegral {
    double log_value;
    double rel_error;
};

/// log of the integral over (0, 1/v) of exp(f(u, log u, log(v u), log(1 - v u))). The support is
/// split at its midpoint; the lower half is integrated in t = log u, the upper half in
/// r = log(1/v - u), both extending to -infinity.
template <class F>
LogIntegral log_integral(F&& f, double v, double rel_tol) {
    const double c = 1.0 / v;
    const double top = std::log(c / 2.0);
    const double log_v = std::log(v);
    auto lower = [&](double t) {
        const double u = std::exp(t);
        return f(u, t, t + log_v, std::log1p(-v * u)) + t;
    };
    auto upper = [&](double r) {
        const double e = std::exp(r);
        const double u = c - e;
        const double log_vu = std::log1p(-e / c);
        return f(u, log_vu - log_v, log_vu, log_v + r) + r;
    };

    // Locate the peak of each half on a coarse grid so the integrands can be rescaled.
    auto peak = [&](auto&& g, double& arg) {
        double best = -std::numeric_limits<double>::infinity();
        arg = top;
        for (double t = top; t > -745.0; t -= 0.5) {
            const double val = g(t);
            if (val > best) { best = val; arg = t; }
        }
        return best;
    };
    double t_lo, t_hi;
    const double m_lo = peak(lower, t_lo);
    const double m_hi = peak(upper, t_hi);
    const double m = std::max(m_lo, m_hi);
    if (!std::isfinite(m)) throw QuadratureNotConverged("integrand has no finite mass");

    using boost::math::quadrature::gauss_kronrod;
    double total = 0.0, total_err = 0.0;
    auto integrate_half = [&](auto&& g, double centre) {
        std::vector<double> breaks{-std::numeric_limits<double>::infinity()};
        for (double off : {-60.0, -20.0, -6.0, -2.0, 0.0, 2.0, 6.0, 20.0}) {
            const double b = centre + off;
            if (b < top && b > -745.0) breaks.push_back(b);
        }
        breaks.push_back(top);
        std::sort(breaks.begin() + 1, breaks.end() - 1);
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
            if (!(breaks[i + 1] > breaks[i])) continue;
            double err = 0.0;
            const double val = gauss_kronrod<double, 31>::integrate(
                [&](double t) {
                    const double lv = g(t) - m;
                    return std::isfinite(lv) ? std::exp(lv) : 0.0;
                },
                breaks[i], breaks[i + 1], 15, rel_tol * 1e-2, &err);
            total += val;
            total_err += err;
        }
    };
    integrate_half(lower, t_lo);
    integrate_half(upper, t_hi);
    if (!(total > 0.0) || !std::isfinite(total)) throw QuadratureNotConverged("quadrature produced no mass");
    return {m + std::log(total), total_err / total};
}

}  // namespace

double tcch_log_integral(const std::function<double(double, double)>& log_bf, const TcchParams& prior,
                         double rel_tol) {
    if (!(prior.v > 0.0)) throw UnsupportedPrior("tCCH requires v > 0");
    const auto num = log_integral(
        [&](double u, double log_u, double log_vu, double log1m_vu) {
            return log_bf(u, log_u) + tcch_log_density(prior, u, log_vu, log1m_vu);
        },
        prior.v, rel_tol);
    // Improper priors are used unnormalized, so the (a/2-1) log v dropped from the density
    // has to be restored for them.
    double log_z = -(prior.a / 2.0 - 1.0) * std::log(prior.v);
    double z_err = 0.0;
    if (prior.a > 0.0 && prior.b > 0.0) {
        const auto z = log_integral(
            [&](double u, double, double log_vu, double log1m_vu) { return tcch_log_density(prior, u, log_vu, log1m_vu); },
            prior.v, rel_tol);
        log_z = z.log_value;
        z_err = z.rel_error;
    }
    if (num.rel_error > 1e-6 || z_err > 1e-6) {
        throw QuadratureNotConverged("tCCH quadrature error estimate above tolerance");
    }
    return num.log_value - log_z;
}

double mloglik_tcch_gaussian(double r2, double n, double p_m, const TcchParams& prior) {
    if (p_m <= 0.0) return 0.0;
    auto log_bf = [&](double u, double log_u) {
        return 0.5 * p_m * log_u - 0.5 * (n - 1.0) * std::log1p(-(1.0 - u) * r2);
    };
    return tcch_log_integral(log_bf, prior);
}

// ---------------------------------------------------------------------------
// Model priors

namespace {

int measure_of(const Complexity& c, ComplexityMeasure m) {
    switch (m) {
        case ComplexityMeasure::Oc: return c.oc;
        case ComplexityMeasure::Width: return c.width;
        case ComplexityMeasure::Depth: return c.depth;
    }
    return c.oc;
}

}  // namespace

double log_model_prior_default(std::span<const Complexity> complexities, double r, ComplexityMeasure measure) {
    double total = 0.0;
    for (const auto& c : complexities) total += measure_of(c, measure);
    return total == 0.0 ? 0.0 : std::log(r) * total;
}

double log_model_prior_logic(std::span<const int> widths, double p) {
    double out = 0.0;
    for (int w : widths) out += std::lgamma(w + 1.0) - w * std::log(4.0 * p) + std::log(4.0);
    return out;
}

double log_model_prior(std::span<const Complexity> complexities, const EvaluatorParams& params, double n) {
    if (params.model_prior.type == "logic") {
        std::vector<int> widths;
        widths.reserve(complexities.size());
        for (const auto& c : complexities) widths.push_back(c.width);
        const double p = params.model_prior.p > 0 ? params.model_prior.p : std::max(1, params.p_original);
        return log_model_prior_logic(widths, p);
    }
    const double r = params.model_prior.r > 0.0 ? params.model_prior.r : 1.0 / n;
    return log_model_prior_default(complexities, r, params.model_prior.measure);
}

// ---------------------------------------------------------------------------
// Evaluators

namespace {

struct EvaluatorRegistry {
    std::mutex mutex;
    std::unordered_map<std::string, CustomEvaluator> entries;

    EvaluatorRegistry() { entries.emplace("logic-regression", &logic_regression_evaluator); }
};

EvaluatorRegistry& evaluator_registry() {
    static EvaluatorRegistry registry;
    return registry;
}

CustomEvaluator find_evaluator(const std::string& name) {
    auto& reg = evaluator_registry();
    std::lock_guard lock(reg.mutex);
    auto it = reg.entries.find(name);
    if (it == reg.entries.end()) throw ConfigError("no evaluator registered as '" + name + "'");
    return it->second;
}

double gaussian_loglik(double rss, double n) {
    return -0.5 * n * (std::log(2.0 * std::numbers::pi * std::max(rss / n, 1e-300)) + 1.0);
}

/// Wald-type statistic b' S b for the non-intercept coefficients, where S is the Schur
/// complement of the intercept in the Fisher information at the mode.
double wald_statistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& coefs, Family family, bool has_intercept,
                      double dispersion) {
    const Eigen::VectorXd eta = x * coefs;
    const Eigen::VectorXd mu = inverse_link(eta, family);
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        switch (family) {
            case Family::Binomial: w(i) = mu(i) * (1.0 - mu(i)); break;
            case Family::Poisson: w(i) = mu(i); break;
            case Family::Gamma: w(i) = mu(i) * mu(i); break;
            default: w(i) = 1.0; break;
        }
    }
    Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x / dispersion;
    if (!has_intercept) return coefs.dot(info * coefs);
    const Eigen::Index k = x.cols();
    if (k == 1) return 0.0;
    const Eigen::VectorXd bs = coefs.tail(k - 1);
    const double i00 = info(0, 0);
    const Eigen::VectorXd is0 = info.col(0).tail(k - 1);
    const Eigen::MatrixXd schur = info.bottomRightCorner(k - 1, k - 1) - is0 * is0.transpose() / i00;
    return bs.dot(schur * bs);
}

FitResult floored(FitResult r) {
    if (!std::isfinite(r.crit)) r.crit = kCritFloor;
    for (Eigen::Index i = 0; i < r.coefs.size(); ++i) {
        if (!std::isfinite(r.coefs(i))) r.coefs(i) = 0.0;
    }
    return r;
}

FitResult evaluate_gaussian(const DesignContext& ctx, const std::vector<Eigen::Index>& cols, double prior,
                            const EvaluatorParams& params) {
    const auto fit = ctx.linear_fit(cols);
    const double n = static_cast<double>(ctx.n());
    const double k = fit.rank + (ctx.intercept() ? 0 : 1);
    const double p_m = k - 1.0;
    const std::string& type = params.beta_prior.type;
    double mloglik;
    if (type == "g-prior") {
        const double g = params.beta_prior.g > 0.0 ? params.beta_prior.g : default_g(n, std::max(1, params.p_original));
        mloglik = mloglik_gprior_gaussian(fit.r2, n, k, g);
    } else if (type == "Jeffreys-BIC") {
        mloglik = mloglik_bic(gaussian_loglik(fit.rss, n), n, p_m);
    } else {
        const auto row = resolve_tcch_row(type, n, p_m, std::max(1, params.p_original), params.beta_prior);
        mloglik = mloglik_tcch_gaussian(fit.r2, n, p_m, row);
    }
    return {mloglik + prior, fit.coefs};
}

FitResult evaluate_glm(const DesignContext& ctx, const std::vector<Eigen::Index>& cols, double prior,
                       const EvaluatorParams& params) {
    const Eigen::MatrixXd x = ctx.submatrix(cols);
    const auto fit = fit_glm_irls(ctx.y(), x, params.family);
    const double n = static_cast<double>(ctx.n());
    const bool has_intercept = ctx.intercept() && !cols.empty() && cols.front() == 0;
    const double p_m = fit.rank - (has_intercept ? 1 : 0);
    const std::string& type = params.beta_prior.type;
    if (type == "Jeffreys-BIC") return {mloglik_bic(fit.loglik, n, p_m) + prior, fit.coefs};

    // Laplace approximation at fixed g: loglik - p_m/2 log(1+g) - Q/(2(1+g)), i.e. in
    // u = 1/(1+g) a factor u^{p_m/2} exp(-Q u / 2) on top of the maximized likelihood.
    const double dispersion = params.family == Family::Gamma ? std::max(fit.deviance / n, 1e-300) : 1.0;
    const double q = wald_statistic(x, fit.coefs, params.family, has_intercept, dispersion);
    double mloglik;
    if (type == "g-prior") {
        const double g = params.beta_prior.g > 0.0 ? params.beta_prior.g : default_g(n, std::max(1, params.p_original));
        mloglik = fit.loglik - 0.5 * p_m * std::log1p(g) - 0.5 * q / (1.0 + g);
    } else {
        const auto row = resolve_tcch_row(type, n, p_m, std::max(1, params.p_original), params.beta_prior);
        mloglik = fit.loglik;
        if (p_m > 0) {
            mloglik += tcch_log_integral([&](double u, double log_u) { return 0.5 * p_m * log_u - 0.5 * q * u; }, row);
        }
    }
    return {mloglik + prior, fit.coefs};
}

}  // namespace

void register_evaluator(const std::string& name, CustomEvaluator fn) {
    auto& reg = evaluator_registry();
    std::lock_guard lock(reg.mutex);
    if (!reg.entries.emplace(name, std::move(fn)).second) throw DuplicateName("evaluator '" + name + "' already registered");
}

bool has_evaluator(const std::string& name) {
    auto& reg = evaluator_registry();
    std::lock_guard lock(reg.mutex);
    return reg.entries.count(name) != 0;
}

std::vector<std::string> evaluator_names() {
    auto& reg = evaluator_registry();
    std::lock_guard lock(reg.mutex);
    std::vector<std::string> out;
    for (const auto& [k, v] : reg.entries) out.push_back(k);
    std::sort(out.begin(), out.end());
    return out;
}

FitResult logic_regression_evaluator(const DesignContext& ctx, const std::vector<bool>& model,
                                     std::span<const Complexity> complexities, const EvaluatorParams& params) {
    const auto cols = DesignContext::included(model);
    const auto fit = ctx.linear_fit(cols);
    const double n = static_cast<double>(ctx.n());
    // AIC of the Gaussian fit counts the dispersion as an extra parameter.
    const double aic = -2.0 * gaussian_loglik(fit.rss, n) + 2.0 * (fit.rank + 1);
    const double mloglik = -(aic + (std::log(n) - 2.0) * fit.rank) / 2.0;

    std::vector<int> widths;
    widths.reserve(complexities.size());
    for (const auto& c : complexities) widths.push_back(c.width);
    const double p = params.model_prior.p > 0 ? params.model_prior.p : std::max(1, params.p_original);
    return {mloglik + log_model_prior_logic(widths, p), fit.coefs};
}

FitResult evaluate_model(const DesignContext& ctx, const std::vector<bool>& model,
                         std::span<const Complexity> complexities, const EvaluatorParams& params) {
    const auto cols = DesignContext::included(model);
    try {
        if (params.family == Family::Custom) {
            return floored(find_evaluator(params.custom)(ctx, model, complexities, params));
        }
        const double prior = log_model_prior(complexities, params, static_cast<double>(ctx.n()));
        if (params.family == Family::Gaussian) return floored(evaluate_gaussian(ctx, cols, prior, params));
        return floored(evaluate_glm(ctx, cols, prior, params));
    } catch (const ConfigError&) {
        throw;
    } catch (const UnsupportedPrior&) {
        throw;
    } catch (const std::exception&) {
        return {kCritFloor, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols.size()))};
    }
}

}  // namespace bgnlm
