#include "bgnlm/glm.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bgnlm/errors.h"

namespace bgnlm {

const char* to_string(Family f) {
    switch (f) {
        case Family::Gaussian: return "gaussian";
        case Family::Binomial: return "binomial";
        case Family::Poisson: return "poisson";
        case Family::Gamma: return "gamma";
        case Family::Custom: return "custom";
    }
    return "?";
}

Family family_from_string(const std::string& s) {
    if (s == "gaussian") return Family::Gaussian;
    if (s == "binomial") return Family::Binomial;
    if (s == "poisson") return Family::Poisson;
    if (s == "gamma") return Family::Gamma;
    if (s == "custom") return Family::Custom;
    throw ConfigError("unknown family '" + s + "'");
}

Eigen::VectorXd rank_revealing_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int* rank) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    const Eigen::Index r = qr.rank();
    if (rank) *rank = static_cast<int>(r);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    if (r == 0) return beta;
    // Basic solution: solve with the leading r pivoted columns, the rest fixed at zero.
    const Eigen::VectorXd qty = qr.householderQ().transpose() * y;
    const Eigen::VectorXd z = qr.matrixQR().topLeftCorner(r, r).triangularView<Eigen::Upper>().solve(qty.head(r));
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = 0; i < r; ++i) beta(perm(i)) = z(i);
    return beta;
}

GlmFit fit_gaussian_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
    const Eigen::Index n = y.size();
    if (n < 1) throw std::invalid_argument("empty response");
    const double tss = (y.array() - y.mean()).square().sum();
    if (!(tss > 0.0)) throw ZeroVarianceResponse("response has zero variance");

    GlmFit fit;
    if (x.cols() == 0) {
        fit.coefs.resize(0);
        fit.rss = y.squaredNorm();
    } else {
        fit.coefs = rank_revealing_solve(x, y, &fit.rank);
        fit.rss = (y - x * fit.coefs).squaredNorm();
    }
    fit.r2 = std::clamp(1.0 - fit.rss / tss, 0.0, 1.0);
    fit.deviance = fit.rss;
    const double nd = static_cast<double>(n);
    const double sigma2 = std::max(fit.rss / nd, 1e-300);
    fit.loglik = -0.5 * nd * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0);
    return fit;
}

void validate_response(const Eigen::VectorXd& y, Family family) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double v = y(i);
        if (!std::isfinite(v)) throw InvalidResponse("response contains non-finite values");
        switch (family) {
            case Family::Binomial:
                if (v != 0.0 && v != 1.0) throw InvalidResponse("binomial response must be 0/1");
                break;
            case Family::Poisson:
                if (v < 0.0 || v != std::floor(v)) throw InvalidResponse("poisson response must be nonnegative integers");
                break;
            case Family::Gamma:
                if (!(v > 0.0)) throw InvalidResponse("gamma response must be positive");
                break;
            default:
                break;
        }
    }
}

namespace {

constexpr double kEtaCap = 30.0;

double logistic(double eta) {
    eta = std::clamp(eta, -kEtaCap, kEtaCap);
    return 1.0 / (1.0 + std::exp(-eta));
}

}  // namespace

Eigen::VectorXd inverse_link(const Eigen::VectorXd& eta, Family family) {
    switch (family) {
        case Family::Binomial: return eta.unaryExpr([](double e) { return logistic(e); });
        case Family::Poisson: return eta.unaryExpr([](double e) { return std::exp(std::min(e, 700.0)); });
        case Family::Gamma: return eta.unaryExpr([](double e) { return 1.0 / std::max(e, 1e-12); });
        default: return eta;
    }
}

double binomial_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    // log(1 + e^x) computed stably; y log mu + (1-y) log(1-mu) = y*eta - log(1+e^eta)
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double e = eta(i);
        const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y(i) * e - softplus;
    }
    return ll;
}

namespace {

double family_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta, const Eigen::VectorXd& mu, Family family,
                     double deviance) {
    const Eigen::Index n = y.size();
    double ll = 0.0;
    switch (family) {
        case Family::Binomial:
            return binomial_loglik(y, eta);
        case Family::Poisson:
            for (Eigen::Index i = 0; i < n; ++i) {
                ll += (y(i) > 0 ? y(i) * std::log(mu(i)) : 0.0) - mu(i) - std::lgamma(y(i) + 1.0);
            }
            return ll;
        case Family::Gamma: {
            // Dispersion estimated as deviance / n, shape = 1 / dispersion.
            const double disp = std::max(deviance / static_cast<double>(n), 1e-300);
            const double shape = 1.0 / disp;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double scale = mu(i) * disp;
                ll += (shape - 1.0) * std::log(y(i)) - y(i) / scale - std::lgamma(shape) - shape * std::log(scale);
            }
            return ll;
        }
        default:
            return ll;
    }
}

double family_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta, const Eigen::VectorXd& mu, Family family) {
    const Eigen::Index n = y.size();
    double dev = 0.0;
    switch (family) {
        case Family::Binomial:
            return -2.0 * binomial_loglik(y, eta);
        case Family::Poisson:
            for (Eigen::Index i = 0; i < n; ++i) {
                dev += 2.0 * ((y(i) > 0 ? y(i) * std::log(y(i) / mu(i)) : 0.0) - (y(i) - mu(i)));
            }
            return dev;
        case Family::Gamma:
            for (Eigen::Index i = 0; i < n; ++i) dev += 2.0 * (-std::log(y(i) / mu(i)) + (y(i) - mu(i)) / mu(i));
            return dev;
        default:
            return dev;
    }
}

}  // namespace

GlmFit fit_glm_irls(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, Family family, int max_iter, double tol) {
    if (family == Family::Gaussian) return fit_gaussian_ols(y, x);
    if (family == Family::Custom) throw std::invalid_argument("custom family has no built-in fit");
    validate_response(y, family);

    const Eigen::Index n = y.size();
    const Eigen::Index k = x.cols();
    GlmFit fit;
    fit.coefs = Eigen::VectorXd::Zero(k);

    // Starting values on the mean scale, as in the usual glm initialization.
    Eigen::VectorXd mu(n), eta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (family) {
            case Family::Binomial: mu(i) = (y(i) + 0.5) / 2.0; eta(i) = std::log(mu(i) / (1.0 - mu(i))); break;
            case Family::Poisson: mu(i) = y(i) + 0.1; eta(i) = std::log(mu(i)); break;
            case Family::Gamma: mu(i) = y(i); eta(i) = 1.0 / mu(i); break;
            default: break;
        }
    }
    if (k == 0) {
        eta.setZero();
        if (family == Family::Gamma) eta.setConstant(1.0);
        mu = inverse_link(eta, family);
        fit.deviance = family_deviance(y, eta, mu, family);
        fit.loglik = family_loglik(y, eta, mu, family, fit.deviance);
        return fit;
    }

    double dev = family_deviance(y, eta, mu, family);
    fit.converged = false;
    Eigen::VectorXd w(n), z(n);
    for (int iter = 0; iter < max_iter; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double dmu;  // d mu / d eta
            double var;
            switch (family) {
                case Family::Binomial: var = mu(i) * (1.0 - mu(i)); dmu = var; break;
                case Family::Poisson: var = mu(i); dmu = mu(i); break;
                default: var = mu(i) * mu(i); dmu = -mu(i) * mu(i); break;  // gamma, inverse link
            }
            var = std::max(var, 1e-12);
            if (std::abs(dmu) < 1e-12) dmu = dmu < 0 ? -1e-12 : 1e-12;
            z(i) = eta(i) + (y(i) - mu(i)) / dmu;
            w(i) = dmu * dmu / var;
        }
        const Eigen::VectorXd sw = w.cwiseSqrt();
        int rank = 0;
        Eigen::VectorXd beta = rank_revealing_solve(sw.asDiagonal() * x, sw.cwiseProduct(z), &rank);
        Eigen::VectorXd eta_new = x * beta;
        // Step halving keeps the gamma mean positive and the deviance from increasing.
        double dev_new = 0.0;
        for (int half = 0; half < 30; ++half) {
            const bool valid = family != Family::Gamma || (eta_new.array() > 0.0).all();
            if (valid) {
                dev_new = family_deviance(y, eta_new, inverse_link(eta_new, family), family);
                if (std::isfinite(dev_new) && (iter == 0 || dev_new <= dev * (1.0 + 1e-12) + 1e-12)) break;
            }
            beta = 0.5 * (beta + fit.coefs);
            eta_new = x * beta;
        }
        if (family == Family::Gamma && !(eta_new.array() > 0.0).all()) break;
        fit.coefs = beta;
        fit.rank = rank;
        eta = eta_new;
        mu = inverse_link(eta, family);
        const double change = std::abs(dev_new - dev) / (std::abs(dev_new) + 0.1);
        dev = dev_new;
        if (change < tol && iter > 0) {
            fit.converged = true;
            break;
        }
    }
    fit.deviance = dev;
    fit.loglik = family_loglik(y, eta, mu, family, dev);
    if (family == Family::Binomial) {
        // Separation: every row of some class sits beyond the logistic cap.
        bool all0 = true, all1 = true, any0 = false, any1 = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (y(i) == 0.0) { any0 = true; all0 = all0 && eta(i) < -kEtaCap; }
            else { any1 = true; all1 = all1 && eta(i) > kEtaCap; }
        }
        // IRLS stops once the deviance stalls near zero, often before the cap is reached, so
        // a vanishing deviance with both classes present also counts as separation.
        fit.separation = (any0 && all0) || (any1 && all1) || (any0 && any1 && dev < 1e-6);
    }
    return fit;
}

}  // namespace bgnlm
