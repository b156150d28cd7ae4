#pragma once

#include <string>

#include <Eigen/Dense>

namespace bgnlm {

enum class Family { Gaussian, Binomial, Poisson, Gamma, Custom };

const char* to_string(Family f);
Family family_from_string(const std::string& s);

/// Maximum-likelihood fit of a (generalized) linear model.
struct GlmFit {
    Eigen::VectorXd coefs;   // aligned with design columns; dropped columns hold 0
    int rank = 0;
    double loglik = 0.0;     // log-likelihood at the mode
    double deviance = 0.0;
    double r2 = 0.0;         // gaussian only
    double rss = 0.0;
    bool converged = true;
    bool separation = false; // binomial: some class perfectly separated by the linear predictor
};

/// Least squares with column-pivoted QR. Columns found linearly dependent get coefficient 0.
Eigen::VectorXd rank_revealing_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int* rank = nullptr);

/// Ordinary least squares; R^2 is relative to the centered total sum of squares.
/// Throws ZeroVarianceResponse when y is constant.
GlmFit fit_gaussian_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x);

/// Canonical-link IRLS (logit, log, inverse). Gaussian is delegated to fit_gaussian_ols.
/// Throws InvalidResponse when y lies outside the family's support.
GlmFit fit_glm_irls(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, Family family, int max_iter = 100,
                    double tol = 1e-8);

/// Checks that y is valid for the family; throws InvalidResponse otherwise.
void validate_response(const Eigen::VectorXd& y, Family family);

/// Mean function of the canonical link, applied elementwise.
Eigen::VectorXd inverse_link(const Eigen::VectorXd& eta, Family family);

/// Binomial log-likelihood sum(y log mu + (1-y) log(1-mu)) evaluated from a linear predictor.
double binomial_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta);

}  // namespace bgnlm
